#pragma once

#include "hypnos/tensor.hpp"

namespace hypnos {

// Cosine cumulative-signal schedule over timesteps 1..T.
class NoiseSchedule {
public:
    explicit NoiseSchedule(int horizon = 1000, double alpha_floor = 1e-6);

    int horizon() const { return horizon_; }
    double alpha_bar(int t) const;  // t in [1, T]
    double alpha_floor() const { return floor_; }

    // z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps
    Tensor add_noise(const Tensor& z0, int t, const Tensor& eps) const;
    // z0 = (z_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)
    Tensor predict_z0(const Tensor& z_t, int t, const Tensor& eps_hat) const;

    void check_t(int t) const;

private:
    int horizon_;
    double floor_;
    std::vector<double> alpha_bar_;  // index 0 unused
};

}  // namespace hypnos
