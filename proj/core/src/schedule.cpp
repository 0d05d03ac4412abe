#include "hypnos/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace hypnos {

NoiseSchedule::NoiseSchedule(int horizon, double alpha_floor)
    : horizon_(horizon), floor_(alpha_floor), alpha_bar_(static_cast<size_t>(horizon) + 1, 1.0) {
    if (horizon < 1) throw std::invalid_argument("schedule horizon must be >= 1");
    const double s = 0.008;
    auto f = [s](double t) {
        const double v = std::cos((t + s) / (1.0 + s) * M_PI / 2.0);
        return v * v;
    };
    const double f0 = f(0.0);
    for (int t = 1; t <= horizon; ++t)
        alpha_bar_[static_cast<size_t>(t)] =
            std::max(floor_, f(static_cast<double>(t) / horizon) / f0);
}

double NoiseSchedule::alpha_bar(int t) const {
    check_t(t);
    return alpha_bar_[static_cast<size_t>(t)];
}

void NoiseSchedule::check_t(int t) const {
    if (t < 1 || t > horizon_)
        throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " +
                                    std::to_string(horizon_) + "]");
}

Tensor NoiseSchedule::add_noise(const Tensor& z0, int t, const Tensor& eps) const {
    check_t(t);
    if (!z0.same_shape(eps)) throw std::invalid_argument("add_noise: shape mismatch");
    const double ab = alpha_bar(t);
    const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    Tensor out = z0;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = sa * z0[i] + sn * eps[i];
    return out;
}

Tensor NoiseSchedule::predict_z0(const Tensor& z_t, int t, const Tensor& eps_hat) const {
    check_t(t);
    if (!z_t.same_shape(eps_hat)) throw std::invalid_argument("predict_z0: shape mismatch");
    const double ab = alpha_bar(t);
    if (ab < floor_) throw NumericError("predict_z0: alpha_bar below configured floor");
    const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    Tensor out = z_t;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = (z_t[i] - sn * eps_hat[i]) / sa;
    return out;
}

}  // namespace hypnos
