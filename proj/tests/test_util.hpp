#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hypnos/autodiff.hpp"
#include "hypnos/rng.hpp"

namespace hypnos::testutil {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
    return t;
}

// Central-finite-difference gradient check: builds the scalar graph from
// leaf copies of `inputs`, runs backward, and compares each leaf gradient
// against (f(x+h) - f(x-h)) / 2h elementwise.
struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

inline GradCheckResult check_gradients(
    std::vector<Tensor> inputs,
    const std::function<ad::Var(std::vector<ad::Var>&)>& build, double h = 1e-5) {
    std::vector<ad::Var> leaves;
    leaves.reserve(inputs.size());
    for (auto& t : inputs) leaves.push_back(ad::leaf(t));
    ad::Var root = build(leaves);
    ad::backward(root);

    GradCheckResult res;
    for (size_t k = 0; k < inputs.size(); ++k) {
        for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
            auto eval = [&](double delta) {
                std::vector<ad::Var> probe;
                for (size_t m = 0; m < inputs.size(); ++m) {
                    Tensor t = inputs[m];
                    if (m == k) t[i] += delta;
                    probe.push_back(ad::constant(std::move(t)));
                }
                return build(probe)->val.item();
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            const double an = leaves[k]->grad.numel() ? leaves[k]->grad[i] : 0.0;
            const double abs_err = std::abs(fd - an);
            const double rel = abs_err / std::max({std::abs(fd), std::abs(an), 1e-6});
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
            res.max_rel_err = std::max(res.max_rel_err, rel);
        }
    }
    return res;
}

}  // namespace hypnos::testutil
