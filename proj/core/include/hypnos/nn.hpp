#pragma once

#include <map>
#include <string>

#include "hypnos/autodiff.hpp"
#include "hypnos/rng.hpp"
#include "hypnos/tensor.hpp"

namespace hypnos::nn {

// Named parameter tensors. std::map keeps iteration order stable, which the
// checkpoint byte layout and the deterministic optimizer sweep rely on.
class ParamStore {
public:
    Tensor& add(const std::string& name, std::vector<int> shape);
    Tensor& add_randn(const std::string& name, std::vector<int> shape, double stddev, Rng& rng);
    Tensor& operator[](const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    std::map<std::string, Tensor>& all() { return params_; }
    const std::map<std::string, Tensor>& all() const { return params_; }
    std::int64_t total_count() const;
    std::uint64_t byte_hash() const;

private:
    std::map<std::string, Tensor> params_;
};

// Per-forward binding of a ParamStore into an autodiff graph. When trainable
// is false the parameters enter the graph as constants, so no gradient is
// accumulated for them; inputs still receive gradients. This is how the
// discriminator stays frozen inside the generator's adversarial term.
class ParamBinder {
public:
    ParamBinder(ParamStore& store, bool trainable) : store_(&store), trainable_(trainable) {}

    ad::Var operator()(const std::string& name);

    const std::map<std::string, ad::Var>& bound() const { return bound_; }
    // Gradient of the bound parameter after backward(); zeros if untouched.
    Tensor grad(const std::string& name) const;

private:
    ParamStore* store_;
    bool trainable_;
    std::map<std::string, ad::Var> bound_;
};

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& store, const ParamBinder& binder);
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

}  // namespace hypnos::nn
