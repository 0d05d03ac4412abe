#include "hypnos/nn.hpp"

#include <cmath>

namespace hypnos::nn {

Tensor& ParamStore::add(const std::string& name, std::vector<int> shape) {
    auto [it, fresh] = params_.emplace(name, Tensor(std::move(shape)));
    if (!fresh) throw std::logic_error("duplicate parameter name: " + name);
    return it->second;
}

Tensor& ParamStore::add_randn(const std::string& name, std::vector<int> shape, double stddev,
                              Rng& rng) {
    Tensor& t = add(name, std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
    return t;
}

Tensor& ParamStore::operator[](const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::int64_t ParamStore::total_count() const {
    std::int64_t n = 0;
    for (const auto& [k, t] : params_) n += t.numel();
    return n;
}

std::uint64_t ParamStore::byte_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [k, t] : params_) {
        h = fnv1a64(k.data(), k.size(), h);
        h = fnv1a64(t.data(), static_cast<size_t>(t.numel()) * sizeof(double), h);
    }
    return h;
}

ad::Var ParamBinder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = trainable_ ? ad::leaf(store_->at(name)) : ad::constant(store_->at(name));
    bound_.emplace(name, v);
    return v;
}

Tensor ParamBinder::grad(const std::string& name) const {
    auto it = bound_.find(name);
    if (it == bound_.end() || it->second->grad.numel() == 0)
        return Tensor::zeros(store_->at(name).shape());
    return it->second->grad;
}

void Adam::step(ParamStore& store, const ParamBinder& binder) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, param] : store.all()) {
        auto it = binder.bound().find(name);
        if (it == binder.bound().end() || it->second->grad.numel() == 0) continue;
        const Tensor& g = it->second->grad;
        auto& m = m_.try_emplace(name, Tensor::zeros(param.shape())).first->second;
        auto& v = v_.try_emplace(name, Tensor::zeros(param.shape())).first->second;
        for (std::int64_t i = 0; i < param.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            param[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace hypnos::nn
