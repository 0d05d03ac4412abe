#include "hypnos/losses.hpp"

#include <cmath>

namespace hypnos {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310002;
}

void LossWeights::validate(int total_steps) const {
    if (lambda_r < 0 || lambda_pp < 0 || lambda_p < 0 || lambda_ld < 0)
        throw std::invalid_argument("loss weights must be nonnegative");
    if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
    if (s_p > total_steps) throw std::invalid_argument("s_p exceeds total training steps");
    double sum = 0.0;
    for (const auto& bw : block_weights) sum += bw.weight;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("perceptual block weights must sum to 1");
}

double inverse_gaussian_of_msq(double m, double sigma) {
    if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
    if (!std::isfinite(m)) throw NumericError("inverse-gaussian loss: non-finite residual");
    return sigma * kSqrt2Pi * (std::exp(m / (2.0 * sigma * sigma)) - 1.0);
}

double inverse_gaussian_loss(const Tensor& eps_hat, const Tensor& eps, double sigma) {
    if (!eps_hat.same_shape(eps)) throw std::invalid_argument("inverse_gaussian_loss: shape mismatch");
    double m = 0.0;
    for (std::int64_t i = 0; i < eps_hat.numel(); ++i) {
        const double d = eps_hat[i] - eps[i];
        m += d * d;
    }
    m /= static_cast<double>(eps_hat.numel());
    return inverse_gaussian_of_msq(m, sigma);
}

ad::Var inverse_gaussian_graph(const ad::Var& eps_hat, const ad::Var& eps, double sigma) {
    if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
    auto m = ad::mse(eps_hat, eps);
    auto e = ad::exp_(ad::scale(m, 1.0 / (2.0 * sigma * sigma)));
    return ad::scale(ad::add_scalar(e, -1.0), sigma * kSqrt2Pi);
}

double sigma_objective(double sigma, double a, int simpson_intervals) {
    if (simpson_intervals % 2 != 0) ++simpson_intervals;
    auto f = [sigma](double x) {
        const double d = x * x - inverse_gaussian_of_msq(x * x, sigma);
        return d * d;
    };
    const double h = a / simpson_intervals;
    double s = f(0.0) + f(a);
    for (int i = 1; i < simpson_intervals; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

SigmaCalibration calibrate_sigma(double a) {
    if (a <= 0) throw std::invalid_argument("calibrate_sigma: a must be positive");
    // Golden-section on [0.2, 5]; the objective is smooth and unimodal there.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.2, hi = 5.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = sigma_objective(x1, a), f2 = sigma_objective(x2, a);
    int budget = 200;
    while (hi - lo > 1e-5) {
        if (--budget < 0) throw NumericError("calibrate_sigma: iteration budget exhausted");
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = sigma_objective(x1, a);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = sigma_objective(x2, a);
        }
    }
    const double sigma = (lo + hi) / 2.0;
    return {sigma, sigma_objective(sigma, a)};
}

double prior_preservation_loss(const Tensor& eps_hat_p, const Tensor& eps) {
    if (!eps_hat_p.same_shape(eps))
        throw std::invalid_argument("prior_preservation_loss: shape mismatch");
    double s = 0.0;
    for (std::int64_t i = 0; i < eps.numel(); ++i) {
        const double d = eps_hat_p[i] - eps[i];
        s += d * d;
    }
    return s / static_cast<double>(eps.numel());
}

ad::Var perceptual_graph(const ad::Var& x_chw, const ad::Var& x_hat_chw,
                         const PerceptualEncoder& enc, const std::vector<BlockWeight>& weights,
                         int step, int s_p) {
    if (step > s_p) return ad::constant(Tensor::scalar(0.0));  // hard gate: no graph built
    nn::ParamBinder ref_binder(const_cast<nn::ParamStore&>(enc.params()), /*trainable=*/false);
    nn::ParamBinder hat_binder(const_cast<nn::ParamStore&>(enc.params()), /*trainable=*/false);
    auto ref_blocks = enc.blocks_graph(ref_binder, x_chw);
    auto hat_blocks = enc.blocks_graph(hat_binder, x_hat_chw);
    ad::Var loss = ad::constant(Tensor::scalar(0.0));
    for (const auto& bw : weights) {
        const size_t b = static_cast<size_t>(bw.block - 1);
        if (b >= ref_blocks.size()) throw std::invalid_argument("perceptual block index out of range");
        loss = ad::add(loss, ad::scale(ad::mse(hat_blocks[b], ref_blocks[b]), bw.weight));
    }
    return loss;
}

double perceptual_loss(const ImageTensor& x, const ImageTensor& x_hat,
                       const PerceptualEncoder& enc, const std::vector<BlockWeight>& weights,
                       int step, int s_p) {
    if (x.height() != x_hat.height() || x.width() != x_hat.width())
        throw std::invalid_argument("perceptual_loss: image shape mismatch");
    if (step > s_p) return 0.0;
    return perceptual_graph(ad::constant(image_to_chw(x)), ad::constant(image_to_chw(x_hat)), enc,
                            weights, step, s_p)
        ->val.item();
}

double ld_generator_loss(double score) { return (1.0 - score) * (1.0 - score); }

ad::Var ld_generator_graph(const ad::Var& score) {
    return ad::mse(score, ad::constant(Tensor::full({1}, 1.0)));
}

LossBreakdown total_loss(double r, double pp, double p, double ld, const LossWeights& w,
                         int step) {
    for (double v : {r, pp, p, ld})
        if (!std::isfinite(v)) throw NumericError("total_loss: non-finite component");
    LossBreakdown b;
    b.r = r;
    b.pp = pp;
    b.p = p;
    b.ld = ld;
    b.step = step;
    b.total = w.lambda_r * r + w.lambda_pp * pp + w.lambda_p * p + w.lambda_ld * ld;
    return b;
}

}  // namespace hypnos
