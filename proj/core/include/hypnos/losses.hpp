#pragma once

#include "hypnos/perceptual.hpp"

namespace hypnos {

// Per-block perceptual weights: (block index, weight). Block indices are
// 1-based over the encoder blocks; defaults weight blocks 2, 3, 4.
struct BlockWeight {
    int block;
    double weight;
};

struct LossWeights {
    double lambda_r = 1.0;
    double lambda_pp = 1.0;
    double lambda_p = 0.003;
    double lambda_ld = 0.5;
    double sigma = 1.382;
    int s_p = 500;
    std::vector<BlockWeight> block_weights = {{2, 0.35}, {3, 0.45}, {4, 0.2}};

    void validate(int total_steps) const;
};

struct LossBreakdown {
    double r = 0.0, pp = 0.0, p = 0.0, ld = 0.0, total = 0.0;
    int step = 0;
};

// sigma*sqrt(2*pi)*(exp(m / (2*sigma^2)) - 1) with m the mean squared
// elementwise residual.
double inverse_gaussian_of_msq(double m, double sigma);
double inverse_gaussian_loss(const Tensor& eps_hat, const Tensor& eps, double sigma);
ad::Var inverse_gaussian_graph(const ad::Var& eps_hat, const ad::Var& eps, double sigma);

// Least-squares fit of the inverse-Gaussian curve against x^2 on [0, a]:
// argmin_sigma \int_0^a (x^2 - sigma*sqrt(2pi)*(exp(x^2/(2 sigma^2)) - 1))^2 dx.
// Composite Simpson quadrature + golden-section search.
struct SigmaCalibration {
    double sigma;
    double objective;
};
double sigma_objective(double sigma, double a, int simpson_intervals = 512);
SigmaCalibration calibrate_sigma(double a);

double prior_preservation_loss(const Tensor& eps_hat_p, const Tensor& eps);

// Weighted block-activation distance between reference and reconstruction,
// hard-gated to zero (value and gradient) once step exceeds s_p.
double perceptual_loss(const ImageTensor& x, const ImageTensor& x_hat,
                       const PerceptualEncoder& enc, const std::vector<BlockWeight>& weights,
                       int step, int s_p);
// Graph form; x_hat_chw may carry gradients (the decoded denoised latent).
// Returns nullptr-like zero constant when gated off.
ad::Var perceptual_graph(const ad::Var& x_chw, const ad::Var& x_hat_chw,
                         const PerceptualEncoder& enc, const std::vector<BlockWeight>& weights,
                         int step, int s_p);

// Generator-side adversarial term (1 - LD(z0))^2 given the realness score.
double ld_generator_loss(double score);
ad::Var ld_generator_graph(const ad::Var& score);

LossBreakdown total_loss(double r, double pp, double p, double ld, const LossWeights& w,
                         int step = 0);

}  // namespace hypnos
