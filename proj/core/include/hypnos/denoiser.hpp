#pragma once

#include "hypnos/nn.hpp"

namespace hypnos {

// Small conditional noise-prediction network on latents. Residual 3x3 conv
// blocks, each modulated by a per-channel bias computed from the sinusoidal
// time features and the prompt conditioning vector.
class Denoiser {
public:
    struct Config {
        int latent_channels = 12;
        int latent_hw = 16;
        int hidden_channels = 48;
        int blocks = 2;
        int time_dim = 32;
        int cond_dim = 32;
        int emb_dim = 64;
        // Trainable positional field concatenated to the input. Without it
        // the FiLM biases are spatially constant, so at high t (pure-noise
        // input) the network has no way to emit a spatially structured
        // subject template.
        int pos_channels = 8;
    };

    Denoiser(const Config& cfg, Rng& rng);

    // Builds eps_hat = f(z_t, t, c) into the binder's graph. z_t is a graph
    // node so adversarial/perceptual gradients can flow through latents.
    ad::Var forward_graph(nn::ParamBinder& binder, const ad::Var& z_t, int t,
                          const ad::Var& cond) const;

    // Convenience non-graph forward for inference/sampling.
    Tensor forward(const Tensor& z_t, int t, const Tensor& cond);

    Tensor time_features(int t) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    nn::ParamStore params_;
};

}  // namespace hypnos
