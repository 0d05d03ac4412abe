#pragma once

#include <string>

#include "hypnos/codec.hpp"
#include "hypnos/denoiser.hpp"
#include "hypnos/schedule.hpp"
#include "hypnos/text_encoder.hpp"

namespace hypnos {

struct BackboneConfig {
    Codec::Config codec;
    Denoiser::Config denoiser;
    TextEncoder::Config text;
    int horizon = 1000;
    double alpha_floor = 1e-6;
    int sample_steps = 20;
    double z0_clip = 2.0;  // sampler z0 threshold; 0 disables
    std::uint64_t seed = 42;
};

// Toy latent-diffusion text-to-image model: frozen codec, cosine schedule,
// conditional denoiser, trainable text encoder, deterministic sampler.
class DiffusionModel {
public:
    explicit DiffusionModel(const BackboneConfig& cfg);

    Tensor encode(const ImageTensor& image) const { return codec_.encode(image); }
    ImageTensor decode(const Tensor& z) const { return codec_.decode(z); }
    Tensor add_noise(const Tensor& z0, int t, const Tensor& eps) const {
        return schedule_.add_noise(z0, t, eps);
    }
    Tensor predict_z0(const Tensor& z_t, int t, const Tensor& eps_hat) const {
        return schedule_.predict_z0(z_t, t, eps_hat);
    }
    Tensor predict_noise(const Tensor& z_t, int t, const std::string& prompt);

    // Deterministic DDIM-style sampler (eta = 0); fixed (prompt, steps, seed)
    // always produces the same image.
    ImageTensor sample(const std::string& prompt, int num_steps, std::uint64_t seed);
    Tensor sample_latent(const std::string& prompt, int num_steps, std::uint64_t seed);

    Codec& codec() { return codec_; }
    const Codec& codec() const { return codec_; }
    NoiseSchedule& schedule() { return schedule_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    Denoiser& denoiser() { return denoiser_; }
    const Denoiser& denoiser() const { return denoiser_; }
    TextEncoder& text_encoder() { return text_; }
    const TextEncoder& text_encoder() const { return text_; }
    const BackboneConfig& config() const { return cfg_; }

private:
    BackboneConfig cfg_;
    Codec codec_;
    NoiseSchedule schedule_;
    Denoiser denoiser_;
    TextEncoder text_;
};

// Standard-normal tensor of the given shape from a seeded stream.
Tensor randn_tensor(const std::vector<int>& shape, Rng& rng);

}  // namespace hypnos
