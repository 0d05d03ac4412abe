#include "hypnos/backbone.hpp"

#include <algorithm>
#include <cmath>

namespace hypnos {

namespace {

Rng model_rng(std::uint64_t seed) { return Rng(seed).fork(0x6D6F64656CULL); }

Denoiser make_denoiser(const Denoiser::Config& cfg, std::uint64_t seed) {
    Rng rng = model_rng(seed);
    return Denoiser(cfg, rng);
}

TextEncoder make_text_encoder(const TextEncoder::Config& cfg, std::uint64_t seed) {
    Rng rng = model_rng(seed).fork(0x74657874ULL);
    return TextEncoder(cfg, rng);
}

}  // namespace

DiffusionModel::DiffusionModel(const BackboneConfig& cfg)
    : cfg_(cfg),
      codec_(cfg.codec),
      schedule_(cfg.horizon, cfg.alpha_floor),
      denoiser_(make_denoiser(cfg.denoiser, cfg.seed)),
      text_(make_text_encoder(cfg.text, cfg.seed)) {}

Tensor DiffusionModel::predict_noise(const Tensor& z_t, int t, const std::string& prompt) {
    schedule_.check_t(t);
    if (z_t.shape() != codec_.latent_shape())
        throw std::invalid_argument("predict_noise: latent shape mismatch");
    return denoiser_.forward(z_t, t, text_.encode(prompt));
}

Tensor DiffusionModel::sample_latent(const std::string& prompt, int num_steps, std::uint64_t seed) {
    if (num_steps < 1) throw std::invalid_argument("sample: num_steps must be >= 1");
    Rng rng = Rng(seed).fork(0x73616D706C65ULL);
    Tensor z = randn_tensor(codec_.latent_shape(), rng);
    const Tensor cond = text_.encode(prompt);

    // Descending timestep grid T = t_0 > t_1 > ... > t_{n-1} >= 1.
    const int T = schedule_.horizon();
    std::vector<int> ts(static_cast<size_t>(num_steps));
    for (int i = 0; i < num_steps; ++i) {
        const double frac = num_steps == 1 ? 1.0 : 1.0 - static_cast<double>(i) / (num_steps - 1);
        ts[static_cast<size_t>(i)] = std::max(1, static_cast<int>(std::lround(frac * (T - 1))) + 1);
    }

    Tensor z0 = z;
    for (int i = 0; i < num_steps; ++i) {
        const int t = ts[static_cast<size_t>(i)];
        const Tensor eps_hat = denoiser_.forward(z, t, cond);
        z0 = schedule_.predict_z0(z, t, eps_hat);
        // Static z0 thresholding: near t = T the inversion divides by
        // sqrt(alpha_bar) ~ 1e-3, so unclipped prediction errors put the
        // trajectory far outside the codec's reachable latent range
        // (|z| <= ~1.8 for [0,1] images) and it never recovers.
        const double lim = cfg_.z0_clip;
        if (lim > 0.0)
            for (std::int64_t k = 0; k < z0.numel(); ++k)
                z0[k] = std::clamp(z0[k], -lim, lim);
        if (i + 1 < num_steps) {
            const double ab = schedule_.alpha_bar(ts[static_cast<size_t>(i) + 1]);
            const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
            for (std::int64_t k = 0; k < z.numel(); ++k) z[k] = sa * z0[k] + sn * eps_hat[k];
        }
    }
    return z0;
}

ImageTensor DiffusionModel::sample(const std::string& prompt, int num_steps, std::uint64_t seed) {
    return codec_.decode(sample_latent(prompt, num_steps, seed));
}

Tensor randn_tensor(const std::vector<int>& shape, Rng& rng) {
    Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

}  // namespace hypnos
