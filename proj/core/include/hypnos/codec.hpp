#pragma once

#include "hypnos/autodiff.hpp"
#include "hypnos/image.hpp"
#include "hypnos/tensor.hpp"

namespace hypnos {

// Frozen analytic autoencoder between 64x64x3 images and C x 16 x 16 latents.
// Each 4x4 patch (48 values) is projected onto a fixed orthonormal basis of
// low-order patch moments: per-channel means plus luminance-weighted ramp and
// curvature terms. The decoder is the transpose map, so decode(encode(x))
// is the orthogonal projection of x onto the basis span, followed by a [0,1]
// clamp. The basis is deterministic and never updated during training.
class Codec {
public:
    struct Config {
        int image_size = 64;
        int patch = 4;
        int latent_channels = 12;
        double latent_scale = 0.5;
    };

    Codec() : Codec(Config{}) {}
    explicit Codec(const Config& cfg);

    Tensor encode(const ImageTensor& image) const;
    ImageTensor decode(const Tensor& latent) const;
    // decode as a graph node (linear map + clamp); output is [3,H,W].
    ad::Var decode_graph(const ad::Var& latent) const;

    const Config& config() const { return cfg_; }
    int latent_hw() const { return cfg_.image_size / cfg_.patch; }
    std::vector<int> latent_shape() const {
        return {cfg_.latent_channels, latent_hw(), latent_hw()};
    }
    // Spectral norm of the linear decoder (basis rows are orthonormal, so the
    // exact value is 1/latent_scale); exposed for the Lipschitz contract.
    double decoder_operator_norm() const { return 1.0 / cfg_.latent_scale; }
    std::uint64_t byte_hash() const;

private:
    Config cfg_;
    // basis_[c] is one orthonormal patch-space vector of length 3*patch*patch.
    std::vector<std::vector<double>> basis_;
};

}  // namespace hypnos
