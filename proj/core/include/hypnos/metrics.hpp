#pragma once

#include <functional>

#include "hypnos/dataprep.hpp"
#include "hypnos/losses.hpp"
#include "hypnos/text_encoder.hpp"

namespace hypnos {

// Pluggable image embedder (DINO/CLIP-I stand-in). The frozen perceptual
// encoder's pooled features are the default; adapters for real backbones can
// plug in the same signature.
using Embedder = std::function<Tensor(const ImageTensor&)>;

Embedder make_perceptual_embedder(const PerceptualEncoder& enc);

// Mean SSIM over non-overlapping 8x8 windows of the luminance channel,
// standard constants C1 = 0.01^2, C2 = 0.03^2 on the [0,1] range.
double metric_ssim(const ImageTensor& a, const ImageTensor& b, int window = 8);

// 10*log10(1/MSE) over all RGB samples, capped for identical images.
double metric_psnr(const ImageTensor& a, const ImageTensor& b, double cap_db = 100.0);

// Frechet distance between Gaussian fits of two embedding sets. Rows are
// samples. `shrinkage` is added to each covariance diagonal so small sets
// stay well-conditioned; eigenvalues are clamped to >= 0 inside the matrix
// square root.
double metric_fid(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b,
                  double shrinkage = 1e-6);

double cosine_similarity(const Tensor& a, const Tensor& b);
double metric_embed_sim(const ImageTensor& gen, const ImageTensor& ref, const Embedder& embedder);

// CLIP-T stand-in: a fixed seeded linear map lifts the toy text embedding
// into the image-embedding space; the score is the cosine between the lifted
// text vector and the pooled image features.
class PromptAligner {
public:
    PromptAligner(const TextEncoder& text, const PerceptualEncoder& enc, std::uint64_t seed);
    double operator()(const ImageTensor& gen, const std::string& prompt) const;

private:
    const TextEncoder* text_;
    const PerceptualEncoder* enc_;
    Tensor map_;  // [image_dim, text_dim]
};

// LPIPS stand-in: weighted mean-squared distance between perceptual-encoder
// block activations.
double metric_lpips_proxy(const ImageTensor& a, const ImageTensor& b,
                          const PerceptualEncoder& enc,
                          const std::vector<BlockWeight>& weights);

struct ForegroundFidelity {
    double struct_dev = 0.0;  // 1 - SSIM over the mask bounding-box crop
    double color_dev = 0.0;   // L1 between foreground mean-color vectors
};

ForegroundFidelity metric_foreground_fidelity(const ImageTensor& gen,
                                              const InstanceSample& instance);

}  // namespace hypnos
