#pragma once

#include "hypnos/image.hpp"
#include "hypnos/nn.hpp"

namespace hypnos {

Tensor image_to_chw(const ImageTensor& img);
ImageTensor chw_to_image(const Tensor& t);

// Frozen 4-block strided convolutional encoder. Briefly pretrained on a
// sprite-family classification task so its activations carry shape/color
// semantics, then frozen for the rest of the run. Blocks 2-4 feed the
// perceptual loss; pooled block-4 features double as the toy image embedder
// for the evaluation metrics.
class PerceptualEncoder {
public:
    struct Config {
        int image_size = 64;
        std::vector<int> channels = {16, 32, 48, 64};
        int pretrain_classes = 6;
        int pretrain_steps = 200;
        double pretrain_lr = 2e-3;
    };

    PerceptualEncoder(const Config& cfg, std::uint64_t seed);

    // Runs the seeded classification pretraining and freezes the encoder.
    void pretrain();
    bool frozen() const { return frozen_; }

    // Per-block activation maps, graph form; binder must wrap params().
    std::vector<ad::Var> blocks_graph(nn::ParamBinder& binder, const ad::Var& img_chw) const;
    std::vector<Tensor> blocks(const ImageTensor& img) const;

    // Pooled final-block features (the toy embedding), length channels.back().
    Tensor features(const ImageTensor& img) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const Config& config() const { return cfg_; }
    std::uint64_t byte_hash() const { return params_.byte_hash(); }

private:
    Config cfg_;
    std::uint64_t seed_;
    nn::ParamStore params_;
    bool frozen_ = false;
};

}  // namespace hypnos
