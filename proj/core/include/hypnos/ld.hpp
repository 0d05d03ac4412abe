#pragma once

#include <functional>

#include "hypnos/dataprep.hpp"
#include "hypnos/nn.hpp"

namespace hypnos {

// The eight provenance categories of the discriminator training set. The
// first three are labelled real, the rest fake.
enum class LdCategory {
    instance,
    colored_bg,
    colored_bg_resize,
    class_image,
    negative_fg,
    masked_fg,
    colored_bg_negative_fg,
    colored_bg_masked_fg,
};

bool ld_category_is_real(LdCategory c);
double ld_category_proportion(LdCategory c);
const char* ld_category_name(LdCategory c);

struct LDItem {
    Tensor latent;
    bool real;
    LdCategory category;
};

// Foreground pixels replaced by their negative; background untouched.
ImageTensor negative_foreground(const InstanceSample& sample);
// Foreground filled with a constant value (mid-gray by default).
ImageTensor mask_foreground(const InstanceSample& sample, double fill = 0.5);

// Latent discriminator (conv stem + patch transformer):
// inverted-bottleneck conv stem, concatenated with the raw latent, split into
// 8x8 patches, learned positional embeddings, 3 transformer blocks, and a
// 3-layer MLP head on the [CLS] embedding squashed to [0,1].
class LatentDiscriminator {
public:
    struct Config {
        int latent_channels = 12;
        int latent_hw = 16;
        int patch = 8;
        int embed_dim = 48;
        int heads = 3;
        int blocks = 3;
        int stem_expand = 4;
        double lr = 1e-3;
        int pretrain_steps = 600;
        int batch_size = 8;
    };

    LatentDiscriminator(const Config& cfg, std::uint64_t seed);

    ad::Var forward_graph(nn::ParamBinder& binder, const ad::Var& z) const;
    double forward(const Tensor& z) const;

    int num_patches() const {
        const int g = cfg_.latent_hw / cfg_.patch;
        return g * g;
    }

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    nn::ParamStore params_;
};

// Least-squares discriminator objective mean((1-real)^2) + mean(fake^2).
double ld_discriminator_loss(const std::vector<double>& real_scores,
                             const std::vector<double>& fake_scores);

// Seeded Table-A1 category sampler producing encoded latents.
class LdDatasetSampler {
public:
    using EncodeFn = std::function<Tensor(const ImageTensor&)>;

    LdDatasetSampler(std::vector<InstanceSample> instances, std::vector<ClassSample> classes,
                     EncodeFn encode, DataConfig data_cfg);

    LDItem draw(Rng& rng) const;
    LdCategory draw_category(Rng& rng) const;

private:
    std::vector<InstanceSample> instances_;
    std::vector<ClassSample> classes_;
    EncodeFn encode_;
    DataConfig data_cfg_;
};

struct LdPretrainResult {
    std::vector<double> loss_history;
    double holdout_accuracy = 0.0;
};

// 600-step pretraining on the Table-A1 stream; deterministic per rng seed.
LdPretrainResult pretrain_ld(LatentDiscriminator& ld, const LdDatasetSampler& sampler, int steps,
                             Rng& rng);

}  // namespace hypnos
