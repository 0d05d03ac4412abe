#pragma once

#include <string>
#include <vector>

#include "hypnos/nn.hpp"

namespace hypnos {

// Toy text encoder: prompts are tokenized on non-alphanumeric boundaries,
// each token is hashed into a fixed vocabulary slot, and the conditioning
// vector is the mean of the corresponding trainable embedding rows. The
// embedding table is finetuned together with the denoiser.
class TextEncoder {
public:
    struct Config {
        int vocab_size = 512;
        int embed_dim = 32;
    };

    TextEncoder(const Config& cfg, Rng& rng);

    static std::vector<std::string> tokenize(const std::string& prompt);
    std::vector<int> token_ids(const std::string& prompt) const;

    // Plain (non-graph) conditioning vector.
    Tensor encode(const std::string& prompt) const;
    // Graph version; gradients flow into the embedding table through binder.
    ad::Var encode_graph(nn::ParamBinder& binder, const std::string& prompt) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    nn::ParamStore params_;
};

}  // namespace hypnos
