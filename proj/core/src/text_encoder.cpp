#include "hypnos/text_encoder.hpp"

#include <cctype>

namespace hypnos {

TextEncoder::TextEncoder(const Config& cfg, Rng& rng) : cfg_(cfg) {
    params_.add_randn("embedding", {cfg_.vocab_size, cfg_.embed_dim}, 0.3, rng);
}

std::vector<std::string> TextEncoder::tokenize(const std::string& prompt) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : prompt) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<int> TextEncoder::token_ids(const std::string& prompt) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize(prompt))
        ids.push_back(static_cast<int>(hash_string(tok) % static_cast<std::uint64_t>(cfg_.vocab_size)));
    if (ids.empty()) ids.push_back(0);  // empty prompt maps to a fixed slot
    return ids;
}

Tensor TextEncoder::encode(const std::string& prompt) const {
    const auto ids = token_ids(prompt);
    const Tensor& table = params_.at("embedding");
    Tensor out({cfg_.embed_dim});
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (int id : ids)
        for (int j = 0; j < cfg_.embed_dim; ++j) out[j] += table.at2(id, j) * inv;
    return out;
}

ad::Var TextEncoder::encode_graph(nn::ParamBinder& binder, const std::string& prompt) const {
    return ad::rows_mean(binder("embedding"), token_ids(prompt));
}

}  // namespace hypnos
