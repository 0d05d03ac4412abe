#include "hypnos/ld.hpp"

#include <cmath>

namespace hypnos {

bool ld_category_is_real(LdCategory c) {
    switch (c) {
        case LdCategory::instance:
        case LdCategory::colored_bg:
        case LdCategory::colored_bg_resize:
            return true;
        default:
            return false;
    }
}

double ld_category_proportion(LdCategory c) {
    switch (c) {
        case LdCategory::instance: return 0.30;
        case LdCategory::colored_bg: return 0.18;
        case LdCategory::colored_bg_resize: return 0.02;
        case LdCategory::class_image: return 0.175;
        case LdCategory::negative_fg: return 0.0975;
        case LdCategory::masked_fg: return 0.0325;
        case LdCategory::colored_bg_negative_fg: return 0.0488;
        case LdCategory::colored_bg_masked_fg: return 0.1463;
    }
    throw std::logic_error("unreachable");
}

const char* ld_category_name(LdCategory c) {
    switch (c) {
        case LdCategory::instance: return "instance";
        case LdCategory::colored_bg: return "colored_bg";
        case LdCategory::colored_bg_resize: return "colored_bg_resize";
        case LdCategory::class_image: return "class_image";
        case LdCategory::negative_fg: return "negative_fg";
        case LdCategory::masked_fg: return "masked_fg";
        case LdCategory::colored_bg_negative_fg: return "colored_bg_negative_fg";
        case LdCategory::colored_bg_masked_fg: return "colored_bg_masked_fg";
    }
    throw std::logic_error("unreachable");
}

ImageTensor negative_foreground(const InstanceSample& sample) {
    ImageTensor out = sample.image;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (sample.mask.at(y, x))
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = 1.0 - out.at(y, x, c);
    return out;
}

ImageTensor mask_foreground(const InstanceSample& sample, double fill) {
    ImageTensor out = sample.image;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (sample.mask.at(y, x))
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = fill;
    return out;
}

LatentDiscriminator::LatentDiscriminator(const Config& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.latent_hw % cfg_.patch != 0)
        throw std::invalid_argument("latent size must be divisible by patch size");
    if (cfg_.embed_dim % cfg_.heads != 0)
        throw std::invalid_argument("embed_dim must be divisible by heads");
    Rng rng = Rng(seed).fork(0x6C64ULL);
    const int C = cfg_.latent_channels;
    const int X = C * cfg_.stem_expand;
    const int D = cfg_.embed_dim;
    auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };

    params_.add_randn("stem_expand_w", {X, C, 1, 1}, he(C), rng);
    params_.add("stem_expand_b", {X});
    params_.add_randn("stem_dw_w", {X, 1, 3, 3}, he(9), rng);
    params_.add("stem_dw_b", {X});
    params_.add_randn("stem_project_w", {C, X, 1, 1}, he(X), rng);
    params_.add("stem_project_b", {C});

    const int patch_dim = 2 * C * cfg_.patch * cfg_.patch;
    params_.add_randn("patch_embed_w", {patch_dim, D}, he(patch_dim), rng);
    params_.add("patch_embed_b", {D});
    params_.add_randn("cls", {1, D}, 0.02, rng);
    params_.add_randn("pos", {num_patches() + 1, D}, 0.02, rng);

    const int dh = D / cfg_.heads;
    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "tf" + std::to_string(b) + "_";
        params_.add("ln1_gamma_" + std::to_string(b), {D});
        params_.add("ln1_beta_" + std::to_string(b), {D});
        params_.add("ln2_gamma_" + std::to_string(b), {D});
        params_.add("ln2_beta_" + std::to_string(b), {D});
        for (int h = 0; h < cfg_.heads; ++h) {
            const std::string q = p + "h" + std::to_string(h) + "_";
            params_.add_randn(q + "wq", {D, dh}, he(D), rng);
            params_.add_randn(q + "wk", {D, dh}, he(D), rng);
            params_.add_randn(q + "wv", {D, dh}, he(D), rng);
            params_.add_randn(q + "wo", {dh, D}, he(dh) / cfg_.heads, rng);
        }
        params_.add_randn(p + "mlp_w1", {2 * D, D}, he(D), rng);
        params_.add(p + "mlp_b1", {2 * D});
        params_.add_randn(p + "mlp_w2", {D, 2 * D}, he(2 * D), rng);
        params_.add(p + "mlp_b2", {D});
    }
    params_.add("ln_final_gamma", {D});
    params_.add("ln_final_beta", {D});
    // layernorm gains start at 1
    for (int b = 0; b < cfg_.blocks; ++b) {
        auto& g1 = params_["ln1_gamma_" + std::to_string(b)];
        auto& g2 = params_["ln2_gamma_" + std::to_string(b)];
        for (std::int64_t i = 0; i < g1.numel(); ++i) g1[i] = 1.0;
        for (std::int64_t i = 0; i < g2.numel(); ++i) g2[i] = 1.0;
    }
    auto& gf = params_["ln_final_gamma"];
    for (std::int64_t i = 0; i < gf.numel(); ++i) gf[i] = 1.0;

    params_.add_randn("head_w1", {D, D}, he(D), rng);
    params_.add("head_b1", {D});
    params_.add_randn("head_w2", {D, D}, he(D), rng);
    params_.add("head_b2", {D});
    params_.add_randn("head_w3", {1, D}, he(D), rng);
    params_.add("head_b3", {1});
}

ad::Var LatentDiscriminator::forward_graph(nn::ParamBinder& binder, const ad::Var& z) const {
    using namespace ad;
    if (z->val.shape() != std::vector<int>{cfg_.latent_channels, cfg_.latent_hw, cfg_.latent_hw})
        throw std::invalid_argument("ld_forward: latent shape mismatch");
    // Inverted-bottleneck stem, then concatenation with the raw latent.
    auto h = silu(conv2d(z, binder("stem_expand_w"), binder("stem_expand_b"), 1, 0));
    h = silu(depthwise_conv2d(h, binder("stem_dw_w"), binder("stem_dw_b"), 1, 1));
    h = conv2d(h, binder("stem_project_w"), binder("stem_project_b"), 1, 0);
    auto feat = concat_chan(h, z);

    auto tok = patches(feat, cfg_.patch);                            // [N, patch_dim]
    tok = add_rowvec(matmul(tok, binder("patch_embed_w")), binder("patch_embed_b"));
    tok = concat_rows(binder("cls"), tok);                           // [N+1, D]
    tok = add(tok, binder("pos"));

    const int D = cfg_.embed_dim;
    const int dh = D / cfg_.heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = "tf" + std::to_string(b) + "_";
        const std::string sb = std::to_string(b);
        auto x1 = layer_norm_rows(tok, binder("ln1_gamma_" + sb), binder("ln1_beta_" + sb));
        Var attn_out;
        for (int hh = 0; hh < cfg_.heads; ++hh) {
            const std::string q = p + "h" + std::to_string(hh) + "_";
            auto qh = matmul(x1, binder(q + "wq"));
            auto kh = matmul(x1, binder(q + "wk"));
            auto vh = matmul(x1, binder(q + "wv"));
            auto scores = scale(matmul(qh, transpose(kh)), scl);
            auto attn = matmul(softmax_rows(scores), vh);
            auto out = matmul(attn, binder(q + "wo"));
            attn_out = attn_out ? add(attn_out, out) : out;
        }
        tok = add(tok, attn_out);
        auto x2 = layer_norm_rows(tok, binder("ln2_gamma_" + sb), binder("ln2_beta_" + sb));
        auto m = add_rowvec(matmul(x2, transpose(binder(p + "mlp_w1"))), binder(p + "mlp_b1"));
        m = add_rowvec(matmul(relu(m), transpose(binder(p + "mlp_w2"))), binder(p + "mlp_b2"));
        tok = add(tok, m);
    }
    tok = layer_norm_rows(tok, binder("ln_final_gamma"), binder("ln_final_beta"));
    auto cls = row(tok, 0);  // [D]
    auto y = relu(add(matvec(binder("head_w1"), cls), binder("head_b1")));
    y = relu(add(matvec(binder("head_w2"), y), binder("head_b2")));
    y = add(matvec(binder("head_w3"), y), binder("head_b3"));
    return sigmoid(y);  // scalar in [0,1]
}

double LatentDiscriminator::forward(const Tensor& z) const {
    nn::ParamBinder binder(const_cast<nn::ParamStore&>(params_), /*trainable=*/false);
    return forward_graph(binder, ad::constant(z))->val.item();
}

double ld_discriminator_loss(const std::vector<double>& real_scores,
                             const std::vector<double>& fake_scores) {
    if (real_scores.empty() || fake_scores.empty())
        throw std::invalid_argument("ld_discriminator_loss: empty score list");
    double lr = 0.0, lf = 0.0;
    for (double s : real_scores) lr += (1.0 - s) * (1.0 - s);
    for (double s : fake_scores) lf += s * s;
    return lr / static_cast<double>(real_scores.size()) + lf / static_cast<double>(fake_scores.size());
}

LdDatasetSampler::LdDatasetSampler(std::vector<InstanceSample> instances,
                                   std::vector<ClassSample> classes, EncodeFn encode,
                                   DataConfig data_cfg)
    : instances_(std::move(instances)),
      classes_(std::move(classes)),
      encode_(std::move(encode)),
      data_cfg_(std::move(data_cfg)) {
    if (instances_.empty() || classes_.empty())
        throw std::invalid_argument("LdDatasetSampler: empty dataset");
}

LdCategory LdDatasetSampler::draw_category(Rng& rng) const {
    static const LdCategory cats[] = {
        LdCategory::instance,        LdCategory::colored_bg,
        LdCategory::colored_bg_resize, LdCategory::class_image,
        LdCategory::negative_fg,     LdCategory::masked_fg,
        LdCategory::colored_bg_negative_fg, LdCategory::colored_bg_masked_fg,
    };
    double total = 0.0;
    for (auto c : cats) total += ld_category_proportion(c);
    double u = rng.uniform() * total;
    for (auto c : cats) {
        u -= ld_category_proportion(c);
        if (u <= 0.0) return c;
    }
    return LdCategory::colored_bg_masked_fg;
}

LDItem LdDatasetSampler::draw(Rng& rng) const {
    const LdCategory cat = draw_category(rng);
    const auto& inst = instances_[size_t(rng.uniform_int(0, int(instances_.size()) - 1))];
    auto colored = [&] {
        const auto& color =
            data_cfg_.palette[size_t(rng.uniform_int(0, int(data_cfg_.palette.size()) - 1))];
        return replace_background(inst, color, data_cfg_.spec);
    };

    ImageTensor img;
    switch (cat) {
        case LdCategory::instance:
            img = inst.image;
            break;
        case LdCategory::colored_bg:
            img = colored().image;
            break;
        case LdCategory::colored_bg_resize: {
            const double s = rng.uniform(data_cfg_.resize_scale_lo, data_cfg_.resize_scale_hi);
            img = resize_foreground(colored(), s, data_cfg_.spec).image;
            break;
        }
        case LdCategory::class_image:
            img = classes_[size_t(rng.uniform_int(0, int(classes_.size()) - 1))].image;
            break;
        case LdCategory::negative_fg:
            img = negative_foreground(inst);
            break;
        case LdCategory::masked_fg:
            img = mask_foreground(inst);
            break;
        case LdCategory::colored_bg_negative_fg:
            img = negative_foreground(colored());
            break;
        case LdCategory::colored_bg_masked_fg:
            img = mask_foreground(colored());
            break;
    }
    return {encode_(img), ld_category_is_real(cat), cat};
}

LdPretrainResult pretrain_ld(LatentDiscriminator& ld, const LdDatasetSampler& sampler, int steps,
                             Rng& rng) {
    LdPretrainResult result;
    nn::Adam opt(ld.config().lr);
    const int batch = ld.config().batch_size;
    for (int step = 0; step < steps; ++step) {
        nn::ParamBinder binder(ld.params(), /*trainable=*/true);
        ad::Var real_sq, fake_sq;
        int n_real = 0, n_fake = 0;
        for (int i = 0; i < batch; ++i) {
            const LDItem item = sampler.draw(rng);
            auto score = ld.forward_graph(binder, ad::constant(item.latent));
            if (item.real) {
                auto term = ad::mse(score, ad::constant(Tensor::full({1}, 1.0)));
                real_sq = real_sq ? ad::add(real_sq, term) : term;
                ++n_real;
            } else {
                auto term = ad::mse(score, ad::constant(Tensor::full({1}, 0.0)));
                fake_sq = fake_sq ? ad::add(fake_sq, term) : term;
                ++n_fake;
            }
        }
        ad::Var loss;
        if (real_sq) loss = ad::scale(real_sq, 1.0 / n_real);
        if (fake_sq) {
            auto f = ad::scale(fake_sq, 1.0 / n_fake);
            loss = loss ? ad::add(loss, f) : f;
        }
        const double lv = loss->val.item();
        if (!std::isfinite(lv)) throw NumericError("ld pretraining diverged at step " +
                                                   std::to_string(step));
        result.loss_history.push_back(lv);
        ad::backward(loss);
        opt.step(ld.params(), binder);
    }

    // Held-out accuracy on a fresh seeded batch, threshold 0.5.
    int correct = 0;
    const int n_eval = 64;
    for (int i = 0; i < n_eval; ++i) {
        const LDItem item = sampler.draw(rng);
        const double s = ld.forward(item.latent);
        if ((s >= 0.5) == item.real) ++correct;
    }
    result.holdout_accuracy = static_cast<double>(correct) / n_eval;
    return result;
}

}  // namespace hypnos
