#include "hypnos/perceptual.hpp"

#include <cmath>

#include "hypnos/dataprep.hpp"

namespace hypnos {

Tensor image_to_chw(const ImageTensor& img) {
    Tensor t({3, img.height(), img.width()});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) t.at3(c, y, x) = img.at(y, x, c);
    return t;
}

ImageTensor chw_to_image(const Tensor& t) {
    ImageTensor img(t.dim(1), t.dim(2));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) img.at(y, x, c) = t.at3(c, y, x);
    return img;
}

PerceptualEncoder::PerceptualEncoder(const Config& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed) {
    Rng rng = Rng(seed).fork(0x70657263ULL);
    int in_ch = 3;
    for (size_t b = 0; b < cfg_.channels.size(); ++b) {
        const int out_ch = cfg_.channels[b];
        const std::string p = "block" + std::to_string(b) + "_";
        params_.add_randn(p + "w", {out_ch, in_ch, 3, 3}, std::sqrt(2.0 / (in_ch * 9)), rng);
        params_.add(p + "b", {out_ch});
        in_ch = out_ch;
    }
    params_.add_randn("head_w", {cfg_.pretrain_classes, cfg_.channels.back()},
                      std::sqrt(2.0 / cfg_.channels.back()), rng);
    params_.add("head_b", {cfg_.pretrain_classes});
}

std::vector<ad::Var> PerceptualEncoder::blocks_graph(nn::ParamBinder& binder,
                                                     const ad::Var& img_chw) const {
    std::vector<ad::Var> acts;
    ad::Var h = img_chw;
    for (size_t b = 0; b < cfg_.channels.size(); ++b) {
        const std::string p = "block" + std::to_string(b) + "_";
        h = ad::relu(ad::conv2d(h, binder(p + "w"), binder(p + "b"), 2, 1));
        acts.push_back(h);
    }
    return acts;
}

std::vector<Tensor> PerceptualEncoder::blocks(const ImageTensor& img) const {
    nn::ParamBinder binder(const_cast<nn::ParamStore&>(params_), /*trainable=*/false);
    auto acts = blocks_graph(binder, ad::constant(image_to_chw(img)));
    std::vector<Tensor> out;
    out.reserve(acts.size());
    for (auto& a : acts) out.push_back(a->val);
    return out;
}

Tensor PerceptualEncoder::features(const ImageTensor& img) const {
    const Tensor last = blocks(img).back();
    const int c = last.dim(0), h = last.dim(1), w = last.dim(2);
    Tensor f({c});
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) s += last.at3(i, y, x);
        f[i] = s / (h * w);
    }
    return f;
}

void PerceptualEncoder::pretrain() {
    if (frozen_) throw std::logic_error("perceptual encoder already frozen");
    Rng rng = Rng(seed_).fork(0x70726570ULL);

    // One fixed sprite per class; random backgrounds per draw.
    std::vector<SpriteParams> class_sprites;
    for (int k = 0; k < cfg_.pretrain_classes; ++k)
        class_sprites.push_back(random_sprite_params(rng));

    nn::Adam opt(cfg_.pretrain_lr);
    for (int step = 0; step < cfg_.pretrain_steps; ++step) {
        const int target = rng.uniform_int(0, cfg_.pretrain_classes - 1);
        ImageTensor img = render_background(rng, cfg_.image_size);
        Mask mask(cfg_.image_size, cfg_.image_size);
        render_sprite(class_sprites[size_t(target)], img, mask);

        nn::ParamBinder binder(params_, /*trainable=*/true);
        auto acts = blocks_graph(binder, ad::constant(image_to_chw(img)));
        auto pooled = ad::global_avg_pool(acts.back());
        auto logits = ad::add(ad::matvec(binder("head_w"), pooled), binder("head_b"));
        Tensor one_hot({cfg_.pretrain_classes});
        one_hot[target] = 1.0;
        auto loss = ad::mse(logits, ad::constant(std::move(one_hot)));
        ad::backward(loss);
        opt.step(params_, binder);
    }
    frozen_ = true;
}

}  // namespace hypnos
