#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "hypnos/backbone.hpp"
#include "hypnos/ld.hpp"
#include "hypnos/losses.hpp"
#include "test_util.hpp"

using namespace hypnos;

namespace {
const std::vector<LdCategory> kAll = {
    LdCategory::instance,       LdCategory::colored_bg,
    LdCategory::colored_bg_resize, LdCategory::class_image,
    LdCategory::negative_fg,    LdCategory::masked_fg,
    LdCategory::colored_bg_negative_fg, LdCategory::colored_bg_masked_fg};

LdDatasetSampler fixture_sampler() {
    auto [instances, classes] = generate_synthetic_dataset(42, DataConfig{});
    Codec codec;
    return LdDatasetSampler(instances, classes,
                            [codec](const ImageTensor& img) { return codec.encode(img); },
                            DataConfig{});
}
}  // namespace

TEST_CASE("category labels and proportions are the documented table") {
    double real = 0.0, fake = 0.0, total = 0.0;
    for (auto c : kAll) {
        const double p = ld_category_proportion(c);
        total += p;
        (ld_category_is_real(c) ? real : fake) += p;
    }
    CHECK(real == doctest::Approx(0.50).epsilon(1e-9));
    CHECK(std::abs(real + fake - total) < 1e-12);
    CHECK(total == doctest::Approx(1.0).epsilon(0.002));  // published values round to 100%
    CHECK(ld_category_is_real(LdCategory::instance));
    CHECK(ld_category_is_real(LdCategory::colored_bg));
    CHECK(ld_category_is_real(LdCategory::colored_bg_resize));
    CHECK_FALSE(ld_category_is_real(LdCategory::class_image));
    CHECK_FALSE(ld_category_is_real(LdCategory::colored_bg_masked_fg));
}

TEST_CASE("10k draws hit the table within 2% absolute") {
    auto sampler = fixture_sampler();
    Rng rng(42);
    std::map<LdCategory, int> counts;
    const int n = 10000;
    int real = 0;
    for (int i = 0; i < n; ++i) {
        const LdCategory c = sampler.draw_category(rng);
        ++counts[c];
        if (ld_category_is_real(c)) ++real;
    }
    for (auto c : kAll)
        CHECK(std::abs(counts[c] / double(n) - ld_category_proportion(c)) < 0.02);
    CHECK(std::abs(real / double(n) - 0.5) < 0.02);
}

TEST_CASE("draws carry latents with the real/fake label of their category") {
    auto sampler = fixture_sampler();
    Rng rng(7);
    Codec codec;
    for (int i = 0; i < 32; ++i) {
        const LDItem item = sampler.draw(rng);
        CHECK(item.real == ld_category_is_real(item.category));
        CHECK(item.latent.shape() == codec.latent_shape());
        CHECK(item.latent.all_finite());
    }
}

TEST_CASE("negative_foreground is an involution; mask_foreground fills") {
    auto [instances, classes] = generate_synthetic_dataset(42, DataConfig{});
    (void)classes;
    const auto& s = instances[0];
    ImageTensor neg = negative_foreground(s);
    InstanceSample neg_sample = s;
    neg_sample.image = neg;
    const ImageTensor back = negative_foreground(neg_sample);
    // 1-(1-x) can differ from x by one rounding step, so compare to 1e-12.
    double worst = 0.0;
    for (size_t i = 0; i < back.pixels().size(); ++i)
        worst = std::max(worst, std::abs(back.pixels()[i] - s.image.pixels()[i]));
    CHECK(worst <= 1e-12);
    for (int y = 0; y < s.image.height(); ++y)
        for (int x = 0; x < s.image.width(); ++x)
            if (!s.mask.at(y, x)) CHECK(neg.rgb(y, x) == s.image.rgb(y, x));

    const ImageTensor masked = mask_foreground(s, 0.5);
    for (int y = 0; y < s.image.height(); ++y)
        for (int x = 0; x < s.image.width(); ++x)
            if (s.mask.at(y, x)) CHECK(masked.rgb(y, x) == Rgb{0.5, 0.5, 0.5});
}

TEST_CASE("discriminator forward is bounded and deterministic") {
    LatentDiscriminator ld(LatentDiscriminator::Config{}, 42);
    Rng rng(3);
    for (int i = 0; i < 8; ++i) {
        Tensor z = testutil::random_tensor({12, 16, 16}, rng, 0.3);
        const double s1 = ld.forward(z);
        const double s2 = ld.forward(z);
        CHECK(s1 == s2);
        CHECK(s1 > 0.0);
        CHECK(s1 < 1.0);
    }
}

TEST_CASE("discriminator graph gradients match finite differences") {
    LatentDiscriminator::Config cfg;
    cfg.embed_dim = 12;
    cfg.heads = 2;
    cfg.blocks = 1;
    LatentDiscriminator ld(cfg, 42);
    Rng rng(4);
    Tensor z = testutil::random_tensor({12, 16, 16}, rng, 0.2);
    // Gradient w.r.t. the input latent (the path the generator trains through).
    std::vector<ad::Var> leaves = {ad::leaf(z)};
    nn::ParamBinder binder(ld.params(), /*trainable=*/false);
    auto root = ld.forward_graph(binder, leaves[0]);
    ad::backward(root);
    Rng pick(9);
    for (int k = 0; k < 12; ++k) {
        const std::int64_t i = pick.uniform_int(0, int(z.numel()) - 1);
        const double h = 1e-5;
        auto eval = [&](double d) {
            Tensor zp = z;
            zp[i] += d;
            return ld.forward(zp);
        };
        const double fd = (eval(h) - eval(-h)) / (2 * h);
        const double an = leaves[0]->grad[i];
        CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}) < 2e-3);
    }
}

TEST_CASE("gradient isolation: frozen binder never accumulates parameter grads") {
    LatentDiscriminator ld(LatentDiscriminator::Config{}, 42);
    Rng rng(5);
    Tensor z = testutil::random_tensor({12, 16, 16}, rng, 0.2);
    nn::ParamBinder binder(ld.params(), /*trainable=*/false);
    auto score = ld.forward_graph(binder, ad::leaf(z));
    ad::backward(ld_generator_graph(score));
    for (const auto& [name, var] : binder.bound()) {
        (void)name;
        CHECK_FALSE(var->requires_grad);
        CHECK(var->grad.numel() == 0);
    }
}

TEST_CASE("discriminator least-squares objective") {
    CHECK(ld_discriminator_loss({1.0, 1.0}, {0.0}) == 0.0);
    CHECK(ld_discriminator_loss({0.0}, {1.0}) == doctest::Approx(2.0));
    CHECK(ld_discriminator_loss({0.5, 1.0}, {0.5, 0.0}) == doctest::Approx(0.25));
}

TEST_CASE("short LD pretraining separates real from fake above chance") {
    auto sampler = fixture_sampler();
    LatentDiscriminator::Config cfg;
    cfg.embed_dim = 24;
    cfg.blocks = 2;
    LatentDiscriminator ld(cfg, 42);
    Rng rng(42);
    const LdPretrainResult res = pretrain_ld(ld, sampler, 120, rng);
    CHECK(res.loss_history.size() == 120);
    for (double v : res.loss_history) CHECK(std::isfinite(v));
    CHECK(res.holdout_accuracy > 0.6);
}
