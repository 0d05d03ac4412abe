#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hypnos/losses.hpp"
#include "test_util.hpp"

using namespace hypnos;

TEST_CASE("inverse-Gaussian loss scalar oracle values") {
    const double sigma = 1.382;
    CHECK(inverse_gaussian_of_msq(0.0, sigma) == 0.0);
    CHECK(inverse_gaussian_of_msq(0.25, sigma) == doctest::Approx(0.234).epsilon(0.005));
    CHECK(inverse_gaussian_of_msq(1.0, sigma) == doctest::Approx(1.037).epsilon(0.001));
    // Small-residual slope: d/dm at m->0 is sqrt(2*pi) / (2*sigma).
    const double m = 1e-8;
    const double slope = inverse_gaussian_of_msq(m, sigma) / m;
    CHECK(std::abs(slope - std::sqrt(2.0 * M_PI) / (2.0 * sigma)) < 1e-3);
}

TEST_CASE("inverse-Gaussian tensor form reduces to the scalar oracle") {
    Rng rng(3);
    Tensor eps_hat = testutil::random_tensor({4, 4}, rng);
    Tensor eps = testutil::random_tensor({4, 4}, rng);
    double msq = 0.0;
    for (std::int64_t i = 0; i < eps.numel(); ++i) {
        const double d = eps_hat[i] - eps[i];
        msq += d * d;
    }
    msq /= double(eps.numel());
    CHECK(inverse_gaussian_loss(eps_hat, eps, 1.382) ==
          doctest::Approx(inverse_gaussian_of_msq(msq, 1.382)).epsilon(1e-12));
}

TEST_CASE("inverse-Gaussian gradient matches finite differences at 10 random points") {
    Rng rng(9);
    for (int k = 0; k < 10; ++k) {
        Tensor eps_hat = testutil::random_tensor({3, 3}, rng);
        Tensor eps = testutil::random_tensor({3, 3}, rng);
        auto r = testutil::check_gradients({eps_hat}, [&eps](std::vector<ad::Var>& v) {
            return inverse_gaussian_graph(v[0], ad::constant(eps), 1.382);
        });
        CHECK(r.max_rel_err <= 1e-4);
    }
}

TEST_CASE("sigma calibration agrees with a dense-grid oracle") {
    const SigmaCalibration cal = calibrate_sigma(1.0);
    CHECK(cal.sigma == doctest::Approx(1.382).epsilon(0.01 / 1.382));

    // Independent dense grid over [1.0, 1.8].
    double best_sigma = 0.0, best_obj = 1e18;
    for (double s = 1.0; s <= 1.8; s += 1e-4) {
        const double obj = sigma_objective(s, 1.0);
        if (obj < best_obj) {
            best_obj = obj;
            best_sigma = s;
        }
    }
    CHECK(std::abs(cal.sigma - best_sigma) < 1e-3);
    CHECK(cal.objective <= best_obj + 1e-9);
    CHECK_THROWS(calibrate_sigma(0.0));
    CHECK_THROWS(calibrate_sigma(-1.0));
}

TEST_CASE("loss composition matches the weighted sum to 4 ulps") {
    Rng rng(17);
    LossWeights w;  // paper defaults (1, 1, 0.003, 0.5)
    CHECK(w.lambda_r == 1.0);
    CHECK(w.lambda_pp == 1.0);
    CHECK(w.lambda_p == 0.003);
    CHECK(w.lambda_ld == 0.5);
    for (int k = 0; k < 1000; ++k) {
        const double r = std::abs(rng.normal()), pp = std::abs(rng.normal());
        const double p = std::abs(rng.normal()), ld = std::abs(rng.normal());
        const LossBreakdown b = total_loss(r, pp, p, ld, w);
        const double expected = w.lambda_r * r + w.lambda_pp * pp + w.lambda_p * p +
                                w.lambda_ld * ld;
        double lo = expected, hi = expected;
        for (int u = 0; u < 4; ++u) {
            lo = std::nextafter(lo, -1e30);
            hi = std::nextafter(hi, 1e30);
        }
        CHECK(b.total >= lo);
        CHECK(b.total <= hi);
    }
    CHECK_THROWS_AS(total_loss(std::nan(""), 0, 0, 0, w), NumericError);
}

TEST_CASE("prior preservation is plain MSE") {
    Rng rng(21);
    Tensor a = testutil::random_tensor({5}, rng), b = testutil::random_tensor({5}, rng);
    double msq = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double d = a[i] - b[i];
        msq += d * d;
    }
    CHECK(prior_preservation_loss(a, b) == doctest::Approx(msq / 5.0).epsilon(1e-12));
}

TEST_CASE("perceptual gate: zero value and zero gradient past s_p") {
    PerceptualEncoder::Config pcfg;
    pcfg.pretrain_steps = 20;  // quick fixture
    PerceptualEncoder enc(pcfg, 42);
    enc.pretrain();

    Rng rng(5);
    Tensor x = testutil::random_tensor({3, 64, 64}, rng, 0.2);
    Tensor x_hat = testutil::random_tensor({3, 64, 64}, rng, 0.2);
    const std::vector<BlockWeight> weights = {{2, 0.35}, {3, 0.45}, {4, 0.2}};

    // Open gate: positive loss, graph carries parents.
    auto open = perceptual_graph(ad::constant(x), ad::leaf(x_hat), enc, weights, 500, 500);
    CHECK(open->val.item() > 0.0);
    CHECK_FALSE(open->parents.empty());

    // Closed gate: exact zero, no graph (so no gradient can flow at all).
    auto closed = perceptual_graph(ad::constant(x), ad::leaf(x_hat), enc, weights, 501, 500);
    CHECK(closed->val.item() == 0.0);
    CHECK(closed->parents.empty());
    CHECK_FALSE(closed->requires_grad);
    CHECK(perceptual_loss(ImageTensor(64, 64), ImageTensor(64, 64), enc, weights, 501, 500) ==
          0.0);
}

TEST_CASE("perceptual loss is zero on identical inputs and positive otherwise") {
    PerceptualEncoder::Config pcfg;
    pcfg.pretrain_steps = 20;
    PerceptualEncoder enc(pcfg, 42);
    enc.pretrain();
    Rng rng(6);
    ImageTensor img(64, 64);
    for (auto& v : img.pixels()) v = rng.uniform();
    ImageTensor other = img;
    other.at(3, 3, 0) = 1.0 - other.at(3, 3, 0);
    const std::vector<BlockWeight> weights = {{2, 0.35}, {3, 0.45}, {4, 0.2}};
    CHECK(perceptual_loss(img, img, enc, weights, 0, 500) == 0.0);
    CHECK(perceptual_loss(img, other, enc, weights, 0, 500) > 0.0);
}

TEST_CASE("ld generator loss pulls scores toward one") {
    CHECK(ld_generator_loss(1.0) == 0.0);
    CHECK(ld_generator_loss(0.0) == 1.0);
    CHECK(ld_generator_loss(0.5) == doctest::Approx(0.25));
    auto v = ad::leaf(Tensor::scalar(0.25));
    auto g = ld_generator_graph(v);
    ad::backward(g);
    CHECK(v->grad[0] == doctest::Approx(-2.0 * (1.0 - 0.25)));
}

TEST_CASE("weights validation") {
    LossWeights w;
    CHECK_NOTHROW(w.validate(800));
    w.s_p = 900;
    CHECK_THROWS(w.validate(800));
    w = LossWeights{};
    w.sigma = 0.0;
    CHECK_THROWS(w.validate(800));
    w = LossWeights{};
    w.lambda_r = -1.0;
    CHECK_THROWS(w.validate(800));
}
