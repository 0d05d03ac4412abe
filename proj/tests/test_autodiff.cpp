#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"

using namespace hypnos;
using testutil::check_gradients;
using testutil::random_tensor;

namespace {
constexpr double kTol = 1e-4;
}

TEST_CASE("elementwise and scalar ops match finite differences") {
    Rng rng(7);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({3, 4}, rng);

    auto r = check_gradients({a, b}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::mul(ad::add(v[0], v[1]), ad::sub(v[0], ad::scale(v[1], 0.7))));
    });
    CHECK(r.max_rel_err < kTol);

    r = check_gradients({a}, [](std::vector<ad::Var>& v) {
        return ad::sum(ad::exp_(ad::scale(ad::add_scalar(v[0], 0.3), 0.5)));
    });
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("activations match finite differences") {
    Rng rng(11);
    auto a = random_tensor({2, 5}, rng);
    // Keep values away from the relu kink so central differences are valid.
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (std::abs(a[i]) < 1e-3) a[i] = 0.1;

    for (auto op : {ad::relu, ad::sigmoid, ad::silu}) {
        auto r = check_gradients(
            {a}, [op](std::vector<ad::Var>& v) { return ad::mean(op(v[0])); });
        CHECK(r.max_rel_err < kTol);
    }
}

TEST_CASE("matmul, matvec, transpose, softmax, layer norm gradients") {
    Rng rng(13);
    auto w = random_tensor({4, 3}, rng);
    auto x = random_tensor({3, 2}, rng);
    auto r = check_gradients({w, x}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::matmul(v[0], v[1]));
    });
    CHECK(r.max_rel_err < kTol);

    auto vx = random_tensor({3}, rng);
    r = check_gradients({w, vx}, [](std::vector<ad::Var>& v) {
        return ad::sum(ad::matvec(v[0], v[1]));
    });
    CHECK(r.max_rel_err < kTol);

    r = check_gradients({x}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::mul(ad::transpose(v[0]), ad::transpose(v[0])));
    });
    CHECK(r.max_rel_err < kTol);

    auto sm = random_tensor({3, 5}, rng);
    auto tgt = random_tensor({3, 5}, rng);
    r = check_gradients({sm}, [&tgt](std::vector<ad::Var>& v) {
        return ad::mse(ad::softmax_rows(v[0]), ad::constant(tgt));
    });
    CHECK(r.max_rel_err < kTol);

    auto ln_x = random_tensor({4, 6}, rng);
    auto gamma = random_tensor({6}, rng, 0.5);
    auto beta = random_tensor({6}, rng, 0.5);
    r = check_gradients({ln_x, gamma, beta}, [&tgt](std::vector<ad::Var>& v) {
        return ad::mean(ad::mul(ad::layer_norm_rows(v[0], v[1], v[2]),
                                ad::layer_norm_rows(v[0], v[1], v[2])));
    });
    CHECK(r.max_rel_err < 5e-4);
}

TEST_CASE("conv and spatial op gradients") {
    Rng rng(17);
    auto x = random_tensor({2, 6, 6}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng, 0.5);
    auto b = random_tensor({3}, rng, 0.5);
    auto r = check_gradients({x, w, b}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::conv2d(v[0], v[1], v[2], 1, 1));
    });
    CHECK(r.max_rel_err < kTol);

    r = check_gradients({x, w, b}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::conv2d(v[0], v[1], v[2], 2, 1));
    });
    CHECK(r.max_rel_err < kTol);

    auto dw = random_tensor({2, 1, 3, 3}, rng, 0.5);
    auto db = random_tensor({2}, rng, 0.5);
    r = check_gradients({x, dw, db}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::depthwise_conv2d(v[0], v[1], v[2], 1, 1));
    });
    CHECK(r.max_rel_err < kTol);

    auto y = random_tensor({3, 6, 6}, rng);
    r = check_gradients({x, y}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::concat_chan(v[0], v[1]));
    });
    CHECK(r.max_rel_err < kTol);

    r = check_gradients({x}, [](std::vector<ad::Var>& v) {
        return ad::sum(ad::global_avg_pool(v[0]));
    });
    CHECK(r.max_rel_err < kTol);

    auto tgt = random_tensor({4, 18}, rng);
    r = check_gradients({x}, [&tgt](std::vector<ad::Var>& v) {
        return ad::mse(ad::patches(v[0], 3), ad::constant(tgt));
    });
    CHECK(r.max_rel_err < kTol);

    r = check_gradients({x}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::reshape(v[0], {6, 12}));
    });
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("row gather / bias / concat gradients") {
    Rng rng(19);
    auto table = random_tensor({5, 4}, rng);
    auto r = check_gradients({table}, [](std::vector<ad::Var>& v) {
        return ad::sum(ad::rows_mean(v[0], {0, 2, 2, 4}));
    });
    CHECK(r.max_rel_err < kTol);

    r = check_gradients({table}, [](std::vector<ad::Var>& v) {
        return ad::sum(ad::row(v[0], 3));
    });
    CHECK(r.max_rel_err < kTol);

    auto x = random_tensor({3, 4}, rng);
    auto v4 = random_tensor({4}, rng);
    r = check_gradients({x, v4}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::add_rowvec(v[0], v[1]));
    });
    CHECK(r.max_rel_err < kTol);

    auto x2 = random_tensor({2, 4}, rng);
    r = check_gradients({x, x2}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::concat_rows(v[0], v[1]));
    });
    CHECK(r.max_rel_err < kTol);

    auto img = random_tensor({2, 3, 3}, rng);
    auto cb = random_tensor({2}, rng);
    r = check_gradients({img, cb}, [](std::vector<ad::Var>& v) {
        return ad::mean(ad::add_chan_bias(v[0], v[1]));
    });
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("constants receive no gradient, shared subgraphs accumulate") {
    Rng rng(23);
    auto a = random_tensor({3}, rng);
    auto c = ad::constant(a);
    auto l = ad::leaf(a);
    auto root = ad::sum(ad::mul(l, ad::add(c, l)));
    ad::backward(root);
    CHECK(c->grad.numel() == 0);  // never allocated for constants
    // d/dl [l*(c+l)] = c + 2l
    for (int i = 0; i < 3; ++i) CHECK(l->grad[i] == doctest::Approx(a[i] + 2 * a[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar roots and diamond graphs are correct") {
    Rng rng(29);
    auto t = random_tensor({2, 2}, rng);
    auto l = ad::leaf(t);
    CHECK_THROWS_AS(ad::backward(ad::add(l, l)), std::logic_error);

    // Diamond: root = mean((l + l) * l); checked against finite differences.
    auto r = check_gradients({t}, [](std::vector<ad::Var>& v) {
        auto s = ad::add(v[0], v[0]);
        return ad::mean(ad::mul(s, v[0]));
    });
    CHECK(r.max_rel_err < kTol);
}

TEST_CASE("mse and clamp01") {
    Rng rng(31);
    auto a = random_tensor({4, 4}, rng, 0.4);
    auto b = random_tensor({4, 4}, rng, 0.4);
    auto r = check_gradients({a, b}, [](std::vector<ad::Var>& v) {
        return ad::mse(v[0], v[1]);
    });
    CHECK(r.max_rel_err < kTol);

    // clamp01 gradient is zero outside (0,1); shift values inside for FD.
    Tensor c({5}, {0.2, 0.5, 0.8, -0.5, 1.5});
    auto l = ad::leaf(c);
    auto root = ad::sum(ad::clamp01(l));
    ad::backward(root);
    CHECK(l->grad[0] == 1.0);
    CHECK(l->grad[1] == 1.0);
    CHECK(l->grad[2] == 1.0);
    CHECK(l->grad[3] == 0.0);
    CHECK(l->grad[4] == 0.0);
}
