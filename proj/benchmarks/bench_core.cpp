#include <benchmark/benchmark.h>

#include "hypnos/config.hpp"

using namespace hypnos;

namespace {

const RunConfig& cfg() {
    static RunConfig c = default_run_config();
    return c;
}

ImageTensor fixture_image() {
    Rng rng(17);
    ImageTensor img = render_background(rng, 64);
    Mask mask(64, 64);
    render_sprite(random_sprite_params(rng), img, mask);
    return img;
}

void BM_CodecEncode(benchmark::State& state) {
    Codec codec(cfg().backbone.codec);
    const ImageTensor img = fixture_image();
    for (auto _ : state) benchmark::DoNotOptimize(codec.encode(img));
}
BENCHMARK(BM_CodecEncode);

void BM_CodecRoundTrip(benchmark::State& state) {
    Codec codec(cfg().backbone.codec);
    const ImageTensor img = fixture_image();
    for (auto _ : state) benchmark::DoNotOptimize(codec.decode(codec.encode(img)));
}
BENCHMARK(BM_CodecRoundTrip);

void BM_DenoiserForward(benchmark::State& state) {
    DiffusionModel model(cfg().backbone);
    Rng rng(3);
    const Tensor z = randn_tensor(model.codec().latent_shape(), rng);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict_noise(z, 500, "a photo of sks figurine"));
}
BENCHMARK(BM_DenoiserForward);

void BM_DiscriminatorForward(benchmark::State& state) {
    LatentDiscriminator ld(cfg().discriminator, 42);
    Rng rng(4);
    Tensor z({cfg().backbone.codec.latent_channels, 16, 16});
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = 0.3 * rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(ld.forward(z));
}
BENCHMARK(BM_DiscriminatorForward);

void BM_SigmaCalibration(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(calibrate_sigma(1.0));
}
BENCHMARK(BM_SigmaCalibration);

void BM_Ssim(benchmark::State& state) {
    Rng rng(5);
    const ImageTensor a = render_background(rng, 64), b = render_background(rng, 64);
    for (auto _ : state) benchmark::DoNotOptimize(metric_ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_InverseGaussianGraph(benchmark::State& state) {
    Rng rng(6);
    Tensor a({12, 16, 16}), b({12, 16, 16});
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    for (auto _ : state) {
        auto va = ad::leaf(a, true);
        auto loss = inverse_gaussian_graph(va, ad::leaf(b), 1.382);
        ad::backward(loss);
        benchmark::DoNotOptimize(va->grad[0]);
    }
}
BENCHMARK(BM_InverseGaussianGraph);

}  // namespace

BENCHMARK_MAIN();
