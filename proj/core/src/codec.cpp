#include "hypnos/codec.hpp"

#include <cmath>

#include "hypnos/rng.hpp"

namespace hypnos {

namespace {

// Index into a flattened patch vector: channel-major, then row, then column.
int pidx(int c, int u, int v, int p) { return (c * p + u) * p + v; }

}  // namespace

Codec::Codec(const Config& cfg) : cfg_(cfg) {
    const int p = cfg_.patch;
    const int d = 3 * p * p;
    const double lum[3] = {0.299, 0.587, 0.114};

    // Raw (pre-orthonormalization) basis: per-channel means and per-channel
    // horizontal/vertical ramps (9 vectors), then luminance-weighted
    // curvatures and a saddle term (3 vectors). Per-channel ramps are what
    // keep chroma edges -- sprite boundaries -- above the reconstruction
    // contract; luminance-only ramps lose several dB on them.
    std::vector<std::vector<double>> raw;
    auto ramp = [&](int i) { return (i - (p - 1) / 2.0); };
    auto chan_moment = [&](int c, auto f) {
        std::vector<double> b(static_cast<size_t>(d), 0.0);
        for (int u = 0; u < p; ++u)
            for (int v = 0; v < p; ++v) b[static_cast<size_t>(pidx(c, u, v, p))] = f(u, v);
        return b;
    };
    for (int c = 0; c < 3; ++c) raw.push_back(chan_moment(c, [](int, int) { return 1.0; }));
    for (int c = 0; c < 3; ++c)
        raw.push_back(chan_moment(c, [&](int, int v) { return ramp(v); }));
    for (int c = 0; c < 3; ++c)
        raw.push_back(chan_moment(c, [&](int u, int) { return ramp(u); }));
    auto moment = [&](auto f) {
        std::vector<double> b(static_cast<size_t>(d), 0.0);
        for (int c = 0; c < 3; ++c)
            for (int u = 0; u < p; ++u)
                for (int v = 0; v < p; ++v)
                    b[static_cast<size_t>(pidx(c, u, v, p))] = lum[c] * f(u, v);
        return b;
    };
    raw.push_back(moment([&](int, int v) { return ramp(v) * ramp(v); }));
    raw.push_back(moment([&](int u, int) { return ramp(u) * ramp(u); }));
    raw.push_back(moment([&](int u, int v) { return ramp(u) * ramp(v); }));

    // If more latent channels are configured than analytic moments, fill the
    // remainder with seeded random directions before orthonormalization.
    Rng rng(0xC0DECULL);
    while (static_cast<int>(raw.size()) < cfg_.latent_channels) {
        std::vector<double> b(static_cast<size_t>(d));
        for (auto& x : b) x = rng.normal();
        raw.push_back(std::move(b));
    }
    raw.resize(static_cast<size_t>(cfg_.latent_channels));

    // Gram-Schmidt.
    for (auto& b : raw) {
        for (const auto& q : basis_) {
            double dot = 0.0;
            for (int i = 0; i < d; ++i) dot += b[static_cast<size_t>(i)] * q[static_cast<size_t>(i)];
            for (int i = 0; i < d; ++i) b[static_cast<size_t>(i)] -= dot * q[static_cast<size_t>(i)];
        }
        double nrm = 0.0;
        for (double x : b) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-9) throw std::logic_error("codec basis degenerate");
        for (auto& x : b) x /= nrm;
        basis_.push_back(b);
    }
}

Tensor Codec::encode(const ImageTensor& image) const {
    if (image.height() != cfg_.image_size || image.width() != cfg_.image_size)
        throw ConfigError("encode: image size does not match codec configuration");
    const int p = cfg_.patch;
    const int g = latent_hw();
    Tensor z(latent_shape());
    for (int py = 0; py < g; ++py)
        for (int px = 0; px < g; ++px)
            for (int c = 0; c < cfg_.latent_channels; ++c) {
                const auto& b = basis_[static_cast<size_t>(c)];
                double s = 0.0;
                for (int ch = 0; ch < 3; ++ch)
                    for (int u = 0; u < p; ++u)
                        for (int v = 0; v < p; ++v)
                            s += image.at(py * p + u, px * p + v, ch) *
                                 b[static_cast<size_t>(pidx(ch, u, v, p))];
                z.at3(c, py, px) = s * cfg_.latent_scale;
            }
    return z;
}

ImageTensor Codec::decode(const Tensor& latent) const {
    if (latent.shape() != latent_shape())
        throw ConfigError("decode: latent shape does not match codec configuration");
    const int p = cfg_.patch;
    const int g = latent_hw();
    ImageTensor img(cfg_.image_size, cfg_.image_size);
    for (int py = 0; py < g; ++py)
        for (int px = 0; px < g; ++px)
            for (int c = 0; c < cfg_.latent_channels; ++c) {
                const double zc = latent.at3(c, py, px) / cfg_.latent_scale;
                const auto& b = basis_[static_cast<size_t>(c)];
                for (int ch = 0; ch < 3; ++ch)
                    for (int u = 0; u < p; ++u)
                        for (int v = 0; v < p; ++v)
                            img.at(py * p + u, px * p + v, ch) +=
                                zc * b[static_cast<size_t>(pidx(ch, u, v, p))];
            }
    img.clamp01();
    return img;
}

ad::Var Codec::decode_graph(const ad::Var& latent) const {
    const int p = cfg_.patch;
    const int g = latent_hw();
    const int d = 3 * p * p;
    // Patch-space basis as a [d, C] matrix; latent as [C, g*g] rows.
    Tensor bt({d, cfg_.latent_channels});
    for (int c = 0; c < cfg_.latent_channels; ++c)
        for (int i = 0; i < d; ++i)
            bt.at2(i, c) = basis_[static_cast<size_t>(c)][static_cast<size_t>(i)] / cfg_.latent_scale;
    auto z2 = ad::reshape(latent, {cfg_.latent_channels, g * g});
    auto patch_vals = ad::matmul(ad::constant(std::move(bt)), z2);  // [d, g*g]
    // Rearrange patch-space values into [3, H, W] image layout.
    const int hw = cfg_.image_size;
    auto n = patch_vals;
    Tensor out({3, hw, hw});
    for (int py = 0; py < g; ++py)
        for (int px = 0; px < g; ++px)
            for (int ch = 0; ch < 3; ++ch)
                for (int u = 0; u < p; ++u)
                    for (int v = 0; v < p; ++v)
                        out.at3(ch, py * p + u, px * p + v) =
                            n->val.at2(pidx(ch, u, v, p), py * g + px);
    auto scatter = std::make_shared<ad::Node>();
    scatter->val = std::move(out);
    scatter->parents = {n};
    scatter->requires_grad = n->requires_grad;
    if (scatter->requires_grad) {
        auto cfg = cfg_;
        scatter->backprop = [cfg, g, p](ad::Node& node) {
            Tensor& gp = node.parents[0]->g();
            for (int py = 0; py < g; ++py)
                for (int px = 0; px < g; ++px)
                    for (int ch = 0; ch < 3; ++ch)
                        for (int u = 0; u < p; ++u)
                            for (int v = 0; v < p; ++v)
                                gp.at2(pidx(ch, u, v, p), py * g + px) +=
                                    node.grad.at3(ch, py * p + u, px * p + v);
        };
    }
    return ad::clamp01(scatter);
}

std::uint64_t Codec::byte_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& b : basis_) h = fnv1a64(b.data(), b.size() * sizeof(double), h);
    return h;
}

}  // namespace hypnos
