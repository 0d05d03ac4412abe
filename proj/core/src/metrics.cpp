#include "hypnos/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace hypnos {

Embedder make_perceptual_embedder(const PerceptualEncoder& enc) {
    return [&enc](const ImageTensor& img) { return enc.features(img); };
}

namespace {
void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* who) {
    if (a.height() != b.height() || a.width() != b.width())
        throw std::invalid_argument(std::string(who) + ": image shapes differ");
}

// SSIM of one luminance window pair given the region [y0,y1) x [x0,x1).
double window_ssim(const ImageTensor& a, const ImageTensor& b, int y0, int y1, int x0, int x1) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double ma = 0.0, mb = 0.0;
    const int n = (y1 - y0) * (x1 - x0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            ma += a.luminance(y, x);
            mb += b.luminance(y, x);
        }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double da = a.luminance(y, x) - ma;
            const double db = b.luminance(y, x) - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    va /= n;
    vb /= n;
    cov /= n;
    return ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
           ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

// Mean windowed SSIM over a rectangular region, tiling with `window`-sized
// blocks; a short final row/column folds into a truncated window.
double region_ssim(const ImageTensor& a, const ImageTensor& b, int y0, int y1, int x0, int x1,
                   int window) {
    double total = 0.0;
    int count = 0;
    for (int y = y0; y < y1; y += window)
        for (int x = x0; x < x1; x += window) {
            total += window_ssim(a, b, y, std::min(y + window, y1), x, std::min(x + window, x1));
            ++count;
        }
    return total / count;
}
}  // namespace

double metric_ssim(const ImageTensor& a, const ImageTensor& b, int window) {
    require_same_shape(a, b, "metric_ssim");
    if (window <= 0) throw std::invalid_argument("metric_ssim: window must be positive");
    return region_ssim(a, b, 0, a.height(), 0, a.width(), window);
}

double metric_psnr(const ImageTensor& a, const ImageTensor& b, double cap_db) {
    require_same_shape(a, b, "metric_psnr");
    double se = 0.0;
    const auto& pa = a.pixels();
    const auto& pb = b.pixels();
    for (size_t i = 0; i < pa.size(); ++i) {
        const double d = pa[i] - pb[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(pa.size());
    if (mse <= 0.0) return cap_db;
    return std::min(cap_db, 10.0 * std::log10(1.0 / mse));
}

double metric_fid(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b,
                  double shrinkage) {
    if (set_a.empty() || set_b.empty()) throw std::invalid_argument("metric_fid: empty set");
    const int d = static_cast<int>(set_a.front().numel());
    auto fit = [&](const std::vector<Tensor>& set, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const int n = static_cast<int>(set.size());
        Eigen::MatrixXd x(n, d);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(set[size_t(i)].numel()) != d)
                throw std::invalid_argument("metric_fid: ragged embedding set");
            for (int j = 0; j < d; ++j) x(i, j) = set[size_t(i)].data()[size_t(j)];
        }
        mu = x.colwise().mean();
        Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
        const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
        cov = centered.transpose() * centered / denom;
        cov.diagonal().array() += shrinkage;
        if (shrinkage <= 0.0 && n <= d)
            throw NumericError("metric_fid: degenerate covariance without shrinkage");
    };
    Eigen::VectorXd mu1, mu2;
    Eigen::MatrixXd c1, c2;
    fit(set_a, mu1, c1);
    fit(set_b, mu2, c2);

    // Tr((C1 C2)^{1/2}) = Tr((C1^{1/2} C2 C1^{1/2})^{1/2}); the inner matrix
    // is symmetric PSD, so an eigendecomposition with clamped eigenvalues
    // gives a stable square root.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(c1);
    Eigen::VectorXd ev1 = es1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd sqrt_c1 = es1.eigenvectors() * ev1.asDiagonal() * es1.eigenvectors().transpose();
    Eigen::MatrixXd inner = sqrt_c1 * c2 * sqrt_c1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(inner);
    const double tr_sqrt = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double mean_term = (mu1 - mu2).squaredNorm();
    const double fid = mean_term + c1.trace() + c2.trace() - 2.0 * tr_sqrt;
    return std::max(fid, 0.0);
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) throw std::invalid_argument("cosine_similarity: size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        dot += a.data()[i] * b.data()[i];
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw NumericError("cosine_similarity: zero-norm vector");
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::min(1.0, std::max(-1.0, c));
}

double metric_embed_sim(const ImageTensor& gen, const ImageTensor& ref, const Embedder& embedder) {
    return cosine_similarity(embedder(gen), embedder(ref));
}

PromptAligner::PromptAligner(const TextEncoder& text, const PerceptualEncoder& enc,
                             std::uint64_t seed)
    : text_(&text), enc_(&enc) {
    const int image_dim = enc.config().channels.back();
    const int text_dim = text.config().embed_dim;
    map_ = Tensor({image_dim, text_dim});
    Rng rng = Rng(seed).fork(0x616C69676EULL);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(text_dim));
    for (std::int64_t i = 0; i < map_.numel(); ++i) map_[i] = stddev * rng.normal();
}

double PromptAligner::operator()(const ImageTensor& gen, const std::string& prompt) const {
    const Tensor t = text_->encode(prompt);
    const int rows = map_.shape()[0], cols = map_.shape()[1];
    Tensor lifted({rows});
    for (int i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < cols; ++j)
            acc += map_.data()[size_t(i) * cols + j] * t.data()[size_t(j)];
        lifted.data()[size_t(i)] = acc;
    }
    return cosine_similarity(lifted, enc_->features(gen));
}

double metric_lpips_proxy(const ImageTensor& a, const ImageTensor& b,
                          const PerceptualEncoder& enc,
                          const std::vector<BlockWeight>& weights) {
    require_same_shape(a, b, "metric_lpips_proxy");
    const auto blocks_a = enc.blocks(a);
    const auto blocks_b = enc.blocks(b);
    double total = 0.0;
    for (const auto& bw : weights) {
        const Tensor& fa = blocks_a.at(size_t(bw.block - 1));
        const Tensor& fb = blocks_b.at(size_t(bw.block - 1));
        double se = 0.0;
        for (std::int64_t i = 0; i < fa.numel(); ++i) {
            const double d = fa.data()[i] - fb.data()[i];
            se += d * d;
        }
        total += bw.weight * se / static_cast<double>(fa.numel());
    }
    return total;
}

ForegroundFidelity metric_foreground_fidelity(const ImageTensor& gen,
                                              const InstanceSample& instance) {
    require_same_shape(gen, instance.image, "metric_foreground_fidelity");
    const Mask& m = instance.mask;
    if (m.area() == 0) throw std::invalid_argument("metric_foreground_fidelity: empty mask");

    int y0 = m.height(), y1 = 0, x0 = m.width(), x1 = 0;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.at(y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y + 1);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x + 1);
            }

    ForegroundFidelity out;
    out.struct_dev = 1.0 - region_ssim(gen, instance.image, y0, y1, x0, x1, 8);

    Rgb mg{0, 0, 0}, mi{0, 0, 0};
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (m.at(y, x))
                for (int c = 0; c < 3; ++c) {
                    mg[size_t(c)] += gen.at(y, x, c);
                    mi[size_t(c)] += instance.image.at(y, x, c);
                }
    const double area = static_cast<double>(m.area());
    double dev = 0.0;
    for (int c = 0; c < 3; ++c) dev += std::abs(mg[size_t(c)] - mi[size_t(c)]) / area;
    out.color_dev = dev / 3.0;
    return out;
}

}  // namespace hypnos
