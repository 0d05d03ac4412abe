#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "hypnos/tensor.hpp"

namespace hypnos {

using Rgb = std::array<double, 3>;

// H x W x 3 image with values in [0,1]. Stored channel-last.
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int height, int width) : h_(height), w_(width), px_(size_t(height) * width * 3, 0.0) {}

    int height() const { return h_; }
    int width() const { return w_; }

    double& at(int y, int x, int c) { return px_[(size_t(y) * w_ + x) * 3 + c]; }
    double at(int y, int x, int c) const { return px_[(size_t(y) * w_ + x) * 3 + c]; }
    Rgb rgb(int y, int x) const { return {at(y, x, 0), at(y, x, 1), at(y, x, 2)}; }
    void set_rgb(int y, int x, const Rgb& c) {
        for (int k = 0; k < 3; ++k) at(y, x, k) = c[size_t(k)];
    }

    double luminance(int y, int x) const {
        return 0.299 * at(y, x, 0) + 0.587 * at(y, x, 1) + 0.114 * at(y, x, 2);
    }

    const std::vector<double>& pixels() const { return px_; }
    std::vector<double>& pixels() { return px_; }
    void clamp01();
    bool in_range01() const;

    bool operator==(const ImageTensor& o) const { return h_ == o.h_ && w_ == o.w_ && px_ == o.px_; }

private:
    int h_ = 0, w_ = 0;
    std::vector<double> px_;
};

// Single-channel binary mask, 1 = foreground.
class Mask {
public:
    Mask() = default;
    Mask(int height, int width) : h_(height), w_(width), m_(size_t(height) * width, 0) {}

    int height() const { return h_; }
    int width() const { return w_; }
    std::uint8_t& at(int y, int x) { return m_[size_t(y) * w_ + x]; }
    std::uint8_t at(int y, int x) const { return m_[size_t(y) * w_ + x]; }
    std::int64_t area() const;

    bool operator==(const Mask& o) const { return h_ == o.h_ && w_ == o.w_ && m_ == o.m_; }

private:
    int h_ = 0, w_ = 0;
    std::vector<std::uint8_t> m_;
};

// Lossless binary PPM (P6) / PGM (P5) round trips, 8 bits per channel.
// Quantization to 8 bits happens on write; values are x -> round(x*255).
void write_ppm(const ImageTensor& img, const std::filesystem::path& path);
ImageTensor read_ppm(const std::filesystem::path& path);
void write_pgm(const Mask& mask, const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace hypnos
