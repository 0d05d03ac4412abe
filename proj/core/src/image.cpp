#include "hypnos/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace hypnos {

void ImageTensor::clamp01() {
    for (auto& v : px_) v = std::clamp(v, 0.0, 1.0);
}

bool ImageTensor::in_range01() const {
    for (double v : px_)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    return true;
}

std::int64_t Mask::area() const {
    std::int64_t n = 0;
    for (auto v : m_) n += v ? 1 : 0;
    return n;
}

namespace {

std::uint8_t quant(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void skip_ws(std::istream& in) {
    while (std::isspace(in.peek())) in.get();
    // PNM comments
    while (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        while (std::isspace(in.peek())) in.get();
    }
}

}  // namespace

void write_ppm(const ImageTensor& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<std::uint8_t> buf(size_t(img.width()) * img.height() * 3);
    size_t k = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) buf[k++] = quant(img.at(y, x, c));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

ImageTensor read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("not a P6 ppm: " + path.string());
    skip_ws(in);
    int w, h, maxv;
    in >> w;
    skip_ws(in);
    in >> h;
    skip_ws(in);
    in >> maxv;
    in.get();
    if (maxv != 255) throw std::runtime_error("unsupported ppm depth");
    std::vector<std::uint8_t> buf(size_t(w) * h * 3);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("truncated ppm: " + path.string());
    ImageTensor img(h, w);
    size_t k = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = buf[k++] / 255.0;
    return img;
}

void write_pgm(const Mask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
    std::vector<std::uint8_t> buf(size_t(mask.width()) * mask.height());
    size_t k = 0;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) buf[k++] = mask.at(y, x) ? 255 : 0;
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Mask read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("not a P5 pgm: " + path.string());
    skip_ws(in);
    int w, h, maxv;
    in >> w;
    skip_ws(in);
    in >> h;
    skip_ws(in);
    in >> maxv;
    in.get();
    std::vector<std::uint8_t> buf(size_t(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("truncated pgm: " + path.string());
    Mask mask(h, w);
    size_t k = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) mask.at(y, x) = buf[k++] >= 128 ? 1 : 0;
    return mask;
}

}  // namespace hypnos
