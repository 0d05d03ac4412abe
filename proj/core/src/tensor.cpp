#include "hypnos/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hypnos {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("non-positive tensor dimension");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
        throw std::invalid_argument("tensor data size does not match shape");
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

double& Tensor::at3(int c, int h, int w) {
    return data_[static_cast<size_t>((static_cast<std::int64_t>(c) * shape_[1] + h) * shape_[2] + w)];
}
double Tensor::at3(int c, int h, int w) const {
    return data_[static_cast<size_t>((static_cast<std::int64_t>(c) * shape_[1] + h) * shape_[2] + w)];
}
double& Tensor::at2(int r, int c) {
    return data_[static_cast<size_t>(static_cast<std::int64_t>(r) * shape_[1] + c)];
}
double Tensor::at2(int r, int c) const {
    return data_[static_cast<size_t>(static_cast<std::int64_t>(r) * shape_[1] + c)];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str());
    return data_[0];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << "]";
    return os.str();
}

}  // namespace hypnos
