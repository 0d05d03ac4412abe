#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypnos {

// Dense row-major N-d array of doubles. All model state and intermediate
// activations in this project are small enough that double precision on a
// single thread is the simplest way to get deterministic, checkable math.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 3-d indexing [c][h][w] and 2-d [r][c]; used pervasively for latents
    // and token matrices.
    double& at3(int c, int h, int w);
    double at3(int c, int h, int w) const;
    double& at2(int r, int c);
    double at2(int r, int c) const;

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    double item() const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);

// Errors follow the contract names used throughout the library: argument
// errors for bad call-site values, state errors for misuse of lifecycle.
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NumericError : std::runtime_error { using std::runtime_error::runtime_error; };

}  // namespace hypnos
