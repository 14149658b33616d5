#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "fibo/common.hpp"

namespace fibo::ad {

// Dense row-major real tensor of rank 0, 1 or 2. Immutable by convention
// once handed to a tape; 64-bit floats throughout.
class Tensor {
public:
    Tensor() : shape_{}, data_(1, 0.0) {}

    explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
        require(shape_.size() <= 2, "Tensor: rank > 2 not supported");
        std::size_t n = 1;
        for (int e : shape_) {
            require(e > 0, "Tensor: non-positive extent");
            n *= static_cast<std::size_t>(e);
        }
        data_.assign(n, fill);
    }

    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        require(shape_.size() <= 2, "Tensor: rank > 2 not supported");
        std::size_t n = 1;
        for (int e : shape_) n *= static_cast<std::size_t>(e);
        require(n == data_.size(), "Tensor: shape/data size mismatch");
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static Tensor vec(std::vector<double> v) {
        const int n = static_cast<int>(v.size());
        return Tensor({n}, std::move(v));
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    int rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
    int cols() const { return rank() == 2 ? shape_[1] : 1; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vals() { return data_; }
    const std::vector<double>& vals() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols() + j]; }

    double item() const {
        require(data_.size() == 1, "Tensor::item on non-scalar of size " + std::to_string(data_.size()));
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool is_scalar_like() const { return data_.size() == 1; }

    // Rank change without touching data.
    Tensor reshaped(std::vector<int> shape) const {
        Tensor out(std::move(shape), data_);
        return out;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace fibo::ad
