#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace dix {

// Dense row-major tensor of doubles, rank 0..4. The single numeric value type
// used across the library; everything model- or metric-shaped is one of these
// plus metadata.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor from_values(std::initializer_list<double> values); // rank-1

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i0);
    double& at(std::size_t i0, std::size_t i1);
    double& at(std::size_t i0, std::size_t i1, std::size_t i2);
    double& at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3);
    double at(std::size_t i0) const;
    double at(std::size_t i0, std::size_t i1) const;
    double at(std::size_t i0, std::size_t i1, std::size_t i2) const;
    double at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    double min_value() const;
    double max_value() const;
    double sum() const;

    Tensor reshaped(std::vector<std::size_t> shape) const;

    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Elementwise helpers; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_difference(const Tensor& a, const Tensor& b);

// Mean over the channel axis of a (C,H,W) tensor -> (H,W).
Tensor channel_mean(const Tensor& chw);

// Bilinear resize of a 2-D grid, corner-aligned, no antialiasing.
Tensor resize_bilinear(const Tensor& grid, std::size_t out_h, std::size_t out_w);

std::size_t shape_product(const std::vector<std::size_t>& shape);

} // namespace dix
