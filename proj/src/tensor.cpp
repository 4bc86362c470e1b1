#include "dix/tensor.hpp"

#include "dix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dix {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
    if (shape_.size() > 4) throw addressing_error("tensor rank > 4 unsupported");
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.size() > 4) throw addressing_error("tensor rank > 4 unsupported");
    if (data_.size() != shape_product(shape_))
        throw addressing_error("tensor data size " + std::to_string(data_.size()) +
                               " does not match shape " + shape_string());
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::from_values(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

namespace {
inline void check_rank(const std::vector<std::size_t>& shape, std::size_t want) {
    if (shape.size() != want)
        throw addressing_error("expected rank " + std::to_string(want) + " tensor, got rank " +
                               std::to_string(shape.size()));
}
} // namespace

double& Tensor::at(std::size_t i0) {
    check_rank(shape_, 1);
    return data_[i0];
}
double& Tensor::at(std::size_t i0, std::size_t i1) {
    check_rank(shape_, 2);
    return data_[i0 * shape_[1] + i1];
}
double& Tensor::at(std::size_t i0, std::size_t i1, std::size_t i2) {
    check_rank(shape_, 3);
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
}
double& Tensor::at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) {
    check_rank(shape_, 4);
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
}
double Tensor::at(std::size_t i0) const { return const_cast<Tensor*>(this)->at(i0); }
double Tensor::at(std::size_t i0, std::size_t i1) const {
    return const_cast<Tensor*>(this)->at(i0, i1);
}
double Tensor::at(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return const_cast<Tensor*>(this)->at(i0, i1, i2);
}
double Tensor::at(std::size_t i0, std::size_t i1, std::size_t i2, std::size_t i3) const {
    return const_cast<Tensor*>(this)->at(i0, i1, i2, i3);
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::min(m, v);
    return m;
}

double Tensor::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::max(m, v);
    return m;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_product(shape) != size())
        throw addressing_error("reshape from " + shape_string() + " changes element count");
    return Tensor(std::move(shape), data_);
}

std::string Tensor::shape_string() const {
    std::ostringstream oss;
    oss << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) oss << ",";
        oss << shape_[i];
    }
    oss << ")";
    return oss.str();
}

namespace {
inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw addressing_error(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
}
} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

double max_abs_difference(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw addressing_error("max_abs_difference: shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor channel_mean(const Tensor& chw) {
    if (chw.rank() != 3)
        throw addressing_error("channel_mean expects (C,H,W), got " + chw.shape_string());
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    Tensor out({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double s = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) s += chw.at(ch, i, j);
            out.at(i, j) = s / static_cast<double>(c);
        }
    return out;
}

Tensor resize_bilinear(const Tensor& grid, std::size_t out_h, std::size_t out_w) {
    if (grid.rank() != 2)
        throw addressing_error("resize_bilinear expects a 2-D grid, got " + grid.shape_string());
    const std::size_t in_h = grid.dim(0), in_w = grid.dim(1);
    if (in_h == out_h && in_w == out_w) return grid;
    Tensor out({out_h, out_w});
    const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / static_cast<double>(out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / static_cast<double>(out_w - 1) : 0.0;
    for (std::size_t i = 0; i < out_h; ++i) {
        const double fy = static_cast<double>(i) * sy;
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            const double fx = static_cast<double>(j) * sx;
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = grid.at(y0, x0) * (1.0 - wx) + grid.at(y0, x1) * wx;
            const double bot = grid.at(y1, x0) * (1.0 - wx) + grid.at(y1, x1) * wx;
            out.at(i, j) = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

} // namespace dix
