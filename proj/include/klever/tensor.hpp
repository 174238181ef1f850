#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "klever/error.hpp"

namespace klever {

/// Dense row-major tensor of doubles. Most of the library uses rank 1 and 2.
/// A zero extent is allowed so that empty node sets map to 0-row matrices.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0) : dims_(std::move(dims)) {
        data_.assign(count(dims_), fill);
    }

    Tensor(std::vector<std::size_t> dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
        if (data_.size() != count(dims_)) {
            throw DimensionError("tensor data length does not match dims");
        }
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
    static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
    static Tensor vector(std::vector<double> values) {
        auto n = values.size();
        return Tensor({n}, std::move(values));
    }

    [[nodiscard]] const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t rank() const noexcept { return dims_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::size_t rows() const { return dims_.empty() ? 0 : dims_[0]; }
    [[nodiscard]] std::size_t cols() const {
        if (dims_.size() < 2) {
            return 1;
        }
        return std::accumulate(dims_.begin() + 1, dims_.end(), std::size_t{1}, std::multiplies<>());
    }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Tensor& operator+=(const Tensor& other) {
        require_same_shape(other, "operator+=");
        for (std::size_t i = 0; i < data_.size(); ++i) {
            data_[i] += other.data_[i];
        }
        return *this;
    }

    Tensor& operator*=(double s) {
        for (auto& v : data_) {
            v *= s;
        }
        return *this;
    }

    void require_same_shape(const Tensor& other, const char* where) const {
        if (dims_ != other.dims_) {
            throw DimensionError(std::string(where) + ": shape mismatch");
        }
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    static std::size_t count(const std::vector<std::size_t>& dims) {
        if (dims.empty()) {
            return 0;
        }
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }

    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

inline void ensure_finite(const Tensor& t, const std::string& name) {
    if (!t.all_finite()) {
        throw NonFiniteError(name);
    }
}

// ---------------------------------------------------------------------------
// Vector helpers

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

/// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += s * x[i];
    }
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
    if (x >= 0.0) {
        return -std::log1p(std::exp(-x));
    }
    return x - std::log1p(std::exp(x));
}

/// Max-subtracted softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) {
        return out;
    }
    const double mx = *std::max_element(out.begin(), out.end());
    double z = 0.0;
    for (auto& v : out) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : out) {
        v /= z;
    }
    return out;
}

inline constexpr double kLeakySlope = 0.01;

inline double leaky_relu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double leaky_relu_grad(double pre) { return pre > 0.0 ? 1.0 : kLeakySlope; }

inline Tensor leaky_relu(const Tensor& pre) {
    Tensor out = pre;
    for (auto& v : out.data()) {
        v = leaky_relu(v);
    }
    return out;
}

/// Multiplies `grad` in place by the activation derivative at `pre`.
inline void leaky_relu_backward(const Tensor& pre, Tensor& grad) {
    pre.require_same_shape(grad, "leaky_relu_backward");
    for (std::size_t i = 0; i < pre.size(); ++i) {
        grad[i] *= leaky_relu_grad(pre[i]);
    }
}

// ---------------------------------------------------------------------------
// Matrix products. Weight matrices are stored (out x in), inputs as rows.

/// x (n x in), w (out x in) -> n x out, i.e. every row mapped by w.
inline Tensor linear(const Tensor& x, const Tensor& w) {
    if (x.cols() != w.cols()) {
        throw DimensionError("linear: input width " + std::to_string(x.cols()) + " != weight width " +
                             std::to_string(w.cols()));
    }
    Tensor y = Tensor::matrix(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        auto yi = y.row(i);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            yi[o] = dot(xi, w.row(o));
        }
    }
    return y;
}

/// Single vector through a weight matrix: w (out x in) * x (in) -> out.
inline std::vector<double> matvec(const Tensor& w, std::span<const double> x) {
    if (x.size() != w.cols()) {
        throw DimensionError("matvec: width mismatch");
    }
    std::vector<double> y(w.rows());
    for (std::size_t o = 0; o < w.rows(); ++o) {
        y[o] = dot(w.row(o), x);
    }
    return y;
}

/// dw += dy^T x  (dy: n x out, x: n x in)
inline void accumulate_weight_grad(const Tensor& x, const Tensor& dy, Tensor& dw) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        auto dyi = dy.row(i);
        for (std::size_t o = 0; o < dy.cols(); ++o) {
            if (dyi[o] != 0.0) {
                axpy(dyi[o], xi, dw.row(o));
            }
        }
    }
}

/// dx += dy w  (dy: n x out, w: out x in)
inline void accumulate_input_grad(const Tensor& w, const Tensor& dy, Tensor& dx) {
    for (std::size_t i = 0; i < dy.rows(); ++i) {
        auto dyi = dy.row(i);
        auto dxi = dx.row(i);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            if (dyi[o] != 0.0) {
                axpy(dyi[o], w.row(o), dxi);
            }
        }
    }
}

// ---------------------------------------------------------------------------

/// Uniform Glorot initialization. For a matrix the fan-out is the row count and
/// the fan-in the column count; rank-1 tensors use their length for both.
inline Tensor init_xavier(const std::vector<std::size_t>& dims, std::mt19937_64& rng) {
    Tensor t(dims);
    const double fan_out = static_cast<double>(t.rows());
    const double fan_in = dims.size() >= 2 ? static_cast<double>(t.cols()) : fan_out;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

inline Tensor init_xavier(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return init_xavier(dims, rng);
}

}  // namespace klever
