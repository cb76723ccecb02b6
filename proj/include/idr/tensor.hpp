#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "idr/errors.hpp"

namespace idr {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

/// Dense row-major tensor. Activations use (batch, channels, height, width),
/// conv weights (out_ch, in_ch, k, k), biases (ch). `g` is the gradient
/// buffer; empty until a backward pass allocates it.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> v;
    std::vector<T> g;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), v(static_cast<std::size_t>(shape_numel(shape)), T(0)) {}
    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), v(std::move(values)) {
        if (static_cast<std::int64_t>(v.size()) != shape_numel(shape))
            throw ShapeError("tensor value count " + std::to_string(v.size()) +
                             " does not match shape " + shape_str(shape));
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), T(0));
    }
    void zero_grad() {
        if (!g.empty()) std::fill(g.begin(), g.end(), T(0));
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (const T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    T& at4(int n, int c, int y, int x) {
        return v[((static_cast<std::size_t>(n) * dim(1) + c) * dim(2) + y) * dim(3) + x];
    }
    const T& at4(int n, int c, int y, int x) const {
        return v[((static_cast<std::size_t>(n) * dim(1) + c) * dim(2) + y) * dim(3) + x];
    }

    static Tensor full(Shape s, T value) {
        Tensor t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                         " vs " + shape_str(b.shape));
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
    if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite values present");
}

}  // namespace idr
