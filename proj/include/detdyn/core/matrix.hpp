#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace detdyn {

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

template <typename T>
using real_of_t = decltype(std::abs(std::declval<T>()));

template <typename T>
concept Scalar = std::is_floating_point_v<T> || is_complex<T>::value;

template <Scalar T>
bool is_finite(const T& x) {
    if constexpr (is_complex<T>::value) {
        return std::isfinite(x.real()) && std::isfinite(x.imag());
    } else {
        return std::isfinite(x);
    }
}

/// Dense row-major matrix. Zero-sized shapes are permitted so that
/// rank-zero factors (n x 0, 0 x n) can be represented.
template <Scalar T>
class BasicMatrix {
public:
    using value_type = T;
    using real_type = real_of_t<T>;

    BasicMatrix() = default;

    BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        detail::require(data_.size() == rows_ * cols_, ErrorKind::DimensionMismatch,
                        "entry count does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
        check_finite();
    }

    BasicMatrix(std::initializer_list<std::initializer_list<T>> rows) : rows_(rows.size()) {
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            detail::require(r.size() == cols_, ErrorKind::RaggedRows, "rows have different lengths");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        check_finite();
    }

    static BasicMatrix identity(std::size_t n) {
        BasicMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    static BasicMatrix zeros(std::size_t rows, std::size_t cols) { return BasicMatrix(rows, cols); }

    static BasicMatrix diagonal(std::span<const T> d) {
        BasicMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    static BasicMatrix diagonal(std::initializer_list<T> d) {
        return diagonal(std::span<const T>(d.begin(), d.size()));
    }

    /// Column vector (n x 1).
    static BasicMatrix column(std::span<const T> v) {
        return BasicMatrix(v.size(), 1, std::vector<T>(v.begin(), v.end()));
    }

    /// u * v^T
    static BasicMatrix outer(std::span<const T> u, std::span<const T> v) {
        BasicMatrix m(u.size(), v.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
        return m;
    }

    /// Matrix whose columns are the given vectors (all of length n).
    static BasicMatrix from_columns(std::size_t n, const std::vector<std::vector<T>>& columns) {
        BasicMatrix m(n, columns.size());
        for (std::size_t j = 0; j < columns.size(); ++j) {
            detail::require(columns[j].size() == n, ErrorKind::DimensionMismatch, "column length mismatch");
            for (std::size_t i = 0; i < n; ++i) m(i, j) = columns[j][i];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool is_square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::vector<T> col(std::size_t j) const {
        std::vector<T> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    BasicMatrix transpose() const {
        BasicMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    template <Scalar U>
    BasicMatrix<U> cast() const {
        BasicMatrix<U> out(rows_, cols_);
        for (std::size_t k = 0; k < data_.size(); ++k) out.data()[k] = static_cast<U>(data_[k]);
        return out;
    }

    BasicMatrix& operator+=(const BasicMatrix& o) {
        require_same_shape(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    BasicMatrix& operator-=(const BasicMatrix& o) {
        require_same_shape(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }

    BasicMatrix& operator*=(const T& s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    /// this += alpha * u * v^T
    void add_outer(std::span<const T> u, std::span<const T> v, T alpha = T{1}) {
        detail::require(u.size() == rows_ && v.size() == cols_, ErrorKind::DimensionMismatch,
                        "outer-product update has wrong dimensions");
        for (std::size_t i = 0; i < rows_; ++i) {
            const T ui = alpha * u[i];
            for (std::size_t j = 0; j < cols_; ++j) (*this)(i, j) += ui * v[j];
        }
    }

    void add_to_diagonal(const T& s) {
        detail::require(is_square(), ErrorKind::NonSquare, "diagonal shift needs a square matrix");
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, i) += s;
    }

    friend BasicMatrix operator+(BasicMatrix a, const BasicMatrix& b) { return a += b; }
    friend BasicMatrix operator-(BasicMatrix a, const BasicMatrix& b) { return a -= b; }
    friend BasicMatrix operator*(BasicMatrix a, const T& s) { return a *= s; }
    friend BasicMatrix operator*(const T& s, BasicMatrix a) { return a *= s; }
    friend BasicMatrix operator-(BasicMatrix a) { return a *= T{-1}; }

    friend BasicMatrix operator*(const BasicMatrix& a, const BasicMatrix& b) {
        detail::require(a.cols_ == b.rows_, ErrorKind::DimensionMismatch,
                        "product of " + a.shape() + " and " + b.shape());
        BasicMatrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const T aik = a(i, k);
                if (aik == T{}) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend bool operator==(const BasicMatrix& a, const BasicMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

private:
    void require_same_shape(const BasicMatrix& o) const {
        detail::require(rows_ == o.rows_ && cols_ == o.cols_, ErrorKind::DimensionMismatch,
                        "shape " + shape() + " vs " + o.shape());
    }

    void check_finite() const {
        for (const auto& x : data_)
            detail::require(is_finite(x), ErrorKind::NonFinite, "matrix entries must be finite");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using Vector = std::vector<double>;
using Complex = std::complex<double>;
using ComplexMatrix = BasicMatrix<Complex>;

// ---------------------------------------------------------------------------
// vector helpers

template <Scalar T>
T dot(std::span<const T> a, std::span<const T> b) {
    detail::require(a.size() == b.size(), ErrorKind::DimensionMismatch, "dot product of unequal lengths");
    T s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

template <Scalar T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
    return dot(std::span<const T>(a), std::span<const T>(b));
}

template <Scalar T>
real_of_t<T> norm2(std::span<const T> v) {
    real_of_t<T> s{};
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

template <Scalar T>
real_of_t<T> norm2(const std::vector<T>& v) {
    return norm2(std::span<const T>(v));
}

template <Scalar T>
std::vector<T> matvec(const BasicMatrix<T>& m, std::span<const T> x) {
    detail::require(m.cols() == x.size(), ErrorKind::DimensionMismatch,
                    "matrix " + m.shape() + " times vector of length " + std::to_string(x.size()));
    std::vector<T> y(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        T s{};
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

template <Scalar T>
std::vector<T> matvec(const BasicMatrix<T>& m, const std::vector<T>& x) {
    return matvec(m, std::span<const T>(x));
}

template <Scalar U, Scalar T>
std::vector<U> cast_vector(const std::vector<T>& v) {
    std::vector<U> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<U>(v[i]);
    return out;
}

// ---------------------------------------------------------------------------
// matrix scalars

template <Scalar T>
real_of_t<T> max_abs(const BasicMatrix<T>& m) {
    real_of_t<T> s{};
    for (const auto& x : m.data()) s = std::max(s, std::abs(x));
    return s;
}

template <Scalar T>
real_of_t<T> frobenius_norm(const BasicMatrix<T>& m) {
    real_of_t<T> s{};
    for (const auto& x : m.data()) s += std::norm(x);
    return std::sqrt(s);
}

template <Scalar T>
T trace(const BasicMatrix<T>& m) {
    detail::require(m.is_square(), ErrorKind::NonSquare, "trace of " + m.shape());
    T s{};
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, i);
    return s;
}

template <Scalar T>
real_of_t<T> max_abs_diff(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch,
                    "shape " + a.shape() + " vs " + b.shape());
    real_of_t<T> s{};
    for (std::size_t k = 0; k < a.size(); ++k) s = std::max(s, std::abs(a.data()[k] - b.data()[k]));
    return s;
}

template <Scalar T>
bool is_symmetric(const BasicMatrix<T>& m, real_of_t<T> threshold) {
    if (!m.is_square()) return false;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > threshold) return false;
    return true;
}

inline ComplexMatrix to_complex(const Matrix& m) { return m.cast<Complex>(); }

}  // namespace detdyn
