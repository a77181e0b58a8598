#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ldosim/errors.hpp"

namespace ldosim {

/// Dense row-major square matrix. The systems here have a few tens of unknowns.
template <class T>
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n) : n_(n), data_(n * n, T{}) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * n_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * n_ + c]; }
    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    [[nodiscard]] double max_abs() const noexcept {
        double m = 0.0;
        for (const T& v : data_) m = std::max(m, static_cast<double>(std::abs(v)));
        return m;
    }

private:
    std::size_t n_ = 0;
    std::vector<T> data_;
};

/// LU factorization with partial pivoting. Throws SingularMatrixError naming
/// the column (unknown index) whose pivot vanished.
template <class T>
class LuFactor {
public:
    explicit LuFactor(Matrix<T> a) : lu_(std::move(a)), perm_(lu_.size()) {
        const std::size_t n = lu_.size();
        const double scale = lu_.max_abs();
        const double tiny = (scale > 0.0 ? scale : 1.0) * 1e-17;
        for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            double best = std::abs(lu_(k, k));
            for (std::size_t r = k + 1; r < n; ++r) {
                const double v = std::abs(lu_(r, k));
                if (v > best) {
                    best = v;
                    p = r;
                }
            }
            if (!(best > tiny)) throw SingularMatrixError("singular matrix at unknown " + std::to_string(k), k);
            if (p != k) {
                for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(p, c));
                std::swap(perm_[k], perm_[p]);
            }
            const T pivot = lu_(k, k);
            for (std::size_t r = k + 1; r < n; ++r) {
                const T f = lu_(r, k) / pivot;
                lu_(r, k) = f;
                if (f == T{}) continue;
                for (std::size_t c = k + 1; c < n; ++c) lu_(r, c) -= f * lu_(k, c);
            }
        }
    }

    [[nodiscard]] std::vector<T> solve(std::span<const T> b) const {
        const std::size_t n = lu_.size();
        std::vector<T> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
            x[i] /= lu_(i, i);
        }
        return x;
    }

private:
    Matrix<T> lu_;
    std::vector<std::size_t> perm_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<std::complex<double>>;

}  // namespace ldosim
