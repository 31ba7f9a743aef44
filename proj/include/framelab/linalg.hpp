// Copyright 2026 The framelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Small dense complex linear algebra: a row-major matrix type and a cyclic
 * Jacobi eigensolver for Hermitian matrices.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "framelab/error.hpp"
#include "framelab/fft.hpp"

namespace framelab {

class CMatrix {
  public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            m(k, k) = 1.0;
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

    Complex &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Complex &operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<Complex> data() noexcept { return data_; }
    [[nodiscard]] std::span<const Complex> data() const noexcept { return data_; }

    [[nodiscard]] CMatrix adjoint() const {
        CMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t c = 0; c < cols_; ++c) {
                out(c, r) = std::conj((*this)(r, c));
            }
        }
        return out;
    }

    CMatrix &operator+=(const CMatrix &other) {
        require(rows_ == other.rows_ && cols_ == other.cols_, ErrorKind::DimensionMismatch,
                "matrix sum of mismatched shapes");
        for (std::size_t k = 0; k < data_.size(); ++k) {
            data_[k] += other.data_[k];
        }
        return *this;
    }

    CMatrix &operator-=(const CMatrix &other) {
        require(rows_ == other.rows_ && cols_ == other.cols_, ErrorKind::DimensionMismatch,
                "matrix difference of mismatched shapes");
        for (std::size_t k = 0; k < data_.size(); ++k) {
            data_[k] -= other.data_[k];
        }
        return *this;
    }

    CMatrix &operator*=(Complex scale) {
        for (auto &v : data_) {
            v *= scale;
        }
        return *this;
    }

    friend CMatrix operator+(CMatrix a, const CMatrix &b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix &b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, Complex s) { return a *= s; }

    friend CMatrix operator*(const CMatrix &a, const CMatrix &b) {
        require(a.cols_ == b.rows_, ErrorKind::DimensionMismatch, "matrix product shape mismatch");
        CMatrix out(a.rows_, b.cols_);
        for (std::size_t r = 0; r < a.rows_; ++r) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const Complex v = a(r, k);
                if (v == Complex{}) {
                    continue;
                }
                for (std::size_t c = 0; c < b.cols_; ++c) {
                    out(r, c) += detail::cmul(v, b(k, c));
                }
            }
        }
        return out;
    }

    [[nodiscard]] Complex trace() const {
        Complex t{};
        for (std::size_t k = 0; k < std::min(rows_, cols_); ++k) {
            t += (*this)(k, k);
        }
        return t;
    }

    [[nodiscard]] double frobenius_norm() const {
        double s = 0.0;
        for (const auto &v : data_) {
            s += std::norm(v);
        }
        return std::sqrt(s);
    }

    /// Largest |A - A^dagger| entry; zero for exactly Hermitian input.
    [[nodiscard]] double hermiticity_error() const {
        if (!square()) {
            return INFINITY;
        }
        double err = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t c = r; c < cols_; ++c) {
                err = std::max(err, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
            }
        }
        return err;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

/// Eigen-pairs of a Hermitian matrix; values ascending, vectors as columns.
struct HermitianEigen {
    std::vector<double> values;
    CMatrix vectors;
};

/**
 * Cyclic Jacobi diagonalization of a Hermitian matrix.
 *
 * Each rotation first removes the phase of the pivot element, then applies
 * the real symmetric Jacobi rotation, so every step is unitary and the
 * accumulated eigenvector matrix stays orthonormal to rounding.
 */
inline HermitianEigen hermitian_eigen(const CMatrix &input, bool want_vectors = true) {
    require(input.square(), ErrorKind::DimensionMismatch, "eigensolver needs a square matrix");
    const std::size_t n = input.rows();
    CMatrix a = input;
    for (std::size_t r = 0; r < n; ++r) {
        a(r, r) = a(r, r).real();
        for (std::size_t c = r + 1; c < n; ++c) {
            const Complex avg = 0.5 * (a(r, c) + std::conj(a(c, r)));
            a(r, c) = avg;
            a(c, r) = std::conj(avg);
        }
    }
    CMatrix v = want_vectors ? CMatrix::identity(n) : CMatrix();

    const double scale = std::max(a.frobenius_norm(), 1e-300);
    constexpr int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += std::norm(a(p, q));
            }
        }
        if (std::sqrt(2.0 * off) <= 1e-16 * scale) {
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double r = std::abs(apq);
                if (r <= 1e-300 || r <= 1e-18 * scale) {
                    continue;
                }
                const Complex phase = apq / r;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double theta = (aqq - app) / (2.0 * r);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const Complex sp = s * std::conj(phase); // J(q,p) = -sp, J(q,q) = c*conj(phase)
                const Complex cp = c * std::conj(phase);

                // A <- A J (columns p, q)
                for (std::size_t k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = a(k, q);
                    a(k, p) = c * akp - detail::cmul(sp, akq);
                    a(k, q) = s * akp + detail::cmul(cp, akq);
                }
                // A <- J^dagger A (rows p, q)
                const Complex sps = std::conj(sp);
                const Complex cps = std::conj(cp);
                for (std::size_t k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = a(q, k);
                    a(p, k) = c * apk - detail::cmul(sps, aqk);
                    a(q, k) = s * apk + detail::cmul(cps, aqk);
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                if (want_vectors) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const Complex vkp = v(k, p);
                        const Complex vkq = v(k, q);
                        v(k, p) = c * vkp - detail::cmul(sp, vkq);
                        v(k, q) = s * vkp + detail::cmul(cp, vkq);
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a(i, i).real() < a(j, j).real();
    });
    HermitianEigen out;
    out.values.resize(n);
    if (want_vectors) {
        out.vectors = CMatrix(n, n);
    }
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]).real();
        if (want_vectors) {
            for (std::size_t r = 0; r < n; ++r) {
                out.vectors(r, k) = v(r, order[k]);
            }
        }
    }
    return out;
}

/// exp(-i H t) for Hermitian H, via its eigen-decomposition.
inline CMatrix unitary_exponential(const CMatrix &hermitian, double t) {
    const std::size_t n = hermitian.rows();
    if (n == 1) {
        CMatrix u(1, 1);
        u(0, 0) = std::polar(1.0, -hermitian(0, 0).real() * t);
        return u;
    }
    const auto eig = hermitian_eigen(hermitian);
    CMatrix u(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const Complex phase = std::polar(1.0, -eig.values[k] * t);
        for (std::size_t r = 0; r < n; ++r) {
            const Complex vr = eig.vectors(r, k) * phase;
            for (std::size_t c = 0; c < n; ++c) {
                u(r, c) += detail::cmul(vr, std::conj(eig.vectors(c, k)));
            }
        }
    }
    return u;
}

/// Spectral norm of a Hermitian matrix.
inline double hermitian_norm(const CMatrix &hermitian) {
    const auto values = hermitian_eigen(hermitian, false).values;
    double m = 0.0;
    for (double v : values) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

} // namespace framelab
