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
 * Iterative radix-2 Cooley-Tukey transform used by the spectral kinetic
 * propagator. Sizes must be powers of two.
 */

#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "framelab/error.hpp"

namespace framelab {

using Complex = std::complex<double>;

namespace detail {
// Plain complex product; avoids the C99 Annex G NaN-recovery call that
// operator* emits without -fcx-limited-range.
inline Complex cmul(Complex a, Complex b) noexcept {
    return {a.real() * b.real() - a.imag() * b.imag(),
            a.real() * b.imag() + a.imag() * b.real()};
}
} // namespace detail

class Fft {
  public:
    explicit Fft(std::size_t n) : n_(n), twiddle_(n / 2), bitrev_(n) {
        require(n >= 1 && std::has_single_bit(n), ErrorKind::InvalidArgument,
                "FFT length must be a power of two");
        const unsigned bits = static_cast<unsigned>(std::countr_zero(n));
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double angle =
                -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            twiddle_[k] = Complex(std::cos(angle), std::sin(angle));
        }
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t r = 0;
            for (unsigned b = 0; b < bits; ++b) {
                r |= ((k >> b) & 1U) << (bits - 1 - b);
            }
            bitrev_[k] = r;
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }

    /// X_k = sum_j x_j exp(-2 pi i jk/n), in place.
    void forward(std::span<Complex> data) const { run(data, false); }

    /// Inverse including the 1/n factor, in place.
    void inverse(std::span<Complex> data) const {
        run(data, true);
        const double scale = 1.0 / static_cast<double>(n_);
        for (auto &v : data) {
            v *= scale;
        }
    }

    /// Inverse without the 1/n factor, for callers that fold it elsewhere.
    void inverse_unnormalized(std::span<Complex> data) const { run(data, true); }

    /// Angular wavenumbers in transform order for a periodic box of length L.
    [[nodiscard]] static std::vector<double> wavenumbers(std::size_t n, double length) {
        std::vector<double> k(n);
        const double dk = 2.0 * std::numbers::pi / length;
        for (std::size_t j = 0; j < n; ++j) {
            const auto signed_j = j < n / 2 ? static_cast<double>(j)
                                            : static_cast<double>(j) - static_cast<double>(n);
            k[j] = signed_j * dk;
        }
        return k;
    }

  private:
    void run(std::span<Complex> data, bool inverse) const {
        require(data.size() == n_, ErrorKind::DimensionMismatch, "FFT buffer length mismatch");
        for (std::size_t k = 0; k < n_; ++k) {
            const std::size_t r = bitrev_[k];
            if (r > k) {
                std::swap(data[k], data[r]);
            }
        }
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t step = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    Complex w = twiddle_[j * step];
                    if (inverse) {
                        w = std::conj(w);
                    }
                    const Complex u = data[start + j];
                    const Complex v = detail::cmul(data[start + j + half], w);
                    data[start + j] = u + v;
                    data[start + j + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<Complex> twiddle_;
    std::vector<std::size_t> bitrev_;
};

} // namespace framelab
