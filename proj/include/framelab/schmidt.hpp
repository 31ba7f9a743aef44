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
 * Bipartite Schmidt decomposition, Born-weighted branch sampling and
 * entanglement entropy.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "framelab/error.hpp"
#include "framelab/hilbert.hpp"
#include "framelab/linalg.hpp"

namespace framelab {

/// Split of a space's factors into two non-empty, disjoint, covering sets.
struct Bipartition {
    std::vector<std::string> left;
    std::vector<std::string> right;

    [[nodiscard]] Bipartition swapped() const { return {right, left}; }

    void validate(const Space &space) const {
        require(!left.empty() && !right.empty(), ErrorKind::InvalidBipartition,
                "both sides of a cut must be non-empty");
        std::vector<std::string> all = left;
        all.insert(all.end(), right.begin(), right.end());
        std::sort(all.begin(), all.end());
        require(std::adjacent_find(all.begin(), all.end()) == all.end(),
                ErrorKind::InvalidBipartition, "cut sides overlap");
        require(all.size() == space.rank(), ErrorKind::InvalidBipartition,
                "cut does not cover the space");
        for (const auto &l : all) {
            require(space.contains(l), ErrorKind::InvalidBipartition,
                    "cut names unknown factor '" + l + "'");
        }
    }
};

struct SchmidtResult {
    std::vector<double> coefficients;       // descending, >= 0
    std::vector<StateVector> left_states;   // orthonormal, on the left factors
    std::vector<StateVector> right_states;  // orthonormal, on the right factors
    double truncation_residual = 0.0;       // summed square of dropped coefficients
    std::vector<std::vector<std::size_t>> degenerate_groups;
    Bipartition cut;
    Space space;

    [[nodiscard]] std::size_t rank() const noexcept { return coefficients.size(); }

    /// Born weights C_j^2 / sum C_k^2.
    [[nodiscard]] std::vector<double> probabilities() const {
        double total = 0.0;
        for (double c : coefficients) {
            total += c * c;
        }
        std::vector<double> p;
        p.reserve(coefficients.size());
        for (double c : coefficients) {
            p.push_back(c * c / total);
        }
        return p;
    }
};

inline constexpr double default_truncation_tolerance = 1e-12;
inline constexpr double degeneracy_tolerance = 1e-8;

namespace detail {

struct MatrixSchmidt {
    std::vector<double> c;
    std::vector<std::vector<Complex>> u; // length rows
    std::vector<std::vector<Complex>> v; // length cols
};

/// M = sum_k c_k u_k v_k^T with orthonormal u, v; assumes rows <= cols.
inline MatrixSchmidt schmidt_of_wide(const CMatrix &m) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    CMatrix gram(rows, rows);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = i; j < rows; ++j) {
            Complex s{};
            for (std::size_t r = 0; r < cols; ++r) {
                s += cmul(m(i, r), std::conj(m(j, r)));
            }
            gram(i, j) = s;
            gram(j, i) = std::conj(s);
        }
    }
    const auto eig = hermitian_eigen(gram);
    MatrixSchmidt out;
    for (std::size_t k = 0; k < rows; ++k) {
        std::vector<Complex> u(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            u[i] = eig.vectors(i, k);
        }
        // w = M^T conj(u) = c v
        std::vector<Complex> w(cols);
        for (std::size_t i = 0; i < rows; ++i) {
            const Complex cu = std::conj(u[i]);
            for (std::size_t r = 0; r < cols; ++r) {
                w[r] += cmul(m(i, r), cu);
            }
        }
        double n2 = 0.0;
        for (const auto &x : w) {
            n2 += std::norm(x);
        }
        out.c.push_back(std::sqrt(n2));
        out.u.push_back(std::move(u));
        out.v.push_back(std::move(w));
    }
    return out;
}

inline CMatrix transpose(const CMatrix &m) {
    CMatrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            t(c, r) = m(r, c);
        }
    }
    return t;
}

/// Coefficient matrix (left index x right index) in the orthonormal basis.
inline CMatrix coefficient_matrix(const StateVector &psi, std::span<const std::size_t> left_axes) {
    const AxisSplit split(psi.space(), left_axes);
    CMatrix m(split.dim_a(), split.dim_b());
    const double s = std::sqrt(psi.space().weight());
    split.for_each([&](std::size_t flat, std::size_t ia, std::size_t ib) { m(ia, ib) = psi[flat] * s; });
    return m;
}

} // namespace detail

/**
 * Schmidt decomposition across `cut`.
 *
 * The smaller side's Gram matrix is diagonalized by Jacobi rotations and the
 * partner vectors are recovered by applying the coefficient matrix; each
 * coefficient is the norm of its recovered partner, which stays accurate
 * for coefficients far below sqrt(machine epsilon). Coefficients below
 * `trunc_tol` are dropped. The largest-magnitude amplitude of every left
 * vector is made real positive.
 */
inline SchmidtResult schmidt_decompose(const StateVector &psi, const Bipartition &cut,
                                       double trunc_tol = default_truncation_tolerance) {
    const Space &space = psi.space();
    cut.validate(space);
    require(std::abs(psi.norm() - 1.0) <= 1e-8, ErrorKind::UnnormalizedInput,
            "Schmidt decomposition needs a normalized state (norm " + std::to_string(psi.norm()) +
                ")");
    const auto left_axes = axes_of(space, cut.left);
    const CMatrix m = detail::coefficient_matrix(psi, left_axes);

    // ms.u spans the smaller side; ms.v holds the recovered partners c v.
    const bool transposed = m.rows() > m.cols();
    const detail::MatrixSchmidt ms =
        transposed ? detail::schmidt_of_wide(detail::transpose(m)) : detail::schmidt_of_wide(m);

    std::vector<std::size_t> order(ms.c.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ms.c[a] > ms.c[b]; });

    SchmidtResult out;
    out.cut = cut;
    out.space = space;
    const Space left_space = space.subspace(cut.left);
    const Space right_space = space.subspace(cut.right);

    std::vector<std::vector<Complex>> kept_rec;
    std::vector<std::vector<Complex>> kept_u;
    std::vector<std::vector<Complex>> kept_v;
    for (std::size_t k : order) {
        const double c = ms.c[k];
        if (c < trunc_tol || c == 0.0) {
            out.truncation_residual += c * c;
            continue;
        }
        auto v = ms.v[k];
        for (auto &x : v) {
            x /= c;
        }
        // Modified Gram-Schmidt against the larger partners already kept.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto &q : kept_rec) {
                Complex proj{};
                for (std::size_t i = 0; i < v.size(); ++i) {
                    proj += std::conj(q[i]) * v[i];
                }
                for (std::size_t i = 0; i < v.size(); ++i) {
                    v[i] -= proj * q[i];
                }
            }
            double n2 = 0.0;
            for (const auto &x : v) {
                n2 += std::norm(x);
            }
            if (n2 < 1e-300) {
                break;
            }
            const double inv = 1.0 / std::sqrt(n2);
            for (auto &x : v) {
                x *= inv;
            }
        }
        auto u = ms.u[k];
        if (transposed) {
            std::swap(u, v);
        }
        std::size_t peak = 0;
        for (std::size_t i = 1; i < u.size(); ++i) {
            if (std::abs(u[i]) > std::abs(u[peak]) * (1.0 + 1e-12)) {
                peak = i;
            }
        }
        const Complex phase = std::abs(u[peak]) > 0.0 ? u[peak] / std::abs(u[peak]) : Complex(1.0);
        for (auto &x : u) {
            x *= std::conj(phase);
        }
        for (auto &x : v) {
            x *= phase;
        }
        out.coefficients.push_back(c);
        kept_rec.push_back(transposed ? u : v);
        kept_u.push_back(u);
        kept_v.push_back(v);
    }
    for (std::size_t k = 0; k < kept_u.size(); ++k) {
        out.left_states.push_back(StateVector::from_coefficients(left_space, std::move(kept_u[k])));
        out.right_states.push_back(StateVector::from_coefficients(right_space, std::move(kept_v[k])));
    }

    if (!out.coefficients.empty()) {
        const double tol = degeneracy_tolerance * out.coefficients.front();
        std::vector<std::size_t> group{0};
        for (std::size_t k = 1; k <= out.coefficients.size(); ++k) {
            if (k < out.coefficients.size() &&
                out.coefficients[k - 1] - out.coefficients[k] < tol) {
                group.push_back(k);
                continue;
            }
            if (group.size() > 1) {
                out.degenerate_groups.push_back(group);
            }
            group = {k};
        }
    }
    return out;
}

/// sum_j C_j u_j (x) v_j laid back onto the original factor order.
inline StateVector reconstruct(const SchmidtResult &r) {
    const auto left_axes = axes_of(r.space, r.cut.left);
    const AxisSplit split(r.space, left_axes);
    std::vector<Complex> amps(r.space.dimension());
    std::vector<std::vector<Complex>> u;
    std::vector<std::vector<Complex>> v;
    for (std::size_t k = 0; k < r.rank(); ++k) {
        u.push_back(r.left_states[k].coefficients());
        v.push_back(r.right_states[k].coefficients());
    }
    split.for_each([&](std::size_t flat, std::size_t ia, std::size_t ib) {
        Complex s{};
        for (std::size_t k = 0; k < r.rank(); ++k) {
            s += r.coefficients[k] * u[k][ia] * v[k][ib];
        }
        amps[flat] = s;
    });
    return StateVector::from_coefficients(r.space, std::move(amps));
}

/**
 * Reproducible branch sampler.
 *
 * Generator: std::mt19937_64 seeded with the given seed (the standard fixes
 * its output sequence). Each draw takes one 64-bit word x, forms
 * u = (x >> 11) * 2^-53 in [0, 1), and returns the first index j whose
 * cumulative Born weight exceeds u.
 */
class BranchSampler {
  public:
    explicit BranchSampler(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::size_t draw(std::span<const double> probabilities) {
        require(!probabilities.empty(), ErrorKind::EmptyDecomposition, "no branches to sample");
        const double u = uniform();
        double cumulative = 0.0;
        for (std::size_t j = 0; j < probabilities.size(); ++j) {
            cumulative += probabilities[j];
            if (u < cumulative) {
                return j;
            }
        }
        return probabilities.size() - 1;
    }

    std::size_t draw(const SchmidtResult &result) {
        require(!result.coefficients.empty(), ErrorKind::EmptyDecomposition,
                "decomposition has no coefficients");
        const auto p = result.probabilities();
        return draw(std::span<const double>(p));
    }

  private:
    std::mt19937_64 engine_;
};

/// One draw j with probability C_j^2 / sum C_k^2.
inline std::size_t sample_branch(const SchmidtResult &result, std::uint64_t seed) {
    BranchSampler sampler(seed);
    return sampler.draw(result);
}

/// -sum C_j^2 ln C_j^2.
inline double entanglement_entropy(const SchmidtResult &result) {
    double s = 0.0;
    for (double c : result.coefficients) {
        const double p = c * c;
        if (p > 0.0) {
            s -= p * std::log(p);
        }
    }
    return s;
}

} // namespace framelab
