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
 * Frame transformations between the auxiliary frame, where the composite
 * evolves unitarily, and the intrinsic frame of the macroscopic system,
 * where the composite is described by a probabilistic mixture of product
 * branches. Also the density-matrix constructions used to compare the two
 * descriptions.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "framelab/error.hpp"
#include "framelab/hilbert.hpp"
#include "framelab/linalg.hpp"
#include "framelab/schmidt.hpp"

namespace framelab {

/// Interaction strength above which a frame transformation is flagged.
inline constexpr double negligible_interaction = 1e-8;

/**
 * Density matrix on a set of kept factors, expressed in the orthonormal
 * discrete basis: grid points carry weight sqrt(dx), so the trace is the
 * total probability and eigenvalues are occupation probabilities.
 */
struct DensityMatrix {
    Space space;
    CMatrix matrix;

    [[nodiscard]] std::vector<std::string> labels() const { return space.labels(); }
    [[nodiscard]] static constexpr const char *representation() {
        return "orthonormal grid basis (amplitude * sqrt(dx)) x level basis";
    }
    [[nodiscard]] double trace() const { return matrix.trace().real(); }
    [[nodiscard]] double purity() const {
        double s = 0.0;
        for (const auto &v : matrix.data()) {
            s += std::norm(v);
        }
        return s;
    }
    [[nodiscard]] std::vector<double> eigenvalues() const {
        return hermitian_eigen(matrix, false).values;
    }
    /// Largest violation of Hermiticity, unit trace and positivity.
    [[nodiscard]] double validity_error() const {
        const auto ev = eigenvalues();
        const double negative = ev.empty() ? 0.0 : std::max(0.0, -ev.front());
        return std::max({matrix.hermiticity_error(), std::abs(trace() - 1.0), negative});
    }
};

/// One product branch C_j u_j (x) v_j with weight |C_j|^2.
struct Branch {
    double probability = 0.0;
    StateVector left;
    StateVector right;
    std::vector<std::string> order; // factor order of the source state

    /// Normalized product state u (x) v in the source factor order.
    [[nodiscard]] StateVector state() const {
        return permute(tensor_product({left, right}), order);
    }
};

/// The intrinsic-frame description: a list of (probability, branch) pairs.
struct BranchEnsemble {
    std::vector<Branch> branches;
    SchmidtResult provenance;
    /// Set when the transformation was requested while the interaction was still active.
    bool during_interaction = false;

    [[nodiscard]] double total_probability() const {
        double s = 0.0;
        for (const auto &b : branches) {
            s += b.probability;
        }
        return s;
    }
};

/// One branch drawn by the discontinuous transformation.
struct SampledBranch {
    std::size_t index = 0;
    Branch branch;
};

/**
 * Auxiliary-frame composite Phi'_A(R_A) (x) phi_A (x) Psi_S, with the
 * center-of-mass packet centered at the origin and at rest.
 */
inline StateVector lift_to_auxiliary(const StateVector &internal, const StateVector &system,
                                     GaussianParams cm, const Grid &cm_grid,
                                     const std::string &cm_label = "R_A") {
    require(internal.is_normalized() && system.is_normalized(), ErrorKind::UnnormalizedInput,
            "inputs to the frame lift must be normalized");
    cm.R0 = 0.0;
    cm.P0 = 0.0;
    const StateVector phi = make_gaussian(cm_grid, cm, cm_label);
    return tensor_product({phi, internal, system});
}

struct RelativeState {
    StateVector state;
    double overlap_weight = 0.0;
};

/**
 * Removes the center-of-mass factor by projecting onto the freely evolved
 * packet: Psi_1 = <Phi'_A(t)| Psi'_{S+A}(t)> over R_A, renormalized. The
 * returned weight is the norm before renormalization.
 */
inline RelativeState extract_relative_state(const StateVector &composite, const StateVector &cm_t) {
    require(cm_t.space().rank() == 1 && cm_t.space().factor(0).is_coordinate(),
            ErrorKind::InvalidArgument, "center-of-mass packet must be one coordinate factor");
    const std::string &label = cm_t.space().factor(0).label();
    const Space &space = composite.space();
    const auto ax = space.find(label);
    require(ax.has_value(), ErrorKind::MissingFactor, "composite has no '" + label + "' factor");
    require(space.factor(*ax) == cm_t.space().factor(0), ErrorKind::SpaceMismatch,
            "center-of-mass grids differ");

    const std::size_t axes[] = {*ax};
    const AxisSplit split(space, axes);
    std::vector<Complex> out(split.dim_b());
    const double dx = space.factor(*ax).weight();
    split.for_each([&](std::size_t flat, std::size_t ir, std::size_t irest) {
        out[irest] += std::conj(cm_t[ir]) * composite[flat];
    });
    std::vector<Factor> rest;
    for (const auto &f : space.factors()) {
        if (f.label() != label) {
            rest.push_back(f);
        }
    }
    for (auto &v : out) {
        v *= dx;
    }
    StateVector projected(Space(std::move(rest)), std::move(out));
    const double weight = projected.norm();
    require(weight >= 1e-6, ErrorKind::VanishingOverlap,
            "projection onto the center-of-mass packet has weight " + std::to_string(weight));
    return {projected.scaled(1.0 / weight), weight};
}

/**
 * Intrinsic-frame description of psi1: every Schmidt branch across `cut`
 * with its weight |C_j|^2. `interaction` is the interaction strength at the
 * time of the transformation; values above the negligible threshold mark
 * the ensemble as taken during the interaction period.
 */
inline BranchEnsemble transform_to_intrinsic(const StateVector &psi1, const Bipartition &cut,
                                             double interaction = 0.0) {
    BranchEnsemble ens;
    ens.provenance = schmidt_decompose(psi1, cut);
    ens.during_interaction = interaction >= negligible_interaction;
    const auto p = ens.provenance.probabilities();
    const auto order = psi1.space().labels();
    for (std::size_t j = 0; j < p.size(); ++j) {
        ens.branches.push_back(
            {p[j], ens.provenance.left_states[j], ens.provenance.right_states[j], order});
    }
    return ens;
}

/// The discontinuous transformation: one branch drawn with probability |C_j|^2.
inline SampledBranch transform_to_intrinsic_sampled(const StateVector &psi1, const Bipartition &cut,
                                                    std::uint64_t seed) {
    auto ens = transform_to_intrinsic(psi1, cut);
    const std::size_t j = sample_branch(ens.provenance, seed);
    return {j, std::move(ens.branches[j])};
}

/// Partial trace over every factor not in `keep`.
inline DensityMatrix reduced_density_matrix(const StateVector &psi,
                                            std::span<const std::string> keep) {
    const Space &space = psi.space();
    require(!keep.empty() && keep.size() < space.rank(), ErrorKind::InvalidKeepSet,
            "keep set must be a proper non-empty subset of the factors");
    for (const auto &l : keep) {
        require(space.contains(l), ErrorKind::InvalidKeepSet, "keep set names unknown factor '" + l + "'");
    }
    const auto axes = axes_of(space, keep);
    const AxisSplit split(space, axes);
    const std::size_t nk = split.dim_a();
    const std::size_t nr = split.dim_b();
    // Coefficient matrix laid out rest-major so each rest column is contiguous.
    std::vector<Complex> m(nk * nr);
    const double s = std::sqrt(space.weight());
    split.for_each([&](std::size_t flat, std::size_t ik, std::size_t ir) { m[ir * nk + ik] = psi[flat] * s; });
    CMatrix rho(nk, nk);
    for (std::size_t r = 0; r < nr; ++r) {
        const Complex *col = &m[r * nk];
        for (std::size_t i = 0; i < nk; ++i) {
            if (col[i] == Complex{}) {
                continue;
            }
            for (std::size_t j = i; j < nk; ++j) {
                rho(i, j) += detail::cmul(col[i], std::conj(col[j]));
            }
        }
    }
    for (std::size_t i = 0; i < nk; ++i) {
        rho(i, i) = rho(i, i).real();
        for (std::size_t j = i + 1; j < nk; ++j) {
            rho(j, i) = std::conj(rho(i, j));
        }
    }
    std::vector<std::string> kept(keep.begin(), keep.end());
    return {space.subspace(kept), std::move(rho)};
}

inline DensityMatrix reduced_density_matrix(const StateVector &psi,
                                            std::initializer_list<std::string> keep) {
    const std::vector<std::string> k(keep);
    return reduced_density_matrix(psi, std::span<const std::string>(k));
}

namespace detail {

inline DensityMatrix pure_density_matrix(const StateVector &psi) {
    const auto c = psi.coefficients();
    CMatrix rho(c.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            rho(i, j) = cmul(c[i], std::conj(c[j]));
        }
    }
    return {psi.space(), std::move(rho)};
}

inline bool same_label_set(std::span<const std::string> a, std::vector<std::string> b) {
    std::vector<std::string> x(a.begin(), a.end());
    std::sort(x.begin(), x.end());
    std::sort(b.begin(), b.end());
    return x == b;
}

inline bool subset_of(std::span<const std::string> a, const Space &space) {
    return std::all_of(a.begin(), a.end(), [&](const std::string &l) { return space.contains(l); });
}

} // namespace detail

/// sum_j p_j |psi_j,keep><psi_j,keep| over the ensemble's branches.
inline DensityMatrix mixed_density_matrix(const BranchEnsemble &ensemble,
                                          std::span<const std::string> keep) {
    require(!ensemble.branches.empty(), ErrorKind::EmptyDecomposition, "ensemble has no branches");
    std::optional<DensityMatrix> total;
    for (const auto &b : ensemble.branches) {
        DensityMatrix part;
        auto from_piece = [&](const StateVector &piece) {
            return detail::same_label_set(keep, piece.space().labels())
                       ? detail::pure_density_matrix(piece)
                       : reduced_density_matrix(piece, keep);
        };
        if (detail::subset_of(keep, b.left.space())) {
            part = from_piece(b.left);
        } else if (detail::subset_of(keep, b.right.space())) {
            part = from_piece(b.right);
        } else {
            const StateVector full = b.state();
            for (const auto &l : keep) {
                require(full.space().contains(l), ErrorKind::MissingFactor,
                        "factor '" + l + "' not in branch");
            }
            part = detail::same_label_set(keep, full.space().labels())
                       ? detail::pure_density_matrix(full)
                       : reduced_density_matrix(full, keep);
        }
        part.matrix *= Complex(b.probability);
        if (!total) {
            total = std::move(part);
        } else {
            total->matrix += part.matrix;
        }
    }
    return std::move(*total);
}

inline DensityMatrix mixed_density_matrix(const BranchEnsemble &ensemble,
                                          std::initializer_list<std::string> keep) {
    const std::vector<std::string> k(keep);
    return mixed_density_matrix(ensemble, std::span<const std::string>(k));
}

/// (1/2) sum |eigenvalues(a - b)|.
inline double trace_distance(const DensityMatrix &a, const DensityMatrix &b) {
    require(a.space == b.space && a.matrix.rows() == b.matrix.rows(), ErrorKind::DimensionMismatch,
            "density matrices live on different bases");
    const auto ev = hermitian_eigen(a.matrix - b.matrix, false).values;
    double s = 0.0;
    for (double v : ev) {
        s += std::abs(v);
    }
    return 0.5 * s;
}

} // namespace framelab
