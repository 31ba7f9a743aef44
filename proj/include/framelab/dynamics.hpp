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
 * Composite Hamiltonians, exact split-step propagation, the factorized
 * (frozen center-of-mass) propagation, and the diagnostics that quantify
 * how good the factorized form is.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "framelab/error.hpp"
#include "framelab/fft.hpp"
#include "framelab/hilbert.hpp"
#include "framelab/linalg.hpp"

namespace framelab {

/// Real function of the separation x_particle - x_center.
using Profile = std::function<double(double)>;

/// g exp(-d^2 / 2 w^2).
inline Profile gaussian_profile(double g, double width) {
    require(width > 0.0, ErrorKind::InvalidArgument, "profile width must be positive");
    return [g, width](double d) { return g * std::exp(-d * d / (2.0 * width * width)); };
}

struct KineticTerm {
    std::string label;
    double mass = 1.0;
};

/// External potential sampled on the grid of one coordinate factor.
struct Potential {
    std::string label;
    std::vector<double> values;
};

/**
 * profile(x_particle - x_center) (x) coupling, where coupling acts on the
 * level factor (or is 1x1 when the space has none). An empty center label
 * pins the center at `frozen_center`.
 */
struct InteractionTerm {
    std::string particle;
    std::optional<std::string> center;
    double frozen_center = 0.0;
    Profile profile;
    CMatrix coupling = CMatrix::identity(1);
};

/// Ingredients of the total Hamiltonian, kinetic + potentials + internal + interactions.
struct HamiltonianSpec {
    std::vector<KineticTerm> kinetic;
    std::vector<Potential> potentials;
    std::optional<std::string> level;
    CMatrix internal;
    std::vector<InteractionTerm> interactions;
    double hbar = 1.0;

    /// Checks every label against `space` and the Hermiticity of the level operators.
    void validate(const Space &space) const {
        require(hbar > 0.0, ErrorKind::InvalidArgument, "hbar must be positive");
        auto coordinate = [&](const std::string &label) {
            const auto ax = space.find(label);
            require(ax.has_value(), ErrorKind::SpaceMismatch,
                    "Hamiltonian refers to missing factor '" + label + "'");
            require(space.factor(*ax).is_coordinate(), ErrorKind::SpaceMismatch,
                    "factor '" + label + "' is not a coordinate");
            return *ax;
        };
        for (const auto &k : kinetic) {
            coordinate(k.label);
            require(k.mass > 0.0, ErrorKind::InvalidArgument, "kinetic mass must be positive");
        }
        for (const auto &p : potentials) {
            const auto ax = coordinate(p.label);
            require(p.values.size() == space.factor(ax).dimension(), ErrorKind::DimensionMismatch,
                    "potential on '" + p.label + "' has the wrong number of samples");
        }
        std::size_t d = 1;
        if (level) {
            const auto ax = space.find(*level);
            require(ax.has_value() && !space.factor(*ax).is_coordinate(), ErrorKind::SpaceMismatch,
                    "level factor '" + *level + "' missing from space");
            d = space.factor(*ax).dimension();
        }
        if (internal.rows() != 0) {
            require(level.has_value() && internal.rows() == d && internal.cols() == d,
                    ErrorKind::DimensionMismatch, "internal Hamiltonian must be d x d");
            require(internal.hermiticity_error() <= 1e-12, ErrorKind::InvalidArgument,
                    "internal Hamiltonian is not Hermitian");
        }
        for (const auto &t : interactions) {
            coordinate(t.particle);
            if (t.center) {
                coordinate(*t.center);
            }
            require(static_cast<bool>(t.profile), ErrorKind::InvalidArgument,
                    "interaction without a profile");
            require(t.coupling.rows() == d && t.coupling.cols() == d, ErrorKind::DimensionMismatch,
                    "coupling operator must be d x d");
            require(t.coupling.hermiticity_error() <= 1e-12, ErrorKind::InvalidArgument,
                    "coupling operator is not Hermitian");
        }
    }
};

struct PropagationResult {
    std::vector<std::pair<double, StateVector>> trajectory;
    StateVector final;
    double norm_drift = 0.0;
    double dt = 0.0;
    std::size_t steps = 0;
};

struct PropagationOptions {
    std::size_t checkpoint_every = 100;
    bool store_trajectory = true;
};

namespace detail {

/// Position-diagonal (level-block-diagonal) part of H on one space.
class PotentialBlocks {
  public:
    PotentialBlocks(const Space &space, const HamiltonianSpec &h, bool include_interaction = true,
                    bool include_background = true) {
        d_ = 1;
        if (h.level) {
            level_axis_ = space.axis(*h.level);
            d_ = space.factor(*level_axis_).dimension();
            level_stride_ = space.stride(*level_axis_);
        }
        // Coordinate axes that any term depends on.
        std::vector<bool> relevant(space.rank(), false);
        if (include_background) {
            for (const auto &p : h.potentials) {
                relevant[space.axis(p.label)] = true;
            }
        }
        if (include_interaction) {
            for (const auto &t : h.interactions) {
                relevant[space.axis(t.particle)] = true;
                if (t.center) {
                    relevant[space.axis(*t.center)] = true;
                }
            }
        }
        std::vector<std::size_t> rel_axes;
        for (std::size_t ax = 0; ax < space.rank(); ++ax) {
            if (relevant[ax]) {
                rel_axes.push_back(ax);
            }
        }
        std::vector<std::size_t> rel_stride(space.rank(), 0);
        std::size_t nblocks = 1;
        for (std::size_t k = rel_axes.size(); k-- > 0;) {
            rel_stride[rel_axes[k]] = nblocks;
            nblocks *= space.factor(rel_axes[k]).dimension();
        }

        // Enumerate points (all axes except the level axis).
        const std::size_t npoints = space.dimension() / d_;
        base_.resize(npoints);
        block_.resize(npoints);
        std::vector<std::size_t> idx(space.rank(), 0);
        for (std::size_t p = 0; p < npoints; ++p) {
            std::size_t flat = 0;
            std::size_t blk = 0;
            for (std::size_t ax = 0; ax < space.rank(); ++ax) {
                flat += idx[ax] * space.stride(ax);
                blk += idx[ax] * rel_stride[ax];
            }
            base_[p] = flat;
            block_[p] = blk;
            for (std::size_t ax = space.rank(); ax-- > 0;) {
                if (level_axis_ && ax == *level_axis_) {
                    continue;
                }
                if (++idx[ax] < space.factor(ax).dimension()) {
                    break;
                }
                idx[ax] = 0;
            }
        }

        // Hermitian block for every relevant multi-index.
        blocks_.reserve(nblocks);
        std::vector<std::size_t> ridx(rel_axes.size(), 0);
        std::vector<double> coord(space.rank(), 0.0);
        for (std::size_t b = 0; b < nblocks; ++b) {
            for (std::size_t k = 0; k < rel_axes.size(); ++k) {
                coord[rel_axes[k]] = space.factor(rel_axes[k]).grid().x(ridx[k]);
            }
            CMatrix hb(d_, d_);
            if (include_background) {
                if (h.internal.rows() != 0) {
                    hb += h.internal;
                }
                for (const auto &p : h.potentials) {
                    const std::size_t ax = space.axis(p.label);
                    const std::size_t i = ridx[static_cast<std::size_t>(
                        std::find(rel_axes.begin(), rel_axes.end(), ax) - rel_axes.begin())];
                    for (std::size_t l = 0; l < d_; ++l) {
                        hb(l, l) += p.values[i];
                    }
                }
            }
            if (include_interaction) {
                for (const auto &t : h.interactions) {
                    const double xp = coord[space.axis(t.particle)];
                    const double xc = t.center ? coord[space.axis(*t.center)] : t.frozen_center;
                    const double f = t.profile(xp - xc);
                    if (f != 0.0) {
                        hb += t.coupling * Complex(f);
                    }
                }
            }
            blocks_.push_back(std::move(hb));
            for (std::size_t k = rel_axes.size(); k-- > 0;) {
                if (++ridx[k] < space.factor(rel_axes[k]).dimension()) {
                    break;
                }
                ridx[k] = 0;
            }
        }
    }

    [[nodiscard]] std::size_t levels() const noexcept { return d_; }
    [[nodiscard]] const std::vector<CMatrix> &blocks() const noexcept { return blocks_; }

    /// exp(-i H_block t / hbar) for every block.
    [[nodiscard]] std::vector<CMatrix> exponentials(double t_over_hbar) const {
        std::vector<CMatrix> out;
        out.reserve(blocks_.size());
        for (const auto &b : blocks_) {
            out.push_back(unitary_exponential(b, t_over_hbar));
        }
        return out;
    }

    /// psi <- U_block psi at every point.
    void apply(std::span<Complex> psi, const std::vector<CMatrix> &unitaries) const {
        if (d_ == 1) {
            for (std::size_t p = 0; p < base_.size(); ++p) {
                psi[base_[p]] = cmul(unitaries[block_[p]](0, 0), psi[base_[p]]);
            }
            return;
        }
        if (d_ == 2) {
            for (std::size_t p = 0; p < base_.size(); ++p) {
                const CMatrix &u = unitaries[block_[p]];
                Complex &a0 = psi[base_[p]];
                Complex &a1 = psi[base_[p] + level_stride_];
                const Complex v0 = a0;
                const Complex v1 = a1;
                a0 = cmul(u(0, 0), v0) + cmul(u(0, 1), v1);
                a1 = cmul(u(1, 0), v0) + cmul(u(1, 1), v1);
            }
            return;
        }
        std::vector<Complex> in(d_);
        for (std::size_t p = 0; p < base_.size(); ++p) {
            const CMatrix &u = unitaries[block_[p]];
            for (std::size_t l = 0; l < d_; ++l) {
                in[l] = psi[base_[p] + l * level_stride_];
            }
            for (std::size_t r = 0; r < d_; ++r) {
                Complex s{};
                for (std::size_t c = 0; c < d_; ++c) {
                    s += cmul(u(r, c), in[c]);
                }
                psi[base_[p] + r * level_stride_] = s;
            }
        }
    }

    /// sum_points psi_p^dagger F(block) psi_p, with F applied to the block matrix.
    template <class BlockFn>
    [[nodiscard]] double expectation(std::span<const Complex> psi, BlockFn &&fn) const {
        std::vector<CMatrix> transformed;
        transformed.reserve(blocks_.size());
        for (const auto &b : blocks_) {
            transformed.push_back(fn(b));
        }
        double s = 0.0;
        for (std::size_t p = 0; p < base_.size(); ++p) {
            const CMatrix &m = transformed[block_[p]];
            for (std::size_t r = 0; r < d_; ++r) {
                const Complex ar = psi[base_[p] + r * level_stride_];
                for (std::size_t c = 0; c < d_; ++c) {
                    s += (std::conj(ar) * m(r, c) * psi[base_[p] + c * level_stride_]).real();
                }
            }
        }
        return s;
    }

  private:
    std::size_t d_ = 1;
    std::optional<std::size_t> level_axis_;
    std::size_t level_stride_ = 1;
    std::vector<std::size_t> base_;
    std::vector<std::size_t> block_;
    std::vector<CMatrix> blocks_;
};

/// Applies a diagonal-in-k multiplier along one coordinate axis.
class KineticAxis {
  public:
    KineticAxis(const Space &space, std::size_t axis, std::vector<Complex> multiplier)
        : n_(space.factor(axis).dimension()), stride_(space.stride(axis)),
          outer_(space.dimension() / (n_ * stride_)), fft_(n_),
          multiplier_(std::move(multiplier)), line_(n_) {}

    void apply(std::span<Complex> psi) {
        for (std::size_t o = 0; o < outer_; ++o) {
            for (std::size_t i = 0; i < stride_; ++i) {
                const std::size_t base = o * n_ * stride_ + i;
                if (stride_ == 1) {
                    std::span<Complex> line = psi.subspan(base, n_);
                    transform(line);
                    continue;
                }
                for (std::size_t j = 0; j < n_; ++j) {
                    line_[j] = psi[base + j * stride_];
                }
                transform(line_);
                for (std::size_t j = 0; j < n_; ++j) {
                    psi[base + j * stride_] = line_[j];
                }
            }
        }
    }

  private:
    void transform(std::span<Complex> line) const {
        fft_.forward(line);
        for (std::size_t j = 0; j < n_; ++j) {
            line[j] = cmul(line[j], multiplier_[j]);
        }
        fft_.inverse_unnormalized(line);
    }

    std::size_t n_;
    std::size_t stride_;
    std::size_t outer_;
    Fft fft_;
    std::vector<Complex> multiplier_;
    std::vector<Complex> line_;
};

inline double norm_of(std::span<const Complex> psi, double weight) {
    double s = 0.0;
    for (const auto &a : psi) {
        s += std::norm(a);
    }
    return std::sqrt(s * weight);
}

} // namespace detail

/// Largest kinetic eigenvalue on the grid, sum over factors with a kinetic term.
inline double max_kinetic_energy(const Space &space, const HamiltonianSpec &h) {
    double t = 0.0;
    for (const auto &k : h.kinetic) {
        const double kmax = std::numbers::pi / space.factor(space.axis(k.label)).grid().dx();
        t += h.hbar * h.hbar * kmax * kmax / (2.0 * k.mass);
    }
    return t;
}

/**
 * Second-order Strang propagation exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)
 * per step. T is applied in the Fourier representation of each coordinate
 * with a kinetic term; V collects potentials, the internal Hamiltonian and
 * all interactions as d x d blocks at every grid point.
 *
 * A negative dt runs the same scheme backward in time.
 */
inline PropagationResult evolve_exact(const StateVector &psi0, const HamiltonianSpec &h, double dt,
                                      std::size_t steps, PropagationOptions options = {}) {
    const Space &space = psi0.space();
    h.validate(space);
    require(std::isfinite(dt) && dt != 0.0, ErrorKind::InvalidArgument, "dt must be finite and nonzero");
    const double tmax = max_kinetic_energy(space, h);
    require(std::abs(dt) * tmax / h.hbar <= std::numbers::pi, ErrorKind::CflViolation,
            "dt * T_max / hbar = " + std::to_string(std::abs(dt) * tmax / h.hbar) + " exceeds pi");

    const detail::PotentialBlocks blocks(space, h);
    const auto half = blocks.exponentials(0.5 * dt / h.hbar);
    const auto full = blocks.exponentials(dt / h.hbar);

    std::vector<detail::KineticAxis> kinetic;
    for (const auto &k : h.kinetic) {
        const std::size_t ax = space.axis(k.label);
        const Grid &g = space.factor(ax).grid();
        const auto wn = g.wavenumbers();
        std::vector<Complex> mult(wn.size());
        const double inv_n = 1.0 / static_cast<double>(wn.size());
        for (std::size_t j = 0; j < wn.size(); ++j) {
            mult[j] = std::polar(inv_n, -h.hbar * wn[j] * wn[j] * dt / (2.0 * k.mass));
        }
        kinetic.emplace_back(space, ax, std::move(mult));
    }

    std::vector<Complex> psi(psi0.amplitudes().begin(), psi0.amplitudes().end());
    const double weight = space.weight();
    const double n0 = detail::norm_of(psi, weight);

    PropagationResult result;
    result.dt = dt;
    result.steps = steps;
    if (options.store_trajectory) {
        result.trajectory.emplace_back(0.0, psi0);
    }
    double drift = std::abs(n0 - 1.0);

    if (steps > 0) {
        blocks.apply(psi, half);
    }
    for (std::size_t s = 1; s <= steps; ++s) {
        for (auto &k : kinetic) {
            k.apply(psi);
        }
        const bool checkpoint =
            s == steps || (options.checkpoint_every > 0 && s % options.checkpoint_every == 0);
        if (!checkpoint) {
            blocks.apply(psi, full);
            continue;
        }
        blocks.apply(psi, half);
        drift = std::max(drift, std::abs(detail::norm_of(psi, weight) - 1.0));
        if (options.store_trajectory && s != steps) {
            result.trajectory.emplace_back(static_cast<double>(s) * dt,
                                           StateVector(space, psi, psi0.norm_tolerance()));
        }
        if (s != steps) {
            blocks.apply(psi, half);
        }
    }
    result.final = StateVector(space, std::move(psi), psi0.norm_tolerance());
    if (options.store_trajectory && steps > 0) {
        result.trajectory.emplace_back(static_cast<double>(steps) * dt, result.final);
    }
    result.norm_drift = drift;
    return result;
}

/// <psi|H|psi> / <psi|psi> for the full Hamiltonian.
inline double energy(const StateVector &psi, const HamiltonianSpec &h) {
    const Space &space = psi.space();
    h.validate(space);
    const auto amps = psi.amplitudes();
    double kinetic = 0.0;
    for (const auto &k : h.kinetic) {
        const std::size_t ax = space.axis(k.label);
        const std::size_t n = space.factor(ax).dimension();
        const std::size_t stride = space.stride(ax);
        const auto wn = space.factor(ax).grid().wavenumbers();
        const Fft fft(n);
        std::vector<Complex> line(n);
        const std::size_t outer = psi.size() / (n * stride);
        double acc = 0.0;
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < stride; ++i) {
                const std::size_t base = o * n * stride + i;
                for (std::size_t j = 0; j < n; ++j) {
                    line[j] = amps[base + j * stride];
                }
                fft.forward(line);
                for (std::size_t j = 0; j < n; ++j) {
                    acc += std::norm(line[j]) * h.hbar * h.hbar * wn[j] * wn[j] / (2.0 * k.mass);
                }
            }
        }
        kinetic += acc / static_cast<double>(n);
    }
    const detail::PotentialBlocks blocks(space, h);
    const double potential = blocks.expectation(amps, [](const CMatrix &b) { return b; });
    double norm2 = 0.0;
    for (const auto &a : amps) {
        norm2 += std::norm(a);
    }
    return (kinetic + potential) / norm2;
}

/**
 * Upper bound on |<H_I>| for any internal state: the expectation of
 * |profile| times the spectral norm of each coupling. Used to certify the
 * negligible-interaction periods before and after a collision.
 */
inline double interaction_strength(const StateVector &psi, const HamiltonianSpec &h) {
    const Space &space = psi.space();
    h.validate(space);
    double total = 0.0;
    for (const auto &t : h.interactions) {
        HamiltonianSpec single;
        single.level = h.level;
        single.hbar = h.hbar;
        InteractionTerm bound = t;
        const Profile f = t.profile;
        bound.profile = [f](double d) { return std::abs(f(d)); };
        bound.coupling = CMatrix::identity(t.coupling.rows()) * Complex(hermitian_norm(t.coupling));
        single.interactions.push_back(std::move(bound));
        const detail::PotentialBlocks blocks(space, single, true, false);
        total += blocks.expectation(psi.amplitudes(), [](const CMatrix &b) { return b; });
    }
    return total * space.weight();
}

/// Copy of h with the kinetic term of `label` removed (that coordinate becomes a parameter).
inline HamiltonianSpec without_kinetic(HamiltonianSpec h, const std::string &label) {
    std::erase_if(h.kinetic, [&](const KineticTerm &k) { return k.label == label; });
    return h;
}

/// Uniform normalized state on one coordinate factor.
inline StateVector uniform_state(const Grid &grid, std::string label) {
    const double a = 1.0 / std::sqrt(grid.length());
    return {Space({Factor::coordinate(std::move(label), grid)}),
            std::vector<Complex>(grid.size(), Complex(a))};
}

/// Exact propagation result paired with the two factors it was built from.
struct FactorizedResult : PropagationResult {
    StateVector center_of_mass;
    StateVector relative;
};

/**
 * Product-form evolution: the center-of-mass packet evolves freely under its
 * own kinetic term, and the relative state evolves under everything else with
 * every interaction centered on the frozen center-of-mass position.
 *
 * `frozen_center` defaults to <R> of the initial packet.
 */
inline FactorizedResult evolve_factorized(const StateVector &cm0, const StateVector &relative0,
                                          const HamiltonianSpec &h, double dt, std::size_t steps,
                                          std::optional<double> frozen_center = std::nullopt,
                                          PropagationOptions options = {}) {
    require(cm0.space().rank() == 1 && cm0.space().factor(0).is_coordinate(),
            ErrorKind::SpaceMismatch, "center-of-mass state must be a single coordinate factor");
    const std::string cm = cm0.space().factor(0).label();
    require(!relative0.space().contains(cm), ErrorKind::SpaceMismatch,
            "relative state must not carry the center-of-mass factor");
    const double center = frozen_center.value_or(position_moments(cm0, cm).mean);

    HamiltonianSpec h_cm;
    h_cm.hbar = h.hbar;
    HamiltonianSpec h_rel;
    h_rel.hbar = h.hbar;
    h_rel.level = h.level;
    h_rel.internal = h.internal;
    for (const auto &k : h.kinetic) {
        (k.label == cm ? h_cm : h_rel).kinetic.push_back(k);
    }
    for (const auto &p : h.potentials) {
        (p.label == cm ? h_cm : h_rel).potentials.push_back(p);
    }
    for (auto t : h.interactions) {
        if (t.center && *t.center == cm) {
            t.center.reset();
            t.frozen_center = center;
        }
        h_rel.interactions.push_back(std::move(t));
    }

    PropagationOptions sub = options;
    auto cm_run = evolve_exact(cm0, h_cm, dt, steps, sub);
    auto rel_run = evolve_exact(relative0, h_rel, dt, steps, sub);

    FactorizedResult out;
    out.dt = dt;
    out.steps = steps;
    out.norm_drift = std::max(cm_run.norm_drift, rel_run.norm_drift);
    if (options.store_trajectory) {
        for (std::size_t k = 0; k < cm_run.trajectory.size(); ++k) {
            out.trajectory.emplace_back(
                cm_run.trajectory[k].first,
                tensor_product({cm_run.trajectory[k].second, rel_run.trajectory[k].second}));
        }
    }
    out.final = tensor_product({cm_run.final, rel_run.final});
    out.center_of_mass = std::move(cm_run.final);
    out.relative = std::move(rel_run.final);
    return out;
}

/**
 * Norm of the term (P_A^2 / 2M) Psi'_1 dropped by the product form.
 *
 * `psi1` carries the parametric dependence of the relative state on the
 * center-of-mass coordinate `cm_label`, sampled over the window of that
 * factor with uniform weight (see `uniform_state`). The R derivative uses
 * fourth-order central differences because that dependence is not periodic
 * on the window. When `envelope` is given, the window is re-weighted by
 * |Phi(R)|^2 L so the result is || Phi (P^2 / 2M) Psi'_1 ||.
 */
inline double factorization_residual(const StateVector &psi1, double mass, double hbar,
                                     const StateVector *envelope = nullptr,
                                     const std::string &cm_label = "R_A") {
    const Space &space = psi1.space();
    const auto ax = space.find(cm_label);
    require(ax.has_value() && space.factor(*ax).is_coordinate(), ErrorKind::MissingFactor,
            "missing center-of-mass factor '" + cm_label + "'");
    require(mass > 0.0 && hbar > 0.0, ErrorKind::InvalidArgument, "mass and hbar must be positive");
    const Grid &g = space.factor(*ax).grid();
    const std::size_t n = g.size();
    const std::size_t stride = space.stride(*ax);
    const double dx = g.dx();
    std::vector<double> weight(n, 1.0);
    if (envelope != nullptr) {
        require(envelope->space().rank() == 1 && envelope->space().factor(0).is_coordinate() &&
                    envelope->space().factor(0).grid() == g,
                ErrorKind::SpaceMismatch, "envelope must live on the center-of-mass grid");
        for (std::size_t j = 0; j < n; ++j) {
            weight[j] = std::norm((*envelope)[j]) * g.length();
        }
    }
    const auto f = psi1.amplitudes();
    const double inv12 = 1.0 / (12.0 * dx * dx);
    const double inv1 = 1.0 / (dx * dx);
    double acc = 0.0;
    const std::size_t outer = psi1.size() / (n * stride);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < stride; ++i) {
            const std::size_t base = o * n * stride + i;
            auto at = [&](std::size_t j) { return f[base + j * stride]; };
            for (std::size_t j = 0; j < n; ++j) {
                Complex d2;
                if (j >= 2 && j + 2 < n) {
                    d2 = (-at(j - 2) + 16.0 * at(j - 1) - 30.0 * at(j) + 16.0 * at(j + 1) -
                          at(j + 2)) * inv12;
                } else if (j == 0) {
                    d2 = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) * inv1;
                } else if (j + 1 == n) {
                    d2 = (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) * inv1;
                } else {
                    d2 = (at(j - 1) - 2.0 * at(j) + at(j + 1)) * inv1;
                }
                acc += weight[j] * std::norm(d2);
            }
        }
    }
    const double scale = hbar * hbar / (2.0 * mass);
    return scale * std::sqrt(acc * space.weight());
}

/// 1 - |<a|b>| for normalized states on the same space.
inline double fidelity_deficit(const StateVector &a, const StateVector &b) {
    require_same_space(a, b);
    require(std::abs(a.norm() - 1.0) <= 1e-8 && std::abs(b.norm() - 1.0) <= 1e-8,
            ErrorKind::UnnormalizedInput, "fidelity needs normalized states");
    return std::clamp(1.0 - std::abs(inner_product(a, b)), 0.0, 1.0);
}

} // namespace framelab
