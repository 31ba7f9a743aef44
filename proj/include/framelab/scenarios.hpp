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
 * End-to-end experiments: the collision of a light particle with a heavy
 * body, the sector split of a partly absorbed system, and the position
 * measurement with an entangled pair.
 *
 * Every routine here is deterministic for a fixed configuration and seed.
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "framelab/dynamics.hpp"
#include "framelab/error.hpp"
#include "framelab/frames.hpp"
#include "framelab/hilbert.hpp"
#include "framelab/linalg.hpp"
#include "framelab/schmidt.hpp"

namespace framelab {

/// Initial, interaction and final periods plus the step size.
struct Schedule {
    double t_initial = 0.0;
    double t_interaction = 1.0;
    double t_final = 2.0;
    double dt = 1e-3;
    std::size_t checkpoint_every = 100;

    [[nodiscard]] std::size_t steps() const {
        return static_cast<std::size_t>(std::llround((t_final - t_initial) / dt));
    }
};

/// The heavy body: center-of-mass packet, grid rule and internal levels.
struct MacroConfig {
    std::vector<double> masses{1e2, 1e3, 1e4};
    double sigma_ref = 3.0;
    std::optional<double> sigma; // fixed width; otherwise sigma_ref / sqrt(W)
    std::size_t points = 64;
    double half_width = 8.0; // grid half-width in units of sigma
    CMatrix internal = CMatrix(2, 2);
    std::vector<Complex> internal_state{1.0, 0.0};

    [[nodiscard]] std::size_t levels() const { return internal_state.size(); }

    [[nodiscard]] GaussianParams packet(double mass, double hbar, double unit_mass) const {
        GaussianParams p = GaussianParams::scaled(sigma_ref, mass, hbar, unit_mass);
        if (sigma) {
            p.sigma = *sigma;
        }
        return p;
    }
    [[nodiscard]] Grid grid(const GaussianParams &p) const {
        return Grid::centered(points, 0.0, half_width * p.sigma);
    }
};

/// One light particle: its grid, mass and initial packet(s).
struct ParticleConfig {
    Grid grid{64, -16.0, 16.0};
    double mass = 1.0;
    std::vector<GaussianParams> packets;
};

/// g exp(-d^2 / 2 w^2) (x) K between a particle and the heavy body.
struct CouplingConfig {
    double g = 0.0;
    double width = 1.0;
    CMatrix K = CMatrix(2, 2);
};

/// Flat-bottom well -depth on |d| < half_width with edges of width `edge`.
struct TrapConfig {
    double depth = 0.0;
    double half_width = 1.0;
    double edge = 0.3;
};

/// Region near the heavy body used for support tests.
struct PartitionGeometry {
    double center = 0.0;
    double radius = 1.0;
    double eps = 1e-4;
    std::vector<std::string> a_side{"r_A"};
};

struct MeasurementConfig {
    ParticleConfig a;
    ParticleConfig b;
    std::vector<Complex> c;
    TrapConfig trap;
    std::size_t trials = 10000;
    double region_radius = 4.0;
    double eps = 1e-4;
    double separation_threshold = 1e-6;
};

struct ScenarioConfig {
    std::string scenario = "collision";
    double hbar = 1.0;
    double unit_mass = 1.0;
    MacroConfig A;
    ParticleConfig S; // collision only; packets.front() is the incoming wavepacket
    CouplingConfig coupling;
    Schedule schedule;
    std::uint64_t seed = 0;
    std::optional<MeasurementConfig> measurement;

    /// Throws Validation naming the violated invariant.
    void validate() const {
        auto check = [](bool ok, const std::string &what) { require(ok, ErrorKind::Validation, what); };
        check(scenario == "collision" || scenario == "measurement",
              "scenario must be 'collision' or 'measurement'");
        check(hbar > 0.0 && unit_mass > 0.0, "hbar and unit_mass must be positive");
        check(!A.masses.empty(), "at least one mass of A is required");
        for (double m : A.masses) {
            check(m > 0.0 && std::isfinite(m), "all masses must be > 0");
        }
        check(A.sigma_ref > 0.0 && (!A.sigma || *A.sigma > 0.0), "sigma of A must be > 0");
        check(A.half_width > 0.0, "A grid half-width must be > 0");
        check(!A.internal_state.empty() && A.internal.rows() == A.levels() &&
                  A.internal.cols() == A.levels(),
              "internal Hamiltonian must be d x d with d = len(internal_state)");
        check(A.internal.hermiticity_error() <= 1e-12, "internal Hamiltonian must be Hermitian");
        double n = 0.0;
        for (const auto &z : A.internal_state) {
            n += std::norm(z);
        }
        check(std::abs(n - 1.0) <= 1e-10, "internal state must be normalized");
        check(schedule.t_initial < schedule.t_interaction &&
                  schedule.t_interaction < schedule.t_final,
              "time schedule must be strictly increasing (t_initial < t_interaction < t_final)");
        check(schedule.dt > 0.0, "dt must be > 0");
        check(schedule.checkpoint_every > 0, "checkpoint_every must be > 0");
        check(coupling.width > 0.0, "coupling width must be > 0");
        check(coupling.K.rows() == A.levels() && coupling.K.cols() == A.levels(),
              "coupling matrix K must be d x d");
        check(coupling.K.hermiticity_error() <= 1e-12, "coupling matrix K must be Hermitian");
        if (scenario == "collision") {
            check(S.mass > 0.0, "all masses must be > 0");
            check(S.packets.size() == 1, "collision needs exactly one S packet");
        } else {
            check(measurement.has_value(), "measurement scenario needs a 'measurement' section");
            const auto &m = *measurement;
            check(m.a.mass > 0.0 && m.b.mass > 0.0, "all masses must be > 0");
            check(m.c.size() >= 1 && m.a.packets.size() == m.c.size() &&
                      m.b.packets.size() == m.c.size(),
                  "a, b and c must list the same number of components");
            double s = 0.0;
            for (const auto &z : m.c) {
                s += std::norm(z);
            }
            check(std::abs(s - 1.0) <= 1e-10, "sum |c_l|^2 must equal 1 (got " + std::to_string(s) + ")");
            check(m.trials > 0, "trials must be > 0");
            check(m.region_radius > 0.0, "region radius must be > 0");
            check(m.eps > 0.0 && m.eps < 1.0, "eps must lie in (0, 1)");
            check(m.trap.depth >= 0.0 && m.trap.half_width > 0.0 && m.trap.edge > 0.0,
                  "trap depth must be >= 0 and widths > 0");
        }
    }
};

// ---------------------------------------------------------------------------
// Collision
// ---------------------------------------------------------------------------

/// Results for one mass of A.
struct CollisionPoint {
    double mass = 0.0;
    double sigma = 0.0;
    double interaction_initial = 0.0;
    double interaction_peak = 0.0;
    double interaction_final = 0.0;
    double norm_drift = 0.0;
    double energy_drift = 0.0;
    double fidelity_deficit = 0.0;
    double residual = 0.0;
    double overlap_weight = 0.0;
    std::vector<double> branch_probabilities;
    std::vector<double> reduced_eigenvalues; // of Psi_1 on the level factor
    double branch_eigen_error = 0.0;
    double entropy = 0.0;
    std::vector<std::vector<std::size_t>> degenerate_groups;
    double schmidt_identity = 0.0; // trace distance, ensemble vs partial trace of Psi_1
    double trace_distance = 0.0;   // rho_S vs partial trace of the full composite
    bool during_interaction = false;
    std::size_t sampled_branch = 0;
    CMatrix rho_internal;           // mixed state of the level factor
    std::vector<double> s_density;  // diagonal of rho_S per grid point (per unit length)
    std::vector<double> s_density_full;
    std::vector<double> s_grid;
};

struct CollisionReport {
    std::vector<CollisionPoint> points;
    bool deficit_decreasing = false;
    bool residual_decreasing = false;
    bool trace_distance_nonincreasing = false;
    std::optional<double> residual_exponent;
};

/// Least-squares slope of log y against log x; empty for fewer than two usable points.
inline std::optional<double> fitted_exponent(const std::vector<double> &x, const std::vector<double> &y) {
    std::vector<std::pair<double, double>> p;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            p.emplace_back(std::log(x[i]), std::log(y[i]));
        }
    }
    if (p.size() < 2) {
        return std::nullopt;
    }
    double mx = 0.0;
    double my = 0.0;
    for (const auto &[a, b] : p) {
        mx += a;
        my += b;
    }
    mx /= static_cast<double>(p.size());
    my /= static_cast<double>(p.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto &[a, b] : p) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if (sxx == 0.0) {
        return std::nullopt;
    }
    return sxy / sxx;
}

inline bool strictly_decreasing(const std::vector<double> &v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] < v[i - 1])) {
            return false;
        }
    }
    return true;
}

inline bool nonincreasing(const std::vector<double> &v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] <= v[i - 1])) {
            return false;
        }
    }
    return true;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline Profile well_profile(const TrapConfig &t) {
    return [t](double d) {
        return -0.5 * t.depth *
               (std::tanh((d + t.half_width) / t.edge) - std::tanh((d - t.half_width) / t.edge));
    };
}

/// The same Hamiltonian with every term that touches a missing factor removed.
inline HamiltonianSpec restrict_to(const HamiltonianSpec &h, const Space &space) {
    HamiltonianSpec out;
    out.hbar = h.hbar;
    for (const auto &k : h.kinetic) {
        if (space.contains(k.label)) {
            out.kinetic.push_back(k);
        }
    }
    for (const auto &p : h.potentials) {
        if (space.contains(p.label)) {
            out.potentials.push_back(p);
        }
    }
    if (h.level && space.contains(*h.level)) {
        out.level = h.level;
        out.internal = h.internal;
        for (const auto &t : h.interactions) {
            if (space.contains(t.particle) && (!t.center || space.contains(*t.center))) {
                out.interactions.push_back(t);
            }
        }
    }
    return out;
}

inline std::vector<double> sorted_descending(std::vector<double> v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

/// Position density of the coordinate factor of a density matrix, per unit length.
inline std::vector<double> density_diagonal(const DensityMatrix &rho) {
    const double dx = rho.space.factor(0).weight();
    std::vector<double> out(rho.matrix.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = rho.matrix(i, i).real() / dx;
    }
    return out;
}

template <class Fn>
auto map_indices(std::size_t n, std::size_t workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            slots[i].emplace(fn(i));
        }
    } else {
        for (std::size_t start = 0; start < n; start += workers) {
            std::vector<std::future<R>> batch;
            const std::size_t stop = std::min(n, start + workers);
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(std::async(std::launch::async, fn, i));
            }
            for (std::size_t i = start; i < stop; ++i) {
                slots[i].emplace(batch[i - start].get());
            }
        }
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto &s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

} // namespace detail

/// Hamiltonian of heavy body + one light particle `label` coupled through K.
inline HamiltonianSpec collision_hamiltonian(const ScenarioConfig &cfg, double mass_A,
                                             const std::string &label = "S", double mass_light = 0.0) {
    HamiltonianSpec h;
    h.hbar = cfg.hbar;
    h.kinetic.push_back({"R_A", mass_A});
    h.kinetic.push_back({label, mass_light > 0.0 ? mass_light : cfg.S.mass});
    h.level = "r_A";
    h.internal = cfg.A.internal;
    if (cfg.coupling.g != 0.0) {
        h.interactions.push_back(
            {label, std::string("R_A"), 0.0, gaussian_profile(cfg.coupling.g, cfg.coupling.width), cfg.coupling.K});
    }
    return h;
}

/// One sweep point of the collision: exact and factorized evolution, reduction, comparison.
inline CollisionPoint run_collision_point(const ScenarioConfig &cfg, double mass) {
    CollisionPoint out;
    out.mass = mass;
    const GaussianParams cm = cfg.A.packet(mass, cfg.hbar, cfg.unit_mass);
    out.sigma = cm.sigma;
    const Grid grid_R = cfg.A.grid(cm);
    const StateVector internal = make_level_state("r_A", cfg.A.internal_state);
    GaussianParams sp = cfg.S.packets.front();
    sp.mass = cfg.S.mass;
    sp.hbar = cfg.hbar;
    const StateVector psi_S = make_gaussian(cfg.S.grid, sp, "S");
    const StateVector psi0 = lift_to_auxiliary(internal, psi_S, cm, grid_R);
    const HamiltonianSpec h = collision_hamiltonian(cfg, mass);

    out.interaction_initial = interaction_strength(psi0, h);
    require(out.interaction_initial < negligible_interaction, ErrorKind::InteractionNotNegligibleAtStart,
            "interaction strength " + detail::fmt(out.interaction_initial) + " at t_initial");

    const Schedule &s = cfg.schedule;
    const std::size_t steps = s.steps();
    const auto peak_step =
        static_cast<std::size_t>(std::llround((s.t_interaction - s.t_initial) / s.dt));
    PropagationOptions opts{s.checkpoint_every, false};

    // Exact run in two legs so the state at the nominal collision time is available.
    auto leg1 = evolve_exact(psi0, h, s.dt, peak_step, opts);
    out.interaction_peak = interaction_strength(leg1.final, h);
    auto leg2 = evolve_exact(leg1.final, h, s.dt, steps - peak_step, opts);
    const StateVector &exact = leg2.final;
    out.norm_drift = std::max(leg1.norm_drift, leg2.norm_drift);
    const double e0 = energy(psi0, h);
    out.energy_drift = std::abs(energy(exact, h) - e0) / std::max(std::abs(e0), 1e-300);
    out.interaction_final = interaction_strength(exact, h);
    require(out.interaction_final < negligible_interaction, ErrorKind::InteractionNotNegligibleAtEnd,
            "interaction strength " + detail::fmt(out.interaction_final) + " at t_final");

    GaussianParams cm0 = cm;
    cm0.R0 = 0.0;
    cm0.P0 = 0.0;
    const StateVector phi0 = make_gaussian(grid_R, cm0, "R_A");
    const auto fact =
        evolve_factorized(phi0, tensor_product({internal, psi_S}), h, s.dt, steps, 0.0, opts);
    out.fidelity_deficit = fidelity_deficit(exact, fact.final);

    // Parametric R_A dependence of the relative state, for the dropped kinetic term.
    const StateVector param0 = tensor_product({uniform_state(grid_R, "R_A"), internal, psi_S});
    const auto param = evolve_exact(param0, without_kinetic(h, "R_A"), s.dt, steps, opts);
    out.residual = factorization_residual(param.final, mass, cfg.hbar, &fact.center_of_mass);

    const RelativeState rel = extract_relative_state(exact, fact.center_of_mass);
    out.overlap_weight = rel.overlap_weight;
    const StateVector &psi1 = rel.state;
    const Bipartition cut{{"S"}, {"r_A"}};
    const auto ensemble =
        transform_to_intrinsic(psi1, cut, interaction_strength(exact, h));
    out.during_interaction = ensemble.during_interaction;
    out.branch_probabilities = ensemble.provenance.probabilities();
    out.degenerate_groups = ensemble.provenance.degenerate_groups;
    out.entropy = entanglement_entropy(ensemble.provenance);
    out.sampled_branch = sample_branch(ensemble.provenance, cfg.seed);

    const DensityMatrix rho_level = reduced_density_matrix(psi1, {"r_A"});
    out.reduced_eigenvalues = detail::sorted_descending(rho_level.eigenvalues());
    for (std::size_t j = 0; j < out.reduced_eigenvalues.size(); ++j) {
        const double p = j < out.branch_probabilities.size() ? out.branch_probabilities[j] : 0.0;
        out.branch_eigen_error = std::max(out.branch_eigen_error, std::abs(p - out.reduced_eigenvalues[j]));
    }
    out.rho_internal = mixed_density_matrix(ensemble, {"r_A"}).matrix;

    const DensityMatrix rho_S = mixed_density_matrix(ensemble, {"S"});
    out.schmidt_identity = trace_distance(rho_S, reduced_density_matrix(psi1, {"S"}));
    const DensityMatrix rho_full = reduced_density_matrix(exact, {"S"});
    out.trace_distance = trace_distance(rho_S, rho_full);
    out.s_density = detail::density_diagonal(rho_S);
    out.s_density_full = detail::density_diagonal(rho_full);
    out.s_grid = cfg.S.grid.points();
    return out;
}

/// Full sweep over cfg.A.masses; `workers` > 1 runs sweep points concurrently.
inline CollisionReport run_collision(const ScenarioConfig &cfg, std::size_t workers = 1) {
    cfg.validate();
    require(cfg.scenario == "collision", ErrorKind::Validation, "config is not a collision scenario");
    CollisionReport rep;
    rep.points = detail::map_indices(cfg.A.masses.size(), workers,
                                     [&](std::size_t i) { return run_collision_point(cfg, cfg.A.masses[i]); });
    std::vector<double> m;
    std::vector<double> deficit;
    std::vector<double> residual;
    std::vector<double> td;
    for (const auto &p : rep.points) {
        m.push_back(p.mass);
        deficit.push_back(p.fidelity_deficit);
        residual.push_back(p.residual);
        td.push_back(p.trace_distance);
    }
    rep.deficit_decreasing = strictly_decreasing(deficit);
    rep.residual_decreasing = strictly_decreasing(residual);
    rep.trace_distance_nonincreasing = nonincreasing(td);
    rep.residual_exponent = fitted_exponent(m, residual);
    return rep;
}

// ---------------------------------------------------------------------------
// Partition of a partly absorbed system
// ---------------------------------------------------------------------------

struct PartitionReport {
    bool found = false;
    std::vector<std::string> absorbed; // S_1
    std::vector<std::string> free;     // S_2
    double leakage = 1.0;
    double weight_free = 0.0;     // sum |C_j|^2, nothing near A
    double weight_absorbed = 0.0; // sum |D_k|^2, S_1 near A
    std::vector<double> C;
    std::vector<double> D;
    std::optional<SchmidtResult> free_sector;
    std::optional<SchmidtResult> absorbed_sector;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> candidate_subsets(std::size_t n) {
    std::vector<std::uint64_t> masks;
    for (std::uint64_t m = 1; m + 1 < (std::uint64_t{1} << n); ++m) {
        masks.push_back(m);
    }
    std::stable_sort(masks.begin(), masks.end(),
                     [](std::uint64_t a, std::uint64_t b) { return std::popcount(a) < std::popcount(b); });
    std::vector<std::vector<std::size_t>> out;
    for (auto m : masks) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < n; ++i) {
            if ((m >> i) & 1U) {
                s.push_back(i);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace detail

/**
 * Searches splits of the S-side coordinate factors into an absorbed part S_1
 * and a free part S_2 such that, up to `eps` of probability, every
 * configuration has either S_1 near A and S_2 away from it, or all of S away
 * from A. Leakage is the probability in the remaining configurations. The
 * first split (smallest S_1 first) with leakage below eps is reported;
 * otherwise the split with the least leakage is reported with found = false.
 */
inline PartitionReport detect_partition(const StateVector &psi1, const PartitionGeometry &geo) {
    const Space &space = psi1.space();
    require(geo.radius > 0.0 && geo.eps > 0.0, ErrorKind::InvalidArgument,
            "region radius and eps must be positive");
    for (const auto &l : geo.a_side) {
        require(space.contains(l), ErrorKind::MissingFactor, "A-side factor '" + l + "' not in state");
    }
    std::vector<std::size_t> s_axes;
    for (std::size_t ax = 0; ax < space.rank(); ++ax) {
        const auto &f = space.factor(ax);
        if (f.is_coordinate() &&
            std::find(geo.a_side.begin(), geo.a_side.end(), f.label()) == geo.a_side.end()) {
            s_axes.push_back(ax);
        }
    }
    require(s_axes.size() >= 2 && s_axes.size() < 63, ErrorKind::InvalidArgument,
            "partition search needs at least two S-side coordinate factors");

    // near[k][i]: grid point i of S axis k lies in the region.
    std::vector<std::vector<bool>> near(s_axes.size());
    for (std::size_t k = 0; k < s_axes.size(); ++k) {
        const auto xs = space.factor(s_axes[k]).grid().points();
        near[k].resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            near[k][i] = std::abs(xs[i] - geo.center) <= geo.radius;
        }
    }
    // Probability per near/far pattern of the S axes.
    std::vector<double> pattern(std::size_t{1} << s_axes.size(), 0.0);
    const double w = space.weight();
    for (std::size_t flat = 0; flat < psi1.size(); ++flat) {
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < s_axes.size(); ++k) {
            const std::size_t ax = s_axes[k];
            const std::size_t i = (flat / space.stride(ax)) % space.factor(ax).dimension();
            if (near[k][i]) {
                bits |= std::uint64_t{1} << k;
            }
        }
        pattern[bits] += std::norm(psi1[flat]) * w;
    }
    double total = 0.0;
    for (double p : pattern) {
        total += p;
    }

    PartitionReport rep;
    std::vector<std::size_t> best;
    for (const auto &subset : detail::candidate_subsets(s_axes.size())) {
        std::uint64_t m1 = 0;
        for (auto k : subset) {
            m1 |= std::uint64_t{1} << k;
        }
        const double allowed = pattern[m1] + pattern[0];
        const double leakage = std::clamp((total - allowed) / total, 0.0, 1.0);
        if (leakage < rep.leakage || best.empty()) {
            if (!rep.found) {
                rep.leakage = leakage;
                best = subset;
            }
        }
        if (leakage < geo.eps && !rep.found) {
            rep.found = true;
            rep.leakage = leakage;
            best = subset;
            break;
        }
    }

    std::vector<bool> in_s1(space.rank(), false);
    for (auto k : best) {
        in_s1[s_axes[k]] = true;
    }
    std::vector<std::string> s_side;
    std::vector<std::string> a_side = geo.a_side;
    for (std::size_t ax = 0; ax < space.rank(); ++ax) {
        const auto &l = space.factor(ax).label();
        if (std::find(geo.a_side.begin(), geo.a_side.end(), l) != geo.a_side.end()) {
            continue;
        }
        s_side.push_back(l);
        if (in_s1[ax]) {
            rep.absorbed.push_back(l);
        } else if (space.factor(ax).is_coordinate()) {
            rep.free.push_back(l);
        }
    }

    // Sector projection: absorbed sector has every S_1 coordinate near A.
    std::vector<Complex> absorbed(psi1.size());
    std::vector<Complex> rest(psi1.size());
    for (std::size_t flat = 0; flat < psi1.size(); ++flat) {
        bool inside = true;
        for (auto k : best) {
            const std::size_t ax = s_axes[k];
            const std::size_t i = (flat / space.stride(ax)) % space.factor(ax).dimension();
            inside = inside && near[k][i];
        }
        (inside ? absorbed : rest)[flat] = psi1[flat];
    }
    const StateVector sa(space, std::move(absorbed), std::numeric_limits<double>::infinity());
    const StateVector sr(space, std::move(rest), std::numeric_limits<double>::infinity());
    rep.weight_absorbed = sa.norm_squared();
    rep.weight_free = sr.norm_squared();

    auto sector = [&](const StateVector &part, double weight, std::vector<std::string> left,
                      std::vector<double> &coeffs) -> std::optional<SchmidtResult> {
        if (weight < 1e-14) {
            return std::nullopt;
        }
        std::vector<std::string> right;
        for (const auto &l : space.labels()) {
            if (std::find(left.begin(), left.end(), l) == left.end()) {
                right.push_back(l);
            }
        }
        if (left.empty() || right.empty()) {
            coeffs.push_back(std::sqrt(weight));
            return std::nullopt;
        }
        auto r = schmidt_decompose(part.scaled(1.0 / std::sqrt(weight)), {left, right});
        for (double c : r.coefficients) {
            coeffs.push_back(c * std::sqrt(weight));
        }
        return r;
    };
    rep.free_sector = sector(sr, rep.weight_free, s_side, rep.C);
    rep.absorbed_sector = sector(sa, rep.weight_absorbed, rep.free, rep.D);
    return rep;
}

// ---------------------------------------------------------------------------
// Position measurement
// ---------------------------------------------------------------------------

struct MeasurementBranch {
    double probability = 0.0;
    std::size_t component = 0;         // index l of the matched b component
    double b_fidelity_deficit = 1.0;   // against the independently evolved Psi_b,l
};

struct MeasurementPoint {
    double mass = 0.0;
    double sigma = 0.0;
    double interaction_initial = 0.0;
    double interaction_final = 0.0; // over components that were not absorbed
    double norm_drift = 0.0;
    double initial_a_overlap = 0.0; // |<Psi_a,1, Psi_a,2>|
    double b_raw_overlap = 0.0;     // largest |<Psi_b,l, Psi_b,m>| before orthonormalization
    std::vector<double> inside_fraction; // per component, a's probability in the region
    std::vector<bool> absorbed;          // inside_fraction > 1 - eps
    double overlap_weight = 0.0;
    double structure_deficit = 0.0; // Psi(t) against sum_l c_l phi'_{A+a,l}(t) Psi_b,l(t)
    double component_overlap = 0.0; // max |<phi_{A+a,l}, phi_{A+a,m}>| after extraction
    std::vector<double> schmidt_coefficients;
    double coefficient_error = 0.0; // max | C_l - |c_l| |
    std::vector<MeasurementBranch> branches;
    std::vector<double> expected; // |c_l|^2
    std::vector<std::size_t> counts;
    std::vector<double> frequencies;
    double max_b_fidelity_deficit = 0.0;
    PartitionReport partition;
    std::vector<double> a_density; // final a density over its grid
    std::vector<double> a_grid;
};

struct MeasurementReport {
    std::vector<MeasurementPoint> points;
};

/// Hamiltonian for the heavy body with particles a (coupled, trapped) and b (free).
inline HamiltonianSpec measurement_hamiltonian(const ScenarioConfig &cfg, double mass_A) {
    const auto &m = *cfg.measurement;
    HamiltonianSpec h;
    h.hbar = cfg.hbar;
    h.kinetic.push_back({"R_A", mass_A});
    h.kinetic.push_back({"a", m.a.mass});
    h.kinetic.push_back({"b", m.b.mass});
    h.level = "r_A";
    h.internal = cfg.A.internal;
    if (cfg.coupling.g != 0.0) {
        h.interactions.push_back(
            {"a", std::string("R_A"), 0.0, gaussian_profile(cfg.coupling.g, cfg.coupling.width), cfg.coupling.K});
    }
    if (m.trap.depth != 0.0) {
        h.interactions.push_back({"a", std::string("R_A"), 0.0, detail::well_profile(m.trap),
                                  CMatrix::identity(cfg.A.levels())});
    }
    return h;
}

namespace detail {

/// Orthonormalizes in order with modified Gram-Schmidt.
inline std::vector<StateVector> orthonormalize(const std::vector<StateVector> &in) {
    std::vector<StateVector> out;
    for (const auto &s : in) {
        StateVector v = s;
        for (const auto &q : out) {
            const Complex p = inner_product(q, v);
            std::vector<Complex> amps(v.amplitudes().begin(), v.amplitudes().end());
            for (std::size_t i = 0; i < amps.size(); ++i) {
                amps[i] -= p * q[i];
            }
            v = StateVector(v.space(), std::move(amps), std::numeric_limits<double>::infinity());
        }
        require(v.norm() > 1e-8, ErrorKind::Validation, "b components are linearly dependent");
        out.push_back(v.normalized());
    }
    return out;
}

inline double inside_fraction(const StateVector &psi, const std::string &label, double center, double radius) {
    const Space &space = psi.space();
    const std::size_t ax = space.axis(label);
    const auto xs = space.factor(ax).grid().points();
    const std::size_t n = xs.size();
    const std::size_t stride = space.stride(ax);
    double in = 0.0;
    double all = 0.0;
    for (std::size_t flat = 0; flat < psi.size(); ++flat) {
        const double p = std::norm(psi[flat]);
        all += p;
        if (std::abs(xs[(flat / stride) % n] - center) <= radius) {
            in += p;
        }
    }
    return all > 0.0 ? in / all : 0.0;
}

} // namespace detail

inline MeasurementPoint run_measurement_point(const ScenarioConfig &cfg, double mass) {
    const auto &m = *cfg.measurement;
    MeasurementPoint out;
    out.mass = mass;
    const std::size_t L = m.c.size();
    const GaussianParams cm = cfg.A.packet(mass, cfg.hbar, cfg.unit_mass);
    out.sigma = cm.sigma;
    const Grid grid_R = cfg.A.grid(cm);
    const StateVector internal = make_level_state("r_A", cfg.A.internal_state);
    GaussianParams cm0 = cm;
    cm0.R0 = 0.0;
    cm0.P0 = 0.0;
    const StateVector phi0 = make_gaussian(grid_R, cm0, "R_A");

    std::vector<StateVector> a0;
    std::vector<StateVector> b_raw;
    for (std::size_t l = 0; l < L; ++l) {
        GaussianParams pa = m.a.packets[l];
        pa.mass = m.a.mass;
        pa.hbar = cfg.hbar;
        a0.push_back(make_gaussian(m.a.grid, pa, "a"));
        GaussianParams pb = m.b.packets[l];
        pb.mass = m.b.mass;
        pb.hbar = cfg.hbar;
        b_raw.push_back(make_gaussian(m.b.grid, pb, "b"));
    }
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t k = l + 1; k < L; ++k) {
            out.initial_a_overlap = std::max(out.initial_a_overlap, std::abs(inner_product(a0[l], a0[k])));
            out.b_raw_overlap = std::max(out.b_raw_overlap, std::abs(inner_product(b_raw[l], b_raw[k])));
        }
    }
    require(out.initial_a_overlap < m.separation_threshold, ErrorKind::ComponentsNotSeparated,
            "a components overlap by " + detail::fmt(out.initial_a_overlap));
    const std::vector<StateVector> b0 = detail::orthonormalize(b_raw);

    // Initial composite Phi (x) phi_A (x) sum_l c_l Psi_a,l Psi_b,l.
    const Space s_space({Factor::coordinate("a", m.a.grid), Factor::coordinate("b", m.b.grid)});
    std::vector<Complex> s_amps(s_space.dimension());
    for (std::size_t l = 0; l < L; ++l) {
        const StateVector ab = tensor_product({a0[l], b0[l]});
        for (std::size_t i = 0; i < s_amps.size(); ++i) {
            s_amps[i] += m.c[l] * ab[i];
        }
    }
    const StateVector psi_S(s_space, std::move(s_amps));
    const StateVector psi0 = tensor_product({phi0, internal, psi_S});
    const HamiltonianSpec h = measurement_hamiltonian(cfg, mass);
    out.interaction_initial = interaction_strength(psi0, h);
    require(out.interaction_initial < negligible_interaction, ErrorKind::InteractionNotNegligibleAtStart,
            "interaction strength " + detail::fmt(out.interaction_initial) + " at t_initial");

    const Schedule &s = cfg.schedule;
    const std::size_t steps = s.steps();
    const PropagationOptions opts{s.checkpoint_every, false};
    const auto run = evolve_exact(psi0, h, s.dt, steps, opts);
    out.norm_drift = run.norm_drift;

    // Each A + a component and each b component on its own.
    const Space aa_space({Factor::coordinate("R_A", grid_R), Factor::level("r_A", cfg.A.levels()),
                          Factor::coordinate("a", m.a.grid)});
    const HamiltonianSpec h_aa = detail::restrict_to(h, aa_space);
    const HamiltonianSpec h_b = detail::restrict_to(h, Space({Factor::coordinate("b", m.b.grid)}));
    std::vector<StateVector> phi_l;
    std::vector<StateVector> b_t;
    for (std::size_t l = 0; l < L; ++l) {
        phi_l.push_back(evolve_exact(tensor_product({phi0, internal, a0[l]}), h_aa, s.dt, steps, opts).final);
        b_t.push_back(evolve_exact(b0[l], h_b, s.dt, steps, opts).final);
        const double inside = detail::inside_fraction(phi_l.back(), "a", 0.0, m.region_radius);
        out.inside_fraction.push_back(inside);
        out.absorbed.push_back(inside > 1.0 - m.eps);
        if (!out.absorbed.back()) {
            out.interaction_final =
                std::max(out.interaction_final, interaction_strength(phi_l.back(), h_aa));
        }
    }
    require(out.interaction_final < negligible_interaction, ErrorKind::InteractionNotNegligibleAtEnd,
            "interaction strength " + detail::fmt(out.interaction_final) +
                " at t_final for a component that was not absorbed");

    {
        std::vector<Complex> sum(run.final.size());
        for (std::size_t l = 0; l < L; ++l) {
            const StateVector prod = tensor_product({phi_l[l], b_t[l]});
            for (std::size_t i = 0; i < sum.size(); ++i) {
                sum[i] += m.c[l] * prod[i];
            }
        }
        const StateVector expected(run.final.space(), std::move(sum), 1e-8);
        out.structure_deficit = fidelity_deficit(run.final.normalized(), expected.normalized());
    }

    // Free center-of-mass packet and extraction.
    HamiltonianSpec h_cm;
    h_cm.hbar = cfg.hbar;
    h_cm.kinetic.push_back({"R_A", mass});
    const StateVector phi_t = evolve_exact(phi0, h_cm, s.dt, steps, opts).final;
    const RelativeState rel = extract_relative_state(run.final, phi_t);
    out.overlap_weight = rel.overlap_weight;
    const StateVector &psi1 = rel.state;

    std::vector<StateVector> chi;
    for (std::size_t l = 0; l < L; ++l) {
        chi.push_back(extract_relative_state(phi_l[l], phi_t).state);
    }
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t k = l + 1; k < L; ++k) {
            out.component_overlap = std::max(out.component_overlap, std::abs(inner_product(chi[l], chi[k])));
        }
    }

    const Bipartition cut{{"r_A", "a"}, {"b"}};
    const auto ensemble = transform_to_intrinsic(psi1, cut);
    const auto &sr = ensemble.provenance;
    out.schmidt_coefficients = sr.coefficients;
    std::vector<double> mags;
    for (const auto &z : m.c) {
        mags.push_back(std::abs(z));
    }
    const auto mags_sorted = detail::sorted_descending(mags);
    for (std::size_t l = 0; l < std::max(mags_sorted.size(), sr.rank()); ++l) {
        const double a = l < sr.rank() ? sr.coefficients[l] : 0.0;
        const double b = l < mags_sorted.size() ? mags_sorted[l] : 0.0;
        out.coefficient_error = std::max(out.coefficient_error, std::abs(a - b));
    }

    for (std::size_t j = 0; j < sr.rank(); ++j) {
        MeasurementBranch br;
        br.probability = sr.coefficients[j] * sr.coefficients[j];
        double best = -1.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double ov = std::abs(inner_product(sr.right_states[j], b_t[l]));
            if (ov > best) {
                best = ov;
                br.component = l;
            }
        }
        br.b_fidelity_deficit = fidelity_deficit(sr.right_states[j], b_t[br.component]);
        out.branches.push_back(br);
    }
    // The leading L branches carry the components; the rest are numerical dust.
    for (std::size_t j = 0; j < std::min(L, out.branches.size()); ++j) {
        out.max_b_fidelity_deficit = std::max(out.max_b_fidelity_deficit, out.branches[j].b_fidelity_deficit);
    }

    BranchSampler sampler(cfg.seed);
    const auto probs = sr.probabilities();
    out.counts.assign(L, 0);
    for (std::size_t t = 0; t < m.trials; ++t) {
        ++out.counts[out.branches[sampler.draw(probs)].component];
    }
    for (std::size_t l = 0; l < L; ++l) {
        out.expected.push_back(std::norm(m.c[l]));
        out.frequencies.push_back(static_cast<double>(out.counts[l]) / static_cast<double>(m.trials));
    }

    out.partition = detect_partition(psi1, {0.0, m.region_radius, m.eps, {"r_A"}});
    const DensityMatrix rho_a = reduced_density_matrix(psi1, {"a"});
    out.a_density = detail::density_diagonal(rho_a);
    out.a_grid = m.a.grid.points();
    return out;
}

inline MeasurementReport run_position_measurement(const ScenarioConfig &cfg, std::size_t workers = 1) {
    cfg.validate();
    require(cfg.scenario == "measurement", ErrorKind::Validation, "config is not a measurement scenario");
    MeasurementReport rep;
    rep.points = detail::map_indices(cfg.A.masses.size(), workers,
                                     [&](std::size_t i) { return run_measurement_point(cfg, cfg.A.masses[i]); });
    return rep;
}

} // namespace framelab
