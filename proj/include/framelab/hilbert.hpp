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
 * Discretized coordinate grids, finite-level factors and labeled
 * tensor-product state vectors.
 *
 * Amplitudes are stored row-major over the declared factor order (last
 * factor fastest). Coordinate amplitudes are continuum-normalized: the norm
 * is sqrt(sum |a|^2 * prod dx) with dx taken over coordinate factors only.
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "framelab/error.hpp"
#include "framelab/fft.hpp"

namespace framelab {

/// Uniform periodic grid x_k = x_min + k dx, k = 0..n_points-1.
class Grid {
  public:
    Grid(std::size_t n_points, double x_min, double x_max)
        : n_points_(n_points), x_min_(x_min), x_max_(x_max) {
        require(n_points >= 8 && std::has_single_bit(n_points), ErrorKind::InvalidArgument,
                "grid size must be a power of two and at least 8");
        require(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min,
                ErrorKind::InvalidArgument, "grid bounds must satisfy x_min < x_max");
    }

    /// Grid centered on `center` with the given half-width.
    static Grid centered(std::size_t n_points, double center, double half_width) {
        return {n_points, center - half_width, center + half_width};
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_points_; }
    [[nodiscard]] double x_min() const noexcept { return x_min_; }
    [[nodiscard]] double x_max() const noexcept { return x_max_; }
    [[nodiscard]] double length() const noexcept { return x_max_ - x_min_; }
    [[nodiscard]] double dx() const noexcept { return length() / static_cast<double>(n_points_); }
    [[nodiscard]] double x(std::size_t k) const noexcept {
        return x_min_ + static_cast<double>(k) * dx();
    }
    [[nodiscard]] std::vector<double> points() const {
        std::vector<double> xs(n_points_);
        for (std::size_t k = 0; k < n_points_; ++k) {
            xs[k] = x(k);
        }
        return xs;
    }
    [[nodiscard]] std::vector<double> wavenumbers() const {
        return Fft::wavenumbers(n_points_, length());
    }

    friend bool operator==(const Grid &, const Grid &) = default;

  private:
    std::size_t n_points_;
    double x_min_;
    double x_max_;
};

/// One tensor factor: a coordinate on a grid or a finite set of levels.
class Factor {
  public:
    enum class Kind { Coordinate, Level };

    static Factor coordinate(std::string label, Grid grid) {
        return Factor(std::move(label), Kind::Coordinate, std::move(grid), 0);
    }
    static Factor level(std::string label, std::size_t levels) {
        require(levels >= 1, ErrorKind::InvalidArgument, "level factor needs d >= 1");
        return Factor(std::move(label), Kind::Level, std::nullopt, levels);
    }

    [[nodiscard]] const std::string &label() const noexcept { return label_; }
    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_coordinate() const noexcept { return kind_ == Kind::Coordinate; }
    [[nodiscard]] const Grid &grid() const {
        require(grid_.has_value(), ErrorKind::InvalidArgument,
                "factor '" + label_ + "' has no grid");
        return *grid_;
    }
    [[nodiscard]] std::size_t dimension() const noexcept {
        return grid_ ? grid_->size() : levels_;
    }
    /// Quadrature weight of one index step (dx, or 1 for levels).
    [[nodiscard]] double weight() const noexcept { return grid_ ? grid_->dx() : 1.0; }

    friend bool operator==(const Factor &, const Factor &) = default;

  private:
    Factor(std::string label, Kind kind, std::optional<Grid> grid, std::size_t levels)
        : label_(std::move(label)), kind_(kind), grid_(std::move(grid)), levels_(levels) {}

    std::string label_;
    Kind kind_;
    std::optional<Grid> grid_;
    std::size_t levels_;
};

/// Ordered list of uniquely labeled factors.
class Space {
  public:
    Space() = default;
    explicit Space(std::vector<Factor> factors) : factors_(std::move(factors)) {
        std::unordered_set<std::string> seen;
        for (const auto &f : factors_) {
            require(seen.insert(f.label()).second, ErrorKind::DuplicateFactorLabel,
                    "factor label '" + f.label() + "' appears twice");
        }
        strides_.assign(factors_.size(), 1);
        total_ = 1;
        for (std::size_t k = factors_.size(); k-- > 0;) {
            strides_[k] = total_;
            total_ *= factors_[k].dimension();
        }
    }

    [[nodiscard]] const std::vector<Factor> &factors() const noexcept { return factors_; }
    [[nodiscard]] std::size_t rank() const noexcept { return factors_.size(); }
    [[nodiscard]] std::size_t dimension() const noexcept { return total_; }
    [[nodiscard]] std::size_t stride(std::size_t axis) const { return strides_.at(axis); }
    [[nodiscard]] const Factor &factor(std::size_t axis) const { return factors_.at(axis); }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view label) const {
        for (std::size_t k = 0; k < factors_.size(); ++k) {
            if (factors_[k].label() == label) {
                return k;
            }
        }
        return std::nullopt;
    }
    [[nodiscard]] std::size_t axis(std::string_view label) const {
        const auto k = find(label);
        require(k.has_value(), ErrorKind::MissingFactor,
                "no factor labeled '" + std::string(label) + "'");
        return *k;
    }
    [[nodiscard]] bool contains(std::string_view label) const { return find(label).has_value(); }

    /// Product of dx over coordinate factors.
    [[nodiscard]] double weight() const noexcept {
        double w = 1.0;
        for (const auto &f : factors_) {
            w *= f.weight();
        }
        return w;
    }

    [[nodiscard]] std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(factors_.size());
        for (const auto &f : factors_) {
            out.push_back(f.label());
        }
        return out;
    }

    /// Sub-space with the listed labels, kept in this space's order.
    [[nodiscard]] Space subspace(std::span<const std::string> labels) const {
        std::vector<Factor> out;
        for (const auto &f : factors_) {
            if (std::find(labels.begin(), labels.end(), f.label()) != labels.end()) {
                out.push_back(f);
            }
        }
        require(out.size() == labels.size(), ErrorKind::MissingFactor,
                "subspace labels not all present");
        return Space(std::move(out));
    }

    friend bool operator==(const Space &a, const Space &b) { return a.factors_ == b.factors_; }

  private:
    std::vector<Factor> factors_;
    std::vector<std::size_t> strides_;
    std::size_t total_ = 1;
};

/// Complex amplitudes over a labeled tensor-product space.
class StateVector {
  public:
    static constexpr double default_norm_tolerance = 1e-10;

    StateVector() = default;
    StateVector(Space space, std::vector<Complex> amplitudes,
                double norm_tolerance = default_norm_tolerance)
        : space_(std::move(space)), amplitudes_(std::move(amplitudes)),
          norm_tolerance_(norm_tolerance) {
        require(amplitudes_.size() == space_.dimension(), ErrorKind::DimensionMismatch,
                "amplitude count " + std::to_string(amplitudes_.size()) +
                    " does not match space dimension " + std::to_string(space_.dimension()));
    }

    /// Builds a state from orthonormal-basis coefficients (amplitude * sqrt(prod dx)).
    static StateVector from_coefficients(Space space, std::vector<Complex> coefficients) {
        const double inv = 1.0 / std::sqrt(space.weight());
        for (auto &c : coefficients) {
            c *= inv;
        }
        return {std::move(space), std::move(coefficients)};
    }

    [[nodiscard]] const Space &space() const noexcept { return space_; }
    [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
    [[nodiscard]] std::size_t size() const noexcept { return amplitudes_.size(); }
    [[nodiscard]] double norm_tolerance() const noexcept { return norm_tolerance_; }
    [[nodiscard]] const Complex &operator[](std::size_t k) const { return amplitudes_[k]; }

    [[nodiscard]] double norm_squared() const {
        double s = 0.0;
        for (const auto &a : amplitudes_) {
            s += std::norm(a);
        }
        return s * space_.weight();
    }
    [[nodiscard]] double norm() const { return std::sqrt(norm_squared()); }
    [[nodiscard]] bool is_normalized() const { return std::abs(norm() - 1.0) <= norm_tolerance_; }

    [[nodiscard]] StateVector normalized() const {
        const double n = norm();
        require(n > 0.0, ErrorKind::InvalidArgument, "cannot normalize a zero state");
        return scaled(1.0 / n);
    }
    [[nodiscard]] StateVector scaled(Complex factor) const {
        std::vector<Complex> out(amplitudes_);
        for (auto &a : out) {
            a *= factor;
        }
        return {space_, std::move(out), norm_tolerance_};
    }

    /// Amplitudes in the orthonormal discrete basis (times sqrt(prod dx)).
    [[nodiscard]] std::vector<Complex> coefficients() const {
        const double s = std::sqrt(space_.weight());
        std::vector<Complex> out(amplitudes_);
        for (auto &a : out) {
            a *= s;
        }
        return out;
    }

  private:
    Space space_;
    std::vector<Complex> amplitudes_;
    double norm_tolerance_ = default_norm_tolerance;
};

inline void require_same_space(const StateVector &a, const StateVector &b) {
    require(a.space() == b.space(), ErrorKind::SpaceMismatch,
            "states live on different factor spaces");
}

/// Parameters of a Gaussian wavepacket with amplitude exp(-(x-R0)^2 / 2 sigma^2).
struct GaussianParams {
    double R0 = 0.0;
    double P0 = 0.0;
    double sigma = 1.0;
    double mass = 1.0;
    double hbar = 1.0;
    double unit_mass = 1.0;

    /// Dimensionless mass M/[m].
    [[nodiscard]] double W() const { return mass / unit_mass; }
    /// Velocity dispersion hbar / (sigma M).
    [[nodiscard]] double xi() const { return hbar / (sigma * mass); }
    /// Standard deviation of |g|^2 in position.
    [[nodiscard]] double position_spread() const { return sigma / std::numbers::sqrt2; }
    /// Standard deviation of |g|^2 in momentum.
    [[nodiscard]] double momentum_spread() const { return hbar / (sigma * std::numbers::sqrt2); }

    /// sigma = sigma_ref / sqrt(W): both sigma and xi vanish as W grows.
    static GaussianParams scaled(double sigma_ref, double mass, double hbar = 1.0,
                                 double unit_mass = 1.0) {
        GaussianParams p;
        p.mass = mass;
        p.hbar = hbar;
        p.unit_mass = unit_mass;
        p.sigma = sigma_ref / std::sqrt(mass / unit_mass);
        return p;
    }

    /// Amplitude width after free evolution for time t.
    [[nodiscard]] double sigma_at(double t) const {
        const double tau = hbar * t / (mass * sigma * sigma);
        return sigma * std::sqrt(1.0 + tau * tau);
    }
};

/// Boundary mass threshold for make_gaussian.
inline constexpr double gaussian_clip_threshold = 1e-12;

inline StateVector make_gaussian(const Grid &grid, const GaussianParams &p,
                                 std::string label = "x") {
    require(p.sigma > 0.0 && p.mass > 0.0 && p.hbar > 0.0 && p.unit_mass > 0.0,
            ErrorKind::InvalidArgument, "sigma, mass, hbar and unit mass must be positive");
    require(p.sigma >= 3.0 * grid.dx(), ErrorKind::GridTooCoarse,
            "sigma=" + std::to_string(p.sigma) + " is below 3 dx=" + std::to_string(3.0 * grid.dx()));
    const double outside = 0.5 * std::erfc((grid.x_max() - p.R0) / p.sigma) +
                           0.5 * std::erfc((p.R0 - grid.x_min()) / p.sigma);
    require(outside < gaussian_clip_threshold, ErrorKind::SupportClipped,
            "wavepacket mass outside the grid is " + std::to_string(outside));

    const double prefactor = std::pow(std::numbers::pi * p.sigma * p.sigma, -0.25);
    std::vector<Complex> amps(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double x = grid.x(k);
        const double d = x - p.R0;
        amps[k] = prefactor * std::exp(-d * d / (2.0 * p.sigma * p.sigma)) *
                  std::polar(1.0, x * p.P0 / p.hbar);
    }
    return {Space({Factor::coordinate(std::move(label), grid)}), std::move(amps)};
}

/// Normalized state on a single level factor from raw components.
inline StateVector make_level_state(std::string label, std::vector<Complex> components) {
    const std::size_t d = components.size();
    StateVector s(Space({Factor::level(std::move(label), d)}), std::move(components));
    return s.normalized();
}

/// Outer product; factors are concatenated in argument order.
inline StateVector tensor_product(std::span<const StateVector> states) {
    require(!states.empty(), ErrorKind::InvalidArgument, "tensor product of nothing");
    std::vector<Factor> factors;
    std::vector<Complex> amps{Complex(1.0)};
    for (const auto &s : states) {
        for (const auto &f : s.space().factors()) {
            factors.push_back(f);
        }
        std::vector<Complex> next(amps.size() * s.size());
        for (std::size_t i = 0; i < amps.size(); ++i) {
            for (std::size_t j = 0; j < s.size(); ++j) {
                next[i * s.size() + j] = detail::cmul(amps[i], s[j]);
            }
        }
        amps = std::move(next);
    }
    return {Space(std::move(factors)), std::move(amps)};
}

inline StateVector tensor_product(std::initializer_list<StateVector> states) {
    const std::vector<StateVector> v(states);
    return tensor_product(std::span<const StateVector>(v));
}

/// <a|b> with quadrature weights; conjugate-linear in a.
inline Complex inner_product(const StateVector &a, const StateVector &b) {
    require_same_space(a, b);
    Complex s{};
    const auto x = a.amplitudes();
    const auto y = b.amplitudes();
    for (std::size_t k = 0; k < x.size(); ++k) {
        s += detail::cmul(std::conj(x[k]), y[k]);
    }
    return s * a.space().weight();
}

/**
 * Walks every multi-index of a space and reports, for each flat index, the
 * mixed-radix positions inside two disjoint axis groups.
 */
class AxisSplit {
  public:
    AxisSplit(const Space &space, std::span<const std::size_t> group_a)
        : space_(space), in_a_(space.rank(), false) {
        for (auto ax : group_a) {
            in_a_.at(ax) = true;
        }
        offsets_a_.resize(space.rank());
        offsets_b_.resize(space.rank());
        std::size_t sa = 1;
        std::size_t sb = 1;
        for (std::size_t ax = space.rank(); ax-- > 0;) {
            const std::size_t d = space.factor(ax).dimension();
            if (in_a_[ax]) {
                offsets_a_[ax] = sa;
                offsets_b_[ax] = 0;
                sa *= d;
            } else {
                offsets_a_[ax] = 0;
                offsets_b_[ax] = sb;
                sb *= d;
            }
        }
        dim_a_ = sa;
        dim_b_ = sb;
    }

    [[nodiscard]] std::size_t dim_a() const noexcept { return dim_a_; }
    [[nodiscard]] std::size_t dim_b() const noexcept { return dim_b_; }

    /// fn(flat, index_in_a, index_in_b) for every flat index in order.
    template <class Fn> void for_each(Fn &&fn) const {
        const std::size_t rank = space_.rank();
        std::vector<std::size_t> idx(rank, 0);
        std::size_t ia = 0;
        std::size_t ib = 0;
        const std::size_t total = space_.dimension();
        for (std::size_t flat = 0; flat < total; ++flat) {
            fn(flat, ia, ib);
            for (std::size_t ax = rank; ax-- > 0;) {
                const std::size_t d = space_.factor(ax).dimension();
                if (++idx[ax] < d) {
                    ia += offsets_a_[ax];
                    ib += offsets_b_[ax];
                    break;
                }
                idx[ax] = 0;
                ia -= offsets_a_[ax] * (d - 1);
                ib -= offsets_b_[ax] * (d - 1);
            }
        }
    }

  private:
    const Space &space_;
    std::vector<bool> in_a_;
    std::vector<std::size_t> offsets_a_;
    std::vector<std::size_t> offsets_b_;
    std::size_t dim_a_ = 1;
    std::size_t dim_b_ = 1;
};

/// Axis numbers of `labels`, sorted in the space's order.
inline std::vector<std::size_t> axes_of(const Space &space, std::span<const std::string> labels) {
    std::vector<std::size_t> axes;
    axes.reserve(labels.size());
    for (const auto &l : labels) {
        axes.push_back(space.axis(l));
    }
    std::sort(axes.begin(), axes.end());
    require(std::adjacent_find(axes.begin(), axes.end()) == axes.end(),
            ErrorKind::InvalidArgument, "label listed twice");
    return axes;
}

/// Same state with factors reordered to `order` (a permutation of the labels).
inline StateVector permute(const StateVector &psi, std::span<const std::string> order) {
    const Space &src = psi.space();
    require(order.size() == src.rank(), ErrorKind::InvalidArgument,
            "permutation must list every factor");
    std::vector<Factor> factors;
    std::vector<std::size_t> src_axis;
    for (const auto &l : order) {
        src_axis.push_back(src.axis(l));
        factors.push_back(src.factor(src_axis.back()));
    }
    Space dst(std::move(factors));
    // Destination stride of each source axis.
    std::vector<std::size_t> dst_stride(src.rank());
    for (std::size_t k = 0; k < order.size(); ++k) {
        dst_stride[src_axis[k]] = dst.stride(k);
    }
    std::vector<Complex> out(psi.size());
    std::vector<std::size_t> idx(src.rank(), 0);
    std::size_t target = 0;
    for (std::size_t flat = 0; flat < psi.size(); ++flat) {
        out[target] = psi[flat];
        for (std::size_t ax = src.rank(); ax-- > 0;) {
            const std::size_t d = src.factor(ax).dimension();
            if (++idx[ax] < d) {
                target += dst_stride[ax];
                break;
            }
            idx[ax] = 0;
            target -= dst_stride[ax] * (d - 1);
        }
    }
    return {std::move(dst), std::move(out), psi.norm_tolerance()};
}

/// Mean and variance of one coordinate under |psi|^2.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

inline Moments position_moments(const StateVector &psi, std::string_view label) {
    const Space &sp = psi.space();
    const std::size_t ax = sp.axis(label);
    const Grid &g = sp.factor(ax).grid();
    const std::size_t stride = sp.stride(ax);
    const std::size_t n = g.size();
    double m0 = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t flat = 0; flat < psi.size(); ++flat) {
        const double x = g.x((flat / stride) % n);
        const double p = std::norm(psi[flat]);
        m0 += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    const double mean = m1 / m0;
    return {mean, m2 / m0 - mean * mean};
}

/// Mean and variance of the momentum conjugate to one coordinate.
inline Moments momentum_moments(const StateVector &psi, std::string_view label, double hbar) {
    const Space &sp = psi.space();
    const std::size_t ax = sp.axis(label);
    const Grid &g = sp.factor(ax).grid();
    const std::size_t stride = sp.stride(ax);
    const std::size_t n = g.size();
    const auto k = g.wavenumbers();
    const Fft fft(n);
    std::vector<Complex> line(n);
    double m0 = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    const std::size_t outer = psi.size() / (n * stride);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < stride; ++i) {
            const std::size_t base = o * n * stride + i;
            for (std::size_t j = 0; j < n; ++j) {
                line[j] = psi[base + j * stride];
            }
            fft.forward(line);
            for (std::size_t j = 0; j < n; ++j) {
                const double p = std::norm(line[j]);
                const double hk = hbar * k[j];
                m0 += p;
                m1 += p * hk;
                m2 += p * hk * hk;
            }
        }
    }
    const double mean = m1 / m0;
    return {mean, m2 / m0 - mean * mean};
}

} // namespace framelab
