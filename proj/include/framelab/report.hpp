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
 * Serialization of scenario reports to JSON records and CSV plot tables.
 */

#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "framelab/scenarios.hpp"

namespace framelab::report {

using nlohmann::json;

inline constexpr const char *report_schema = "framelab.report/1";
inline constexpr const char *absorption_model =
    "flat-bottom well on x_a - R_A plus the collision coupling (model construction)";

/// A CSV table: one header line, rows of numbers printed with %.17g.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::string render() const {
        std::string out;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out += (c ? "," : "") + columns[c];
        }
        out += '\n';
        char buf[40];
        for (const auto &r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", r[c]);
                out += (c ? "," : "");
                out += buf;
            }
            out += '\n';
        }
        return out;
    }
};

inline json matrix_json(const CMatrix &m) {
    json re = json::array();
    json im = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json rr = json::array();
        json ri = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            rr.push_back(m(i, j).real());
            ri.push_back(m(i, j).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    return {{"re", std::move(re)}, {"im", std::move(im)}};
}

inline CMatrix matrix_from_json(const json &j) {
    const auto &re = j.at("re");
    const auto &im = j.at("im");
    CMatrix m(re.size(), re.size());
    for (std::size_t i = 0; i < re.size(); ++i) {
        for (std::size_t k = 0; k < re.size(); ++k) {
            m(i, k) = Complex(re.at(i).at(k).get<double>(), im.at(i).at(k).get<double>());
        }
    }
    return m;
}

inline json optional_number(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

inline std::string mass_tag(double mass) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", mass);
    return buf;
}

inline json to_json(const CollisionPoint &p) {
    return {
        {"mass", p.mass},
        {"sigma", p.sigma},
        {"interaction", {{"initial", p.interaction_initial}, {"peak", p.interaction_peak}, {"final", p.interaction_final}}},
        {"norm_drift", p.norm_drift},
        {"energy_drift", p.energy_drift},
        {"fidelity_deficit", p.fidelity_deficit},
        {"residual", p.residual},
        {"overlap_weight", p.overlap_weight},
        {"branches",
         {{"probabilities", p.branch_probabilities},
          {"reduced_eigenvalues", p.reduced_eigenvalues},
          {"max_eigenvalue_error", p.branch_eigen_error},
          {"entropy", p.entropy},
          {"degenerate_groups", p.degenerate_groups},
          {"sampled", p.sampled_branch},
          {"during_interaction", p.during_interaction}}},
        {"schmidt_identity", p.schmidt_identity},
        {"trace_distance", p.trace_distance},
        {"rho_internal", matrix_json(p.rho_internal)},
    };
}

inline json to_json(const CollisionReport &r) {
    json points = json::array();
    for (const auto &p : r.points) {
        points.push_back(to_json(p));
    }
    return {{"points", std::move(points)},
            {"flags",
             {{"deficit_decreasing", r.deficit_decreasing},
              {"residual_decreasing", r.residual_decreasing},
              {"trace_distance_nonincreasing", r.trace_distance_nonincreasing}}},
            {"residual_exponent", optional_number(r.residual_exponent)}};
}

inline json to_json(const PartitionReport &p) {
    return {{"found", p.found},     {"absorbed", p.absorbed},           {"free", p.free},
            {"leakage", p.leakage}, {"weight_free", p.weight_free},     {"weight_absorbed", p.weight_absorbed},
            {"C", p.C},             {"D", p.D}};
}

inline json to_json(const MeasurementPoint &p) {
    json branches = json::array();
    for (const auto &b : p.branches) {
        branches.push_back(
            {{"probability", b.probability}, {"component", b.component}, {"b_fidelity_deficit", b.b_fidelity_deficit}});
    }
    json absorbed_flags = json::array();
    for (bool b : p.absorbed) {
        absorbed_flags.push_back(b);
    }
    return {
        {"mass", p.mass},
        {"sigma", p.sigma},
        {"interaction", {{"initial", p.interaction_initial}, {"final", p.interaction_final}}},
        {"norm_drift", p.norm_drift},
        {"initial_a_overlap", p.initial_a_overlap},
        {"b_raw_overlap", p.b_raw_overlap},
        {"absorption", {{"model", absorption_model}, {"inside_fraction", p.inside_fraction}, {"absorbed", absorbed_flags}}},
        {"overlap_weight", p.overlap_weight},
        {"structure_deficit", p.structure_deficit},
        {"component_overlap", p.component_overlap},
        {"schmidt_coefficients", p.schmidt_coefficients},
        {"coefficient_error", p.coefficient_error},
        {"branches", std::move(branches)},
        {"max_b_fidelity_deficit", p.max_b_fidelity_deficit},
        {"outcomes", {{"expected", p.expected}, {"counts", p.counts}, {"frequencies", p.frequencies}}},
        {"partition", to_json(p.partition)},
    };
}

inline json to_json(const MeasurementReport &r) {
    json points = json::array();
    for (const auto &p : r.points) {
        points.push_back(to_json(p));
    }
    return {{"points", std::move(points)}};
}

inline std::vector<Table> tables(const CollisionReport &r) {
    std::vector<Table> out;
    Table sweep{"sweep.csv", {"mass", "fidelity_deficit", "residual", "trace_distance", "overlap_weight"}, {}};
    for (const auto &p : r.points) {
        sweep.rows.push_back({p.mass, p.fidelity_deficit, p.residual, p.trace_distance, p.overlap_weight});
        Table dens{"s_density_M" + mass_tag(p.mass) + ".csv", {"x", "rho_S", "rho_re_S"}, {}};
        for (std::size_t i = 0; i < p.s_grid.size(); ++i) {
            dens.rows.push_back({p.s_grid[i], p.s_density[i], p.s_density_full[i]});
        }
        out.push_back(std::move(dens));
    }
    out.insert(out.begin(), std::move(sweep));
    return out;
}

inline std::vector<Table> tables(const MeasurementReport &r) {
    std::vector<Table> out;
    for (const auto &p : r.points) {
        const std::string tag = mass_tag(p.mass);
        Table outcomes{"outcomes_M" + tag + ".csv", {"component", "expected", "frequency", "count"}, {}};
        for (std::size_t l = 0; l < p.expected.size(); ++l) {
            outcomes.rows.push_back({static_cast<double>(l), p.expected[l], p.frequencies[l],
                                     static_cast<double>(p.counts[l])});
        }
        out.push_back(std::move(outcomes));
        Table dens{"a_density_M" + tag + ".csv", {"x", "density"}, {}};
        for (std::size_t i = 0; i < p.a_grid.size(); ++i) {
            dens.rows.push_back({p.a_grid[i], p.a_density[i]});
        }
        out.push_back(std::move(dens));
    }
    return out;
}

} // namespace framelab::report
