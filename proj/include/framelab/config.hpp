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
 * JSON scenario configuration: parsing, dotted-key overrides,
 * canonicalization and digest.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "framelab/error.hpp"
#include "framelab/scenarios.hpp"

namespace framelab::config {

using nlohmann::json;

/// Keys that may be set even when absent from the document.
inline const std::vector<std::string> &optional_keys() {
    static const std::vector<std::string> keys{"A.sigma", "seed"};
    return keys;
}

inline json read_file(const std::string &path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::ConfigParse, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error &e) {
        fail(ErrorKind::ConfigParse, "config '" + path + "': " + e.what());
    }
}

inline std::vector<std::string> split_key(std::string_view key) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        parts.emplace_back(key.substr(start, dot - start));
        if (dot == std::string_view::npos) {
            break;
        }
        start = dot + 1;
    }
    return parts;
}

/// Parses an override value: JSON when it parses, otherwise a plain string.
inline json parse_value(const std::string &text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &) {
        return text;
    }
}

/**
 * Sets a dotted key. "A.mass" is shorthand for a single-entry mass list.
 * Unknown keys raise Validation.
 */
inline void set_key(json &doc, const std::string &key, const json &value) {
    if (key == "A.mass") {
        require(value.is_number(), ErrorKind::Validation, "A.mass must be numeric");
        require(doc.contains("A") && doc["A"].is_object(), ErrorKind::Validation, "config has no 'A' section");
        doc["A"]["masses"] = json::array({value});
        return;
    }
    const auto parts = split_key(key);
    json *node = &doc;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        require(node->is_object() && node->contains(parts[i]), ErrorKind::Validation,
                "unknown config key '" + key + "'");
        node = &(*node)[parts[i]];
    }
    const bool optional =
        std::find(optional_keys().begin(), optional_keys().end(), key) != optional_keys().end();
    require(node->is_object() && (node->contains(parts.back()) || optional), ErrorKind::Validation,
            "unknown config key '" + key + "'");
    (*node)[parts.back()] = value;
}

/// Whether `key` names a numeric entry (or the A.mass shorthand).
inline bool is_numeric_key(const json &doc, const std::string &key) {
    if (key == "A.mass") {
        return doc.contains("A") && doc["A"].is_object();
    }
    const json *node = &doc;
    for (const auto &p : split_key(key)) {
        if (!node->is_object() || !node->contains(p)) {
            return std::find(optional_keys().begin(), optional_keys().end(), key) != optional_keys().end();
        }
        node = &(*node)[p];
    }
    return node->is_number();
}

/// Copy with every number stored as a double, so 1 and 1.0 canonicalize alike.
inline json normalize_numbers(const json &j) {
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_array()) {
        json out = json::array();
        for (const auto &v : j) {
            out.push_back(normalize_numbers(v));
        }
        return out;
    }
    if (j.is_object()) {
        json out = json::object();
        for (const auto &[k, v] : j.items()) {
            out[k] = normalize_numbers(v);
        }
        return out;
    }
    return j;
}

/// Sorted keys, numbers as shortest round-trip doubles, no whitespace.
inline std::string canonical(const json &doc) { return normalize_numbers(doc).dump(); }

// ---------------------------------------------------------------------------
// Field readers. Every failure is a Validation error naming the field.
// ---------------------------------------------------------------------------

namespace detail {

inline const json &at(const json &j, const std::string &key, const std::string &where) {
    require(j.is_object() && j.contains(key), ErrorKind::Validation,
            "missing field '" + where + key + "'");
    return j.at(key);
}

inline double number(const json &j, const std::string &key, const std::string &where) {
    const json &v = at(j, key, where);
    require(v.is_number(), ErrorKind::Validation, "field '" + where + key + "' must be a number");
    return v.get<double>();
}

inline double number_or(const json &j, const std::string &key, double fallback, const std::string &where) {
    return j.is_object() && j.contains(key) ? number(j, key, where) : fallback;
}

inline std::size_t count(const json &j, const std::string &key, const std::string &where) {
    const json &v = at(j, key, where);
    require(v.is_number() && v.get<double>() >= 0.0 && std::floor(v.get<double>()) == v.get<double>(),
            ErrorKind::Validation, "field '" + where + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v.get<double>());
}

inline Complex complex_value(const json &v, const std::string &what) {
    if (v.is_number()) {
        return {v.get<double>(), 0.0};
    }
    require(v.is_object() && v.contains("re") && v.contains("im") && v["re"].is_number() &&
                v["im"].is_number(),
            ErrorKind::Validation, what + " entries must be numbers or {\"re\", \"im\"} objects");
    return {v["re"].get<double>(), v["im"].get<double>()};
}

inline std::vector<Complex> complex_vector(const json &v, const std::string &what) {
    require(v.is_array(), ErrorKind::Validation, what + " must be an array");
    std::vector<Complex> out;
    for (const auto &e : v) {
        out.push_back(complex_value(e, what));
    }
    return out;
}

inline CMatrix complex_matrix(const json &v, const std::string &what) {
    require(v.is_array() && !v.empty(), ErrorKind::Validation, what + " must be a non-empty nested array");
    const std::size_t n = v.size();
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        require(v[i].is_array() && v[i].size() == n, ErrorKind::Validation, what + " must be square");
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = complex_value(v[i][j], what);
        }
    }
    return m;
}

inline Grid grid(const json &j, const std::string &where) {
    const std::size_t n = count(j, "points", where);
    const double lo = number(j, "min", where);
    const double hi = number(j, "max", where);
    try {
        return Grid(n, lo, hi);
    } catch (const Error &e) {
        fail(ErrorKind::Validation, where + ": " + e.what());
    }
}

inline GaussianParams packet(const json &j, const std::string &where) {
    GaussianParams p;
    p.R0 = number(j, "R0", where);
    p.P0 = number_or(j, "P0", 0.0, where);
    p.sigma = number(j, "sigma", where);
    require(p.sigma > 0.0, ErrorKind::Validation, "field '" + where + "sigma' must be > 0");
    return p;
}

inline ParticleConfig particle(const json &j, const std::string &where) {
    ParticleConfig p;
    p.grid = grid(at(j, "grid", where), where + "grid.");
    p.mass = number(j, "mass", where);
    if (j.contains("packet")) {
        p.packets.push_back(packet(j["packet"], where + "packet."));
    }
    if (j.contains("packets")) {
        require(j["packets"].is_array(), ErrorKind::Validation, "'" + where + "packets' must be an array");
        for (std::size_t i = 0; i < j["packets"].size(); ++i) {
            p.packets.push_back(packet(j["packets"][i], where + "packets[" + std::to_string(i) + "]."));
        }
    }
    return p;
}

} // namespace detail

/// Builds and validates a ScenarioConfig from a parsed document.
inline ScenarioConfig from_json(const json &doc) {
    using namespace detail;
    require(doc.is_object(), ErrorKind::Validation, "config must be a JSON object");
    ScenarioConfig cfg;
    const json &scen = at(doc, "scenario", "");
    require(scen.is_string(), ErrorKind::Validation, "field 'scenario' must be a string");
    cfg.scenario = scen.get<std::string>();
    if (doc.contains("units")) {
        cfg.hbar = number_or(doc["units"], "hbar", 1.0, "units.");
        cfg.unit_mass = number_or(doc["units"], "unit_mass", 1.0, "units.");
    }
    if (doc.contains("seed")) {
        cfg.seed = static_cast<std::uint64_t>(count(doc, "seed", ""));
    }

    const json &a = at(doc, "A", "");
    const json &masses = at(a, "masses", "A.");
    require(masses.is_array(), ErrorKind::Validation, "field 'A.masses' must be an array");
    cfg.A.masses.clear();
    for (const auto &m : masses) {
        require(m.is_number(), ErrorKind::Validation, "A.masses entries must be numbers");
        cfg.A.masses.push_back(m.get<double>());
    }
    cfg.A.sigma_ref = number(a, "sigma_ref", "A.");
    if (a.contains("sigma") && !a["sigma"].is_null()) {
        cfg.A.sigma = number(a, "sigma", "A.");
    }
    const json &ag = at(a, "grid", "A.");
    cfg.A.points = count(ag, "points", "A.grid.");
    cfg.A.half_width = number(ag, "half_width_sigmas", "A.grid.");
    cfg.A.internal = complex_matrix(at(a, "internal_hamiltonian", "A."), "A.internal_hamiltonian");
    cfg.A.internal_state = complex_vector(at(a, "internal_state", "A."), "A.internal_state");

    const json &c = at(doc, "coupling", "");
    cfg.coupling.g = number(c, "g", "coupling.");
    cfg.coupling.width = number(c, "width", "coupling.");
    cfg.coupling.K = complex_matrix(at(c, "K", "coupling."), "coupling.K");

    const json &s = at(doc, "schedule", "");
    cfg.schedule.t_initial = number(s, "t_initial", "schedule.");
    cfg.schedule.t_interaction = number(s, "t_interaction", "schedule.");
    cfg.schedule.t_final = number(s, "t_final", "schedule.");
    cfg.schedule.dt = number(s, "dt", "schedule.");
    cfg.schedule.checkpoint_every = s.contains("checkpoint_every") ? count(s, "checkpoint_every", "schedule.") : 100;

    if (cfg.scenario == "collision") {
        cfg.S = particle(at(doc, "S", ""), "S.");
    } else if (cfg.scenario == "measurement") {
        const json &m = at(doc, "measurement", "");
        MeasurementConfig mc;
        mc.a = particle(at(m, "a", "measurement."), "measurement.a.");
        mc.b = particle(at(m, "b", "measurement."), "measurement.b.");
        mc.c = complex_vector(at(m, "c", "measurement."), "measurement.c");
        const json &t = at(m, "trap", "measurement.");
        mc.trap.depth = number(t, "depth", "measurement.trap.");
        mc.trap.half_width = number(t, "half_width", "measurement.trap.");
        mc.trap.edge = number(t, "edge", "measurement.trap.");
        mc.trials = count(m, "trials", "measurement.");
        mc.region_radius = number(m, "region_radius", "measurement.");
        mc.eps = number_or(m, "eps", 1e-4, "measurement.");
        mc.separation_threshold = number_or(m, "separation_threshold", 1e-6, "measurement.");
        cfg.measurement = std::move(mc);
    }
    cfg.validate();
    return cfg;
}

} // namespace framelab::config
