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
 * Command implementations behind the framelab executable: run, sweep and
 * verify. Each returns a process exit code.
 *
 * Exit codes: 0 success, 2 config parse error, 3 validation error,
 * 4 simulation or I/O error, 5 verification failure.
 */

#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "framelab/config.hpp"
#include "framelab/error.hpp"
#include "framelab/report.hpp"
#include "framelab/scenarios.hpp"

namespace framelab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char *version = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kParseError = 2,
    kValidationError = 3,
    kRuntimeError = 4,
    kVerifyFailed = 5,
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ConfigParse:
        return kParseError;
    case ErrorKind::Validation:
        return kValidationError;
    default:
        return kRuntimeError;
    }
}

inline std::string sha256_hex(const std::string &data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX *ctx = EVP_MD_CTX_new();
    require(ctx != nullptr, ErrorKind::InvalidArgument, "cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    require(ok, ErrorKind::InvalidArgument, "SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string config_hash(const json &doc) { return sha256_hex(config::canonical(doc)); }

/// Worker-pool size from FRAMELAB_WORKERS; absent or invalid means sequential.
inline std::size_t worker_count() {
    const char *env = std::getenv("FRAMELAB_WORKERS");
    if (env == nullptr) {
        return 1;
    }
    char *end = nullptr;
    const long n = std::strtol(env, &end, 10);
    return (end != env && *end == '\0' && n > 0) ? static_cast<std::size_t>(n) : 1;
}

inline void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
    out << text;
    require(static_cast<bool>(out), ErrorKind::InvalidArgument, "write to '" + path.string() + "' failed");
}

inline std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Everything a finished run leaves behind, before it is written out.
struct RunOutput {
    std::string report_text;
    std::vector<report::Table> tables;
    json summary_rows = json::array(); // per-point rows for sweep summaries
    double wall_seconds = 0.0;
};

/// Runs the configured scenario and renders the report record.
inline RunOutput execute(const json &doc, std::size_t workers) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig cfg = config::from_json(doc);
    RunOutput out;
    json result;
    if (cfg.scenario == "collision") {
        const auto rep = run_collision(cfg, workers);
        result = report::to_json(rep);
        out.tables = report::tables(rep);
        for (const auto &p : rep.points) {
            out.summary_rows.push_back({{"mass", p.mass},
                                        {"fidelity_deficit", p.fidelity_deficit},
                                        {"residual", p.residual},
                                        {"trace_distance", p.trace_distance}});
        }
    } else {
        const auto rep = run_position_measurement(cfg, workers);
        result = report::to_json(rep);
        out.tables = report::tables(rep);
        for (const auto &p : rep.points) {
            out.summary_rows.push_back({{"mass", p.mass},
                                        {"frequency_1", p.frequencies.empty() ? 0.0 : p.frequencies.front()},
                                        {"max_b_fidelity_deficit", p.max_b_fidelity_deficit},
                                        {"component_overlap", p.component_overlap}});
        }
    }
    json rec = {{"schema", report::report_schema},
                {"tool_version", version},
                {"scenario", cfg.scenario},
                {"config_hash", config_hash(doc)},
                {"seed", cfg.seed},
                {"config", config::normalize_numbers(doc)},
                {"result", std::move(result)}};
    out.report_text = rec.dump(2) + "\n";
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// Writes report.json, plot tables and manifest.json into `dir`.
inline json write_run(const fs::path &dir, const json &doc, const RunOutput &run) {
    fs::create_directories(dir);
    write_text(dir / "report.json", run.report_text);
    json plots = json::array();
    for (const auto &t : run.tables) {
        write_text(dir / t.name, t.render());
        plots.push_back(t.name);
    }
    const json entry = {{"report", "report.json"},
                        {"report_sha256", sha256_hex(run.report_text)},
                        {"plots", plots},
                        {"wall_seconds", run.wall_seconds}};
    std::uint64_t seed = doc.contains("seed") ? doc["seed"].get<std::uint64_t>() : 0;
    const json manifest = {{"tool", "framelab"},
                           {"version", version},
                           {"config_hash", config_hash(doc)},
                           {"seeds", json::array({seed})},
                           {"runs", json::array({entry})},
                           {"total_wall_seconds", run.wall_seconds}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return entry;
}

/// Loads a config file and applies --seed and --set overrides; throws framelab::Error.
inline json load_config(const std::string &path, const std::vector<std::string> &overrides,
                        std::optional<std::uint64_t> seed) {
    json doc = config::read_file(path);
    require(doc.is_object(), ErrorKind::ConfigParse, "config root must be an object");
    for (const auto &o : overrides) {
        const auto eq = o.find('=');
        require(eq != std::string::npos && eq > 0, ErrorKind::Validation,
                "override '" + o + "' is not of the form key=value");
        config::set_key(doc, o.substr(0, eq), config::parse_value(o.substr(eq + 1)));
    }
    if (seed) {
        doc["seed"] = *seed;
    }
    return doc;
}

inline int report_error(const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
}

inline int cmd_run(const std::string &config_path, const std::string &out_dir,
                   const std::vector<std::string> &overrides, std::optional<std::uint64_t> seed = std::nullopt) {
    try {
        const json doc = load_config(config_path, overrides, seed);
        config::from_json(doc);
        const RunOutput run = execute(doc, worker_count());
        write_run(out_dir, doc, run);
        std::cout << "wrote " << (fs::path(out_dir) / "report.json").string() << "\n";
        return kOk;
    } catch (const Error &e) {
        return report_error(e);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

inline std::string value_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline int cmd_sweep(const std::string &config_path, const std::string &param, const std::vector<double> &values,
                     const std::string &out_dir, std::optional<std::uint64_t> seed = std::nullopt) {
    std::vector<json> docs;
    try {
        require(!values.empty(), ErrorKind::Validation, "sweep needs at least one value");
        const json base = load_config(config_path, {}, seed);
        require(config::is_numeric_key(base, param), ErrorKind::Validation,
                "unknown or non-numeric sweep key '" + param + "'");
        for (double v : values) {
            json doc = base;
            config::set_key(doc, param, v);
            config::from_json(doc);
            docs.push_back(std::move(doc));
        }
    } catch (const Error &e) {
        return report_error(e);
    }

    const std::size_t workers = worker_count();
    struct Slot {
        std::optional<RunOutput> run;
        std::optional<Error> error;
    };
    const auto slots = framelab::detail::map_indices(docs.size(), workers, [&](std::size_t i) {
        Slot s;
        try {
            s.run = execute(docs[i], 1);
        } catch (const Error &e) {
            s.error = e;
        }
        return s;
    });

    int code = kOk;
    json runs = json::array();
    json rows = json::array();
    report::Table summary{"summary.csv", {}, {}};
    double total = 0.0;
    try {
        fs::create_directories(out_dir);
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (slots[i].error) {
                std::cerr << "error: " << param << "=" << value_tag(values[i]) << ": " << slots[i].error->what() << "\n";
                code = std::max(code, exit_code_for(slots[i].error->kind()));
                continue;
            }
            const std::string sub = "run_" + std::to_string(i);
            json entry = write_run(fs::path(out_dir) / sub, docs[i], *slots[i].run);
            entry["dir"] = sub;
            entry["value"] = values[i];
            runs.push_back(entry);
            total += slots[i].run->wall_seconds;
            for (const auto &r : slots[i].run->summary_rows) {
                json row = {{"value", values[i]}};
                std::vector<double> csv{values[i]};
                if (summary.columns.empty()) {
                    summary.columns.push_back("value");
                    for (const auto &[k, v] : r.items()) {
                        summary.columns.push_back(k);
                    }
                }
                for (const auto &[k, v] : r.items()) {
                    row[k] = v;
                    csv.push_back(v.get<double>());
                }
                rows.push_back(std::move(row));
                summary.rows.push_back(std::move(csv));
            }
        }
        std::vector<double> td;
        for (const auto &r : rows) {
            if (r.contains("trace_distance")) {
                td.push_back(r["trace_distance"].get<double>());
            }
        }
        json flags = json::object();
        if (!td.empty()) {
            flags["trace_distance_nonincreasing"] = nonincreasing(td);
        }
        const json summary_json = {{"param", param}, {"values", values}, {"rows", rows}, {"flags", flags}};
        write_text(fs::path(out_dir) / "summary.json", summary_json.dump(2) + "\n");
        write_text(fs::path(out_dir) / summary.name, summary.render());
        std::uint64_t s = docs.front().contains("seed") ? docs.front()["seed"].get<std::uint64_t>() : 0;
        const json manifest = {{"tool", "framelab"},
                               {"version", version},
                               {"config_hash", config_hash(docs.front())},
                               {"sweep", {{"param", param}, {"values", values}}},
                               {"seeds", json::array({s})},
                               {"runs", runs},
                               {"summary", {"summary.json", "summary.csv"}},
                               {"total_wall_seconds", total}};
        write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    std::cout << "wrote " << runs.size() << " of " << docs.size() << " runs to " << out_dir << "\n";
    return code;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

namespace detail {

struct Checker {
    std::vector<std::string> failures;
    std::string where;

    void expect(bool ok, const std::string &what) {
        if (!ok) {
            failures.push_back(where + ": " + what);
        }
    }
};

inline double sum_of(const json &arr) {
    double s = 0.0;
    for (const auto &v : arr) {
        s += v.get<double>();
    }
    return s;
}

inline void check_density(Checker &c, const json &m, const std::string &what) {
    const CMatrix rho = report::matrix_from_json(m);
    c.expect(rho.hermiticity_error() <= 1e-10, what + " is not Hermitian");
    c.expect(std::abs(rho.trace().real() - 1.0) <= 1e-10, what + " trace differs from 1");
    const auto ev = hermitian_eigen(rho, false).values;
    c.expect(ev.empty() || ev.front() >= -1e-10, what + " has a negative eigenvalue");
}

inline void check_collision(Checker &c, const json &res) {
    std::vector<double> mass;
    std::vector<double> deficit;
    std::vector<double> residual;
    std::vector<double> td;
    for (const auto &p : res.at("points")) {
        const auto &probs = p.at("branches").at("probabilities");
        c.expect(std::abs(sum_of(probs) - 1.0) <= 1e-8, "branch probabilities do not sum to 1");
        for (const auto &v : probs) {
            c.expect(v.get<double>() >= 0.0, "negative branch probability");
        }
        check_density(c, p.at("rho_internal"), "rho_internal");
        const double t = p.at("trace_distance").get<double>();
        c.expect(t >= 0.0 && t <= 1.0 + 1e-12, "trace distance outside [0, 1]");
        mass.push_back(p.at("mass").get<double>());
        deficit.push_back(p.at("fidelity_deficit").get<double>());
        residual.push_back(p.at("residual").get<double>());
        td.push_back(t);
    }
    const auto &flags = res.at("flags");
    c.expect(flags.at("deficit_decreasing").get<bool>() == strictly_decreasing(deficit),
             "deficit_decreasing flag disagrees with the data");
    c.expect(flags.at("residual_decreasing").get<bool>() == strictly_decreasing(residual),
             "residual_decreasing flag disagrees with the data");
    c.expect(flags.at("trace_distance_nonincreasing").get<bool>() == nonincreasing(td),
             "trace_distance_nonincreasing flag disagrees with the data");
    const auto slope = fitted_exponent(mass, residual);
    const auto &stored = res.at("residual_exponent");
    c.expect(stored.is_null() == !slope.has_value() &&
                 (!slope || std::abs(stored.get<double>() - *slope) <= 1e-9 * std::max(1.0, std::abs(*slope))),
             "residual_exponent disagrees with the data");
}

inline void check_measurement(Checker &c, const json &res) {
    for (const auto &p : res.at("points")) {
        double s = 0.0;
        for (const auto &b : p.at("branches")) {
            s += b.at("probability").get<double>();
            c.expect(b.at("probability").get<double>() >= 0.0, "negative branch probability");
        }
        c.expect(std::abs(s - 1.0) <= 1e-8, "branch probabilities do not sum to 1");
        const auto &o = p.at("outcomes");
        c.expect(std::abs(sum_of(o.at("expected")) - 1.0) <= 1e-8, "expected outcome probabilities do not sum to 1");
        c.expect(std::abs(sum_of(o.at("frequencies")) - 1.0) <= 1e-8, "outcome frequencies do not sum to 1");
        const double n = sum_of(o.at("counts"));
        for (std::size_t l = 0; l < o.at("counts").size(); ++l) {
            c.expect(std::abs(o.at("counts")[l].get<double>() / n - o.at("frequencies")[l].get<double>()) <= 1e-12,
                     "outcome frequencies disagree with counts");
        }
        const auto &part = p.at("partition");
        double w = 0.0;
        for (const auto &v : part.at("C")) {
            w += v.get<double>() * v.get<double>();
        }
        for (const auto &v : part.at("D")) {
            w += v.get<double>() * v.get<double>();
        }
        c.expect(std::abs(w - 1.0) <= 1e-8, "partition coefficients do not sum to 1");
        const double leak = part.at("leakage").get<double>();
        c.expect(leak >= 0.0 && leak <= 1.0, "partition leakage outside [0, 1]");
    }
}

inline void check_report(Checker &c, const fs::path &report_path) {
    const std::string text = read_text(report_path);
    const fs::path manifest_path = report_path.parent_path() / "manifest.json";
    if (!fs::exists(manifest_path)) {
        c.expect(false, "no manifest.json next to the report");
        return;
    }
    json manifest;
    json rec;
    try {
        manifest = json::parse(read_text(manifest_path));
        rec = json::parse(text);
    } catch (const json::parse_error &e) {
        c.expect(false, std::string("unreadable JSON: ") + e.what());
        return;
    }
    bool listed = false;
    for (const auto &r : manifest.value("runs", json::array())) {
        if (r.value("report", "") == report_path.filename().string()) {
            listed = true;
            c.expect(r.value("report_sha256", "") == sha256_hex(text), "report digest does not match manifest");
        }
    }
    c.expect(listed, "report not listed in manifest");
    try {
        c.expect(rec.at("schema").get<std::string>() == report::report_schema, "unknown report schema");
        c.expect(rec.at("config_hash").get<std::string>() == config_hash(rec.at("config")),
                 "config hash does not match the embedded config");
        const std::string scen = rec.at("scenario").get<std::string>();
        if (scen == "collision") {
            check_collision(c, rec.at("result"));
        } else if (scen == "measurement") {
            check_measurement(c, rec.at("result"));
        } else {
            c.expect(false, "unknown scenario '" + scen + "'");
        }
    } catch (const json::exception &e) {
        c.expect(false, std::string("malformed report: ") + e.what());
    }
}

inline void check_summary(Checker &c, const fs::path &path) {
    try {
        const json s = json::parse(read_text(path));
        std::vector<double> td;
        for (const auto &r : s.at("rows")) {
            if (r.contains("trace_distance")) {
                td.push_back(r.at("trace_distance").get<double>());
            }
        }
        const auto &flags = s.at("flags");
        if (flags.contains("trace_distance_nonincreasing")) {
            c.expect(flags.at("trace_distance_nonincreasing").get<bool>() == nonincreasing(td),
                     "summary monotonicity flag disagrees with the rows");
        }
    } catch (const json::exception &e) {
        c.expect(false, std::string("malformed summary: ") + e.what());
    }
}

} // namespace detail

inline int cmd_verify(const std::string &dir) {
    if (!fs::is_directory(dir)) {
        std::cerr << "error: no reports found (not a directory: " << dir << ")\n";
        return kVerifyFailed;
    }
    std::vector<fs::path> reports;
    std::vector<fs::path> summaries;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) {
            continue;
        }
        if (e.path().filename() == "report.json") {
            reports.push_back(e.path());
        } else if (e.path().filename() == "summary.json") {
            summaries.push_back(e.path());
        }
    }
    std::sort(reports.begin(), reports.end());
    std::sort(summaries.begin(), summaries.end());
    if (reports.empty()) {
        std::cerr << "error: no reports found in " << dir << "\n";
        return kVerifyFailed;
    }
    detail::Checker c;
    for (const auto &r : reports) {
        c.where = r.string();
        detail::check_report(c, r);
    }
    for (const auto &s : summaries) {
        c.where = s.string();
        detail::check_summary(c, s);
    }
    for (const auto &f : c.failures) {
        std::cerr << "FAIL " << f << "\n";
    }
    std::cout << reports.size() << " report(s) checked, " << c.failures.size() << " failure(s)\n";
    return c.failures.empty() ? kOk : kVerifyFailed;
}

} // namespace framelab::cli
