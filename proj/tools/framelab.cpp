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

// Command-line front end for the framelab scenarios.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "framelab/cli.hpp"

int main(int argc, char **argv) {
    CLI::App app{"framelab: composite wavepacket dynamics and intrinsic-frame reduction"};
    app.set_version_flag("--version", framelab::cli::version);
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "Override the config seed");

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    auto *run = app.add_subcommand("run", "Run one scenario");
    run->add_option("config", config_path, "Scenario config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--set", overrides, "Override a config key (dotted.key=value)");
    run->add_option("--seed", seed, "Override the config seed");

    std::string param;
    std::vector<double> values;
    auto *sweep = app.add_subcommand("sweep", "Run one scenario per value of a numeric key");
    sweep->add_option("config", config_path, "Scenario config (JSON)")->required();
    sweep->add_option("--param", param, "Dotted config key; A.mass sets a single mass")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_option("--seed", seed, "Override the config seed");

    std::string verify_dir;
    auto *verify = app.add_subcommand("verify", "Re-check stored reports");
    verify->add_option("dir", verify_dir, "Output directory of run or sweep")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        // Help and version exit 0; malformed command lines share the parse-error code.
        return app.exit(e) == 0 ? framelab::cli::kOk : framelab::cli::kParseError;
    }

    if (*run) {
        return framelab::cli::cmd_run(config_path, out_dir, overrides, seed);
    }
    if (*sweep) {
        return framelab::cli::cmd_sweep(config_path, param, values, out_dir, seed);
    }
    return framelab::cli::cmd_verify(verify_dir);
}
