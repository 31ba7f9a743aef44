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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include "framelab/cli.hpp"

namespace {

namespace fs = std::filesystem;
using framelab::cli::json;
using framelab::cli::read_text;
using framelab::cli::write_text;

// Small collision: one light particle crossing a heavy body at unit speed.
constexpr const char *kCollision = R"({
  "scenario": "collision",
  "units": {"hbar": 1.0, "unit_mass": 1.0},
  "seed": 11,
  "A": {
    "masses": [100],
    "sigma_ref": 3.0,
    "grid": {"points": 32, "half_width_sigmas": 5.3},
    "internal_hamiltonian": [[0, 0], [0, 1]],
    "internal_state": [1, 0]
  },
  "S": {
    "grid": {"points": 256, "min": -24, "max": 24},
    "mass": 10.0,
    "packet": {"R0": -8.0, "P0": 10.0, "sigma": 1.5}
  },
  "coupling": {"g": 1.2, "width": 0.5, "K": [[0, 1], [1, 0]]},
  "schedule": {"t_initial": 0.0, "t_interaction": 8.0, "t_final": 20.0, "dt": 0.01, "checkpoint_every": 100}
})";

constexpr const char *kMeasurement = R"({
  "scenario": "measurement",
  "units": {"hbar": 1.0, "unit_mass": 1.0},
  "seed": 5,
  "A": {
    "masses": [1e6],
    "sigma_ref": 3.0,
    "grid": {"points": 32, "half_width_sigmas": 5.3},
    "internal_hamiltonian": [[0, 0], [0, 0]],
    "internal_state": [1, 0]
  },
  "coupling": {"g": 0.0, "width": 0.5, "K": [[0, 0], [0, 0]]},
  "schedule": {"t_initial": 0.0, "t_interaction": 0.5, "t_final": 1.0, "dt": 0.05, "checkpoint_every": 10},
  "measurement": {
    "a": {"grid": {"points": 128, "min": -20, "max": 20}, "mass": 20.0,
          "packets": [{"R0": -9.0, "P0": 0.0, "sigma": 1.0}, {"R0": 9.0, "P0": 0.0, "sigma": 1.0}]},
    "b": {"grid": {"points": 32, "min": 0, "max": 32}, "mass": 20.0,
          "packets": [{"R0": 16.0, "P0": 0.6, "sigma": 3.0}, {"R0": 16.0, "P0": -0.6, "sigma": 3.0}]},
    "c": [0.6, 0.7],
    "trap": {"depth": 0.3, "half_width": 4.0, "edge": 0.3},
    "trials": 1000,
    "region_radius": 4.0,
    "eps": 1e-4,
    "separation_threshold": 1e-6
  }
})";

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / (std::string("framelab_cli_") + info->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path file(const std::string &name, const std::string &text) const {
        const fs::path p = root_ / name;
        write_text(p, text);
        return p;
    }

    fs::path root_;
};

int run_tool(const std::string &args, std::string *output = nullptr) {
    const std::string cmd = std::string(FRAMELAB_TOOL) + " " + args + " 2>&1";
    FILE *pipe = popen(cmd.c_str(), "r");
    std::string text;
    char buf[256];
    while (pipe != nullptr && std::fgets(buf, sizeof buf, pipe) != nullptr) {
        text += buf;
    }
    const int status = pipe != nullptr ? pclose(pipe) : -1;
    if (output != nullptr) {
        *output = text;
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, RunWritesReproducibleOutputs) {
    const auto cfg = file("collision.json", kCollision);
    ASSERT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "a").string(), {}), 0);
    ASSERT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "b").string(), {}), 0);
    for (const char *name : {"report.json", "sweep.csv", "s_density_M100.csv"}) {
        ASSERT_TRUE(fs::exists(root_ / "a" / name)) << name;
        EXPECT_EQ(read_text(root_ / "a" / name), read_text(root_ / "b" / name)) << name;
    }
    const json rec = json::parse(read_text(root_ / "a" / "report.json"));
    EXPECT_EQ(rec.at("schema"), framelab::report::report_schema);
    EXPECT_EQ(rec.at("seed"), 11);
    EXPECT_EQ(rec.at("config_hash").get<std::string>().size(), 64u);
    const json manifest = json::parse(read_text(root_ / "a" / "manifest.json"));
    EXPECT_EQ(manifest.at("runs")[0].at("report_sha256"),
              framelab::cli::sha256_hex(read_text(root_ / "a" / "report.json")));
    EXPECT_EQ(framelab::cli::cmd_verify((root_ / "a").string()), 0);
}

TEST_F(CliTest, MeasurementRunAndVerify) {
    const auto cfg = file("m.json", kMeasurement);
    // 0.6^2 + 0.7^2 != 1 until the override fixes it.
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "bad").string(), {}), 3);
    EXPECT_NE(::testing::internal::GetCapturedStderr().find("sum |c_l|^2 must equal 1"), std::string::npos);
    EXPECT_FALSE(fs::exists(root_ / "bad" / "report.json"));

    ASSERT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "ok").string(), {"measurement.c=[0.6, 0.8]"}), 0);
    const json rec = json::parse(read_text(root_ / "ok" / "report.json"));
    const auto &p = rec.at("result").at("points")[0];
    EXPECT_EQ(p.at("outcomes").at("counts")[0].get<int>() + p.at("outcomes").at("counts")[1].get<int>(), 1000);
    EXPECT_TRUE(fs::exists(root_ / "ok" / "outcomes_M1e+06.csv"));
    EXPECT_EQ(framelab::cli::cmd_verify((root_ / "ok").string()), 0);
}

TEST_F(CliTest, SeedOverride) {
    const auto cfg = file("collision.json", kCollision);
    ASSERT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "s").string(), {}, 1234), 0);
    const json rec = json::parse(read_text(root_ / "s" / "report.json"));
    EXPECT_EQ(rec.at("seed"), 1234);
}

TEST_F(CliTest, SweepOverMasses) {
    const auto cfg = file("collision.json", kCollision);
    ASSERT_EQ(framelab::cli::cmd_sweep(cfg.string(), "A.mass", {100, 200, 400}, (root_ / "sw").string()), 0);
    const json summary = json::parse(read_text(root_ / "sw" / "summary.json"));
    ASSERT_EQ(summary.at("rows").size(), 3u);
    EXPECT_EQ(summary.at("rows")[2].at("mass"), 400.0);
    EXPECT_TRUE(fs::exists(root_ / "sw" / "summary.csv"));
    EXPECT_TRUE(fs::exists(root_ / "sw" / "run_1" / "report.json"));
    EXPECT_EQ(framelab::cli::cmd_verify((root_ / "sw").string()), 0);
}

TEST_F(CliTest, SingleValueSweepMatchesRun) {
    const auto cfg = file("collision.json", kCollision);
    ASSERT_EQ(framelab::cli::cmd_sweep(cfg.string(), "A.mass", {200}, (root_ / "sw").string()), 0);
    ASSERT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "run").string(), {"A.mass=200"}), 0);
    EXPECT_EQ(read_text(root_ / "sw" / "run_0" / "report.json"), read_text(root_ / "run" / "report.json"));
}

TEST_F(CliTest, InputErrors) {
    const auto cfg = file("collision.json", kCollision);
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(framelab::cli::cmd_sweep(cfg.string(), "A.colour", {1.0}, (root_ / "x").string()), 3);
    EXPECT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "x").string(), {"S.spin=1"}), 3);
    EXPECT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "x").string(), {"schedule.dt=-1"}), 3);
    const auto broken = file("broken.json", "{\"scenario\": \"collision\",");
    EXPECT_EQ(framelab::cli::cmd_run(broken.string(), (root_ / "x").string(), {}), 2);
    EXPECT_EQ(framelab::cli::cmd_run((root_ / "missing.json").string(), (root_ / "x").string(), {}), 2);
    (void)::testing::internal::GetCapturedStderr();
}

TEST_F(CliTest, VerifyDetectsTampering) {
    const auto cfg = file("collision.json", kCollision);
    ASSERT_EQ(framelab::cli::cmd_run(cfg.string(), (root_ / "r").string(), {}), 0);
    const fs::path report = root_ / "r" / "report.json";
    json rec = json::parse(read_text(report));
    rec["result"]["points"][0]["branches"]["probabilities"][0] = 0.5;
    const std::string edited = rec.dump(2) + "\n";
    write_text(report, edited);
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(framelab::cli::cmd_verify((root_ / "r").string()), 5);
    const std::string digest_msg = ::testing::internal::GetCapturedStderr();
    EXPECT_NE(digest_msg.find("digest"), std::string::npos);

    // Refresh the digest so only the probability check can catch the edit.
    json manifest = json::parse(read_text(root_ / "r" / "manifest.json"));
    manifest["runs"][0]["report_sha256"] = framelab::cli::sha256_hex(edited);
    write_text(root_ / "r" / "manifest.json", manifest.dump(2) + "\n");
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(framelab::cli::cmd_verify((root_ / "r").string()), 5);
    EXPECT_NE(::testing::internal::GetCapturedStderr().find("probabilities do not sum to 1"), std::string::npos);
}

TEST_F(CliTest, VerifyEmptyDirectory) {
    fs::create_directories(root_ / "empty");
    ::testing::internal::CaptureStderr();
    EXPECT_EQ(framelab::cli::cmd_verify((root_ / "empty").string()), 5);
    EXPECT_NE(::testing::internal::GetCapturedStderr().find("no reports found"), std::string::npos);
}

TEST_F(CliTest, ExecutableFrontEnd) {
    std::string out;
    EXPECT_EQ(run_tool("--version", &out), 0);
    EXPECT_NE(out.find(framelab::cli::version), std::string::npos);
    EXPECT_EQ(run_tool("run", &out), 2);
    EXPECT_EQ(run_tool("frobnicate", &out), 2);
    EXPECT_EQ(run_tool("verify " + (root_ / "nothing").string(), &out), 5);
    EXPECT_NE(out.find("no reports found"), std::string::npos);
    const auto broken = file("broken.json", "not json");
    EXPECT_EQ(run_tool("run " + broken.string() + " --out " + (root_ / "o").string(), &out), 2);
}

TEST(ConfigCanonical, NumberSpellingDoesNotChangeHash) {
    const json a = json::parse(R"({"x": 1, "y": [2, 3.5], "z": {"b": 1e2, "a": 0}})");
    const json b = json::parse(R"({"z": {"a": 0.0, "b": 100.0}, "y": [2.0, 3.5], "x": 1.0})");
    EXPECT_EQ(framelab::cli::config_hash(a), framelab::cli::config_hash(b));
    EXPECT_EQ(framelab::cli::sha256_hex("abc"),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

} // namespace
