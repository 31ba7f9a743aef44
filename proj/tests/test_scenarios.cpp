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

#include "framelab/config.hpp"
#include "framelab/scenarios.hpp"

namespace {

using framelab::CMatrix;
using framelab::Complex;
using framelab::ErrorKind;
using framelab::Factor;
using framelab::GaussianParams;
using framelab::Grid;
using framelab::ScenarioConfig;
using framelab::Space;
using framelab::StateVector;

CMatrix pauli_x() {
    CMatrix k(2, 2);
    k(0, 1) = 1.0;
    k(1, 0) = 1.0;
    return k;
}

/// Small collision: S crosses the heavy body at unit speed.
ScenarioConfig small_collision(double g) {
    ScenarioConfig cfg;
    cfg.scenario = "collision";
    cfg.A.masses = {100.0};
    cfg.A.points = 32;
    cfg.A.half_width = 5.3;
    cfg.A.internal(1, 1) = 1.0;
    cfg.S.grid = Grid(256, -24.0, 24.0);
    cfg.S.mass = 10.0;
    cfg.S.packets = {GaussianParams{-8.0, 10.0, 1.5}};
    cfg.coupling = {g, 0.5, pauli_x()};
    cfg.schedule = {0.0, 8.0, 20.0, 0.01, 100};
    cfg.seed = 7;
    return cfg;
}

/// Small measurement: two resting a components away from the heavy body.
ScenarioConfig small_measurement(std::vector<Complex> c) {
    ScenarioConfig cfg;
    cfg.scenario = "measurement";
    cfg.A.masses = {1e6};
    cfg.A.points = 32;
    cfg.A.half_width = 5.3;
    cfg.coupling = {0.0, 0.5, CMatrix(2, 2)};
    cfg.schedule = {0.0, 0.5, 1.0, 0.05, 10};
    cfg.seed = 99;
    framelab::MeasurementConfig m;
    m.a = {Grid(128, -20.0, 20.0), 20.0, {GaussianParams{-9.0, 0.0, 1.0}, GaussianParams{9.0, 0.0, 1.0}}};
    m.b = {Grid(32, 0.0, 32.0), 20.0, {GaussianParams{16.0, 0.6, 3.0}, GaussianParams{16.0, -0.6, 3.0}}};
    m.c = std::move(c);
    m.trap = {0.3, 4.0, 0.3};
    m.trials = 10000;
    m.region_radius = 4.0;
    m.eps = 1e-4;
    cfg.measurement = m;
    return cfg;
}

std::string validation_message(const ScenarioConfig &cfg) {
    try {
        cfg.validate();
    } catch (const framelab::Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        return e.what();
    }
    return "";
}

TEST(Config, ValidationNamesTheInvariant) {
    EXPECT_EQ(validation_message(small_collision(1.0)), "");
    EXPECT_EQ(validation_message(small_measurement({0.6, 0.8})), "");

    auto c = small_collision(1.0);
    c.A.masses = {100.0, -1.0};
    EXPECT_NE(validation_message(c).find("masses must be > 0"), std::string::npos);
    c = small_collision(1.0);
    c.schedule.t_interaction = 20.0;
    EXPECT_NE(validation_message(c).find("strictly increasing"), std::string::npos);
    c = small_collision(1.0);
    c.A.internal_state = {1.0, 1.0};
    EXPECT_NE(validation_message(c).find("normalized"), std::string::npos);
    c = small_collision(1.0);
    c.coupling.K(0, 1) = Complex(0.0, 1.0);
    EXPECT_NE(validation_message(c).find("Hermitian"), std::string::npos);
    c = small_collision(1.0);
    c.scenario = "scattering";
    EXPECT_NE(validation_message(c).find("scenario"), std::string::npos);

    auto m = small_measurement({0.6, 0.7});
    EXPECT_NE(validation_message(m).find("sum |c_l|^2 must equal 1"), std::string::npos);
    m = small_measurement({1.0});
    EXPECT_NE(validation_message(m).find("same number of components"), std::string::npos);
}

TEST(Collision, UncoupledRunLeavesOneBranch) {
    const auto p = framelab::run_collision_point(small_collision(0.0), 100.0);
    ASSERT_EQ(p.branch_probabilities.size(), 1u);
    EXPECT_NEAR(p.branch_probabilities[0], 1.0, 1e-12);
    EXPECT_LT(p.trace_distance, 1e-10);
    EXPECT_LT(p.fidelity_deficit, 1e-10);
    EXPECT_NEAR(p.overlap_weight, 1.0, 1e-10);
    EXPECT_EQ(p.interaction_peak, 0.0);
}

TEST(Collision, CoupledRunProducesConsistentBranches) {
    const auto cfg = small_collision(1.2);
    const auto p = framelab::run_collision_point(cfg, 100.0);
    ASSERT_EQ(p.branch_probabilities.size(), 2u);
    double total = 0.0;
    for (double q : p.branch_probabilities) {
        total += q;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GT(p.branch_probabilities[1], 1e-3);
    EXPECT_LT(p.branch_eigen_error, 1e-8);
    EXPECT_LT(p.schmidt_identity, 1e-10);
    EXPECT_LT(p.interaction_initial, framelab::negligible_interaction);
    EXPECT_LT(p.interaction_final, framelab::negligible_interaction);
    EXPECT_GT(p.interaction_peak, 1e-2);
    EXPECT_FALSE(p.during_interaction);
    EXPECT_LT(p.norm_drift, 1e-10);
    const framelab::DensityMatrix rho{Space({Factor::level("r_A", 2)}), p.rho_internal};
    EXPECT_LT(rho.validity_error(), 1e-10);
    EXPECT_GT(p.fidelity_deficit, 0.0);
    EXPECT_GT(p.residual, 0.0);
    EXPECT_EQ(p.s_density.size(), cfg.S.grid.size());
}

TEST(Collision, HeavierBodyFactorizesBetter) {
    auto cfg = small_collision(1.2);
    cfg.A.masses = {100.0, 1000.0};
    const auto rep = framelab::run_collision(cfg);
    ASSERT_EQ(rep.points.size(), 2u);
    EXPECT_TRUE(rep.deficit_decreasing);
    EXPECT_TRUE(rep.residual_decreasing);
    EXPECT_TRUE(rep.trace_distance_nonincreasing);
    ASSERT_TRUE(rep.residual_exponent.has_value());
    EXPECT_LT(*rep.residual_exponent, -0.8);
}

TEST(Collision, InteractionAtBoundariesIsRejected) {
    auto start = small_collision(1.2);
    start.S.packets[0].R0 = 0.0;
    try {
        (void)framelab::run_collision_point(start, 100.0);
        FAIL() << "expected an error";
    } catch (const framelab::Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InteractionNotNegligibleAtStart);
    }
    auto end = small_collision(1.2);
    end.schedule = {0.0, 4.0, 8.0, 0.01, 100};
    try {
        (void)framelab::run_collision_point(end, 100.0);
        FAIL() << "expected an error";
    } catch (const framelab::Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::InteractionNotNegligibleAtEnd);
    }
}

TEST(FittedExponent, PowerLaws) {
    const std::vector<double> x{1.0, 10.0, 100.0};
    const auto e = framelab::fitted_exponent(x, {3.0, 0.3, 0.03});
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR(*e, -1.0, 1e-12);
    EXPECT_NEAR(*framelab::fitted_exponent(x, {1.0, 100.0, 10000.0}), 2.0, 1e-12);
    EXPECT_FALSE(framelab::fitted_exponent({1.0}, {1.0}).has_value());
    EXPECT_FALSE(framelab::fitted_exponent(x, {1.0, 0.0, -1.0}).has_value());
    EXPECT_TRUE(framelab::strictly_decreasing({3.0, 2.0, 1.0}));
    EXPECT_FALSE(framelab::strictly_decreasing({3.0, 3.0, 1.0}));
    EXPECT_TRUE(framelab::nonincreasing({3.0, 3.0, 1.0}));
    EXPECT_FALSE(framelab::nonincreasing({1.0, 2.0}));
}

// Partition detection on hand-built relative states over (r_A, a, b).
StateVector packet(double x0, const std::string &label) {
    return make_gaussian(Grid(128, -20.0, 20.0), {x0, 0.0, 1.0}, label);
}

StateVector level(std::size_t k) {
    return framelab::make_level_state("r_A", k == 0 ? std::vector<Complex>{1.0, 0.0}
                                                    : std::vector<Complex>{0.0, 1.0});
}

StateVector combine(const std::vector<std::pair<Complex, StateVector>> &terms) {
    std::vector<Complex> amps(terms.front().second.size());
    for (const auto &[c, s] : terms) {
        for (std::size_t i = 0; i < amps.size(); ++i) {
            amps[i] += c * s[i];
        }
    }
    return StateVector(terms.front().second.space(), std::move(amps), 1.0).normalized();
}

/// With two S coordinates and S_1 = {first}, the allowed configurations are
/// exactly those with the second coordinate outside the region.
double leakage_oracle(const StateVector &psi, const std::string &second, double radius) {
    const Space &s = psi.space();
    const std::size_t ax = s.axis(second);
    const Grid &g = s.factor(ax).grid();
    double far = 0.0;
    double total = 0.0;
    for (std::size_t f = 0; f < psi.size(); ++f) {
        const double p = std::norm(psi[f]);
        total += p;
        if (std::abs(g.x((f / s.stride(ax)) % g.size())) > radius) {
            far += p;
        }
    }
    return 1.0 - far / total;
}

TEST(Partition, FindsAbsorbedAndFreeParts) {
    using framelab::tensor_product;
    const double c1 = std::sqrt(0.35);
    const double c2 = std::sqrt(0.65);
    const auto psi = combine({{c1, tensor_product({level(0), packet(0.0, "a"), packet(10.0, "b")})},
                              {c2, tensor_product({level(1), packet(12.0, "a"), packet(-10.0, "b")})}});
    const auto rep = framelab::detect_partition(psi, {0.0, 4.0, 1e-4, {"r_A"}});
    EXPECT_TRUE(rep.found);
    EXPECT_EQ(rep.absorbed, std::vector<std::string>{"a"});
    EXPECT_EQ(rep.free, std::vector<std::string>{"b"});
    EXPECT_LT(rep.leakage, 1e-4);
    // The tail of the absorbed packet outside the region adds a tiny second C.
    ASSERT_GE(rep.C.size(), 1u);
    ASSERT_GE(rep.D.size(), 1u);
    EXPECT_NEAR(rep.C[0], c2, 1e-6);
    EXPECT_NEAR(rep.D[0], c1, 1e-6);
    double w = 0.0;
    for (double v : rep.C) {
        w += v * v;
    }
    for (double v : rep.D) {
        w += v * v;
    }
    EXPECT_NEAR(w, 1.0, 1e-12);
    EXPECT_NEAR(rep.weight_free, c2 * c2, 1e-6);
    EXPECT_NEAR(rep.leakage, leakage_oracle(psi, "b", 4.0), 1e-10);
}

TEST(Partition, DelocalizedStateHasNoPartition) {
    using framelab::tensor_product;
    const auto psi = combine({{1.0, tensor_product({level(0), packet(0.0, "a"), packet(0.5, "b")})},
                              {1.0, tensor_product({level(1), packet(12.0, "a"), packet(-12.0, "b")})}});
    const auto rep = framelab::detect_partition(psi, {0.0, 4.0, 1e-4, {"r_A"}});
    EXPECT_FALSE(rep.found);
    EXPECT_NEAR(rep.leakage, 0.5, 1e-6);
    EXPECT_NEAR(rep.leakage, leakage_oracle(psi, rep.absorbed.front() == "a" ? "b" : "a", 4.0), 1e-10);
}

TEST(Partition, LeakageMatchesQuadrature) {
    using framelab::tensor_product;
    // b sits at the region edge so a fraction of it counts as near.
    const auto psi = combine({{0.8, tensor_product({level(0), packet(0.0, "a"), packet(6.0, "b")})},
                              {0.6, tensor_product({level(1), packet(-11.0, "a"), packet(-9.0, "b")})}});
    const auto rep = framelab::detect_partition(psi, {0.0, 4.0, 1e-12, {"r_A"}});
    EXPECT_FALSE(rep.found);
    EXPECT_EQ(rep.absorbed, std::vector<std::string>{"a"});
    EXPECT_GT(rep.leakage, 1e-4);
    EXPECT_NEAR(rep.leakage, leakage_oracle(psi, "b", 4.0), 1e-10);
}

TEST(Partition, Errors) {
    const auto psi = framelab::tensor_product({level(0), packet(0.0, "a")});
    EXPECT_THROW((void)framelab::detect_partition(psi, {0.0, 4.0, 1e-4, {"r_A"}}), framelab::Error);
    EXPECT_THROW((void)framelab::detect_partition(psi, {0.0, 4.0, 1e-4, {"R_A"}}), framelab::Error);
}

TEST(Measurement, SingleComponentIsCertain) {
    const auto rep = framelab::run_position_measurement(small_measurement({1.0, 0.0}));
    ASSERT_EQ(rep.points.size(), 1u);
    const auto &p = rep.points[0];
    EXPECT_EQ(p.counts, (std::vector<std::size_t>{10000, 0}));
    EXPECT_NEAR(p.schmidt_coefficients[0], 1.0, 1e-10);
    EXPECT_LT(p.coefficient_error, 1e-8);
    EXPECT_LT(p.max_b_fidelity_deficit, 1e-10);
    EXPECT_LT(p.structure_deficit, 1e-10);
}

TEST(Measurement, FrequenciesFollowBornWeights) {
    const auto cfg = small_measurement({std::sqrt(0.3), std::sqrt(0.7)});
    const auto p = framelab::run_measurement_point(cfg, 1e6);
    EXPECT_NEAR(p.frequencies[0], 0.3, 0.014);
    EXPECT_NEAR(p.frequencies[0] + p.frequencies[1], 1.0, 1e-15);
    ASSERT_EQ(p.expected.size(), 2u);
    EXPECT_NEAR(p.expected[0], 0.3, 1e-15);
    EXPECT_NEAR(p.expected[1], 0.7, 1e-15);
    EXPECT_LT(p.coefficient_error, 1e-6);
    EXPECT_LT(p.max_b_fidelity_deficit, 1e-6);
    EXPECT_LT(p.component_overlap, 1e-3);
    EXPECT_EQ(p.absorbed, (std::vector<bool>{false, false}));
    EXPECT_LT(p.interaction_final, framelab::negligible_interaction);
    // Each Schmidt branch is matched to a distinct b component.
    ASSERT_GE(p.branches.size(), 2u);
    EXPECT_NE(p.branches[0].component, p.branches[1].component);

    const auto again = framelab::run_measurement_point(cfg, 1e6);
    EXPECT_EQ(again.counts, p.counts);
    auto reseeded = cfg;
    reseeded.seed = 100;
    EXPECT_NE(framelab::run_measurement_point(reseeded, 1e6).counts, p.counts);
}

TEST(Measurement, ShippedConfigAbsorbsOneComponent) {
    const auto doc = framelab::config::read_file(std::string(FRAMELAB_SOURCE_DIR) + "/configs/measurement.json");
    const auto cfg = framelab::config::from_json(doc);
    const auto p = framelab::run_measurement_point(cfg, cfg.A.masses.front());
    EXPECT_EQ(p.absorbed, (std::vector<bool>{true, false}));
    EXPECT_LT(p.interaction_initial, framelab::negligible_interaction);
    EXPECT_LT(p.interaction_final, framelab::negligible_interaction);
    EXPECT_TRUE(p.partition.found);
    EXPECT_EQ(p.partition.absorbed, std::vector<std::string>{"a"});
    EXPECT_EQ(p.partition.free, std::vector<std::string>{"b"});
    EXPECT_LT(p.partition.leakage, cfg.measurement->eps);
    EXPECT_LT(p.structure_deficit, 1e-8);
    EXPECT_LT(p.coefficient_error, 1e-6);
}

TEST(Measurement, OverlappingComponentsAreRejected) {
    auto cfg = small_measurement({std::sqrt(0.5), std::sqrt(0.5)});
    cfg.measurement->a.packets[1].R0 = -8.0;
    try {
        (void)framelab::run_measurement_point(cfg, 1e6);
        FAIL() << "expected an error";
    } catch (const framelab::Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ComponentsNotSeparated);
    }
}

} // namespace
