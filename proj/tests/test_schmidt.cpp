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

#include <random>

#include "framelab/schmidt.hpp"
#include "oracles.hpp"

namespace {

using framelab::Bipartition;
using framelab::Complex;
using framelab::ErrorKind;
using framelab::Factor;
using framelab::Grid;
using framelab::Space;
using framelab::StateVector;

double identity_error(const framelab::SchmidtResult &r, const StateVector &psi) {
    return (oracle::coefficients(framelab::reconstruct(r)) - oracle::coefficients(psi)).norm();
}

TEST(Schmidt, ProductStateHasRankOne) {
    const auto a = framelab::make_level_state("a", {1.0, Complex(0.0, 2.0), 0.5});
    const auto b = framelab::make_level_state("b", {0.3, 1.0});
    const auto r = framelab::schmidt_decompose(framelab::tensor_product({a, b}), {{"a"}, {"b"}});
    ASSERT_EQ(r.rank(), 1u);
    EXPECT_NEAR(r.coefficients[0], 1.0, 1e-14);
    EXPECT_NEAR(std::abs(framelab::inner_product(r.left_states[0], a)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(framelab::inner_product(r.right_states[0], b)), 1.0, 1e-14);
    EXPECT_NEAR(framelab::entanglement_entropy(r), 0.0, 1e-14);
}

TEST(Schmidt, BellStateIsFlaggedDegenerate) {
    const Space s({Factor::level("a", 2), Factor::level("b", 2)});
    const double h = 1.0 / std::numbers::sqrt2;
    const StateVector bell(s, {h, 0.0, 0.0, h});
    const auto r = framelab::schmidt_decompose(bell, {{"a"}, {"b"}});
    ASSERT_EQ(r.rank(), 2u);
    EXPECT_NEAR(r.coefficients[0], h, 1e-14);
    EXPECT_NEAR(r.coefficients[1], h, 1e-14);
    ASSERT_EQ(r.degenerate_groups.size(), 1u);
    EXPECT_EQ(r.degenerate_groups[0], (std::vector<std::size_t>{0, 1}));
    EXPECT_NEAR(framelab::entanglement_entropy(r), std::log(2.0), 1e-14);
    EXPECT_LT(identity_error(r, bell), 1e-14);
}

class RandomCuts : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>> {};

TEST_P(RandomCuts, CoefficientsMatchPartialTraceSpectrum) {
    const auto [dl, dr] = GetParam();
    const Space s({Factor::level("l", dl), Factor::level("r", dr)});
    const auto psi = oracle::random_state(s, 10 * dl + dr);
    const auto r = framelab::schmidt_decompose(psi, {{"l"}, {"r"}});
    const auto c = oracle::coefficients(psi);
    const auto ev = oracle::eigenvalues_desc(oracle::partial_trace_left(c, dl, dr));
    ASSERT_EQ(r.rank(), std::min(dl, dr));
    for (std::size_t k = 0; k < r.rank(); ++k) {
        EXPECT_NEAR(r.coefficients[k] * r.coefficients[k], ev[k], 1e-10);
    }
    EXPECT_LT(identity_error(r, psi), 1e-10);
    // Orthonormal partners on both sides.
    for (std::size_t i = 0; i < r.rank(); ++i) {
        for (std::size_t j = 0; j < r.rank(); ++j) {
            const double want = i == j ? 1.0 : 0.0;
            EXPECT_NEAR(std::abs(framelab::inner_product(r.left_states[i], r.left_states[j])), want, 1e-12);
            EXPECT_NEAR(std::abs(framelab::inner_product(r.right_states[i], r.right_states[j])), want, 1e-12);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Shapes, RandomCuts,
                         ::testing::Values(std::pair<std::size_t, std::size_t>{4, 3},
                                           std::pair<std::size_t, std::size_t>{3, 4},
                                           std::pair<std::size_t, std::size_t>{2, 9},
                                           std::pair<std::size_t, std::size_t>{16, 5},
                                           std::pair<std::size_t, std::size_t>{6, 6}));

TEST(Schmidt, ContinuumFactorsAndReordering) {
    const Space s({Factor::coordinate("x", Grid(16, -2.0, 2.0)), Factor::level("q", 2),
                   Factor::coordinate("y", Grid(8, 0.0, 1.0))});
    const auto psi = oracle::random_state(s, 80);
    const Bipartition cut{{"y", "x"}, {"q"}};
    const auto r = framelab::schmidt_decompose(psi, cut);
    EXPECT_LT(identity_error(r, psi), 1e-10);
    EXPECT_EQ(r.left_states[0].space().labels(), (std::vector<std::string>{"x", "y"}));
    for (const auto &u : r.left_states) {
        EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    }
    double total = 0.0;
    for (double c : r.coefficients) {
        total += c * c;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Schmidt, CutSymmetry) {
    const Space s({Factor::level("a", 5), Factor::level("b", 3), Factor::level("c", 2)});
    const auto psi = oracle::random_state(s, 81);
    const Bipartition cut{{"a", "c"}, {"b"}};
    const auto r1 = framelab::schmidt_decompose(psi, cut);
    const auto r2 = framelab::schmidt_decompose(psi, cut.swapped());
    ASSERT_EQ(r1.rank(), r2.rank());
    for (std::size_t k = 0; k < r1.rank(); ++k) {
        EXPECT_NEAR(r1.coefficients[k], r2.coefficients[k], 1e-12);
    }
}

TEST(Schmidt, LocalUnitaryInvariance) {
    const std::size_t dl = 4;
    const std::size_t dr = 5;
    const Space s({Factor::level("l", dl), Factor::level("r", dr)});
    const auto psi = oracle::random_state(s, 82);
    const oracle::Mat u = oracle::kron(oracle::random_unitary(dl, 83), oracle::random_unitary(dr, 84));
    const oracle::Vec rotated = u * oracle::coefficients(psi);
    const auto psi2 = StateVector::from_coefficients(
        s, std::vector<Complex>(rotated.data(), rotated.data() + rotated.size()));
    const auto r1 = framelab::schmidt_decompose(psi, {{"l"}, {"r"}});
    const auto r2 = framelab::schmidt_decompose(psi2, {{"l"}, {"r"}});
    for (std::size_t k = 0; k < r1.rank(); ++k) {
        EXPECT_NEAR(r1.coefficients[k], r2.coefficients[k], 1e-12);
    }
}

TEST(Schmidt, TinyCoefficientsAreResolvedOrDropped) {
    const Space s({Factor::level("a", 2), Factor::level("b", 2)});
    const double eps = 1e-7;
    const StateVector psi(s, {std::sqrt(1.0 - eps * eps), 0.0, 0.0, eps});
    const auto r = framelab::schmidt_decompose(psi, {{"a"}, {"b"}});
    ASSERT_EQ(r.rank(), 2u);
    EXPECT_NEAR(r.coefficients[1], eps, 1e-15);
    const auto dropped = framelab::schmidt_decompose(psi, {{"a"}, {"b"}}, 1e-6);
    EXPECT_EQ(dropped.rank(), 1u);
    EXPECT_NEAR(dropped.truncation_residual, eps * eps, 1e-20);
}

TEST(Schmidt, Errors) {
    const Space s({Factor::level("a", 2), Factor::level("b", 2)});
    const StateVector psi(s, {1.0, 0.0, 0.0, 0.0});
    auto kind = [&](const Bipartition &cut) {
        try {
            (void)framelab::schmidt_decompose(psi, cut);
        } catch (const framelab::Error &e) {
            return e.kind();
        }
        return ErrorKind::Validation;
    };
    EXPECT_EQ(kind({{"a"}, {}}), ErrorKind::InvalidBipartition);
    EXPECT_EQ(kind({{"a"}, {"a"}}), ErrorKind::InvalidBipartition);
    EXPECT_EQ(kind({{"a"}, {"c"}}), ErrorKind::InvalidBipartition);
    EXPECT_EQ(kind({{"a", "b"}, {"b"}}), ErrorKind::InvalidBipartition);
    try {
        (void)framelab::schmidt_decompose(psi.scaled(3.0), {{"a"}, {"b"}});
        FAIL() << "expected an error";
    } catch (const framelab::Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnnormalizedInput);
    }
    framelab::BranchSampler sampler(1);
    EXPECT_THROW((void)sampler.draw(framelab::SchmidtResult{}), framelab::Error);
}

TEST(BranchSampler, FrequencyMatchesBornWeight) {
    const Space s({Factor::level("a", 2), Factor::level("b", 2)});
    const StateVector psi(s, {std::sqrt(0.7), 0.0, 0.0, std::sqrt(0.3)});
    const auto r = framelab::schmidt_decompose(psi, {{"a"}, {"b"}});
    framelab::BranchSampler sampler(2024);
    const int trials = 10000;
    int minor = 0;
    for (int k = 0; k < trials; ++k) {
        minor += sampler.draw(r) == 1 ? 1 : 0;
    }
    EXPECT_NEAR(double(minor) / trials, 0.3, 0.014);
}

TEST(BranchSampler, DeterministicAndDocumentedAlgorithm) {
    const std::vector<double> p{0.2, 0.5, 0.3};
    framelab::BranchSampler a(99);
    framelab::BranchSampler b(99);
    std::mt19937_64 engine(99);
    for (int k = 0; k < 1000; ++k) {
        const double u = std::ldexp(double(engine() >> 11), -53);
        const std::size_t expected = u < 0.2 ? 0 : (u < 0.7 ? 1 : 2);
        const std::size_t got = a.draw(p);
        EXPECT_EQ(got, expected);
        EXPECT_EQ(b.draw(p), got);
    }
}

TEST(BranchSampler, SingleDrawHelper) {
    const auto a = framelab::make_level_state("a", {1.0, 0.0});
    const auto b = framelab::make_level_state("b", {0.0, 1.0});
    const auto r = framelab::schmidt_decompose(framelab::tensor_product({a, b}), {{"a"}, {"b"}});
    EXPECT_EQ(framelab::sample_branch(r, 5), 0u);
}

} // namespace
