#include <gtest/gtest.h>

#include <cmath>

#include "geopro/errors.hpp"
#include "geopro/rng.hpp"
#include "geopro/theorem.hpp"

using namespace geopro;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Two clusters of coincident pairs on a line, 2 apart.
TheoremInstance worked_instance() {
    TheoremInstance inst;
    inst.n = 4;
    inst.cluster_size = 2;
    inst.labels = {0, 0, 1, 1};
    for (double x : {0.0, 0.0, 2.0, 2.0}) inst.embeddings.push_back(Eigen::VectorXd::Constant(1, x));
    inst.lipschitz = 1.0;
    inst.delta = 0.0;
    inst.zeta = 2.0;
    inst.validate();
    return inst;
}

TheoremInstance random_instance(Rng& rng) {
    const std::size_t k = 2 + rng() % 2;
    std::size_t n = 0;
    do {
        n = 4 + rng() % 9;
    } while (n % k != 0);
    const double lip = uniform(rng, 0.1, 5.0);
    const double zeta = uniform(rng, 0.5, 5.0);
    const double delta = uniform(rng, 0.0, 0.5 * zeta);
    const std::size_t width = 1 + rng() % 4;
    return build_instance(n, k, width, zeta, delta, lip, rng);
}

TheoremInstance scaled(TheoremInstance inst, double c) {
    for (auto& g : inst.embeddings) g *= c;
    inst.delta *= c;
    inst.zeta *= c;
    return inst;
}

}  // namespace

TEST(LogSigmoid, MatchesDirectFormAndDoesNotOverflow) {
    for (double x = -30; x <= 30; x += 0.25)
        EXPECT_NEAR(log_sigmoid(x), std::log(sigmoid(x)), 1e-12) << x;
    EXPECT_NEAR(log_sigmoid(-800), -800.0, 1e-12);
    EXPECT_EQ(log_sigmoid(800), 0.0);
}

TEST(Theorem, WorkedCaseClosedForms) {
    const auto inst = worked_instance();
    const double gamma = 1.0 / (1.0 + std::exp(2.0));
    EXPECT_NEAR(inst.gamma(), gamma, 1e-15);
    EXPECT_NEAR(constructed_decoder_prob(inst, 0, 1), (1 - gamma) / 2, 1e-15);
    EXPECT_NEAR(constructed_decoder_prob(inst, 0, 2), gamma / 2, 1e-15);

    const auto check = verify_bound(inst);
    const double objective = std::log(1 - gamma) - std::log(2.0);
    const double bound = 8.0 / 16.0 * std::log(sigmoid(2.0)) - std::log(2.0);
    EXPECT_NEAR(check.objective, objective, 1e-12);
    EXPECT_NEAR(check.bound, bound, 1e-12);
    EXPECT_NEAR(check.slack, bound - objective, 1e-12);
    EXPECT_TRUE(check.holds);
}

TEST(Theorem, WorkedCasePublishedValues) {
    const auto inst = worked_instance();
    EXPECT_NEAR(inst.gamma(), 0.11920, 1e-5);
    EXPECT_NEAR(constructed_decoder_prob(inst, 2, 3), 0.44040, 1e-5);
    EXPECT_NEAR(constructed_decoder_prob(inst, 3, 0), 0.05960, 1e-5);
    const auto check = verify_bound(inst);
    EXPECT_NEAR(check.objective, -0.82002, 1e-4);
    EXPECT_NEAR(check.bound, -0.75661, 1e-4);
    EXPECT_NEAR(check.slack, 0.06341, 1e-4);
}

TEST(Theorem, DecoderRowsAreNormalized) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const auto inst = random_instance(rng);
        for (std::size_t j = 0; j < inst.n; ++j) {
            double total = 0;
            for (std::size_t i = 0; i < inst.n; ++i) total += constructed_decoder_prob(inst, i, j);
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
    EXPECT_THROW(constructed_decoder_prob(worked_instance(), 4, 0), ContractError);
}

TEST(Theorem, ObjectiveClosedForm) {
    Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_instance(rng);
        const double expected = std::log(1 - sigmoid(-inst.lipschitz * inst.zeta)) -
                                std::log(static_cast<double>(inst.cluster_size));
        EXPECT_NEAR(denoising_objective(inst), expected, 1e-12);
    }
}

TEST(Theorem, Limits) {
    auto inst = worked_instance();

    // Large Lip * zeta: perfect within-cluster decoding.
    inst.lipschitz = 60.0;
    EXPECT_NEAR(constructed_decoder_prob(inst, 0, 1), 0.5, 1e-15);
    EXPECT_NEAR(denoising_objective(inst), -std::log(2.0), 1e-15);

    // Far-apart clusters push the bound to -log K.
    auto far = worked_instance();
    for (std::size_t i = 2; i < 4; ++i) far.embeddings[i][0] = 1e3;
    EXPECT_NEAR(upper_bound(far), -std::log(2.0), 1e-15);

    // Lip -> 0: every cross term is log(1/2).
    auto flat = worked_instance();
    flat.lipschitz = 1e-12;
    EXPECT_NEAR(upper_bound(flat), 0.5 * std::log(0.5) - std::log(2.0), 1e-10);

    // K = 1: log K vanishes.
    Rng rng(2);
    const auto singletons = build_instance(3, 1, 2, 1.5, 0.2, 0.7, rng);
    EXPECT_NEAR(denoising_objective(singletons), std::log(1 - sigmoid(-0.7 * 1.5)), 1e-12);
}

TEST(Theorem, HoldsOnRandomInstances) {
    Rng rng(41);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto check = verify_bound(random_instance(rng));
        violations += !check.holds;
        EXPECT_GE(check.slack, -1e-9);
    }
    EXPECT_EQ(violations, 0);
}

TEST(Theorem, AppendixSignBreaksTheInequality) {
    Rng rng(41);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto inst = random_instance(rng);
        const auto check = verify_bound(inst, BoundSign::kAppendix);
        EXPECT_LE(check.bound, upper_bound(inst));
        violations += !check.holds;
    }
    EXPECT_GT(violations, 900);
    EXPECT_FALSE(verify_bound(worked_instance(), BoundSign::kAppendix).holds);
}

TEST(Theorem, BoundNeverDecreasesWhenCrossDistancesGrow) {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_instance(rng);
        auto apart = inst;
        const double c = uniform(rng, 1.0, 4.0);
        for (auto& g : apart.embeddings) g *= c;
        EXPECT_GE(upper_bound(apart), upper_bound(inst) - 1e-15);
        EXPECT_EQ(denoising_objective(apart), denoising_objective(inst));
    }
}

TEST(Theorem, ScalingEmbeddingsAndLipschitzTogether) {
    Rng rng(47);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = random_instance(rng);
        const double c = uniform(rng, 0.2, 5.0);
        auto s = scaled(inst, c);
        s.lipschitz /= c;
        EXPECT_NEAR(denoising_objective(s), denoising_objective(inst), 1e-12);
        EXPECT_NEAR(upper_bound(s), upper_bound(inst), 1e-12);
    }
}

TEST(Theorem, SingleClusterIsDegenerate) {
    Rng rng(53);
    const auto inst = build_instance(3, 3, 2, 2.0, 0.5, 1.0, rng);
    const auto check = verify_bound(inst);
    EXPECT_NEAR(check.bound, -std::log(3.0), 1e-15);
    EXPECT_NEAR(check.objective, std::log(1 - sigmoid(-2.0)) - std::log(3.0), 1e-12);
    EXPECT_TRUE(check.holds);
}

TEST(BuildInstance, CoincidentPairsWhenDeltaIsZero) {
    Rng rng(59);
    const auto inst = build_instance(4, 2, 3, 2.0, 0.0, 1.0, rng);
    EXPECT_EQ(inst.labels, (std::vector<std::size_t>{0, 0, 1, 1}));
    EXPECT_EQ((inst.embeddings[0] - inst.embeddings[1]).norm(), 0.0);
    EXPECT_EQ((inst.embeddings[2] - inst.embeddings[3]).norm(), 0.0);
    EXPECT_GT((inst.embeddings[0] - inst.embeddings[2]).norm(), 2.0);
}

TEST(BuildInstance, ExhaustivePairScan) {
    Rng rng(61);
    const double zeta = 1.5, delta = 0.4;
    const auto inst = build_instance(12, 3, 4, zeta, delta, 1.0, rng);
    int cross = 0, within = 0;
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = i + 1; j < 12; ++j) {
            const double d = (inst.embeddings[i] - inst.embeddings[j]).norm();
            if (inst.labels[i] == inst.labels[j]) {
                ++within;
                EXPECT_LT(d, delta);
            } else {
                ++cross;
                EXPECT_GT(d, zeta);
            }
        }
    EXPECT_EQ(cross, 54);
    EXPECT_EQ(within, 12);
}

TEST(BuildInstance, Errors) {
    Rng rng(67);
    EXPECT_THROW(build_instance(5, 2, 2, 2.0, 0.1, 1.0, rng), ContractError);
    EXPECT_THROW(build_instance(4, 2, 2, 1.0, 1.0, 1.0, rng), ContractError);
    EXPECT_THROW(build_instance(4, 2, 2, 1.0, -0.1, 1.0, rng), ContractError);
    EXPECT_THROW(build_instance(4, 2, 2, 1.0, 0.1, 0.0, rng), ContractError);
    EXPECT_THROW(build_instance(4, 2, 0, 1.0, 0.1, 1.0, rng), ContractError);
    // More clusters than the bounded retries can place.
    EXPECT_THROW(build_instance(20000, 1, 1, 1.0, 0.0, 1.0, rng), ConstructionError);
}

TEST(Validate, RejectsBrokenInstances) {
    auto close = worked_instance();
    close.embeddings[2][0] = 1.9;
    close.embeddings[3][0] = 1.9;
    EXPECT_THROW(close.validate(), ContractError);

    auto spread = worked_instance();
    spread.embeddings[1][0] = 0.1;
    EXPECT_THROW(spread.validate(), ContractError);

    auto labels = worked_instance();
    labels.labels = {0, 0, 0, 1};
    EXPECT_THROW(labels.validate(), ContractError);

    auto lip = worked_instance();
    lip.lipschitz = 0;
    EXPECT_THROW(lip.validate(), ContractError);
}
