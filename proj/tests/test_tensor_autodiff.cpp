#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "geopro/errors.hpp"
#include "geopro/ops.hpp"
#include "geopro/optim.hpp"
#include "geopro/tensor.hpp"
#include "test_support.hpp"

using namespace geopro;
using namespace geopro::ad;
using testing_support::grad_values;
using testing_support::numeric_grad;
using testing_support::random_tensor;
using testing_support::relative_error;
using testing_support::values;

TEST(Ops, MatmulIdentity) {
    auto a = Tensor::matrix({{1, 2}, {3, 4}});
    auto eye = Tensor::matrix({{1, 0}, {0, 1}});
    auto c = matmul(a, eye);
    EXPECT_EQ(c.shape(), (Shape{2, 2}));
    EXPECT_EQ(values(c), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Ops, MatmulGeneral) {
    auto a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
    auto b = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}});
    EXPECT_EQ(values(matmul(a, b)), (std::vector<double>{4, 5, 10, 11}));
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
    auto s = softmax(Tensor::vector({0, 0, 0}));
    for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Ops, SoftmaxIsShiftStable) {
    auto s = softmax(Tensor::vector({1000, 1001, 1002}));
    const double z = 1 + std::exp(1.0) + std::exp(2.0);
    EXPECT_NEAR(s[0], 1 / z, 1e-14);
    EXPECT_NEAR(s[2], std::exp(2.0) / z, 1e-14);
}

TEST(Ops, SigmoidOfZero) { EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5); }

TEST(Ops, NormOverLastAxis) {
    auto n = norm(Tensor::matrix({{3, 4, 0}, {0, 0, 2}}));
    EXPECT_EQ(n.shape(), (Shape{2, 1}));
    EXPECT_DOUBLE_EQ(n[0], 5.0);
    EXPECT_DOUBLE_EQ(n[1], 2.0);
}

TEST(Ops, SumAndMeanOverAxis) {
    auto a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
    EXPECT_EQ(values(sum(a, 0)), (std::vector<double>{5, 7, 9}));
    EXPECT_EQ(values(sum(a, 1)), (std::vector<double>{6, 15}));
    EXPECT_EQ(mean(a, 1, false).shape(), (Shape{2}));
    EXPECT_DOUBLE_EQ(mean(a).item(), 3.5);
}

TEST(Ops, ConcatGatherScatter) {
    auto a = Tensor::matrix({{1, 2}, {3, 4}});
    auto b = Tensor::matrix({{5}, {6}});
    EXPECT_EQ(values(concat({a, b}, 1)), (std::vector<double>{1, 2, 5, 3, 4, 6}));
    std::vector<std::size_t> idx{1, 1, 0};
    EXPECT_EQ(values(gather_rows(a, idx)), (std::vector<double>{3, 4, 3, 4, 1, 2}));
    auto rows = Tensor::matrix({{1, 1}, {2, 2}, {4, 4}});
    std::vector<std::size_t> dst{0, 2, 0};
    EXPECT_EQ(values(scatter_add_rows(rows, dst, 3)), (std::vector<double>{5, 5, 0, 0, 2, 2}));
}

TEST(Ops, BroadcastRowAndColumn) {
    auto a = Tensor::matrix({{1, 2}, {3, 4}});
    EXPECT_EQ(values(a + Tensor::matrix({{10, 20}})), (std::vector<double>{11, 22, 13, 24}));
    EXPECT_EQ(values(a * Tensor::matrix({{2}, {3}})), (std::vector<double>{2, 4, 9, 12}));
    EXPECT_EQ(values(a - Tensor::scalar(1)), (std::vector<double>{0, 1, 2, 3}));
}

TEST(Ops, BroadcastKeepsEmptyDimension) {
    auto empty = Tensor::zeros({0, 3});
    auto out = empty + Tensor::matrix({{1, 2, 3}});
    EXPECT_EQ(out.shape(), (Shape{0, 3}));
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({3, 2});
    try {
        add(a, b);
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
    }
    EXPECT_THROW(matmul(a, a), DimensionError);
    EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(CheckedMode, NonFiniteOutputThrows) {
    ASSERT_TRUE(checked_mode());
    EXPECT_THROW(log(Tensor::scalar(-1.0)), NumericError);
    EXPECT_THROW(div(Tensor::scalar(1.0), Tensor::scalar(0.0)), NumericError);
    set_checked_mode(false);
    EXPECT_TRUE(std::isnan(log(Tensor::scalar(-1.0)).item()));
    set_checked_mode(true);
}

TEST(Backward, SumOfSquares) {
    Tape tape;
    TapeScope scope(tape);
    auto x = Tensor::vector({1, 2, 3}, true);
    backward(sum(square(x)));
    EXPECT_EQ(grad_values(x), (std::vector<double>{2, 4, 6}));
}

TEST(Backward, SigmoidAtZero) {
    Tape tape;
    TapeScope scope(tape);
    auto w = Tensor::scalar(0, true);
    backward(sigmoid(w));
    EXPECT_DOUBLE_EQ(w.grad()[0], 0.25);
}

TEST(Backward, UnreachableOperandGetsZeroGrad) {
    Tape tape;
    TapeScope scope(tape);
    auto x = Tensor::vector({1, 2}, true);
    auto y = Tensor::vector({3, 4}, true);
    auto unused = mul(y, y);
    backward(sum(x));
    ASSERT_TRUE(y.has_grad());
    EXPECT_EQ(grad_values(y), (std::vector<double>{0, 0}));
    (void)unused;
}

TEST(Backward, NonScalarLossIsContractError) {
    Tape tape;
    TapeScope scope(tape);
    auto x = Tensor::vector({1, 2}, true);
    auto y = mul_scalar(x, 2);
    EXPECT_THROW(backward(y), ContractError);
}

TEST(Backward, SecondBackwardIsStateError) {
    Tape tape;
    TapeScope scope(tape);
    auto x = Tensor::vector({1, 2}, true);
    auto loss = sum(square(x));
    backward(loss);
    EXPECT_THROW(backward(loss), StateError);
    EXPECT_TRUE(tape.spent());
}

TEST(Backward, NoRecordingWithoutTapeOrUnderNoGrad) {
    auto x = Tensor::vector({1, 2}, true);
    sum(x);
    EXPECT_EQ(active_tape(), nullptr);
    Tape tape;
    TapeScope scope(tape);
    {
        NoGradScope nograd;
        sum(square(x));
    }
    EXPECT_EQ(tape.size(), 0u);
    sum(square(x));
    EXPECT_EQ(tape.size(), 2u);
}

TEST(Backward, TapeIsTopologicallyOrdered) {
    Tape tape;
    TapeScope scope(tape);
    Rng rng(3);
    auto x = random_tensor({3, 4}, rng);
    auto w = random_tensor({4, 2}, rng);
    sum(silu(matmul(x, w)));
    const auto& nodes = tape.nodes();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        for (const auto& in : nodes[k].inputs) {
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                if (nodes[j].output == in) EXPECT_LT(j, k);
            }
        }
    }
}

namespace {

struct TinyMlp {
    Tensor w1, b1, w2, b2, x;
    double target = 0.3;

    Tensor loss() const {
        auto h = silu(matmul(x, w1) + b1);
        auto out = sigmoid(matmul(h, w2) + b2);
        return mean(square(add_scalar(out, -target)));
    }
};

TinyMlp make_mlp(std::uint64_t seed) {
    Rng rng(seed);
    return {random_tensor({4, 6}, rng), random_tensor({1, 6}, rng), random_tensor({6, 2}, rng),
            random_tensor({1, 2}, rng), random_tensor({5, 4}, rng, -1, 1, false)};
}

}  // namespace

TEST(Backward, MlpMatchesFiniteDifferences) {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto net = make_mlp(seed);
        {
            Tape tape;
            TapeScope scope(tape);
            backward(net.loss());
        }
        auto f = [&] { return net.loss().item(); };
        for (Tensor* p : {&net.w1, &net.b1, &net.w2, &net.b2}) {
            const auto analytic = grad_values(*p);
            const auto numeric = numeric_grad(f, *p, 1e-5);
            EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "seed " << seed;
        }
    }
}

TEST(Backward, EveryOpMatchesFiniteDifferences) {
    Rng rng(11);
    auto a = random_tensor({3, 4}, rng, 0.5, 2.0);
    auto b = random_tensor({3, 4}, rng, 0.5, 2.0);
    auto row = random_tensor({1, 4}, rng);
    auto col = random_tensor({3, 1}, rng);
    auto m = random_tensor({4, 2}, rng);
    std::vector<std::size_t> idx{2, 0, 2};
    auto loss_fn = [&] {
        auto t = matmul(a, m);
        auto u = concat({t, transpose(transpose(col))}, 1);
        auto v = gather_rows(a * b + row, idx) - b / a + col;
        auto w = scatter_add_rows(v, idx, 3);
        auto logp = log_softmax(w);
        auto nrm = norm(add_scalar(sqrt(a), 0.0) + exp(mul_scalar(b, 0.1)));
        auto soft = softmax(reshape(a, {2, 6}));
        return add(add(add(add(sum(u), mean(logp)), sum(log(nrm))), sum(square(soft))),
                   add(mean(sigmoid(b)), mean(silu(w))));
    };
    {
        Tape tape;
        TapeScope scope(tape);
        backward(loss_fn());
    }
    auto f = [&] { return loss_fn().item(); };
    for (Tensor* p : {&a, &b, &row, &col, &m}) {
        const auto analytic = grad_values(*p);
        const auto numeric = numeric_grad(f, *p, 1e-6);
        EXPECT_LT(relative_error(analytic, numeric), 1e-4);
    }
}

TEST(Backward, LinearityOfGradients) {
    auto net = make_mlp(5);
    auto g_of = [&](double a, double b) {
        net.w1.clear_grad();
        Tape tape;
        TapeScope scope(tape);
        auto f = net.loss();
        auto g = sum(square(net.w1));
        backward(add(mul_scalar(f, a), mul_scalar(g, b)));
        return grad_values(net.w1);
    };
    const auto gf = g_of(1, 0);
    const auto gg = g_of(0, 1);
    const auto combo = g_of(2.5, -0.75);
    for (std::size_t k = 0; k < gf.size(); ++k) {
        EXPECT_NEAR(combo[k], 2.5 * gf[k] - 0.75 * gg[k], 1e-12);
    }
}

TEST(Backward, BitIdenticalAcrossRuns) {
    auto run = [] {
        auto net = make_mlp(9);
        Tape tape;
        TapeScope scope(tape);
        auto loss = net.loss();
        backward(loss);
        auto g = grad_values(net.w1);
        g.push_back(loss.item());
        return g;
    };
    EXPECT_EQ(run(), run());
}

TEST(Backward, LeafGradsAccumulateAcrossTapes) {
    auto x = Tensor::vector({1, 2}, true);
    for (int i = 0; i < 2; ++i) {
        Tape tape;
        TapeScope scope(tape);
        backward(sum(x));
    }
    EXPECT_EQ(grad_values(x), (std::vector<double>{2, 2}));
}

namespace {

ParamList scalar_param(double value, double grad) {
    auto t = Tensor::scalar(value, true);
    t.zero_grad();
    t.mutable_grad()[0] = grad;
    return {{"w", t}};
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
    auto params = scalar_param(1.0, 1.0);
    auto state = AdamState::for_params(params, 0.01);
    state.eps = 0.0;
    adam_step(state, params, 0.01);
    EXPECT_NEAR(params[0].tensor.item(), 0.99, 1e-15);
    EXPECT_EQ(state.step, 1u);
    EXPECT_EQ(params[0].tensor.grad()[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
    auto params = scalar_param(2.0, 0.0);
    auto state = AdamState::for_params(params, 0.1);
    adam_step(state, params, 0.1);
    EXPECT_EQ(params[0].tensor.item(), 2.0);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MatchesHandRolledRecurrence) {
    const double g = 0.7, lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto params = scalar_param(1.5, g);
    auto state = AdamState::for_params(params, lr);
    double w = 1.5, m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
        params[0].tensor.mutable_grad()[0] = g;
        adam_step(state, params, lr);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        w -= lr * mh / (std::sqrt(vh) + eps);
        EXPECT_NEAR(params[0].tensor.item(), w, 1e-12);
    }
    EXPECT_EQ(state.step, 2u);
}

TEST(Adam, MissingGradIsStateError) {
    ParamList params{{"w", Tensor::scalar(1.0, true)}};
    auto state = AdamState::for_params(params, 0.1);
    EXPECT_THROW(adam_step(state, params, 0.1), StateError);
}

TEST(Adam, MomentsMatchParameterShapes) {
    Rng rng(1);
    ParamList params{{"a", random_tensor({3, 4}, rng)}, {"b", random_tensor({1, 4}, rng)}};
    auto state = AdamState::for_params(params, 0.1);
    ASSERT_EQ(state.first_moment.size(), 2u);
    EXPECT_EQ(state.first_moment[0].size(), 12u);
    EXPECT_EQ(state.second_moment[1].size(), 4u);
}

TEST(Schedule, WarmupEndReachesBase) {
    EXPECT_DOUBLE_EQ(lr_at_step(4000, 4000, 20000, 1e-7), 1e-7);
}

TEST(Schedule, StartsAtZero) { EXPECT_EQ(lr_at_step(0, 4000, 20000, 1e-7), 0.0); }

TEST(Schedule, DecayMidpointIsHalf) {
    EXPECT_NEAR(lr_at_step(12000, 4000, 20000, 1e-7), 5e-8, 1e-22);
    EXPECT_EQ(lr_at_step(20000, 4000, 20000, 1e-7), 0.0);
    EXPECT_NEAR(lr_at_step(1000, 4000, 20000, 1e-7), 2.5e-8, 1e-22);
}

TEST(Schedule, WarmupNotBelowTotalIsConfigError) {
    EXPECT_THROW(lr_at_step(0, 10, 10, 1.0), ConfigError);
    EXPECT_THROW(lr_at_step(0, 0, 10, 1.0), ConfigError);
}
