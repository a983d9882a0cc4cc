#include <gtest/gtest.h>

#include <cmath>

#include "geopro/egnn.hpp"
#include "geopro/errors.hpp"
#include "geopro/geometry.hpp"
#include "geopro/ops.hpp"
#include "test_support.hpp"

using namespace geopro;
using ad::Tensor;
using testing_support::grad_values;
using testing_support::numeric_grad;
using testing_support::random_tensor;
using testing_support::relative_error;
using testing_support::values;

namespace {

using Vec = std::vector<double>;

// Plain-loop reference of one layer, reading the same weights.
Vec dense(const Linear& lin, const Vec& x) {
    const std::size_t in = lin.in_width(), out = lin.out_width();
    Vec y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double s = lin.bias[o];
        for (std::size_t k = 0; k < in; ++k) s += x[k] * lin.weight[k * out + o];
        y[o] = s;
    }
    return y;
}

double silu_ref(double v) { return v / (1 + std::exp(-v)); }

Vec mlp(const Mlp2& m, const Vec& x) {
    Vec h = dense(m.first, x);
    for (auto& v : h) v = silu_ref(v);
    Vec y = dense(m.second, h);
    if (m.activate_output) for (auto& v : y) v = silu_ref(v);
    return y;
}

struct RefState {
    std::vector<Vec> x, h;
};

RefState reference_layer(const RefState& in, const EgclParams& p, const Tensor* attrs) {
    const std::size_t n = in.x.size();
    const std::size_t a = p.shape.edge_attr_width;
    const double inv_s2 = 1.0 / (p.shape.distance_scale * p.shape.distance_scale);
    RefState out = in;
    for (std::size_t i = 0; i < n; ++i) {
        Vec agg(p.shape.msg_width, 0.0);
        Vec shift(3, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d2 = 0;
            for (int c = 0; c < 3; ++c) d2 += (in.x[i][c] - in.x[j][c]) * (in.x[i][c] - in.x[j][c]);
            Vec pin(in.h[i]);
            pin.insert(pin.end(), in.h[j].begin(), in.h[j].end());
            pin.push_back(d2 * inv_s2);
            for (std::size_t k = 0; k < a; ++k) pin.push_back((*attrs)[(i * n + j) * a + k]);
            Vec m = mlp(p.edge, pin);
            const double e = 1 / (1 + std::exp(-mlp(p.attention, m)[0]));
            for (std::size_t k = 0; k < m.size(); ++k) agg[k] += e * m[k];
            const double gx = mlp(p.coord, pin)[0];
            for (int c = 0; c < 3; ++c) shift[c] += (in.x[i][c] - in.x[j][c]) / (std::sqrt(d2) + 1) * gx;
        }
        Vec hin(in.h[i]);
        hin.insert(hin.end(), agg.begin(), agg.end());
        out.h[i] = mlp(p.node, hin);
        for (int c = 0; c < 3; ++c) out.x[i][c] = in.x[i][c] + shift[c];
    }
    return out;
}

RefState to_ref(const GraphState& s) {
    RefState r;
    const std::size_t n = s.num_nodes(), d = s.feats.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        r.x.push_back({s.coords[i * 3], s.coords[i * 3 + 1], s.coords[i * 3 + 2]});
        Vec h(d);
        for (std::size_t k = 0; k < d; ++k) h[k] = s.feats[i * d + k];
        r.h.push_back(h);
    }
    return r;
}

EgclShape small_shape(std::size_t d, std::size_t attrs = 0, double scale = 1.0) {
    EgclShape s;
    s.feat_width = d;
    s.msg_width = d + 1;
    s.hidden_width = d + 2;
    s.edge_attr_width = attrs;
    s.distance_scale = scale;
    return s;
}

GraphState random_graph(std::size_t n, std::size_t d, Rng& rng, bool seqsep = false) {
    GraphState s;
    s.coords = random_tensor({n, 3}, rng, -4, 4, false);
    s.feats = random_tensor({n, d}, rng, -1, 1, false);
    if (seqsep) s.edge_attrs = sequence_separation_attrs(n);
    return s;
}

}  // namespace

TEST(Egcl, MatchesLoopReference) {
    Rng rng(1);
    for (bool seqsep : {false, true}) {
        for (double scale : {1.0, 10.0}) {
            auto layer = EgclParams::init(small_shape(4, seqsep ? kSeqSepBuckets : 0, scale), rng);
            // Enlarge the coordinate head so the coordinate path is exercised at full size.
            for (auto& w : layer.coord.second.weight.mutable_data()) w *= 100;
            auto state = random_graph(5, 4, rng, seqsep);
            auto got = egcl_forward(state, layer);
            auto want = reference_layer(to_ref(state), layer, seqsep ? &*state.edge_attrs : nullptr);
            auto got_ref = to_ref(got);
            for (std::size_t i = 0; i < 5; ++i) {
                for (int c = 0; c < 3; ++c) EXPECT_NEAR(got_ref.x[i][c], want.x[i][c], 1e-12);
                for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(got_ref.h[i][k], want.h[i][k], 1e-12);
            }
        }
    }
}

TEST(Egcl, SingleNodeKeepsCoordinatesAndSeesZeroAggregate) {
    Rng rng(2);
    auto layer = EgclParams::init(small_shape(3), rng);
    auto state = random_graph(1, 3, rng);
    auto out = egcl_forward(state, layer);
    EXPECT_EQ(values(out.coords), values(state.coords));
    Vec hin(values(state.feats));
    hin.resize(3 + layer.shape.msg_width, 0.0);
    auto want = mlp(layer.node, hin);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out.feats[k], want[k], 1e-14);
}

TEST(Egcl, MirrorPairMovesOppositely) {
    Rng rng(3);
    auto layer = EgclParams::init(small_shape(3), rng);
    for (auto& w : layer.coord.second.weight.mutable_data()) w *= 100;
    GraphState s;
    s.coords = Tensor::matrix({{-1.5, 0.3, 0.2}, {1.5, -0.3, -0.2}});
    auto h = random_tensor({1, 3}, rng, -1, 1, false);
    s.feats = ad::concat({h, h}, 0);
    auto out = egcl_forward(s, layer);
    Point3 d0, d1, axis;
    for (int c = 0; c < 3; ++c) {
        d0[c] = out.coords[c] - s.coords[c];
        d1[c] = out.coords[3 + c] - s.coords[3 + c];
        axis[c] = s.coords[3 + c] - s.coords[c];
    }
    EXPECT_GT(d0.norm(), 1e-6);
    EXPECT_NEAR((d0 + d1).norm(), 0, 1e-14);
    EXPECT_NEAR(d0.cross(axis).norm(), 0, 1e-12);
}

TEST(Egcl, WidthMismatchIsContractError) {
    Rng rng(4);
    auto layer = EgclParams::init(small_shape(4), rng);
    EXPECT_THROW(egcl_forward(random_graph(3, 5, rng), layer), ContractError);
    EXPECT_THROW(egcl_forward(random_graph(3, 4, rng, true), layer), ContractError);
    EXPECT_THROW(EgclParams::init(small_shape(4, 0, 0.0), rng), ConfigError);
}

TEST(Egnn, ZeroLayersIsIdentity) {
    Rng rng(5);
    EgnnModel model;
    model.feat_width = 4;
    auto state = random_graph(4, 4, rng);
    auto out = egnn_forward(state, model);
    EXPECT_EQ(values(out.coords), values(state.coords));
    EXPECT_EQ(values(out.feats), values(state.feats));
}

TEST(Egnn, OneLayerEqualsEgcl) {
    Rng rng(6);
    auto model = EgnnModel::init(1, small_shape(4), rng);
    auto state = random_graph(4, 4, rng);
    EXPECT_EQ(values(egnn_forward(state, model).coords),
              values(egcl_forward(state, model.layers[0]).coords));
}

TEST(Egnn, EquivariantUnderRigidMotionsAndReflections) {
    Rng rng(7);
    for (std::size_t depth : {1u, 2u, 3u}) {
        auto model = EgnnModel::init(depth, small_shape(6), rng);
        auto state = random_graph(5, 6, rng);
        EXPECT_LT(equivariance_check(model, state, 20, rng), 1e-8) << "depth " << depth;
    }
}

TEST(Egnn, EquivariantWithSequenceSeparationAttrs) {
    Rng rng(8);
    auto model = EgnnModel::init(2, small_shape(4, kSeqSepBuckets, 10.0), rng);
    auto state = random_graph(7, 4, rng, true);
    EXPECT_LT(equivariance_check(model, state, 20, rng), 1e-8);
}

TEST(Egnn, TranslationOnlyDeviationIsTiny) {
    Rng rng(9);
    auto model = EgnnModel::init(2, small_shape(6), rng);
    auto state = random_graph(5, 6, rng);
    EXPECT_LT(equivariance_check(model, state, 20, rng, true), 1e-10);
}

TEST(Egnn, CheckCatchesAbsolutePositionLeak) {
    Rng rng(10);
    auto model = EgnnModel::init(2, small_shape(6), rng);
    auto state = random_graph(5, 6, rng);
    GraphFn leaky = [&](const GraphState& s) {
        GraphState t = s;
        t.feats = s.feats + ad::concat({s.coords, Tensor::zeros({s.num_nodes(), 3})}, 1);
        return egnn_forward(t, model);
    };
    EXPECT_GT(equivariance_check(leaky, state, 10, rng), 1e-3);
}

TEST(Egnn, PermutationEquivariance) {
    Rng rng(11);
    auto model = EgnnModel::init(2, small_shape(4), rng);
    auto state = random_graph(6, 4, rng);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    GraphState permuted;
    permuted.coords = ad::gather_rows(state.coords, perm);
    permuted.feats = ad::gather_rows(state.feats, perm);
    auto a = egnn_forward(state, model);
    auto b = egnn_forward(permuted, model);
    auto a_perm_c = ad::gather_rows(a.coords, perm);
    auto a_perm_h = ad::gather_rows(a.feats, perm);
    for (std::size_t k = 0; k < b.coords.numel(); ++k) EXPECT_NEAR(b.coords[k], a_perm_c[k], 1e-12);
    for (std::size_t k = 0; k < b.feats.numel(); ++k) EXPECT_NEAR(b.feats[k], a_perm_h[k], 1e-12);
}

TEST(SequenceSeparation, Buckets) {
    auto attrs = sequence_separation_attrs(12);
    auto bucket = [&](std::size_t i, std::size_t j) {
        int found = -1, count = 0;
        for (std::size_t b = 0; b < kSeqSepBuckets; ++b) {
            if (attrs[(i * 12 + j) * kSeqSepBuckets + b] == 1.0) {
                found = static_cast<int>(b);
                ++count;
            }
        }
        return count == 1 ? found : -count - 1;
    };
    EXPECT_EQ(bucket(0, 1), 0);
    EXPECT_EQ(bucket(3, 1), 1);
    EXPECT_EQ(bucket(0, 3), 2);
    EXPECT_EQ(bucket(0, 4), 2);
    EXPECT_EQ(bucket(0, 5), 3);
    EXPECT_EQ(bucket(9, 1), 3);
    EXPECT_EQ(bucket(0, 9), 4);
    EXPECT_EQ(bucket(11, 0), 4);
    EXPECT_EQ(bucket(4, 4), -1);
}

TEST(Egnn, GradientsMatchFiniteDifferences) {
    Rng rng(12);
    auto model = EgnnModel::init(2, small_shape(5, kSeqSepBuckets, 3.0), rng);
    for (auto& layer : model.layers)
        for (auto& w : layer.coord.second.weight.mutable_data()) w *= 50;
    auto state = random_graph(6, 5, rng, true);
    auto target = random_tensor({6, 3}, rng, -4, 4, false);
    auto loss_of = [&] {
        auto out = egnn_forward(state, model);
        return ad::sum(ad::square(out.coords - target)) + ad::mean(ad::square(out.feats));
    };
    ParamList params;
    model.collect(params, "egnn");
    for (auto& p : params) p.tensor.set_requires_grad(true);
    {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        ad::backward(loss_of());
    }
    auto f = [&] { return loss_of().item(); };
    for (auto& p : params) {
        const auto analytic = grad_values(p.tensor);
        const auto numeric = numeric_grad(f, p.tensor, 1e-6);
        EXPECT_LT(relative_error(analytic, numeric), 1e-4) << p.name;
    }
}

TEST(Egnn, ParameterNamesAndShapes) {
    Rng rng(13);
    auto shape = small_shape(4, kSeqSepBuckets);
    auto model = EgnnModel::init(2, shape, rng);
    ParamList params;
    model.collect(params, "egnn");
    EXPECT_EQ(params.size(), 2u * 4u * 4u);
    EXPECT_EQ(params.front().name, "egnn.layer0.phi_e.0.weight");
    const auto& l = model.layers[1];
    EXPECT_EQ(l.edge.in_width(), 2 * 4 + 1 + kSeqSepBuckets);
    EXPECT_EQ(l.edge.out_width(), shape.msg_width);
    EXPECT_EQ(l.attention.out_width(), 1u);
    EXPECT_EQ(l.coord.out_width(), 1u);
    EXPECT_EQ(l.node.in_width(), 4 + shape.msg_width);
    EXPECT_EQ(l.node.out_width(), 4u);
}
