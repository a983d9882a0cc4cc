#include "geopro/egnn.hpp"

#include <algorithm>
#include <cmath>

#include "geopro/errors.hpp"
#include "geopro/geometry.hpp"

namespace geopro {

using ad::Tensor;

EgclParams EgclParams::init(const EgclShape& shape, Rng& rng) {
    const std::size_t d = shape.feat_width;
    if (!(shape.distance_scale > 0)) throw ConfigError("distance_scale must be positive");
    const std::size_t pair_in = 2 * d + 1 + shape.edge_attr_width;
    EgclParams p;
    p.shape = shape;
    p.edge = Mlp2::init(pair_in, shape.hidden_width, shape.msg_width, rng, true);
    p.attention = Mlp2::init(shape.msg_width, shape.hidden_width, 1, rng);
    // Small last layer keeps initial coordinate updates close to zero.
    p.coord = Mlp2::init(pair_in, shape.hidden_width, 1, rng, false, 0.01);
    p.node = Mlp2::init(d + shape.msg_width, shape.hidden_width, d, rng);
    return p;
}

void EgclParams::collect(ParamList& out, const std::string& prefix) const {
    edge.collect(out, prefix + ".phi_e");
    attention.collect(out, prefix + ".phi_inf");
    coord.collect(out, prefix + ".phi_x");
    node.collect(out, prefix + ".phi_h");
}

EgnnModel EgnnModel::init(std::size_t depth, const EgclShape& shape, Rng& rng) {
    EgnnModel m;
    m.feat_width = shape.feat_width;
    for (std::size_t l = 0; l < depth; ++l) m.layers.push_back(EgclParams::init(shape, rng));
    return m;
}

void EgnnModel::collect(ParamList& out, const std::string& prefix) const {
    for (std::size_t l = 0; l < layers.size(); ++l)
        layers[l].collect(out, prefix + ".layer" + std::to_string(l));
}

void GraphState::validate() const {
    if (coords.rank() != 2 || coords.dim(1) != 3) {
        throw DimensionError("graph coords must be [N,3], got " + ad::shape_str(coords.shape()));
    }
    if (feats.rank() != 2 || feats.dim(0) != coords.dim(0)) {
        throw DimensionError("graph feats " + ad::shape_str(feats.shape()) +
                             " do not match coords " + ad::shape_str(coords.shape()));
    }
    if (edge_attrs) {
        const std::size_t n = coords.dim(0);
        if (edge_attrs->rank() != 3 || edge_attrs->dim(0) != n || edge_attrs->dim(1) != n) {
            throw DimensionError("edge attrs must be [N,N,A], got " +
                                 ad::shape_str(edge_attrs->shape()));
        }
    }
}

Tensor sequence_separation_attrs(std::size_t n) {
    std::vector<double> data(n * n * kSeqSepBuckets, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const std::size_t sep = i > j ? i - j : j - i;
            const std::size_t bucket = sep == 1 ? 0 : sep == 2 ? 1 : sep <= 4 ? 2 : sep <= 8 ? 3 : 4;
            data[(i * n + j) * kSeqSepBuckets + bucket] = 1.0;
        }
    return Tensor({n, n, kSeqSepBuckets}, std::move(data));
}

GraphState egcl_forward(const GraphState& state, const EgclParams& params) {
    state.validate();
    const std::size_t n = state.num_nodes();
    const std::size_t attr_width = state.edge_attrs ? state.edge_attrs->dim(2) : 0;
    if (state.feats.dim(1) != params.shape.feat_width || attr_width != params.shape.edge_attr_width) {
        throw ContractError("egcl: state widths (feat " + std::to_string(state.feats.dim(1)) +
                            ", edge " + std::to_string(attr_width) + ") do not match layer (feat " +
                            std::to_string(params.shape.feat_width) + ", edge " +
                            std::to_string(params.shape.edge_attr_width) + ")");
    }

    // Ordered pairs i != j, grouped by i so the per-node sums run in j order.
    std::vector<std::size_t> src, dst, pair;
    src.reserve(n * (n ? n - 1 : 0));
    dst.reserve(src.capacity());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            src.push_back(i);
            dst.push_back(j);
            pair.push_back(i * n + j);
        }

    const Tensor hi = ad::gather_rows(state.feats, src);
    const Tensor hj = ad::gather_rows(state.feats, dst);
    const Tensor diff = ad::gather_rows(state.coords, src) - ad::gather_rows(state.coords, dst);
    const Tensor dist = ad::norm(diff);
    const Tensor dist_sq = ad::mul_scalar(ad::sum(ad::square(diff), 1),
                                         1.0 / (params.shape.distance_scale * params.shape.distance_scale));

    std::vector<Tensor> parts{hi, hj, dist_sq};
    if (state.edge_attrs) {
        parts.push_back(ad::gather_rows(ad::reshape(*state.edge_attrs, {n * n, attr_width}), pair));
    }
    const Tensor pair_in = ad::concat(parts, 1);

    const Tensor msg = params.edge(pair_in);
    const Tensor gate = ad::sigmoid(params.attention(msg));
    const Tensor agg = ad::scatter_add_rows(gate * msg, src, n);

    GraphState out;
    out.feats = params.node(ad::concat({state.feats, agg}, 1));
    const Tensor step = diff / ad::add_scalar(dist, 1.0) * params.coord(pair_in);
    out.coords = state.coords + ad::scatter_add_rows(step, src, n);
    out.edge_attrs = state.edge_attrs;
    return out;
}

GraphState egnn_forward(const GraphState& state, const EgnnModel& model) {
    GraphState s = state;
    for (const auto& layer : model.layers) s = egcl_forward(s, layer);
    return s;
}

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

double equivariance_check(const GraphFn& forward, const GraphState& state, int trials, Rng& rng,
                          bool translations_only) {
    if (trials < 1) throw ContractError("equivariance_check: trials must be >= 1");
    ad::NoGradScope no_grad;
    const GraphState base = forward(state);
    const PointList base_coords = tensor_to_points(base.coords);
    const PointList in_coords = tensor_to_points(state.coords);

    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        RigidTransform T = random_rigid(rng, t % 2 == 1);
        if (translations_only) T.rotation.setIdentity();
        GraphState moved = state;
        moved.coords = points_to_tensor(apply_rigid(T, in_coords));
        const GraphState out = forward(moved);
        const Tensor expected = points_to_tensor(apply_rigid(T, base_coords));
        worst = std::max(worst, max_abs_diff(out.coords.data(), expected.data()));
        worst = std::max(worst, max_abs_diff(out.feats.data(), base.feats.data()));
    }
    return worst;
}

double equivariance_check(const EgnnModel& model, const GraphState& state, int trials, Rng& rng,
                          bool translations_only) {
    return equivariance_check([&model](const GraphState& s) { return egnn_forward(s, model); },
                              state, trials, rng, translations_only);
}

}  // namespace geopro
