/**
 * E(n)-equivariant graph convolution over a fully connected C-alpha graph.
 *
 * Per layer, for every ordered pair i != j:
 *   m_ij  = phi_e(h_i, h_j, d_ij^2, a_ij)
 *   e_ij  = sigmoid(phi_inf(m_ij))
 *   h_i'  = phi_h(h_i, sum_j e_ij m_ij)
 *   x_i'  = x_i + sum_j (x_i - x_j) / (d_ij + 1) * phi_x(h_i, h_j, d_ij^2, a_ij)
 *
 * Coordinates enter the feature path only through d_ij^2, so features are
 * E(3)-invariant and coordinates E(3)-equivariant (reflections included).
 */
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "geopro/layers.hpp"
#include "geopro/rng.hpp"

namespace geopro {

/// Width bookkeeping for one layer.
struct EgclShape {
    std::size_t feat_width = 320;
    std::size_t msg_width = 320;
    std::size_t hidden_width = 320;
    std::size_t edge_attr_width = 0;
    /// d_ij^2 enters the MLPs as d_ij^2 / distance_scale^2.
    double distance_scale = 1.0;
};

struct EgclParams {
    EgclShape shape;
    Mlp2 edge;       // phi_e: 2d + 1 + |a| -> msg
    Mlp2 attention;  // phi_inf: msg -> 1, passed through sigmoid
    Mlp2 coord;      // phi_x: 2d + 1 + |a| -> 1
    Mlp2 node;       // phi_h: d + msg -> d

    static EgclParams init(const EgclShape& shape, Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;
};

struct EgnnModel {
    std::size_t feat_width = 320;
    std::vector<EgclParams> layers;

    static EgnnModel init(std::size_t depth, const EgclShape& shape, Rng& rng);
    void collect(ParamList& out, const std::string& prefix) const;
};

struct GraphState {
    ad::Tensor coords;                     // [N, 3]
    ad::Tensor feats;                      // [N, d]
    std::optional<ad::Tensor> edge_attrs;  // [N, N, |a|]

    std::size_t num_nodes() const { return coords.dim(0); }
    void validate() const;
};

/// One-hot sequence-separation buckets |i-j| in {1, 2, 3-4, 5-8, 9+}: [N, N, 5].
ad::Tensor sequence_separation_attrs(std::size_t num_nodes);
inline constexpr std::size_t kSeqSepBuckets = 5;

GraphState egcl_forward(const GraphState& state, const EgclParams& params);
GraphState egnn_forward(const GraphState& state, const EgnnModel& model);

using GraphFn = std::function<GraphState(const GraphState&)>;

/// Max over `trials` random rigid motions (half of them reflections) of the
/// larger of ||f(Tx).coords - T f(x).coords||_inf and ||f(Tx).feats - f(x).feats||_inf.
double equivariance_check(const GraphFn& forward, const GraphState& state, int trials, Rng& rng,
                          bool translations_only = false);
double equivariance_check(const EgnnModel& model, const GraphState& state, int trials, Rng& rng,
                          bool translations_only = false);

}  // namespace geopro
