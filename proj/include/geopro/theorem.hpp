/**
 * Numerical check of the denoising-objective upper bound for clustered
 * embeddings under the constructed decoder p(y^i | g^j).
 */
#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "geopro/rng.hpp"

namespace geopro {

struct TheoremInstance {
    std::size_t n = 0;
    std::size_t cluster_size = 0;  // K
    std::vector<std::size_t> labels;
    std::vector<Eigen::VectorXd> embeddings;
    double lipschitz = 1.0;
    double delta = 0.0;  // within-cluster radius
    double zeta = 1.0;   // cross-cluster separation

    /// K | n, every cluster has K members, within distances <= delta, cross distances >= zeta.
    /// Throws ContractError when violated.
    void validate() const;
    double gamma() const;  // sigma(-Lip * zeta)
};

/// Centers rejection-sampled more than zeta + 2 delta apart, members within delta / 2.
/// Throws ConstructionError when the separation cannot be met.
TheoremInstance build_instance(std::size_t n, std::size_t cluster_size, std::size_t width,
                               double zeta, double delta, double lipschitz, Rng& rng);

/// (1 - gamma) / K within a cluster, gamma / (n - K) across.
double constructed_decoder_prob(const TheoremInstance& inst, std::size_t i, std::size_t j);

double denoising_objective(const TheoremInstance& inst);

enum class BoundSign { kStatement, kAppendix };

/// (1/n^2) sum over ordered cross-cluster pairs of log sigma(+-Lip ||g_i - g_j||) - log K.
double upper_bound(const TheoremInstance& inst, BoundSign sign = BoundSign::kStatement);

struct BoundCheck {
    double objective = 0;
    double bound = 0;
    bool holds = false;
    double slack = 0;  // bound - objective
};

BoundCheck verify_bound(const TheoremInstance& inst, BoundSign sign = BoundSign::kStatement);

/// log sigma(x) without overflow.
double log_sigmoid(double x);

}  // namespace geopro
