#include "geopro/theorem.hpp"

#include <cmath>
#include <string>

#include "geopro/errors.hpp"

namespace geopro {

double log_sigmoid(double x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

void TheoremInstance::validate() const {
    if (n == 0 || cluster_size == 0 || n % cluster_size != 0) {
        throw ContractError("cluster size " + std::to_string(cluster_size) + " must divide n = " +
                            std::to_string(n));
    }
    if (labels.size() != n || embeddings.size() != n) {
        throw ContractError("instance needs n labels and n embeddings");
    }
    if (!(lipschitz > 0)) throw ContractError("Lipschitz constant must be positive");
    if (!(delta >= 0) || !(zeta > delta)) throw ContractError("need 0 <= delta < zeta");
    std::vector<std::size_t> counts(n / cluster_size, 0);
    for (auto s : labels) {
        if (s >= counts.size()) throw ContractError("cluster label out of range");
        ++counts[s];
    }
    for (auto c : counts) {
        if (c != cluster_size) throw ContractError("every cluster must have exactly K members");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (embeddings[i].size() != embeddings[0].size()) {
            throw ContractError("embeddings must share one width");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = (embeddings[i] - embeddings[j]).norm();
            if (labels[i] == labels[j] && d > delta) {
                throw ContractError("within-cluster distance " + std::to_string(d) +
                                    " exceeds delta " + std::to_string(delta));
            }
            if (labels[i] != labels[j] && d < zeta) {
                throw ContractError("cross-cluster distance " + std::to_string(d) +
                                    " below zeta " + std::to_string(zeta));
            }
        }
    }
}

double TheoremInstance::gamma() const {
    return std::exp(log_sigmoid(-lipschitz * zeta));
}

TheoremInstance build_instance(std::size_t n, std::size_t cluster_size, std::size_t width,
                               double zeta, double delta, double lipschitz, Rng& rng) {
    if (cluster_size == 0 || n % cluster_size != 0) {
        throw ContractError("cluster size must divide n");
    }
    if (width == 0) throw ContractError("embedding width must be positive");
    if (!(delta >= 0) || !(zeta > delta)) throw ContractError("need 0 <= delta < zeta");
    if (!(lipschitz > 0)) throw ContractError("Lipschitz constant must be positive");

    const std::size_t clusters = n / cluster_size;
    const double min_gap = zeta + 2.0 * delta;
    const double box = min_gap * (1.0 + static_cast<double>(clusters));
    std::vector<Eigen::VectorXd> centers;
    for (int attempt = 0; attempt < 10000 && centers.size() < clusters; ++attempt) {
        Eigen::VectorXd c(width);
        for (std::size_t k = 0; k < width; ++k) c[k] = uniform(rng, -box, box);
        bool ok = true;
        for (const auto& other : centers) ok = ok && (c - other).norm() > min_gap;
        if (ok) centers.push_back(std::move(c));
    }
    if (centers.size() < clusters) {
        throw ConstructionError("could not place " + std::to_string(clusters) +
                                " cluster centers " + std::to_string(min_gap) + " apart");
    }

    TheoremInstance inst;
    inst.n = n;
    inst.cluster_size = cluster_size;
    inst.lipschitz = lipschitz;
    inst.delta = delta;
    inst.zeta = zeta;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = i / cluster_size;
        Eigen::VectorXd dir(width);
        for (std::size_t k = 0; k < width; ++k) dir[k] = normal(rng);
        const double len = dir.norm();
        const double r = uniform(rng, 0.0, 0.5 * delta);
        inst.labels.push_back(s);
        inst.embeddings.push_back(len > 0 ? Eigen::VectorXd(centers[s] + dir * (r / len))
                                          : centers[s]);
    }
    inst.validate();
    return inst;
}

double constructed_decoder_prob(const TheoremInstance& inst, std::size_t i, std::size_t j) {
    if (i >= inst.n || j >= inst.n) throw ContractError("instance index out of range");
    const double g = inst.gamma();
    const auto k = static_cast<double>(inst.cluster_size);
    if (inst.labels[i] == inst.labels[j]) return (1.0 - g) / k;
    return g / static_cast<double>(inst.n - inst.cluster_size);
}

double denoising_objective(const TheoremInstance& inst) {
    const auto k = static_cast<double>(inst.cluster_size);
    double total = 0.0;
    for (std::size_t j = 0; j < inst.n; ++j)
        for (std::size_t i = 0; i < inst.n; ++i)
            if (inst.labels[i] == inst.labels[j]) {
                total += std::log(constructed_decoder_prob(inst, i, j)) / k;
            }
    return total / static_cast<double>(inst.n);
}

double upper_bound(const TheoremInstance& inst, BoundSign sign) {
    const double s = sign == BoundSign::kStatement ? 1.0 : -1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < inst.n; ++i)
        for (std::size_t j = 0; j < inst.n; ++j)
            if (inst.labels[i] != inst.labels[j]) {
                total += log_sigmoid(s * inst.lipschitz *
                                     (inst.embeddings[i] - inst.embeddings[j]).norm());
            }
    const auto n = static_cast<double>(inst.n);
    return total / (n * n) - std::log(static_cast<double>(inst.cluster_size));
}

BoundCheck verify_bound(const TheoremInstance& inst, BoundSign sign) {
    BoundCheck c;
    c.objective = denoising_objective(inst);
    c.bound = upper_bound(inst, sign);
    c.holds = c.objective <= c.bound + 1e-9;
    c.slack = c.bound - c.objective;
    return c;
}

}  // namespace geopro
