/**
 * Small trainable building blocks shared by the EGNN and the sequence model.
 */
#pragma once

#include <cstddef>
#include <string>

#include "geopro/ops.hpp"
#include "geopro/optim.hpp"
#include "geopro/rng.hpp"

namespace geopro {

/// y = x W + b with W [in, out], b [1, out].
struct Linear {
    ad::Tensor weight;
    ad::Tensor bias;

    /// Glorot-uniform weights in +-sqrt(6 / (in + out)), times `scale`; zero bias.
    static Linear init(std::size_t in, std::size_t out, Rng& rng, double scale = 1.0);

    std::size_t in_width() const { return weight.dim(0); }
    std::size_t out_width() const { return weight.dim(1); }
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Two linear layers with SiLU between them (and optionally after).
struct Mlp2 {
    Linear first;
    Linear second;
    bool activate_output = false;

    static Mlp2 init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
                     bool activate_output = false, double output_scale = 1.0);

    std::size_t in_width() const { return first.in_width(); }
    std::size_t out_width() const { return second.out_width(); }
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
    ad::Tensor gain;  // [1, d]
    ad::Tensor bias;  // [1, d]
    double eps = 1e-5;

    static LayerNorm init(std::size_t width);
    ad::Tensor operator()(const ad::Tensor& x) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Uniform(-limit, limit) parameter tensor.
ad::Tensor uniform_param(ad::Shape shape, double limit, Rng& rng);

}  // namespace geopro
