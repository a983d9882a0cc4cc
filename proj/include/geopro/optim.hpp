#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geopro/tensor.hpp"

namespace geopro {

struct NamedParam {
    std::string name;
    ad::Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

/// Bias-corrected Adam moments for a fixed parameter list.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double base_lr = 1e-7;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    static AdamState for_params(const ParamList& params, double base_lr);
};

/// One Adam update at learning rate `lr`; zeroes the grads afterwards.
/// Throws StateError if any parameter has no grad buffer.
void adam_step(AdamState& state, ParamList& params, double lr);

/// Linear warm-up from 0 to `base_lr` over [0, warmup], then linear decay to 0 at `total`.
double lr_at_step(std::size_t step, std::size_t warmup, std::size_t total, double base_lr);

void zero_grads(ParamList& params);

}  // namespace geopro
