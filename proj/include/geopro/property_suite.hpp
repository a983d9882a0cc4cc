/**
 * Self-checks run by `geopro check`: EGNN equivariance, end-to-end loss
 * invariance, finite-difference gradients and the theorem bound sweep.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geopro/optim.hpp"
#include "geopro/tensor.hpp"

namespace geopro {

struct SuiteResult {
    std::string name;
    bool passed = false;
    double worst = 0;      // largest observed deviation / error
    double threshold = 0;  // pass when worst < threshold
    std::string detail;
    double seconds = 0;
};

/// Largest over `params` of ||analytic - numeric||_inf / max(||analytic||_inf, ||numeric||_inf, 1e-10),
/// with central differences of step `h`. `loss` is re-evaluated under a fresh tape each time.
double gradient_check(const std::function<ad::Tensor()>& loss, ParamList params, double h = 1e-6);

SuiteResult run_equivariance_suite(std::uint64_t seed, int trials = 100);
SuiteResult run_invariance_suite(std::uint64_t seed, int trials = 50);
SuiteResult run_op_gradient_suite(std::uint64_t seed);
SuiteResult run_pipeline_gradient_suite(std::uint64_t seed);
SuiteResult run_theorem_suite(std::uint64_t seed, int instances = 1000);

std::vector<SuiteResult> run_property_suite(std::uint64_t seed);

}  // namespace geopro
