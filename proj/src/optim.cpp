#include "geopro/optim.hpp"

#include <algorithm>
#include <cmath>

#include "geopro/errors.hpp"

namespace geopro {

AdamState AdamState::for_params(const ParamList& params, double base_lr) {
    AdamState s;
    s.base_lr = base_lr;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.tensor.numel(), 0.0);
        s.second_moment.emplace_back(p.tensor.numel(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, ParamList& params, double lr) {
    if (lr < 0) throw ContractError("adam_step: negative learning rate");
    if (params.size() != state.first_moment.size()) {
        throw ContractError("adam_step: state was built for " +
                            std::to_string(state.first_moment.size()) + " parameters, got " +
                            std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].tensor.has_grad()) {
            throw StateError("adam_step: parameter '" + params[i].name + "' has no gradient");
        }
        if (state.first_moment[i].size() != params[i].tensor.numel()) {
            throw ContractError("adam_step: moment shape mismatch for '" + params[i].name + "'");
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].tensor.mutable_data();
        auto g = params[i].tensor.mutable_grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            w[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
            g[k] = 0.0;
        }
    }
}

double lr_at_step(std::size_t step, std::size_t warmup, std::size_t total, double base_lr) {
    if (warmup == 0 || warmup >= total) {
        throw ConfigError("lr schedule needs 0 < warmup < total (warmup=" +
                          std::to_string(warmup) + ", total=" + std::to_string(total) + ")");
    }
    if (step > total) throw ContractError("lr_at_step: step beyond total");
    if (step <= warmup) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    return base_lr * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

void zero_grads(ParamList& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace geopro
