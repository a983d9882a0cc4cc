#include "geopro/layers.hpp"

#include <cmath>

namespace geopro {

using ad::Tensor;

Tensor uniform_param(ad::Shape shape, double limit, Rng& rng) {
    std::vector<double> data(ad::shape_numel(shape));
    for (auto& v : data) v = uniform(rng, -limit, limit);
    return Tensor(std::move(shape), std::move(data), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, double scale) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Linear l;
    l.weight = uniform_param({in, out}, limit, rng);
    if (scale != 1.0) {
        for (auto& w : l.weight.mutable_data()) w *= scale;
    }
    l.bias = Tensor::zeros({1, out}, true);
    return l;
}

Tensor Linear::operator()(const Tensor& x) const { return ad::matmul(x, weight) + bias; }

void Linear::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Mlp2 Mlp2::init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng,
                bool activate_output, double output_scale) {
    Mlp2 m;
    m.first = Linear::init(in, hidden, rng);
    m.second = Linear::init(hidden, out, rng, output_scale);
    m.activate_output = activate_output;
    return m;
}

Tensor Mlp2::operator()(const Tensor& x) const {
    Tensor y = second(ad::silu(first(x)));
    return activate_output ? ad::silu(y) : y;
}

void Mlp2::collect(ParamList& out, const std::string& prefix) const {
    first.collect(out, prefix + ".0");
    second.collect(out, prefix + ".1");
}

LayerNorm LayerNorm::init(std::size_t width) {
    LayerNorm n;
    n.gain = Tensor::full({1, width}, 1.0, true);
    n.bias = Tensor::zeros({1, width}, true);
    return n;
}

Tensor LayerNorm::operator()(const Tensor& x) const {
    Tensor centered = x - ad::mean(x, 1);
    Tensor var = ad::mean(ad::square(centered), 1);
    Tensor normed = centered / ad::sqrt(ad::add_scalar(var, eps));
    return normed * gain + bias;
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
}

}  // namespace geopro
