#include "geopro/property_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "geopro/egnn.hpp"
#include "geopro/errors.hpp"
#include "geopro/ops.hpp"
#include "geopro/pipeline.hpp"
#include "geopro/theorem.hpp"

namespace geopro {

using ad::Tensor;

namespace {

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true) {
    std::vector<double> v(ad::shape_numel(shape));
    for (auto& x : v) x = uniform(rng, lo, hi);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

double inf_norm(std::span<const double> v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

double gradient_check(const std::function<Tensor()>& loss, ParamList params, double h) {
    {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        zero_grads(params);
        tape.backward(loss());
    }
    double worst = 0.0;
    for (auto& p : params) {
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        std::vector<double> numeric(analytic.size());
        auto data = p.tensor.mutable_data();
        ad::NoGradScope no_grad;
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double saved = data[k];
            data[k] = saved + h;
            const double up = loss().item();
            data[k] = saved - h;
            const double down = loss().item();
            data[k] = saved;
            numeric[k] = (up - down) / (2.0 * h);
        }
        std::vector<double> diff(analytic.size());
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = analytic[k] - numeric[k];
        const double scale = std::max({inf_norm(analytic), inf_norm(numeric), 1e-10});
        worst = std::max(worst, inf_norm(diff) / scale);
    }
    return worst;
}

SuiteResult run_equivariance_suite(std::uint64_t seed, int trials) {
    Timer timer;
    SuiteResult r{"equivariance", false, 0.0, 1e-8, "", 0};
    for (int t = 0; t < trials; ++t) {
        Rng rng = substream(seed, "equivariance", static_cast<std::uint64_t>(t));
        const std::size_t n = 2 + rng() % 19;
        const std::size_t d = 1 + rng() % 32;
        const std::size_t depth = 1 + rng() % 3;
        const bool with_attrs = rng() % 2 == 0;
        EgclShape shape{d, d, d, with_attrs ? kSeqSepBuckets : 0, 1.0 + 9.0 * (rng() % 2)};
        const EgnnModel model = EgnnModel::init(depth, shape, rng);
        GraphState state;
        state.coords = random_tensor({n, 3}, rng, -5.0, 5.0, false);
        state.feats = random_tensor({n, d}, rng, -1.0, 1.0, false);
        if (with_attrs) state.edge_attrs = sequence_separation_attrs(n);
        r.worst = std::max(r.worst, equivariance_check(model, state, 1, rng));
    }
    r.passed = r.worst < r.threshold;
    r.detail = std::to_string(trials) + " random (model, graph, isometry) triples";
    r.seconds = timer.seconds();
    return r;
}

SuiteResult run_invariance_suite(std::uint64_t seed, int trials) {
    Timer timer;
    SuiteResult r{"invariance", false, 0.0, 1e-8, "", 0};
    ad::NoGradScope no_grad;
    for (int t = 0; t < trials; ++t) {
        Rng rng = substream(seed, "invariance", static_cast<std::uint64_t>(t));
        ModelConfig mc;
        mc.width = 8;
        mc.num_heads = 2;
        mc.ff_width = 16;
        mc.max_len = 32;
        mc.egnn_depth = 1 + rng() % 2;
        mc.encoder_blocks = 1;
        mc.decoder_blocks = 1;
        mc.edge_attrs = rng() % 2 ? EdgeAttrKind::kSequenceSeparation : EdgeAttrKind::kNone;
        mc.feature_select = rng() % 2 ? FeatureSelect::kInverted : FeatureSelect::kAsPrinted;
        const GeoProModel model = GeoProModel::init(mc, rng());
        SyntheticOptions so;
        so.count = 1;
        so.length = 6 + rng() % 15;
        so.motif_frac = uniform(rng, 0.1, 0.6);
        so.seed = rng();
        const Example ex = generate_synthetic_dataset(so).front();
        const TokenSeq corrupted = corrupt_sequence(ex.record.sequence, ex.motif.positions);
        const PointList x0 = init_backbone_coords(ex.motif, ex.record.length(), kDefaultRadius, rng);
        const RigidTransform rigid = random_rigid(rng, t % 2 == 1);

        ProteinRecord moved = ex.record;
        moved.ca_coords = apply_rigid(rigid, ex.record.ca_coords);
        const Motif moved_motif = ex.motif.transformed(rigid);
        const auto a = forward_from_init(corrupted, ex.motif, x0, model);
        const auto b = forward_from_init(corrupted, moved_motif, apply_rigid(rigid, x0), model);
        const double la = joint_losses(a, ex.record, ex.motif, 0.1, 1.0).total.item();
        const double lb = joint_losses(b, moved, moved_motif, 0.1, 1.0).total.item();
        r.worst = std::max(r.worst, std::abs(la - lb));
        const auto da = a.logits.data(), db = b.logits.data();
        for (std::size_t k = 0; k < da.size(); ++k) r.worst = std::max(r.worst, std::abs(da[k] - db[k]));
    }
    r.passed = r.worst < r.threshold;
    r.detail = std::to_string(trials) + " random (model, record, motif, isometry) tuples";
    r.seconds = timer.seconds();
    return r;
}

SuiteResult run_op_gradient_suite(std::uint64_t seed) {
    Timer timer;
    SuiteResult r{"op-gradients", false, 0.0, 1e-4, "", 0};
    Rng rng = substream(seed, "op-gradients");
    using Fn = std::function<Tensor(const std::vector<Tensor>&)>;
    struct Case {
        const char* name;
        std::vector<ad::Shape> shapes;
        Fn fn;
        double lo = -1.0, hi = 1.0;
    };
    const std::vector<std::size_t> rows{2, 0, 2, 1};
    const std::vector<Case> cases{
        {"matmul", {{3, 4}, {4, 2}}, [](auto& x) { return ad::matmul(x[0], x[1]); }},
        {"transpose", {{3, 4}}, [](auto& x) { return ad::transpose(x[0]); }},
        {"reshape", {{3, 4}}, [](auto& x) { return ad::reshape(x[0], {2, 6}); }},
        {"add", {{3, 4}, {1, 4}}, [](auto& x) { return x[0] + x[1]; }},
        {"sub", {{3, 4}, {3, 1}}, [](auto& x) { return x[0] - x[1]; }},
        {"mul", {{3, 4}, {3, 4}}, [](auto& x) { return x[0] * x[1]; }},
        {"div", {{3, 4}, {1, 4}}, [](auto& x) { return x[0] / x[1]; }, 0.5, 2.0},
        {"add_scalar", {{3, 4}}, [](auto& x) { return ad::add_scalar(x[0], 0.7); }},
        {"mul_scalar", {{3, 4}}, [](auto& x) { return ad::mul_scalar(x[0], -1.3); }},
        {"sum", {{3, 4}}, [](auto& x) { return ad::sum(x[0]); }},
        {"sum_axis", {{3, 4}}, [](auto& x) { return ad::sum(x[0], 0); }},
        {"mean", {{3, 4}}, [](auto& x) { return ad::mean(x[0]); }},
        {"mean_axis", {{3, 4}}, [](auto& x) { return ad::mean(x[0], 1); }},
        {"concat", {{2, 3}, {2, 2}}, [](auto& x) { return ad::concat({x[0], x[1]}, 1); }},
        {"gather_rows", {{3, 4}}, [&](auto& x) { return ad::gather_rows(x[0], rows); }},
        {"scatter_add_rows", {{4, 3}}, [&](auto& x) { return ad::scatter_add_rows(x[0], rows, 3); }},
        {"sigmoid", {{3, 4}}, [](auto& x) { return ad::sigmoid(x[0]); }, -3.0, 3.0},
        {"silu", {{3, 4}}, [](auto& x) { return ad::silu(x[0]); }, -3.0, 3.0},
        {"exp", {{3, 4}}, [](auto& x) { return ad::exp(x[0]); }},
        {"log", {{3, 4}}, [](auto& x) { return ad::log(x[0]); }, 0.5, 2.0},
        {"sqrt", {{3, 4}}, [](auto& x) { return ad::sqrt(x[0]); }, 0.5, 2.0},
        {"square", {{3, 4}}, [](auto& x) { return ad::square(x[0]); }},
        {"softmax", {{3, 4}}, [](auto& x) { return ad::softmax(x[0]); }, -2.0, 2.0},
        {"log_softmax", {{3, 4}}, [](auto& x) { return ad::log_softmax(x[0]); }, -2.0, 2.0},
        {"norm", {{5, 3}}, [](auto& x) { return ad::norm(x[0]); }},
    };
    std::ostringstream worst_op;
    double worst = -1;
    for (const auto& c : cases) {
        std::vector<Tensor> inputs;
        ParamList params;
        for (std::size_t k = 0; k < c.shapes.size(); ++k) {
            inputs.push_back(random_tensor(c.shapes[k], rng, c.lo, c.hi));
            params.push_back({"x" + std::to_string(k), inputs.back()});
        }
        const Tensor probe = c.fn(inputs);
        const Tensor weights = random_tensor(probe.shape(), rng, -1.0, 1.0, false);
        const double err = gradient_check([&] { return ad::sum(c.fn(inputs) * weights); }, params);
        if (err > worst) {
            worst = err;
            worst_op.str(c.name);
        }
    }
    r.worst = worst;
    r.passed = r.worst < r.threshold;
    r.detail = std::to_string(cases.size()) + " ops, worst " + worst_op.str();
    r.seconds = timer.seconds();
    return r;
}

SuiteResult run_pipeline_gradient_suite(std::uint64_t seed) {
    Timer timer;
    SuiteResult r{"pipeline-gradients", false, 0.0, 1e-3, "", 0};
    ModelConfig mc;
    mc.width = 4;
    mc.num_heads = 2;
    mc.ff_width = 8;
    mc.max_len = 8;
    mc.egnn_depth = 1;
    mc.encoder_blocks = 1;
    mc.decoder_blocks = 1;
    mc.edge_attrs = EdgeAttrKind::kSequenceSeparation;
    const GeoProModel model = GeoProModel::init(mc, seed);
    SyntheticOptions so;
    so.count = 1;
    so.length = 6;
    so.motif_frac = 0.34;
    so.seed = seed;
    const Example ex = generate_synthetic_dataset(so).front();
    Rng rng = substream(seed, "pipeline-gradients");
    const TokenSeq corrupted = corrupt_sequence(ex.record.sequence, ex.motif.positions);
    const PointList x0 = init_backbone_coords(ex.motif, 6, kDefaultRadius, rng);
    const ParamList params = model.parameters();
    r.worst = gradient_check(
        [&] {
            const auto out = forward_from_init(corrupted, ex.motif, x0, model);
            return joint_losses(out, ex.record, ex.motif, 0.1, 1.0).total;
        },
        params);
    r.passed = r.worst < r.threshold;
    r.detail = std::to_string(params.size()) + " parameter tensors, L=6, d=4, 1 layer";
    r.seconds = timer.seconds();
    return r;
}

SuiteResult run_theorem_suite(std::uint64_t seed, int instances) {
    Timer timer;
    SuiteResult r{"theorem-bound", false, 0.0, 1e-9, "", 0};
    double worst_excess = -1e300;
    int holds = 0, appendix_violations = 0;
    for (int t = 0; t < instances; ++t) {
        Rng rng = substream(seed, "theorem", static_cast<std::uint64_t>(t));
        const std::size_t k = 2 + rng() % 2;
        std::vector<std::size_t> ns;
        for (std::size_t n = 4; n <= 12; ++n)
            if (n % k == 0) ns.push_back(n);
        const std::size_t n = ns[rng() % ns.size()];
        const double lip = uniform(rng, 0.1, 5.0);
        const double zeta = uniform(rng, 0.5, 5.0);
        const double delta = uniform(rng, 0.0, 0.5 * zeta);
        const auto inst = build_instance(n, k, 1 + rng() % 8, zeta, delta, lip, rng);
        const auto c = verify_bound(inst);
        worst_excess = std::max(worst_excess, c.objective - c.bound);
        holds += c.holds;
        appendix_violations += !verify_bound(inst, BoundSign::kAppendix).holds;
    }
    r.worst = worst_excess;
    r.passed = holds == instances && appendix_violations > 0;
    r.detail = std::to_string(holds) + "/" + std::to_string(instances) +
               " hold; appendix sign violates " + std::to_string(appendix_violations);
    r.seconds = timer.seconds();
    return r;
}

std::vector<SuiteResult> run_property_suite(std::uint64_t seed) {
    return {run_equivariance_suite(seed), run_invariance_suite(seed), run_op_gradient_suite(seed),
            run_pipeline_gradient_suite(seed), run_theorem_suite(seed)};
}

}  // namespace geopro
