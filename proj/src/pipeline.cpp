#include "geopro/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string_view>
#include <thread>

#include "geopro/errors.hpp"
#include "geopro/ops.hpp"

namespace geopro {

using ad::Tensor;

Motif Motif::from_record(const ProteinRecord& record, std::vector<std::size_t> positions) {
    Motif m;
    m.positions = std::move(positions);
    for (auto p : m.positions) {
        if (p >= record.length() || p >= record.ca_coords.size()) {
            throw ContractError("motif position " + std::to_string(p) +
                                " out of range for length " + std::to_string(record.length()));
        }
        m.residues.push_back(record.sequence[p]);
        m.coords.push_back(record.ca_coords[p]);
    }
    m.validate(record.length());
    return m;
}

void Motif::validate(std::size_t length) const {
    if (residues.size() != positions.size() || coords.size() != positions.size()) {
        throw ContractError("motif has " + std::to_string(positions.size()) + " positions, " +
                            std::to_string(residues.size()) + " residues and " +
                            std::to_string(coords.size()) + " coordinates");
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= length) {
            throw ContractError("motif position " + std::to_string(positions[i]) +
                                " out of range for length " + std::to_string(length));
        }
        if (i > 0 && positions[i] <= positions[i - 1]) {
            throw ContractError("motif positions must be strictly increasing");
        }
        if (residues[i] >= Vocab::kNumAminoAcids) {
            throw ContractError("motif residue at " + std::to_string(positions[i]) +
                                " is not an amino acid");
        }
    }
}

std::vector<bool> Motif::mask(std::size_t length) const {
    std::vector<bool> out(length, false);
    for (auto p : positions) out.at(p) = true;
    return out;
}

Motif Motif::transformed(const RigidTransform& transform) const {
    Motif m = *this;
    m.coords = apply_rigid(transform, coords);
    return m;
}

std::string ModelConfig::canonical() const {
    std::ostringstream s;
    s << "width=" << width << ";egnn_depth=" << egnn_depth << ";num_heads=" << num_heads
      << ";ff_width=" << ff_width << ";max_len=" << max_len
      << ";encoder_blocks=" << encoder_blocks << ";decoder_blocks=" << decoder_blocks
      << ";edge_attrs=" << (edge_attrs == EdgeAttrKind::kNone ? "none" : "seqsep")
      << ";feature_select=" << to_string(feature_select) << ";distance_scale=" << distance_scale;
    return s.str();
}

std::uint32_t ModelConfig::hash() const {
    std::uint32_t h = 2166136261u;
    for (char c : canonical()) {
        h ^= static_cast<unsigned char>(c);
        h *= 16777619u;
    }
    return h;
}

EgclShape ModelConfig::egcl_shape() const {
    EgclShape s;
    s.feat_width = width;
    s.msg_width = width;
    s.hidden_width = width;
    s.edge_attr_width = edge_attrs == EdgeAttrKind::kNone ? 0 : kSeqSepBuckets;
    s.distance_scale = distance_scale;
    return s;
}

SequenceModelShape ModelConfig::sequence_shape() const {
    SequenceModelShape s;
    s.width = width;
    s.num_heads = num_heads;
    s.ff_width = ff_width;
    s.max_len = max_len;
    s.encoder_blocks = encoder_blocks;
    s.decoder_blocks = decoder_blocks;
    return s;
}

void TrainingConfig::validate() const {
    if (!(alpha >= 0) || !(beta >= 0)) throw ConfigError("alpha and beta must be non-negative");
    if (alpha == 0 && beta == 0) throw ConfigError("alpha and beta must not both be zero");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(base_lr >= 0)) throw ConfigError("lr must be non-negative");
    if (top_k < 1 || top_k > static_cast<int>(Vocab::kNumAminoAcids)) {
        throw ConfigError("top_k must be in [1, 20]");
    }
    if (!(radius > 0)) throw ConfigError("radius must be positive");
    if (model.width == 0 || model.num_heads == 0 || model.width % model.num_heads != 0) {
        throw ConfigError("width must be a positive multiple of num_heads");
    }
    if (model.max_len == 0) throw ConfigError("max_len must be positive");
    if (!(model.distance_scale > 0)) throw ConfigError("distance_scale must be positive");
}

void apply_profile(TrainingConfig& config, const std::string& profile) {
    if (profile == "beta-lactamase") {
        config.alpha = 0.1;
        config.beta = 1.0;
    } else if (profile == "myoglobin") {
        config.alpha = 0.01;
        config.beta = 1.0;
    } else {
        throw ConfigError("unknown profile '" + profile + "' (beta-lactamase, myoglobin)");
    }
}

GeoProModel GeoProModel::init(const ModelConfig& config, std::uint64_t seed) {
    TrainingConfig check;
    check.model = config;
    check.validate();
    GeoProModel m;
    m.config = config;
    Rng enc_rng = substream(seed, "init.encoder");
    Rng egnn_rng = substream(seed, "init.egnn");
    Rng dec_rng = substream(seed, "init.decoder");
    m.encoder = ContextEncoder::init(config.sequence_shape(), enc_rng);
    m.egnn = EgnnModel::init(config.egnn_depth, config.egcl_shape(), egnn_rng);
    m.decoder = GsdDecoder::init(config.sequence_shape(), dec_rng);
    return m;
}

ParamList GeoProModel::parameters() const {
    ParamList out;
    encoder.collect(out, "encoder");
    egnn.collect(out, "egnn");
    decoder.collect(out, "decoder");
    return out;
}

std::vector<Placement> placement_order(const Motif& motif, std::size_t length) {
    motif.validate(length);
    if (motif.positions.empty()) throw ContractError("motif must contain at least one position");
    constexpr std::size_t kFar = static_cast<std::size_t>(-1);
    std::vector<std::size_t> dist(length, kFar);
    for (auto p : motif.positions) dist[p] = 0;
    for (std::size_t i = 1; i < length; ++i) {
        if (dist[i - 1] != kFar) dist[i] = std::min(dist[i], dist[i - 1] + 1);
    }
    for (std::size_t i = length - 1; i-- > 0;) {
        if (dist[i + 1] != kFar) dist[i] = std::min(dist[i], dist[i + 1] + 1);
    }
    const std::size_t max_dist = *std::max_element(dist.begin(), dist.end());
    std::vector<Placement> order;
    order.reserve(length - motif.positions.size());
    for (std::size_t wave = 1; wave <= max_dist; ++wave) {
        for (std::size_t i = 0; i < length; ++i) {
            if (dist[i] != wave) continue;
            const bool left = i > 0 && dist[i - 1] == wave - 1;
            order.push_back({i, left ? i - 1 : i + 1});
        }
    }
    return order;
}

PointList init_backbone_coords(const Motif& motif, std::size_t length, double radius, Rng& rng) {
    if (!(radius > 0)) throw DomainError("radius must be positive");
    const auto order = placement_order(motif, length);
    PointList x(length, Point3::Zero());
    for (std::size_t k = 0; k < motif.positions.size(); ++k) x[motif.positions[k]] = motif.coords[k];
    for (const auto& step : order) {
        const double polar = uniform(rng, 0.0, std::numbers::pi);
        const double azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        x[step.position] = sample_sphere_point(x[step.center], radius, polar, azimuth);
    }
    return x;
}

namespace {

Tensor flexible_row_mask(const Motif& motif, std::size_t length) {
    std::vector<double> m(length, 1.0);
    for (auto p : motif.positions) m.at(p) = 0.0;
    return Tensor({length, 1}, std::move(m));
}

void check_target(std::span<const Point3> target, std::size_t length) {
    if (target.size() != length) {
        throw DimensionError("target has " + std::to_string(target.size()) +
                             " coordinates, prediction has " + std::to_string(length));
    }
}

}  // namespace

Tensor backbone_loss(const Tensor& predicted, std::span<const Point3> target, const Motif& motif) {
    if (predicted.rank() != 2 || predicted.dim(1) != 3) {
        throw DimensionError("backbone_loss expects [L, 3], got " + ad::shape_str(predicted.shape()));
    }
    const std::size_t len = predicted.dim(0);
    check_target(target, len);
    motif.validate(len);
    const Tensor diff = predicted - points_to_tensor(target);
    return ad::sum(ad::square(diff) * flexible_row_mask(motif, len));
}

double backbone_loss(std::span<const Point3> predicted, std::span<const Point3> target,
                     const Motif& motif) {
    check_target(target, predicted.size());
    motif.validate(predicted.size());
    const auto is_motif = motif.mask(predicted.size());
    double total = 0.0;
    for (std::size_t j = 0; j < predicted.size(); ++j) {
        if (!is_motif[j]) total += (predicted[j] - target[j]).squaredNorm();
    }
    return total;
}

Tensor total_loss(const Tensor& backbone, const Tensor& sequence, double alpha, double beta) {
    return ad::mul_scalar(backbone, alpha) + ad::mul_scalar(sequence, beta);
}

JointOutput forward_from_init(std::span<const Token> corrupted, const Motif& motif,
                              const PointList& x0, const GeoProModel& model) {
    const std::size_t len = corrupted.size();
    if (x0.size() != len) {
        throw DimensionError("initial backbone has " + std::to_string(x0.size()) +
                             " points for a sequence of length " + std::to_string(len));
    }
    motif.validate(len);
    GraphState state;
    state.coords = points_to_tensor(x0);
    state.feats = encode_context(corrupted, model.encoder);
    if (model.config.edge_attrs == EdgeAttrKind::kSequenceSeparation) {
        state.edge_attrs = sequence_separation_attrs(len);
    }
    const GraphState out = egnn_forward(state, model.egnn);
    const Tensor selected = gsd_feature_select(out.feats, motif.positions,
                                               model.config.feature_select,
                                               model.decoder.mask_embed);
    return {x0, out.coords, out.feats, decode_logits(selected, model.decoder)};
}

JointOutput forward_joint(const ProteinRecord& record, const Motif& motif,
                          const GeoProModel& model, Rng& rng, double radius) {
    record.validate();
    const TokenSeq corrupted = corrupt_sequence(record.sequence, motif.positions);
    const PointList x0 = init_backbone_coords(motif, record.length(), radius, rng);
    return forward_from_init(corrupted, motif, x0, model);
}

LossTerms joint_losses(const JointOutput& out, const ProteinRecord& record, const Motif& motif,
                       double alpha, double beta) {
    LossTerms t;
    t.backbone = backbone_loss(out.coords, record.ca_coords, motif);
    t.sequence = sequence_loss(out.logits, record.sequence, motif.positions);
    t.total = total_loss(t.backbone, t.sequence, alpha, beta);
    return t;
}

namespace {

struct Snapshot {
    std::vector<std::vector<double>> values;

    static Snapshot take(const ParamList& params) {
        Snapshot s;
        for (const auto& p : params) {
            auto d = p.tensor.data();
            s.values.emplace_back(d.begin(), d.end());
        }
        return s;
    }

    void restore(ParamList& params) const {
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto d = params[i].tensor.mutable_data();
            std::copy(values[i].begin(), values[i].end(), d.begin());
        }
    }
};

}  // namespace

LossSummary evaluate_losses(const std::vector<Example>& examples, const GeoProModel& model,
                            const TrainingConfig& config, std::string_view stream) {
    if (examples.empty()) throw ContractError("no examples to evaluate");
    ad::NoGradScope no_grad;
    Rng rng = substream(config.seed, stream);
    LossSummary s;
    for (const auto& ex : examples) {
        const auto out = forward_joint(ex.record, ex.motif, model, rng, config.radius);
        const auto t = joint_losses(out, ex.record, ex.motif, config.alpha, config.beta);
        s.total += t.total.item();
        s.backbone += t.backbone.item();
        s.sequence += t.sequence.item();
    }
    const double n = static_cast<double>(examples.size());
    s.total /= n;
    s.backbone /= n;
    s.sequence /= n;
    return s;
}

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& valid_set,
                  const TrainingConfig& config, GeoProModel& model, const EpochCallback& on_epoch) {
    config.validate();
    if (config.model.hash() != model.config.hash()) {
        throw ConfigError("training config architecture does not match the model");
    }
    for (const auto& ex : train_set) {
        ex.record.validate();
        ex.motif.validate(ex.record.length());
    }
    TrainResult result;
    if (config.epochs == 0 || train_set.empty()) return result;

    const std::size_t batches_per_epoch =
        (train_set.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = config.epochs * batches_per_epoch;
    if (config.warmup_steps == 0 || config.warmup_steps >= total_steps) {
        throw ConfigError("warmup (" + std::to_string(config.warmup_steps) +
                          ") must be in [1, total steps = " + std::to_string(total_steps) + ")");
    }

    ParamList params = model.parameters();
    zero_grads(params);
    AdamState adam = AdamState::for_params(params, config.base_lr);
    Rng coords_rng = substream(config.seed, "coords");
    std::optional<double> best_valid;
    Snapshot best;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng = substream(config.seed, "shuffle", epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochStats stats;
        stats.epoch = epoch;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const double lr = lr_at_step(step + 1, config.warmup_steps, total_steps, config.base_lr);
            ad::Tape tape;
            ad::TapeScope scope(tape);
            Tensor batch_loss = Tensor::scalar(0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const Example& ex = train_set[order[k]];
                LossTerms terms;
                try {
                    const auto out = forward_joint(ex.record, ex.motif, model, coords_rng, config.radius);
                    terms = joint_losses(out, ex.record, ex.motif, config.alpha, config.beta);
                } catch (const NumericError& e) {
                    throw NumericError("step " + std::to_string(step + 1) + ", example '" +
                                       ex.record.id + "': " + e.what());
                }
                if (!std::isfinite(terms.total.item())) {
                    throw NumericError("non-finite loss at step " + std::to_string(step + 1) +
                                       ", example '" + ex.record.id + "'");
                }
                stats.train.total += terms.total.item();
                stats.train.backbone += terms.backbone.item();
                stats.train.sequence += terms.sequence.item();
                batch_loss = batch_loss + terms.total;
            }
            batch_loss = ad::mul_scalar(batch_loss, 1.0 / static_cast<double>(stop - start));
            tape.backward(batch_loss);
            adam_step(adam, params, lr);
            stats.lr = lr;
            ++step;
        }
        const double n = static_cast<double>(train_set.size());
        stats.train.total /= n;
        stats.train.backbone /= n;
        stats.train.sequence /= n;
        if (config.track_fixed_train_loss) {
            stats.train_fixed = evaluate_losses(train_set, model, config, "fixed-train");
        }
        if (!valid_set.empty()) {
            stats.valid_total = evaluate_losses(valid_set, model, config, "valid").total;
            if (!best_valid || *stats.valid_total < *best_valid) {
                best_valid = stats.valid_total;
                best = Snapshot::take(params);
                result.best_epoch = epoch;
            }
        }
        result.curve.push_back(stats);
        result.steps = step;
        if (on_epoch && !on_epoch(stats)) break;
    }
    if (best_valid) best.restore(params);
    return result;
}

namespace {

DesignCandidate design_one(const Motif& motif, const DesignOptions& options,
                           const GeoProModel& model, std::size_t index) {
    ad::NoGradScope no_grad;
    const std::uint64_t seed = options.seed + index;
    Rng rng(mix64(seed));
    TokenSeq corrupted(options.length, Vocab::kMask);
    for (std::size_t k = 0; k < motif.positions.size(); ++k) {
        corrupted[motif.positions[k]] = motif.residues[k];
    }
    const PointList x0 = init_backbone_coords(motif, options.length, options.radius, rng);
    const JointOutput out = forward_from_init(corrupted, motif, x0, model);

    DesignCandidate c;
    c.id = "cand_" + std::to_string(index);
    c.seed = seed;
    c.model_version = options.model_version;
    c.sequence = corrupted;
    c.token_prob.assign(options.length, 1.0);
    c.coords = tensor_to_points(out.coords);
    const auto logits = out.logits.data();
    const std::size_t width = Vocab::kNumAminoAcids;
    const auto is_motif = motif.mask(options.length);
    for (std::size_t j = 0; j < options.length; ++j) {
        if (is_motif[j]) continue;
        const auto row = logits.subspan(j * width, width);
        const Token t = sample_top_k(row, options.top_k, rng);
        const double peak = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - peak);
        c.sequence[j] = t;
        c.token_prob[j] = std::exp(row[t] - peak) / z;
    }
    if (options.pin_motif) {
        for (std::size_t k = 0; k < motif.positions.size(); ++k) {
            c.coords[motif.positions[k]] = motif.coords[k];
        }
    }
    return c;
}

}  // namespace

std::vector<DesignCandidate> design(const Motif& motif, const DesignOptions& options,
                                    const GeoProModel& model) {
    if (options.length == 0) throw ContractError("design length must be positive");
    if (options.length > model.config.max_len) {
        throw ContractError("design length " + std::to_string(options.length) +
                            " exceeds max_len " + std::to_string(model.config.max_len));
    }
    if (options.top_k < 1 || options.top_k > static_cast<int>(Vocab::kNumAminoAcids)) {
        throw ContractError("top_k must be in [1, 20]");
    }
    motif.validate(options.length);
    std::vector<DesignCandidate> out(options.num_candidates);
    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, out.size()));
    if (threads == 1) {
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = design_one(motif, options, model, c);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t c = t; c < out.size(); c += threads) {
                    out[c] = design_one(motif, options, model, c);
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

double bend_angle_degrees(std::span<const Point3> trace, std::size_t i) {
    if (i == 0 || i + 1 >= trace.size()) {
        throw ContractError("bend angle needs an interior position, got " + std::to_string(i));
    }
    const Point3 a = (trace[i - 1] - trace[i]).normalized();
    const Point3 b = (trace[i + 1] - trace[i]).normalized();
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

Token curvature_residue(double bend_degrees) {
    const double bucket = std::floor((bend_degrees - 80.0) / 3.5);
    return static_cast<Token>(std::clamp(bucket, 0.0, 19.0));
}

namespace {

constexpr double kMinBendDeg = 82.0;
constexpr double kMaxBendDeg = 148.0;
constexpr double kMinContact = 4.0;

std::optional<PointList> grow_chain(std::size_t length, Rng& rng) {
    PointList x;
    x.push_back(Point3::Zero());
    Point3 dir(normal(rng), normal(rng), normal(rng));
    dir.normalize();
    x.push_back(dir * uniform(rng, 3.75, 3.85));
    while (x.size() < length) {
        const Point3 u = (x.back() - x[x.size() - 2]).normalized();
        Point3 helper = std::abs(u.x()) < 0.9 ? Point3::UnitX() : Point3::UnitY();
        const Point3 n1 = u.cross(helper).normalized();
        const Point3 n2 = u.cross(n1);
        bool placed = false;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            const double bend = uniform(rng, kMinBendDeg, kMaxBendDeg) * std::numbers::pi / 180.0;
            const double turn = std::numbers::pi - bend;
            const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            const Point3 step_dir = std::cos(turn) * u +
                                    std::sin(turn) * (std::cos(phi) * n1 + std::sin(phi) * n2);
            const Point3 next = x.back() + step_dir * uniform(rng, 3.75, 3.85);
            bool clash = false;
            for (std::size_t k = 0; k + 1 < x.size() && !clash; ++k) {
                clash = (x[k] - next).norm() < kMinContact;
            }
            if (!clash) {
                x.push_back(next);
                placed = true;
            }
        }
        if (!placed) return std::nullopt;
    }
    return x;
}

}  // namespace

std::vector<Example> generate_synthetic_dataset(const SyntheticOptions& options) {
    if (options.length < 5) throw ContractError("synthetic chains need length >= 5");
    if (!(options.motif_frac > 0.0) || !(options.motif_frac < 1.0)) {
        throw ContractError("motif_frac must be in (0, 1)");
    }
    std::vector<Example> out;
    for (std::size_t c = 0; c < options.count; ++c) {
        Rng rng = substream(options.seed, "synthetic", c);
        std::optional<PointList> chain;
        for (int restart = 0; restart < 200 && !chain; ++restart) chain = grow_chain(options.length, rng);
        if (!chain) throw GenerationError("could not grow a self-avoiding chain of length " +
                                          std::to_string(options.length));
        const std::size_t len = options.length;
        std::vector<double> bend(len);
        for (std::size_t i = 1; i + 1 < len; ++i) bend[i] = bend_angle_degrees(*chain, i);
        bend[0] = bend[1];
        bend[len - 1] = bend[len - 2];

        ProteinRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "synth_%04zu", c);
        rec.id = id;
        rec.ca_coords = *chain;
        for (double b : bend) rec.sequence.push_back(curvature_residue(b));

        const auto count = static_cast<std::size_t>(
            std::ceil(options.motif_frac * static_cast<double>(len) - 1e-12));
        std::vector<std::size_t> idx(len);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return bend[a] < bend[b]; });
        idx.resize(std::min(count, len));
        std::sort(idx.begin(), idx.end());
        Motif motif = Motif::from_record(rec, idx);
        out.push_back({std::move(rec), std::move(motif)});
    }
    return out;
}

double masked_recovery(const std::vector<Example>& examples, const GeoProModel& model,
                       std::uint64_t seed, double radius) {
    ad::NoGradScope no_grad;
    Rng rng = substream(seed, "recovery");
    std::size_t hits = 0, scored = 0;
    for (const auto& ex : examples) {
        const auto out = forward_joint(ex.record, ex.motif, model, rng, radius);
        const auto logits = out.logits.data();
        const auto is_motif = ex.motif.mask(ex.record.length());
        for (std::size_t j = 0; j < ex.record.length(); ++j) {
            if (is_motif[j]) continue;
            const auto row = logits.subspan(j * Vocab::kNumAminoAcids, Vocab::kNumAminoAcids);
            const auto best = std::max_element(row.begin(), row.end()) - row.begin();
            hits += static_cast<std::size_t>(best) == ex.record.sequence[j];
            ++scored;
        }
    }
    if (scored == 0) throw ContractError("no masked positions to score");
    return static_cast<double>(hits) / static_cast<double>(scored);
}

}  // namespace geopro
