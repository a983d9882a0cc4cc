/**
 * The joint backbone/sequence model: motif-anchored coordinate
 * initialization, EGNN backbone encoder, geometry-guided decoding, the two
 * losses and their weighted sum, training, and candidate design.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geopro/data.hpp"
#include "geopro/egnn.hpp"
#include "geopro/geometry.hpp"
#include "geopro/optim.hpp"
#include "geopro/sequence_model.hpp"

namespace geopro {

inline constexpr double kDefaultRadius = 3.75;

/// Fixed backbone+sequence segments, indexed by residue position.
struct Motif {
    std::vector<std::size_t> positions;  // strictly increasing
    TokenSeq residues;
    PointList coords;

    static Motif from_record(const ProteinRecord& record, std::vector<std::size_t> positions);
    void validate(std::size_t length) const;
    std::vector<bool> mask(std::size_t length) const;
    Motif transformed(const RigidTransform& transform) const;
};

enum class EdgeAttrKind { kNone, kSequenceSeparation };

/// Architecture. Anything here changes parameter shapes or forward semantics
/// and therefore participates in the checkpoint hash.
struct ModelConfig {
    std::size_t width = 320;
    std::size_t egnn_depth = 2;
    std::size_t num_heads = 4;
    std::size_t ff_width = 640;
    std::size_t max_len = 512;
    std::size_t encoder_blocks = 2;
    std::size_t decoder_blocks = 2;
    EdgeAttrKind edge_attrs = EdgeAttrKind::kNone;
    FeatureSelect feature_select = FeatureSelect::kAsPrinted;
    double distance_scale = 10.0;  // Angstrom

    std::string canonical() const;
    std::uint32_t hash() const;
    EgclShape egcl_shape() const;
    SequenceModelShape sequence_shape() const;
};

struct TrainingConfig {
    ModelConfig model;
    double alpha = 0.1;
    double beta = 1.0;
    std::size_t batch_size = 4;
    double base_lr = 1e-7;
    std::size_t warmup_steps = 4000;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    int top_k = 3;
    double radius = kDefaultRadius;
    /// Re-evaluate the training set after every epoch on fixed x0 draws.
    bool track_fixed_train_loss = false;

    void validate() const;
};

/// Presets: "beta-lactamase" (alpha 0.1, beta 1.0) and "myoglobin" (alpha 0.01, beta 1.0).
void apply_profile(TrainingConfig& config, const std::string& profile);

struct GeoProModel {
    ModelConfig config;
    ContextEncoder encoder;
    EgnnModel egnn;
    GsdDecoder decoder;

    static GeoProModel init(const ModelConfig& config, std::uint64_t seed);
    ParamList parameters() const;
};

/// Motif positions keep z_b; every other position sits at distance `radius`
/// from an already placed sequence neighbour, in waves outward from the motif.
/// Ties between a left and a right anchor go to the left neighbour.
PointList init_backbone_coords(const Motif& motif, std::size_t length, double radius, Rng& rng);

/// Index of the neighbour each non-motif position is chained from, in placement
/// order. Motif positions are absent.
struct Placement {
    std::size_t position;
    std::size_t center;
};
std::vector<Placement> placement_order(const Motif& motif, std::size_t length);

/// Sum over non-motif positions of ||x_j - x_hat_j||^2.
ad::Tensor backbone_loss(const ad::Tensor& predicted, std::span<const Point3> target,
                         const Motif& motif);
double backbone_loss(std::span<const Point3> predicted, std::span<const Point3> target,
                     const Motif& motif);

ad::Tensor total_loss(const ad::Tensor& backbone, const ad::Tensor& sequence, double alpha,
                      double beta);

struct JointOutput {
    PointList initial_coords;
    ad::Tensor coords;  // [L, 3], x_hat
    ad::Tensor feats;   // [L, d], h_hat
    ad::Tensor logits;  // [L, 20]
};

/// Forward pass from an explicit initial backbone `x0`.
JointOutput forward_from_init(std::span<const Token> corrupted, const Motif& motif,
                              const PointList& x0, const GeoProModel& model);

/// Corrupts the record to its motif, samples x0 and runs the model.
JointOutput forward_joint(const ProteinRecord& record, const Motif& motif,
                          const GeoProModel& model, Rng& rng, double radius = kDefaultRadius);

struct LossTerms {
    ad::Tensor backbone;
    ad::Tensor sequence;
    ad::Tensor total;
};

LossTerms joint_losses(const JointOutput& out, const ProteinRecord& record, const Motif& motif,
                       double alpha, double beta);

struct Example {
    ProteinRecord record;
    Motif motif;
};

/// Mean losses over a set of examples.
struct LossSummary {
    double total = 0, backbone = 0, sequence = 0;
};

/// No-grad losses with x0 drawn from the stream `substream(seed, stream)`, so
/// repeated calls with the same arguments see the same initial backbones.
LossSummary evaluate_losses(const std::vector<Example>& examples, const GeoProModel& model,
                            const TrainingConfig& config, std::string_view stream);

struct EpochStats {
    std::size_t epoch = 0;
    LossSummary train;  // running means over the epoch's steps
    std::optional<LossSummary> train_fixed;  // fixed-draw re-evaluation, if requested
    std::optional<double> valid_total;
    double lr = 0;
};

struct TrainResult {
    std::vector<EpochStats> curve;
    std::size_t steps = 0;
    std::optional<std::size_t> best_epoch;
};

/// Returning false from the callback stops training after that epoch.
using EpochCallback = std::function<bool(const EpochStats&)>;

/// Mini-batch Adam on alpha*L_b + beta*L_s with the warm-up/decay schedule.
/// When a validation set is given the best-validation parameters are restored at the end.
TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& valid_set,
                  const TrainingConfig& config, GeoProModel& model,
                  const EpochCallback& on_epoch = {});

struct DesignOptions {
    std::size_t length = 0;
    std::size_t num_candidates = 1;
    int top_k = 3;
    double radius = kDefaultRadius;
    std::uint64_t seed = 0;
    bool pin_motif = true;
    std::size_t threads = 1;
    std::string model_version;
};

struct DesignCandidate {
    std::string id;
    TokenSeq sequence;
    PointList coords;
    std::vector<double> token_prob;  // probability of the chosen token; 1 at motif positions
    std::uint64_t seed = 0;
    std::string model_version;
};

/// Candidate c uses the rng stream seeded with seed + c.
std::vector<DesignCandidate> design(const Motif& motif, const DesignOptions& options,
                                    const GeoProModel& model);

struct SyntheticOptions {
    std::size_t count = 8;
    std::size_t length = 30;
    double motif_frac = 0.3;
    std::uint64_t seed = 0;
};

/// Bend angle at interior position i (degrees) of a C-alpha trace.
double bend_angle_degrees(std::span<const Point3> trace, std::size_t i);
/// Residue label for a bend angle: 20 buckets of 3.5 degrees from 80 degrees, clamped.
Token curvature_residue(double bend_degrees);

/// Self-avoiding chains, consecutive spacing 3.8 +- 0.05 A, residues from the
/// bend-angle bucket (endpoints use their neighbour's angle), motif = the
/// ceil(frac * L) sharpest bends (ties to lower index).
std::vector<Example> generate_synthetic_dataset(const SyntheticOptions& options);

/// Masked-position argmax accuracy of the model on `examples` (one fresh x0 each).
double masked_recovery(const std::vector<Example>& examples, const GeoProModel& model,
                       std::uint64_t seed, double radius = kDefaultRadius);

}  // namespace geopro
