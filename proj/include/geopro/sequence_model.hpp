/**
 * Sequence side of the model: the contextual encoder that turns a corrupted
 * sequence into per-residue features, and the geometry-guided decoder that
 * predicts amino acids from EGNN-revised features.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geopro/layers.hpp"
#include "geopro/rng.hpp"

namespace geopro {

using Token = std::uint8_t;
using TokenSeq = std::vector<Token>;

/// 20 amino acids followed by MASK and PAD.
struct Vocab {
    static constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";
    static constexpr std::size_t kNumAminoAcids = 20;
    static constexpr std::size_t kSize = 22;
    static constexpr Token kMask = 20;
    static constexpr Token kPad = 21;

    static bool is_amino_acid(char letter);
    static Token index(char letter);  // throws ContractError for non amino acids
    static char letter(Token token);  // '#' for MASK, '_' for PAD
    static TokenSeq encode(std::string_view residues);
    static std::string decode(std::span<const Token> tokens);
};

enum class FeatureSelect { kAsPrinted, kInverted };

FeatureSelect parse_feature_select(std::string_view name);
std::string_view to_string(FeatureSelect mode);

struct AttentionHead {
    Linear query, key, value;
};

/// Pre-norm transformer block: x + MHA(LN(x)), then x + FF(LN(x)).
struct TransformerBlock {
    LayerNorm attn_norm;
    std::vector<AttentionHead> heads;
    Linear attn_out;
    LayerNorm ff_norm;
    Mlp2 ff;

    static TransformerBlock init(std::size_t width, std::size_t num_heads, std::size_t ff_width,
                                 Rng& rng);
    /// `key_bias` is an optional [1, L] additive attention bias (PAD keys get a large negative).
    ad::Tensor operator()(const ad::Tensor& x, const ad::Tensor* key_bias = nullptr) const;
    void collect(ParamList& out, const std::string& prefix) const;
};

struct SequenceModelShape {
    std::size_t width = 320;
    std::size_t num_heads = 4;
    std::size_t ff_width = 640;
    std::size_t max_len = 512;
    std::size_t encoder_blocks = 2;
    std::size_t decoder_blocks = 2;
};

struct ContextEncoder {
    ad::Tensor token_embed;  // [22, d]
    ad::Tensor pos_embed;    // [max_len, d]
    std::vector<TransformerBlock> blocks;
    LayerNorm final_norm;

    static ContextEncoder init(const SequenceModelShape& shape, Rng& rng);
    std::size_t width() const { return token_embed.dim(1); }
    std::size_t max_len() const { return pos_embed.dim(0); }
    void collect(ParamList& out, const std::string& prefix) const;
};

struct GsdDecoder {
    Linear input_proj;
    ad::Tensor pos_embed;   // [max_len, d]
    ad::Tensor mask_embed;  // [1, d], Emb[mask]
    std::vector<TransformerBlock> blocks;
    LayerNorm final_norm;
    Linear head;  // d -> 20

    static GsdDecoder init(const SequenceModelShape& shape, Rng& rng);
    std::size_t width() const { return mask_embed.dim(1); }
    void collect(ParamList& out, const std::string& prefix) const;
};

/// Motif positions keep their residue, everything else becomes MASK.
TokenSeq corrupt_sequence(std::span<const Token> seq, std::span<const std::size_t> motif_positions);

/// [L, d] contextual features; PAD positions are excluded as attention keys.
ad::Tensor encode_context(std::span<const Token> corrupted, const ContextEncoder& encoder);

/// As printed: motif rows keep h, other rows become Emb[mask]. Inverted: the complement.
ad::Tensor gsd_feature_select(const ad::Tensor& features,
                              std::span<const std::size_t> motif_positions, FeatureSelect mode,
                              const ad::Tensor& mask_embed);

/// [L, 20] unnormalized amino-acid scores.
ad::Tensor decode_logits(const ad::Tensor& selected, const GsdDecoder& decoder);

/// Summed negative log-likelihood over non-motif positions.
ad::Tensor sequence_loss(const ad::Tensor& logits, std::span<const Token> target,
                         std::span<const std::size_t> motif_positions);

/// Samples among the k highest logits (ties to the lower index) after renormalizing.
Token sample_top_k(std::span<const double> logits_row, int k, Rng& rng);

/// Renormalized probabilities of the top-k classes, zeros elsewhere.
std::vector<double> top_k_distribution(std::span<const double> logits_row, int k);

}  // namespace geopro
