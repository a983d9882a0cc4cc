#include "geopro/sequence_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geopro/errors.hpp"

namespace geopro {

using ad::Tensor;

bool Vocab::is_amino_acid(char letter) {
    return kAminoAcids.find(letter) != std::string_view::npos;
}

Token Vocab::index(char letter) {
    const auto pos = kAminoAcids.find(letter);
    if (pos == std::string_view::npos) {
        throw ContractError(std::string("not an amino-acid letter: '") + letter + "'");
    }
    return static_cast<Token>(pos);
}

char Vocab::letter(Token token) {
    if (token < kNumAminoAcids) return kAminoAcids[token];
    if (token == kMask) return '#';
    if (token == kPad) return '_';
    throw ContractError("token index out of range: " + std::to_string(token));
}

TokenSeq Vocab::encode(std::string_view residues) {
    TokenSeq out;
    out.reserve(residues.size());
    for (char c : residues) out.push_back(index(c));
    return out;
}

std::string Vocab::decode(std::span<const Token> tokens) {
    std::string out;
    out.reserve(tokens.size());
    for (Token t : tokens) out.push_back(letter(t));
    return out;
}

FeatureSelect parse_feature_select(std::string_view name) {
    if (name == "as_printed") return FeatureSelect::kAsPrinted;
    if (name == "inverted") return FeatureSelect::kInverted;
    throw ConfigError("feature_select must be as_printed or inverted, got '" + std::string(name) + "'");
}

std::string_view to_string(FeatureSelect mode) {
    return mode == FeatureSelect::kAsPrinted ? "as_printed" : "inverted";
}

TransformerBlock TransformerBlock::init(std::size_t width, std::size_t num_heads,
                                        std::size_t ff_width, Rng& rng) {
    if (num_heads == 0 || width % num_heads != 0) {
        throw ConfigError("width " + std::to_string(width) + " not divisible by " +
                          std::to_string(num_heads) + " heads");
    }
    const std::size_t head_width = width / num_heads;
    TransformerBlock b;
    b.attn_norm = LayerNorm::init(width);
    for (std::size_t h = 0; h < num_heads; ++h) {
        b.heads.push_back({Linear::init(width, head_width, rng), Linear::init(width, head_width, rng),
                           Linear::init(width, head_width, rng)});
    }
    b.attn_out = Linear::init(width, width, rng);
    b.ff_norm = LayerNorm::init(width);
    b.ff = Mlp2::init(width, ff_width, width, rng);
    return b;
}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor* key_bias) const {
    const Tensor normed = attn_norm(x);
    std::vector<Tensor> outs;
    outs.reserve(heads.size());
    for (const auto& head : heads) {
        const Tensor q = head.query(normed);
        const Tensor k = head.key(normed);
        const Tensor v = head.value(normed);
        const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
        Tensor scores = ad::mul_scalar(ad::matmul(q, ad::transpose(k)), scale);
        if (key_bias) scores = scores + *key_bias;
        outs.push_back(ad::matmul(ad::softmax(scores), v));
    }
    const Tensor attended = x + attn_out(ad::concat(outs, 1));
    return attended + ff(ff_norm(attended));
}

void TransformerBlock::collect(ParamList& out, const std::string& prefix) const {
    attn_norm.collect(out, prefix + ".attn_norm");
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const std::string hp = prefix + ".head" + std::to_string(h);
        heads[h].query.collect(out, hp + ".query");
        heads[h].key.collect(out, hp + ".key");
        heads[h].value.collect(out, hp + ".value");
    }
    attn_out.collect(out, prefix + ".attn_out");
    ff_norm.collect(out, prefix + ".ff_norm");
    ff.collect(out, prefix + ".ff");
}

ContextEncoder ContextEncoder::init(const SequenceModelShape& shape, Rng& rng) {
    ContextEncoder e;
    e.token_embed = uniform_param({Vocab::kSize, shape.width}, 1.0, rng);
    e.pos_embed = uniform_param({shape.max_len, shape.width}, 1.0, rng);
    for (std::size_t b = 0; b < shape.encoder_blocks; ++b)
        e.blocks.push_back(TransformerBlock::init(shape.width, shape.num_heads, shape.ff_width, rng));
    e.final_norm = LayerNorm::init(shape.width);
    return e;
}

void ContextEncoder::collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".token_embed", token_embed});
    out.push_back({prefix + ".pos_embed", pos_embed});
    for (std::size_t b = 0; b < blocks.size(); ++b)
        blocks[b].collect(out, prefix + ".block" + std::to_string(b));
    final_norm.collect(out, prefix + ".final_norm");
}

GsdDecoder GsdDecoder::init(const SequenceModelShape& shape, Rng& rng) {
    GsdDecoder d;
    d.input_proj = Linear::init(shape.width, shape.width, rng);
    d.pos_embed = uniform_param({shape.max_len, shape.width}, 1.0, rng);
    d.mask_embed = uniform_param({1, shape.width}, 1.0, rng);
    for (std::size_t b = 0; b < shape.decoder_blocks; ++b)
        d.blocks.push_back(TransformerBlock::init(shape.width, shape.num_heads, shape.ff_width, rng));
    d.final_norm = LayerNorm::init(shape.width);
    d.head = Linear::init(shape.width, Vocab::kNumAminoAcids, rng);
    return d;
}

void GsdDecoder::collect(ParamList& out, const std::string& prefix) const {
    input_proj.collect(out, prefix + ".input_proj");
    out.push_back({prefix + ".pos_embed", pos_embed});
    out.push_back({prefix + ".mask_embed", mask_embed});
    for (std::size_t b = 0; b < blocks.size(); ++b)
        blocks[b].collect(out, prefix + ".block" + std::to_string(b));
    final_norm.collect(out, prefix + ".final_norm");
    head.collect(out, prefix + ".head");
}

namespace {

void check_positions(std::span<const std::size_t> positions, std::size_t length) {
    for (auto p : positions) {
        if (p >= length) {
            throw ContractError("motif position " + std::to_string(p) +
                                " out of range for length " + std::to_string(length));
        }
    }
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

}  // namespace

TokenSeq corrupt_sequence(std::span<const Token> seq, std::span<const std::size_t> motif_positions) {
    check_positions(motif_positions, seq.size());
    TokenSeq out(seq.size(), Vocab::kMask);
    for (auto p : motif_positions) out[p] = seq[p];
    return out;
}

Tensor encode_context(std::span<const Token> corrupted, const ContextEncoder& encoder) {
    const std::size_t len = corrupted.size();
    if (len > encoder.max_len()) {
        throw ContractError("sequence length " + std::to_string(len) + " exceeds encoder max_len " +
                            std::to_string(encoder.max_len()));
    }
    std::vector<std::size_t> ids(corrupted.begin(), corrupted.end());
    for (auto id : ids)
        if (id >= Vocab::kSize) throw ContractError("token index out of range");
    Tensor x = ad::gather_rows(encoder.token_embed, ids) +
               ad::gather_rows(encoder.pos_embed, iota(len));

    Tensor key_bias;
    bool has_pad = std::find(corrupted.begin(), corrupted.end(), Vocab::kPad) != corrupted.end();
    if (has_pad) {
        std::vector<double> bias(len, 0.0);
        for (std::size_t i = 0; i < len; ++i)
            if (corrupted[i] == Vocab::kPad) bias[i] = -1e30;
        key_bias = Tensor({1, len}, std::move(bias));
    }
    for (const auto& block : encoder.blocks) x = block(x, has_pad ? &key_bias : nullptr);
    return encoder.final_norm(x);
}

Tensor gsd_feature_select(const Tensor& features, std::span<const std::size_t> motif_positions,
                          FeatureSelect mode, const Tensor& mask_embed) {
    const std::size_t len = features.dim(0);
    check_positions(motif_positions, len);
    if (mask_embed.rank() != 2 || mask_embed.dim(0) != 1 || mask_embed.dim(1) != features.dim(1)) {
        throw DimensionError("mask embedding " + ad::shape_str(mask_embed.shape()) +
                             " does not match features " + ad::shape_str(features.shape()));
    }
    const double motif_keep = mode == FeatureSelect::kAsPrinted ? 1.0 : 0.0;
    std::vector<double> keep(len, 1.0 - motif_keep);
    for (auto p : motif_positions) keep[p] = motif_keep;
    std::vector<double> replace(len);
    for (std::size_t i = 0; i < len; ++i) replace[i] = 1.0 - keep[i];
    const Tensor keep_col({len, 1}, std::move(keep));
    const Tensor replace_col({len, 1}, std::move(replace));
    return keep_col * features + replace_col * mask_embed;
}

Tensor decode_logits(const Tensor& selected, const GsdDecoder& decoder) {
    const std::size_t len = selected.dim(0);
    if (len > decoder.pos_embed.dim(0)) {
        throw ContractError("sequence length " + std::to_string(len) + " exceeds decoder max_len");
    }
    Tensor x = decoder.input_proj(selected) + ad::gather_rows(decoder.pos_embed, iota(len));
    for (const auto& block : decoder.blocks) x = block(x);
    return decoder.head(decoder.final_norm(x));
}

Tensor sequence_loss(const Tensor& logits, std::span<const Token> target,
                     std::span<const std::size_t> motif_positions) {
    const std::size_t len = target.size();
    if (logits.rank() != 2 || logits.dim(0) != len || logits.dim(1) != Vocab::kNumAminoAcids) {
        throw DimensionError("logits " + ad::shape_str(logits.shape()) + " vs target length " +
                             std::to_string(len));
    }
    check_positions(motif_positions, len);
    std::vector<bool> is_motif(len, false);
    for (auto p : motif_positions) is_motif[p] = true;
    std::vector<double> pick(len * Vocab::kNumAminoAcids, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
        if (is_motif[j]) continue;
        if (target[j] >= Vocab::kNumAminoAcids) {
            throw ContractError("target has a non amino-acid token at scored position " +
                                std::to_string(j));
        }
        pick[j * Vocab::kNumAminoAcids + target[j]] = 1.0;
    }
    const Tensor mask({len, Vocab::kNumAminoAcids}, std::move(pick));
    return ad::mul_scalar(ad::sum(ad::log_softmax(logits) * mask), -1.0);
}

namespace {

std::vector<std::size_t> top_k_indices(std::span<const double> row, int k) {
    if (row.size() != Vocab::kNumAminoAcids) {
        throw DimensionError("top-k expects " + std::to_string(Vocab::kNumAminoAcids) +
                             " logits, got " + std::to_string(row.size()));
    }
    if (k < 1 || k > static_cast<int>(row.size())) {
        throw ContractError("top-k needs 1 <= k <= 20, got " + std::to_string(k));
    }
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    order.resize(static_cast<std::size_t>(k));
    return order;
}

}  // namespace

std::vector<double> top_k_distribution(std::span<const double> logits_row, int k) {
    const auto top = top_k_indices(logits_row, k);
    const double mx = logits_row[top.front()];
    std::vector<double> probs(logits_row.size(), 0.0);
    double z = 0.0;
    for (auto i : top) z += (probs[i] = std::exp(logits_row[i] - mx));
    for (auto i : top) probs[i] /= z;
    return probs;
}

Token sample_top_k(std::span<const double> logits_row, int k, Rng& rng) {
    const auto top = top_k_indices(logits_row, k);
    if (k == 1) return static_cast<Token>(top.front());
    const double mx = logits_row[top.front()];
    std::vector<double> weights;
    for (auto i : top) weights.push_back(std::exp(logits_row[i] - mx));
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = uniform(rng, 0.0, total);
    for (std::size_t r = 0; r < top.size(); ++r) {
        if (u < weights[r]) return static_cast<Token>(top[r]);
        u -= weights[r];
    }
    return static_cast<Token>(top.back());
}

}  // namespace geopro
