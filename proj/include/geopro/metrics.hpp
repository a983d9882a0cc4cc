/**
 * Evaluation of designed candidates: amino-acid recovery, RMSD (superposed
 * and motif-anchored), TM-score, optional external pLDDT, novelty against a
 * sequence corpus, and report formatting.
 */
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geopro/data.hpp"
#include "geopro/tensor.hpp"

namespace geopro {

/// Fraction of matches over `scored`. An empty scored set gives 1.0 and sets *empty_warning.
double aar(std::span<const Token> designed, std::span<const Token> target,
           std::span<const std::size_t> scored, bool* empty_warning = nullptr);
double aar(std::span<const Token> designed, std::span<const Token> target);

struct CandidateInput {
    std::string id;
    std::string target_id;
    TokenSeq sequence;
    PointList coords;
};

struct EvalRow {
    std::string id;
    std::string target_id;
    double aar_all = 0;
    double aar_nonmotif = 0;
    double rmsd_superposed = 0;
    double rmsd_anchored = 0;
    double tm_score = 0;
    std::optional<double> plddt;
};

struct ColumnSummary {
    double mean = 0;
    double median = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;  // sorted by id
    std::map<std::string, ColumnSummary> summary;
    std::vector<std::string> warnings;

    std::string to_csv() const;
    std::string to_table() const;
};

/// Mean and median per column; pLDDT only over rows that have it.
std::map<std::string, ColumnSummary> summarize(const std::vector<EvalRow>& rows);

/// Throws DataError for unknown target ids or length mismatches.
EvalReport evaluate_candidates(std::span<const CandidateInput> candidates,
                               const std::map<std::string, ProteinRecord>& targets,
                               const std::map<std::string, std::vector<std::size_t>>& motifs,
                               const std::optional<std::map<std::string, double>>& plddt = {});

/// CSV with header "id,plddt". Throws ParseError with the line number.
std::map<std::string, double> parse_plddt_csv(std::string_view text);

struct NoveltyResult {
    bool exact_match = false;
    double max_identity = 0;
    std::size_t best_index = 0;  // corpus entry with the highest identity
    long best_offset = 0;        // corpus position aligned to designed position 0
};

/// Ungapped identity: matches at the best offset divided by the shorter length.
NoveltyResult novelty_check(std::span<const Token> designed, std::span<const TokenSeq> corpus);

/// CSV "id,pos,dim0..dimD-1" of the rows of `feats` ([L, D]).
std::string embeddings_csv(const std::string& id, const ad::Tensor& feats, bool header = true);

}  // namespace geopro
