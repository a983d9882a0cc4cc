/**
 * Input preparation: PDB C-alpha extraction, (aligned) FASTA, conservation
 * motifs from an alignment, length filtering and seeded train/valid/test split.
 */
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "geopro/geometry.hpp"
#include "geopro/sequence_model.hpp"

namespace geopro {

struct ProteinRecord {
    std::string id;
    TokenSeq sequence;
    PointList ca_coords;

    std::size_t length() const { return sequence.size(); }
    /// Throws DataError when lengths differ, the chain is empty or tokens are not amino acids.
    void validate() const;
    /// Human-readable notes for consecutive C-alpha distances outside [2.8, 4.5] A.
    std::vector<std::string> spacing_warnings() const;
};

struct PdbParseResult {
    ProteinRecord record;
    std::vector<std::string> warnings;
    /// Residue numbers skipped because their residue name is not one of the 20 amino acids.
    std::vector<int> skipped_residues;
};

/// CA atoms of `chain` from fixed-column ATOM records. altLoc blank or 'A' only;
/// residues ordered by (resSeq, iCode). Throws DataError if the chain has no CA atoms.
PdbParseResult parse_pdb_ca(std::string_view text, char chain, std::string id = "");

/// CA-only ATOM lines (occupancy 1.00, B-factor 0.00) plus END.
std::string write_pdb_ca(const ProteinRecord& record, char chain = 'A');

/// Three-letter residue name to one-letter code; '\0' when unknown.
char residue_one_letter(std::string_view three);
std::string_view residue_three_letter(char one);

struct FastaEntry {
    std::string id;
    std::string sequence;
};

/// Multi-line FASTA. With `aligned` the gap character '-' is also accepted.
/// Throws ParseError (with line number) on characters outside the alphabet.
std::vector<FastaEntry> parse_fasta(std::string_view text, bool aligned = false);
std::string write_fasta(const std::vector<FastaEntry>& entries, std::size_t line_width = 60);

struct Alignment {
    std::vector<FastaEntry> rows;
    std::string reference_id;

    static Alignment from_fasta(std::string_view text, std::string reference_id = "");
    const FastaEntry& reference() const;
    void validate() const;
};

/// Reference-sequence positions whose column's modal residue frequency
/// (gaps counted in the denominator) is >= lambda and where the reference is not a gap.
std::vector<std::size_t> extract_motif(const Alignment& alignment, double lambda);

struct SplitRatios {
    std::size_t train = 8, valid = 1, test = 1;
};

struct DatasetSplit {
    std::vector<ProteinRecord> train, valid, test;
};

/// Drops records with length <= min_len, shuffles with `seed` and partitions
/// floor(n*valid/total) and floor(n*test/total); the remainder is train.
DatasetSplit filter_and_split(std::vector<ProteinRecord> records, std::size_t min_len,
                              const SplitRatios& ratios, std::uint64_t seed);

/// One id per line, '#' starts a comment. Ids are upper-cased.
std::set<std::string> parse_allow_list(std::string_view text);

/// CSV "id,split".
std::string write_split_manifest(const DatasetSplit& split);
struct ManifestRow {
    std::string id;
    std::string split;
};
std::vector<ManifestRow> parse_split_manifest(std::string_view text);

/// Motif index file: "id<TAB>i,j,k" per line, '#' comments.
struct MotifEntry {
    std::string id;
    std::vector<std::size_t> positions;
};
std::vector<MotifEntry> parse_motif_file(std::string_view text);
std::string write_motif_file(const std::vector<MotifEntry>& entries);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace geopro
