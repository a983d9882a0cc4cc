#include "geopro/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "geopro/errors.hpp"
#include "geopro/rng.hpp"

namespace geopro {

namespace {

constexpr std::array<std::pair<std::string_view, char>, 20> kResidueNames{{
    {"ALA", 'A'}, {"CYS", 'C'}, {"ASP", 'D'}, {"GLU", 'E'}, {"PHE", 'F'},
    {"GLY", 'G'}, {"HIS", 'H'}, {"ILE", 'I'}, {"LYS", 'K'}, {"LEU", 'L'},
    {"MET", 'M'}, {"ASN", 'N'}, {"PRO", 'P'}, {"GLN", 'Q'}, {"ARG", 'R'},
    {"SER", 'S'}, {"THR", 'T'}, {"VAL", 'V'}, {"TRP", 'W'}, {"TYR", 'Y'},
}};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (end == text.size()) break;
        start = end + 1;
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

double parse_column_double(std::string_view field, std::size_t line_no) {
    const std::string s(trim(field));
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw ParseError("bad coordinate field '" + s + "'", line_no);
    }
    return v;
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

void ProteinRecord::validate() const {
    if (sequence.empty()) throw DataError("record '" + id + "' is empty");
    if (sequence.size() != ca_coords.size()) {
        throw DataError("record '" + id + "' has " + std::to_string(sequence.size()) +
                        " residues but " + std::to_string(ca_coords.size()) + " coordinates");
    }
    for (Token t : sequence) {
        if (t >= Vocab::kNumAminoAcids) throw DataError("record '" + id + "' contains MASK/PAD tokens");
    }
}

std::vector<std::string> ProteinRecord::spacing_warnings() const {
    std::vector<std::string> out;
    for (std::size_t i = 1; i < ca_coords.size(); ++i) {
        const double d = (ca_coords[i] - ca_coords[i - 1]).norm();
        if (d < 2.8 || d > 4.5) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%s: CA %zu-%zu distance %.3f A outside [2.8, 4.5]",
                          id.c_str(), i - 1, i, d);
            out.emplace_back(buf);
        }
    }
    return out;
}

char residue_one_letter(std::string_view three) {
    for (const auto& [name, letter] : kResidueNames)
        if (name == three) return letter;
    return '\0';
}

std::string_view residue_three_letter(char one) {
    for (const auto& [name, letter] : kResidueNames)
        if (letter == one) return name;
    throw ContractError(std::string("no residue name for '") + one + "'");
}

PdbParseResult parse_pdb_ca(std::string_view text, char chain, std::string id) {
    struct Atom {
        char residue;
        Point3 coord;
    };
    std::map<std::pair<int, char>, Atom> residues;
    std::set<std::pair<int, char>> skipped;
    PdbParseResult result;

    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string_view line = lines[n];
        if (line.rfind("ENDMDL", 0) == 0) break;
        if (line.rfind("ATOM", 0) != 0 || (line.size() > 4 && line[4] != ' ')) continue;
        if (line.size() < 54) throw ParseError("ATOM record shorter than 54 columns", n + 1);
        if (trim(line.substr(12, 4)) != "CA") continue;
        if (line[21] != chain) continue;
        const char alt = line[16];
        if (alt != ' ' && alt != 'A') continue;

        const std::string res_seq_field(trim(line.substr(22, 4)));
        char* end = nullptr;
        const long res_seq = std::strtol(res_seq_field.c_str(), &end, 10);
        if (res_seq_field.empty() || *end != '\0') {
            throw ParseError("bad residue number '" + res_seq_field + "'", n + 1);
        }
        const auto key = std::make_pair(static_cast<int>(res_seq), line[26]);
        if (residues.count(key) || skipped.count(key)) continue;

        const std::string_view res_name = trim(line.substr(17, 3));
        const char letter = residue_one_letter(res_name);
        if (letter == '\0') {
            skipped.insert(key);
            result.skipped_residues.push_back(key.first);
            result.warnings.push_back("line " + std::to_string(n + 1) + ": unknown residue '" +
                                      std::string(res_name) + "' at " + std::to_string(key.first) +
                                      " skipped");
            continue;
        }
        residues.emplace(key, Atom{letter, Point3(parse_column_double(line.substr(30, 8), n + 1),
                                                  parse_column_double(line.substr(38, 8), n + 1),
                                                  parse_column_double(line.substr(46, 8), n + 1))});
    }
    if (residues.empty()) {
        throw DataError(std::string("no CA atoms for chain '") + chain + "'" +
                        (id.empty() ? "" : " in " + id));
    }
    result.record.id = std::move(id);
    for (const auto& [key, atom] : residues) {
        result.record.sequence.push_back(Vocab::index(atom.residue));
        result.record.ca_coords.push_back(atom.coord);
    }
    auto spacing = result.record.spacing_warnings();
    result.warnings.insert(result.warnings.end(), spacing.begin(), spacing.end());
    return result;
}

std::string write_pdb_ca(const ProteinRecord& record, char chain) {
    record.validate();
    std::string out;
    char buf[96];
    for (std::size_t i = 0; i < record.length(); ++i) {
        const auto& p = record.ca_coords[i];
        const std::string res(residue_three_letter(Vocab::letter(record.sequence[i])));
        std::snprintf(buf, sizeof buf,
                      "ATOM  %5zu  CA  %3s %c%4zu    %8.3f%8.3f%8.3f%6.2f%6.2f          %2s\n",
                      i + 1, res.c_str(), chain, i + 1, p.x(), p.y(), p.z(), 1.0, 0.0, "C");
        out += buf;
    }
    out += "END\n";
    return out;
}

std::vector<FastaEntry> parse_fasta(std::string_view text, bool aligned) {
    std::vector<FastaEntry> entries;
    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string_view line = trim(lines[n]);
        if (line.empty()) continue;
        if (line.front() == '>') {
            std::string_view header = trim(line.substr(1));
            const auto space = header.find_first_of(" \t");
            entries.push_back({std::string(header.substr(0, space)), ""});
            continue;
        }
        if (entries.empty()) throw ParseError("sequence data before the first '>' header", n + 1);
        for (char c : line) {
            const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (Vocab::is_amino_acid(u) || (aligned && u == '-')) {
                entries.back().sequence.push_back(u);
            } else if (!std::isspace(static_cast<unsigned char>(c))) {
                throw ParseError(std::string("invalid sequence character '") + c + "'", n + 1);
            }
        }
    }
    return entries;
}

std::string write_fasta(const std::vector<FastaEntry>& entries, std::size_t line_width) {
    std::string out;
    for (const auto& e : entries) {
        out += ">" + e.id + "\n";
        for (std::size_t i = 0; i < e.sequence.size(); i += line_width)
            out += e.sequence.substr(i, line_width) + "\n";
    }
    return out;
}

Alignment Alignment::from_fasta(std::string_view text, std::string reference_id) {
    Alignment a;
    a.rows = parse_fasta(text, true);
    if (a.rows.empty()) throw DataError("alignment has no rows");
    a.reference_id = reference_id.empty() ? a.rows.front().id : std::move(reference_id);
    a.validate();
    return a;
}

const FastaEntry& Alignment::reference() const {
    for (const auto& r : rows)
        if (r.id == reference_id) return r;
    throw DataError("reference row '" + reference_id + "' not in alignment");
}

void Alignment::validate() const {
    if (rows.empty()) throw DataError("alignment has no rows");
    const std::size_t width = rows.front().sequence.size();
    for (const auto& r : rows) {
        if (r.sequence.size() != width) {
            throw DataError("alignment row '" + r.id + "' has length " +
                            std::to_string(r.sequence.size()) + ", expected " + std::to_string(width));
        }
    }
    (void)reference();
}

std::vector<std::size_t> extract_motif(const Alignment& alignment, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ContractError("lambda must be in (0, 1]");
    alignment.validate();
    const std::string& ref = alignment.reference().sequence;
    if (std::all_of(ref.begin(), ref.end(), [](char c) { return c == '-'; })) {
        throw ContractError("reference row is all gaps");
    }
    const double rows = static_cast<double>(alignment.rows.size());
    std::vector<std::size_t> motif;
    std::size_t ref_pos = 0;
    for (std::size_t col = 0; col < ref.size(); ++col) {
        std::array<int, 26> counts{};
        for (const auto& r : alignment.rows) {
            const char c = r.sequence[col];
            if (c != '-') ++counts[static_cast<std::size_t>(c - 'A')];
        }
        const int modal = *std::max_element(counts.begin(), counts.end());
        if (ref[col] == '-') continue;
        if (static_cast<double>(modal) / rows >= lambda - 1e-12) motif.push_back(ref_pos);
        ++ref_pos;
    }
    return motif;
}

DatasetSplit filter_and_split(std::vector<ProteinRecord> records, std::size_t min_len,
                              const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train == 0 || ratios.valid == 0 || ratios.test == 0) {
        throw ContractError("split ratios must be positive");
    }
    std::erase_if(records, [min_len](const ProteinRecord& r) { return r.length() <= min_len; });
    if (records.empty()) throw DataError("no records left after length filtering");

    Rng rng(mix64(seed));
    std::shuffle(records.begin(), records.end(), rng);
    const std::size_t total = ratios.train + ratios.valid + ratios.test;
    const std::size_t n = records.size();
    const std::size_t n_valid = n * ratios.valid / total;
    const std::size_t n_test = n * ratios.test / total;
    const std::size_t n_train = n - n_valid - n_test;

    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dest = i < n_train ? split.train : i < n_train + n_valid ? split.valid : split.test;
        dest.push_back(std::move(records[i]));
    }
    return split;
}

std::set<std::string> parse_allow_list(std::string_view text) {
    std::set<std::string> ids;
    for (auto line : split_lines(text)) {
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) ids.insert(upper(line));
    }
    return ids;
}

std::string write_split_manifest(const DatasetSplit& split) {
    std::string out = "id,split\n";
    for (auto [records, name] : {std::pair{&split.train, "train"}, std::pair{&split.valid, "valid"},
                                 std::pair{&split.test, "test"}}) {
        for (const auto& r : *records) out += r.id + "," + name + "\n";
    }
    return out;
}

std::vector<ManifestRow> parse_split_manifest(std::string_view text) {
    std::vector<ManifestRow> rows;
    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string_view line = trim(lines[n]);
        if (line.empty() || (n == 0 && line == "id,split")) continue;
        const auto comma = line.find(',');
        if (comma == std::string_view::npos) throw ParseError("expected 'id,split'", n + 1);
        ManifestRow row{std::string(trim(line.substr(0, comma))),
                        std::string(trim(line.substr(comma + 1)))};
        if (row.split != "train" && row.split != "valid" && row.split != "test") {
            throw ParseError("unknown split '" + row.split + "'", n + 1);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<MotifEntry> parse_motif_file(std::string_view text) {
    std::vector<MotifEntry> entries;
    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::string_view line = lines[n];
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto tab = line.find_first_of("\t ");
        if (tab == std::string_view::npos) throw ParseError("expected 'id<TAB>positions'", n + 1);
        MotifEntry e{std::string(line.substr(0, tab)), {}};
        std::stringstream ss{std::string(trim(line.substr(tab + 1)))};
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const std::string t(trim(tok));
            if (t.empty()) continue;
            char* end = nullptr;
            const long v = std::strtol(t.c_str(), &end, 10);
            if (*end != '\0' || v < 0) throw ParseError("bad motif position '" + t + "'", n + 1);
            e.positions.push_back(static_cast<std::size_t>(v));
        }
        std::sort(e.positions.begin(), e.positions.end());
        e.positions.erase(std::unique(e.positions.begin(), e.positions.end()), e.positions.end());
        entries.push_back(std::move(e));
    }
    return entries;
}

std::string write_motif_file(const std::vector<MotifEntry>& entries) {
    std::string out = "# id\tmotif positions (0-based)\n";
    for (const auto& e : entries) {
        out += e.id + "\t";
        for (std::size_t i = 0; i < e.positions.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(e.positions[i]);
        }
        out += "\n";
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace geopro
