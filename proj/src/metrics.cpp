#include "geopro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "geopro/errors.hpp"

namespace geopro {

double aar(std::span<const Token> designed, std::span<const Token> target,
           std::span<const std::size_t> scored, bool* empty_warning) {
    if (designed.size() != target.size()) {
        throw ContractError("aar: lengths " + std::to_string(designed.size()) + " and " +
                            std::to_string(target.size()) + " differ");
    }
    if (empty_warning) *empty_warning = scored.empty();
    if (scored.empty()) return 1.0;
    std::size_t hits = 0;
    for (auto p : scored) {
        if (p >= designed.size()) {
            throw ContractError("aar: position " + std::to_string(p) + " out of range");
        }
        hits += designed[p] == target[p];
    }
    return static_cast<double>(hits) / static_cast<double>(scored.size());
}

double aar(std::span<const Token> designed, std::span<const Token> target) {
    std::vector<std::size_t> all(designed.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return aar(designed, target, all);
}

namespace {

ColumnSummary summarize_column(std::vector<double> v) {
    ColumnSummary s;
    if (v.empty()) return s;
    double total = 0;
    for (double x : v) total += x;
    s.mean = total / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    return s;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

const std::vector<std::string>& column_names() {
    static const std::vector<std::string> names{"aar_all", "aar_nonmotif", "rmsd_superposed",
                                                "rmsd_anchored", "tm_score", "plddt"};
    return names;
}

}  // namespace

std::map<std::string, ColumnSummary> summarize(const std::vector<EvalRow>& rows) {
    std::map<std::string, std::vector<double>> cols;
    for (const auto& r : rows) {
        cols["aar_all"].push_back(r.aar_all);
        cols["aar_nonmotif"].push_back(r.aar_nonmotif);
        cols["rmsd_superposed"].push_back(r.rmsd_superposed);
        cols["rmsd_anchored"].push_back(r.rmsd_anchored);
        cols["tm_score"].push_back(r.tm_score);
        if (r.plddt) cols["plddt"].push_back(*r.plddt);
    }
    std::map<std::string, ColumnSummary> out;
    for (auto& [name, values] : cols) out[name] = summarize_column(std::move(values));
    return out;
}

EvalReport evaluate_candidates(std::span<const CandidateInput> candidates,
                               const std::map<std::string, ProteinRecord>& targets,
                               const std::map<std::string, std::vector<std::size_t>>& motifs,
                               const std::optional<std::map<std::string, double>>& plddt) {
    EvalReport report;
    for (const auto& c : candidates) {
        const auto t = targets.find(c.target_id);
        if (t == targets.end()) {
            throw DataError("candidate '" + c.id + "' refers to unknown target '" + c.target_id + "'");
        }
        const ProteinRecord& target = t->second;
        const std::size_t len = target.length();
        if (c.sequence.size() != len || c.coords.size() != len || target.ca_coords.size() != len) {
            throw DataError("candidate '" + c.id + "' has length " +
                            std::to_string(c.sequence.size()) + ", target '" + c.target_id +
                            "' has " + std::to_string(len));
        }
        std::vector<bool> is_motif(len, false);
        if (auto m = motifs.find(c.target_id); m != motifs.end()) {
            for (auto p : m->second) {
                if (p >= len) throw DataError("motif position out of range for '" + c.target_id + "'");
                is_motif[p] = true;
            }
        }
        std::vector<std::size_t> flexible;
        PointList flex_model, flex_target;
        for (std::size_t j = 0; j < len; ++j) {
            if (is_motif[j]) continue;
            flexible.push_back(j);
            flex_model.push_back(c.coords[j]);
            flex_target.push_back(target.ca_coords[j]);
        }

        EvalRow row;
        row.id = c.id;
        row.target_id = c.target_id;
        row.aar_all = aar(c.sequence, target.sequence);
        bool empty = false;
        row.aar_nonmotif = aar(c.sequence, target.sequence, flexible, &empty);
        if (empty) report.warnings.push_back("candidate '" + c.id + "' has no flexible positions");
        row.rmsd_superposed = kabsch(c.coords, target.ca_coords).rmsd;
        row.rmsd_anchored = flexible.empty() ? 0.0 : rmsd_in_place(flex_model, flex_target);
        row.tm_score = tm_score(c.coords, target.ca_coords, len);
        if (plddt) {
            if (auto p = plddt->find(c.id); p != plddt->end()) row.plddt = p->second;
        }
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
    report.summary = summarize(report.rows);
    return report;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "id,target_id,aar_all,aar_nonmotif,rmsd_superposed,rmsd_anchored,tm_score,plddt\n";
    for (const auto& r : rows) {
        out << r.id << ',' << r.target_id << ',' << fmt(r.aar_all) << ',' << fmt(r.aar_nonmotif)
            << ',' << fmt(r.rmsd_superposed) << ',' << fmt(r.rmsd_anchored) << ','
            << fmt(r.tm_score) << ',' << (r.plddt ? fmt(*r.plddt) : "") << '\n';
    }
    out << "\nstatistic,column,value\n";
    for (const auto& name : column_names()) {
        auto s = summary.find(name);
        if (s == summary.end()) continue;
        out << "mean," << name << ',' << fmt(s->second.mean) << '\n';
        out << "median," << name << ',' << fmt(s->second.median) << '\n';
    }
    return out.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-12s %8s %8s %9s %9s %7s %7s\n", "id", "target",
                  "AAR", "AAR-flex", "RMSD-sup", "RMSD-anc", "TM", "pLDDT");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-16s %-12s %8.4f %8.4f %9.4f %9.4f %7.4f %7s\n",
                      r.id.c_str(), r.target_id.c_str(), r.aar_all, r.aar_nonmotif,
                      r.rmsd_superposed, r.rmsd_anchored, r.tm_score,
                      r.plddt ? fmt4(*r.plddt).c_str() : "-");
        out << line;
    }
    for (const char* stat : {"mean", "median"}) {
        const bool mean = std::string_view(stat) == "mean";
        auto get = [&](const char* col) {
            auto s = summary.find(col);
            if (s == summary.end()) return std::string("-");
            return fmt4(mean ? s->second.mean : s->second.median);
        };
        std::snprintf(line, sizeof line, "%-16s %-12s %8s %8s %9s %9s %7s %7s\n", stat, "",
                      get("aar_all").c_str(), get("aar_nonmotif").c_str(),
                      get("rmsd_superposed").c_str(), get("rmsd_anchored").c_str(),
                      get("tm_score").c_str(), get("plddt").c_str());
        out << line;
    }
    return out.str();
}

std::map<std::string, double> parse_plddt_csv(std::string_view text) {
    std::map<std::string, double> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "id,plddt") throw ParseError("expected header 'id,plddt'", line_no);
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0 || line.find(',', comma + 1) != std::string::npos) {
            throw ParseError("expected 'id,value'", line_no);
        }
        const std::string value = line.substr(comma + 1);
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            throw ParseError("bad pLDDT value '" + value + "'", line_no);
        }
        if (used != value.size() || !std::isfinite(v)) {
            throw ParseError("bad pLDDT value '" + value + "'", line_no);
        }
        if (!out.emplace(line.substr(0, comma), v).second) {
            throw ParseError("duplicate id '" + line.substr(0, comma) + "'", line_no);
        }
    }
    if (!header) throw ParseError("empty pLDDT file", line_no);
    return out;
}

NoveltyResult novelty_check(std::span<const Token> designed, std::span<const TokenSeq> corpus) {
    if (corpus.empty()) throw ContractError("novelty corpus is empty");
    NoveltyResult best;
    const auto n = static_cast<long>(designed.size());
    for (std::size_t c = 0; c < corpus.size(); ++c) {
        const auto& other = corpus[c];
        const auto m = static_cast<long>(other.size());
        if (other.size() == designed.size() &&
            std::equal(other.begin(), other.end(), designed.begin())) {
            best.exact_match = true;
        }
        const long shorter = std::min(n, m);
        if (shorter == 0) continue;
        for (long offset = -(n - 1); offset <= m - 1; ++offset) {
            long hits = 0;
            for (long i = std::max(0L, -offset); i < n && i + offset < m; ++i) {
                hits += designed[i] == other[i + offset];
            }
            const double identity = static_cast<double>(hits) / static_cast<double>(shorter);
            if (identity > best.max_identity) {
                best.max_identity = identity;
                best.best_index = c;
                best.best_offset = offset;
            }
        }
    }
    return best;
}

std::string embeddings_csv(const std::string& id, const ad::Tensor& feats, bool header) {
    if (feats.rank() != 2) throw DimensionError("embeddings must be [L, D]");
    std::ostringstream out;
    const std::size_t rows = feats.dim(0), cols = feats.dim(1);
    if (header) {
        out << "id,pos";
        for (std::size_t d = 0; d < cols; ++d) out << ",dim" << d;
        out << '\n';
    }
    char buf[32];
    auto data = feats.data();
    for (std::size_t r = 0; r < rows; ++r) {
        out << id << ',' << r;
        for (std::size_t d = 0; d < cols; ++d) {
            std::snprintf(buf, sizeof buf, ",%.17g", data[r * cols + d]);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace geopro
