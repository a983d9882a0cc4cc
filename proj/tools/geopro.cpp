// geopro: data preparation, training, motif-conditioned design and evaluation.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "geopro/checkpoint.hpp"
#include "geopro/errors.hpp"
#include "geopro/metrics.hpp"
#include "geopro/pipeline.hpp"
#include "geopro/property_suite.hpp"
#include "geopro/theorem.hpp"

namespace fs = std::filesystem;
using namespace geopro;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProperty = 3;

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("geopro");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("GEOPRO_LOG")) {
        const std::string level = env;
        if (level == "error") spdlog::set_level(spdlog::level::err);
        else if (level == "warn") spdlog::set_level(spdlog::level::warn);
        else if (level == "info") spdlog::set_level(spdlog::level::info);
        else if (level == "debug") spdlog::set_level(spdlog::level::debug);
        else spdlog::warn("ignoring GEOPRO_LOG={} (error, warn, info, debug)", level);
    }
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::size_t> parse_positions(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw UsageError("bad position '" + item + "'");
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ProteinRecord load_pdb_record(const fs::path& path, char chain) {
    auto parsed = parse_pdb_ca(read_text_file(path), chain, path.stem().string());
    for (const auto& w : parsed.warnings) spdlog::warn("{}: {}", path.string(), w);
    for (const auto& w : parsed.record.spacing_warnings()) spdlog::warn("{}: {}", path.string(), w);
    return std::move(parsed.record);
}

std::map<std::string, std::vector<std::size_t>> load_motifs(const fs::path& path) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (auto& e : parse_motif_file(read_text_file(path))) out[e.id] = std::move(e.positions);
    return out;
}

struct Dataset {
    std::vector<Example> train, valid, test;
};

Dataset load_dataset(const fs::path& dir) {
    const auto manifest = parse_split_manifest(read_text_file(dir / "manifest.csv"));
    const auto motifs = load_motifs(dir / "motifs.tsv");
    Dataset d;
    for (const auto& row : manifest) {
        const auto m = motifs.find(row.id);
        if (m == motifs.end()) {
            spdlog::warn("{} has no motif entry; skipped", row.id);
            continue;
        }
        ProteinRecord rec = load_pdb_record(dir / (row.id + ".pdb"), 'A');
        rec.id = row.id;
        Motif motif = Motif::from_record(rec, m->second);
        Example ex{std::move(rec), std::move(motif)};
        if (row.split == "train") d.train.push_back(std::move(ex));
        else if (row.split == "valid") d.valid.push_back(std::move(ex));
        else if (row.split == "test") d.test.push_back(std::move(ex));
        else throw DataError("unknown split '" + row.split + "' for " + row.id);
    }
    return d;
}

void write_dataset(const fs::path& dir, const DatasetSplit& split,
                   const std::vector<MotifEntry>& motifs) {
    fs::create_directories(dir);
    for (const auto* part : {&split.train, &split.valid, &split.test}) {
        for (const auto& rec : *part) write_file_atomic(dir / (rec.id + ".pdb"), write_pdb_ca(rec));
    }
    write_file_atomic(dir / "manifest.csv", write_split_manifest(split));
    if (!motifs.empty()) write_file_atomic(dir / "motifs.tsv", write_motif_file(motifs));
}

/// Flags shared by commands that build or train a model.
struct ModelFlags {
    std::string config_path;
    std::optional<double> alpha, beta, lr, radius;
    std::optional<std::size_t> epochs, batch_size, warmup, width, depth, heads, max_len;
    std::optional<int> top_k;
    std::string profile, feature_select, edge_attrs;

    void add(CLI::App* app) {
        app->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
        app->add_option("--alpha", alpha, "backbone loss weight");
        app->add_option("--beta", beta, "sequence loss weight");
        app->add_option("--profile", profile, "loss-weight preset")
            ->check(CLI::IsMember({"beta-lactamase", "myoglobin"}));
        app->add_option("--lr", lr, "peak learning rate");
        app->add_option("--epochs", epochs, "training epochs");
        app->add_option("--batch-size", batch_size, "examples per step");
        app->add_option("--warmup", warmup, "warm-up steps");
        app->add_option("--width", width, "feature width d");
        app->add_option("--depth", depth, "EGNN layers");
        app->add_option("--heads", heads, "attention heads");
        app->add_option("--max-len", max_len, "longest supported sequence");
        app->add_option("--topk", top_k, "top-k sampling (default 3)");
        app->add_option("--radius", radius, "spherical init radius in Angstrom (default 3.75)");
        app->add_option("--feature-select", feature_select, "decoder feature selection")
            ->check(CLI::IsMember({"as_printed", "inverted"}));
        app->add_option("--edge-attrs", edge_attrs, "EGNN edge attributes")
            ->check(CLI::IsMember({"none", "seqsep"}));
    }

    TrainingConfig resolve(std::uint64_t seed, bool seed_given) const {
        TrainingConfig c;
        if (!config_path.empty()) apply_config(c, parse_key_values(read_text_file(config_path)));
        if (!profile.empty()) apply_profile(c, profile);
        if (alpha) c.alpha = *alpha;
        if (beta) c.beta = *beta;
        if (lr) c.base_lr = *lr;
        if (radius) c.radius = *radius;
        if (epochs) c.epochs = *epochs;
        if (batch_size) c.batch_size = *batch_size;
        if (warmup) c.warmup_steps = *warmup;
        if (top_k) c.top_k = *top_k;
        if (width) {
            c.model.width = *width;
            c.model.ff_width = 2 * *width;
        }
        if (depth) c.model.egnn_depth = *depth;
        if (heads) c.model.num_heads = *heads;
        if (max_len) c.model.max_len = *max_len;
        if (!feature_select.empty()) c.model.feature_select = parse_feature_select(feature_select);
        if (edge_attrs == "seqsep") c.model.edge_attrs = EdgeAttrKind::kSequenceSeparation;
        if (edge_attrs == "none") c.model.edge_attrs = EdgeAttrKind::kNone;
        if (seed_given) c.seed = seed;
        c.validate();
        return c;
    }
};

/// A motif given as a target PDB plus positions (inline or from a motif file).
struct MotifFlags {
    std::string target, motif_file, positions;
    char chain = 'A';

    void add(CLI::App* app) {
        app->add_option("--target", target, "PDB file supplying motif residues and coordinates")
            ->required()
            ->check(CLI::ExistingFile);
        app->add_option("--motif-file", motif_file, "motif index file (id<TAB>i,j,k)")
            ->check(CLI::ExistingFile);
        app->add_option("--positions", positions, "comma-separated motif positions (0-based)");
        app->add_option("--chain", chain, "chain identifier");
    }

    std::pair<ProteinRecord, Motif> resolve() const {
        ProteinRecord rec = load_pdb_record(target, chain);
        std::vector<std::size_t> pos;
        if (!positions.empty()) {
            pos = parse_positions(positions);
        } else if (!motif_file.empty()) {
            const auto motifs = load_motifs(motif_file);
            const auto it = motifs.find(rec.id);
            if (it == motifs.end()) throw DataError("no motif for '" + rec.id + "' in " + motif_file);
            pos = it->second;
        } else {
            throw UsageError("one of --positions or --motif-file is required");
        }
        Motif m = Motif::from_record(rec, pos);
        return {std::move(rec), std::move(m)};
    }
};

std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"geopro: motif-conditioned joint backbone and sequence design"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    auto* seed_opt = app.add_option("--seed", seed, "root seed for every random stream");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.fallthrough();

    // prepare
    auto* prepare = app.add_subcommand("prepare", "PDB directory -> C-alpha records and split manifest");
    std::string pdb_dir, allow_list, out_dir, motif_in;
    std::size_t min_len = 0;
    std::string prepare_profile;
    char chain = 'A';
    prepare->add_option("--pdb-dir", pdb_dir, "directory of .pdb files")->required()->check(CLI::ExistingDirectory);
    prepare->add_option("--allow-list", allow_list, "ids to keep, one per line")->check(CLI::ExistingFile);
    prepare->add_option("--min-len", min_len, "drop records with length <= this");
    prepare->add_option("--profile", prepare_profile, "length filter preset (200 / 100)")
        ->check(CLI::IsMember({"beta-lactamase", "myoglobin"}));
    prepare->add_option("--chain", chain, "chain identifier");
    prepare->add_option("--motifs", motif_in, "motif index file copied into the dataset")->check(CLI::ExistingFile);
    prepare->add_option("--out", out_dir, "output dataset directory")->required();

    // motif
    auto* motif = app.add_subcommand("motif", "aligned FASTA + lambda -> motif index file");
    std::string alignment_path, reference_id, motif_id, motif_out;
    double lambda = 0.8;
    motif->add_option("--alignment", alignment_path, "aligned FASTA")->required()->check(CLI::ExistingFile);
    motif->add_option("--lambda", lambda, "conservation threshold in (0, 1]");
    motif->add_option("--reference", reference_id, "reference row id (default: first row)");
    motif->add_option("--id", motif_id, "record id written to the motif file (default: reference id)");
    motif->add_option("--out", motif_out, "motif file (default: stdout)");

    // synth
    auto* synth = app.add_subcommand("synth", "synthetic chains with curvature-derived residues");
    SyntheticOptions synth_opts;
    std::string synth_out;
    synth->add_option("--count", synth_opts.count, "number of chains");
    synth->add_option("--length", synth_opts.length, "chain length");
    synth->add_option("--motif-frac", synth_opts.motif_frac, "fraction of positions in the motif");
    synth->add_option("--out", synth_out, "output dataset directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "dataset + config -> checkpoint and loss curve");
    ModelFlags train_flags;
    std::string data_dir, checkpoint_out, curve_out;
    train_flags.add(train_cmd);
    train_cmd->add_option("--data", data_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--out", checkpoint_out, "checkpoint path")->required();
    train_cmd->add_option("--curve", curve_out, "loss curve CSV");

    // design
    auto* design_cmd = app.add_subcommand("design", "checkpoint + motif -> candidate sequences and backbones");
    std::string checkpoint_in, design_out;
    MotifFlags design_motif;
    std::size_t design_len = 0, design_n = 10;
    int design_topk = 3;
    double design_radius = kDefaultRadius;
    bool pin_motif = true;
    design_cmd->add_option("--checkpoint", checkpoint_in, "trained checkpoint")->required()->check(CLI::ExistingFile);
    design_motif.add(design_cmd);
    design_cmd->add_option("--length", design_len, "designed length (default: target length)");
    design_cmd->add_option("--n", design_n, "number of candidates");
    design_cmd->add_option("--topk", design_topk, "top-k sampling")->check(CLI::Range(1, 20));
    design_cmd->add_option("--radius", design_radius, "spherical init radius in Angstrom");
    design_cmd->add_flag("--pin-motif,!--no-pin-motif", pin_motif,
                         "re-pin motif coordinates in the output (default on)");
    design_cmd->add_option("--out", design_out, "output directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "candidates + targets -> evaluation report");
    std::string cand_dir, targets_dir, eval_motifs, plddt_path, report_out, corpus_path;
    eval_cmd->add_option("--candidates", cand_dir, "design output directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--targets", targets_dir, "directory of target PDB files")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--motifs", eval_motifs, "motif index file")->check(CLI::ExistingFile);
    eval_cmd->add_option("--plddt", plddt_path, "CSV id,plddt from an external folding model")->check(CLI::ExistingFile);
    eval_cmd->add_option("--corpus", corpus_path, "FASTA corpus for the novelty check")->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", report_out, "report CSV");

    // check
    auto* check = app.add_subcommand("check", "run the property suite");

    // bound-demo
    auto* bound = app.add_subcommand("bound-demo", "theorem bound sweep as CSV");
    std::vector<std::size_t> bound_n{4, 6, 8, 12}, bound_k{2, 3};
    std::vector<double> bound_lip{0.5, 1.0, 2.0}, bound_zeta{1.0, 2.0};
    double bound_delta = 0.0;
    std::size_t bound_width = 4;
    bool appendix_sign = false;
    bound->add_option("--n", bound_n, "instance counts")->delimiter(',');
    bound->add_option("--k", bound_k, "cluster sizes")->delimiter(',');
    bound->add_option("--lip", bound_lip, "Lipschitz constants")->delimiter(',');
    bound->add_option("--zeta", bound_zeta, "cluster separations")->delimiter(',');
    bound->add_option("--delta", bound_delta, "within-cluster radius");
    bound->add_option("--width", bound_width, "embedding width");
    bound->add_flag("--appendix-sign", appendix_sign, "use log sigma(-Lip d) in the bound");

    // export-emb
    auto* export_cmd = app.add_subcommand("export-emb", "dump EGNN feature rows to CSV");
    std::string export_ckpt, export_out;
    MotifFlags export_motif;
    export_cmd->add_option("--checkpoint", export_ckpt, "trained checkpoint")->required()->check(CLI::ExistingFile);
    export_motif.add(export_cmd);
    export_cmd->add_option("--out", export_out, "CSV path (default: stdout)");

    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
        sub->footer(
            "Global options (accepted before or after the subcommand):\n"
            "  --seed UINT                 root seed for every random stream\n"
            "  --threads UINT:POSITIVE     worker threads\n"
            "Environment: GEOPRO_LOG={error,warn,info,debug}");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }
    const bool seed_given = seed_opt->count() > 0;

    try {
        if (prepare->parsed()) {
            std::optional<std::set<std::string>> allowed;
            if (!allow_list.empty()) allowed = parse_allow_list(read_text_file(allow_list));
            if (prepare_profile == "beta-lactamase") min_len = std::max<std::size_t>(min_len, 200);
            if (prepare_profile == "myoglobin") min_len = std::max<std::size_t>(min_len, 100);
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(pdb_dir)) {
                const auto ext = entry.path().extension();
                if (entry.is_regular_file() && (ext == ".pdb" || ext == ".ent")) files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            std::vector<ProteinRecord> records;
            for (const auto& f : files) {
                const std::string id = upper(f.stem().string());
                if (allowed && !allowed->count(id)) continue;
                try {
                    records.push_back(load_pdb_record(f, chain));
                } catch (const DataError& e) {
                    spdlog::warn("{}: {}; skipped", f.string(), e.what());
                }
            }
            const auto split = filter_and_split(std::move(records), min_len, SplitRatios{}, seed);
            std::vector<MotifEntry> motifs;
            if (!motif_in.empty()) motifs = parse_motif_file(read_text_file(motif_in));
            write_dataset(out_dir, split, motifs);
            std::cout << "train " << split.train.size() << " valid " << split.valid.size() << " test "
                      << split.test.size() << '\n';
        } else if (motif->parsed()) {
            if (!(lambda > 0 && lambda <= 1)) throw UsageError("--lambda must be in (0, 1]");
            const auto aln = Alignment::from_fasta(read_text_file(alignment_path), reference_id);
            const auto positions = extract_motif(aln, lambda);
            const std::string text =
                write_motif_file({{motif_id.empty() ? aln.reference().id : motif_id, positions}});
            if (motif_out.empty()) std::cout << text;
            else write_file_atomic(motif_out, text);
        } else if (synth->parsed()) {
            synth_opts.seed = seed;
            const auto examples = generate_synthetic_dataset(synth_opts);
            std::vector<ProteinRecord> records;
            std::vector<MotifEntry> motifs;
            for (const auto& ex : examples) {
                records.push_back(ex.record);
                motifs.push_back({ex.record.id, ex.motif.positions});
            }
            const auto split = filter_and_split(std::move(records), 0, SplitRatios{}, seed);
            write_dataset(synth_out, split, motifs);
            std::cout << "wrote " << examples.size() << " chains to " << synth_out << '\n';
        } else if (train_cmd->parsed()) {
            const TrainingConfig config = train_flags.resolve(seed, seed_given);
            const Dataset data = load_dataset(data_dir);
            if (data.train.empty()) throw DataError("dataset has no training examples");
            GeoProModel model = GeoProModel::init(config.model, config.seed);
            std::ostringstream curve;
            curve << "epoch,lr,train_total,train_backbone,train_sequence,valid_total\n";
            const auto result = train(data.train, data.valid, config, model, [&](const EpochStats& s) {
                curve << s.epoch << ',' << csv_double(s.lr) << ',' << csv_double(s.train.total) << ','
                      << csv_double(s.train.backbone) << ',' << csv_double(s.train.sequence) << ','
                      << (s.valid_total ? csv_double(*s.valid_total) : "") << '\n';
                spdlog::info("epoch {} train {:.4f} valid {}", s.epoch, s.train.total,
                             s.valid_total ? csv_double(*s.valid_total) : "-");
                return true;
            });
            save_checkpoint(checkpoint_out, model);
            if (!curve_out.empty()) write_file_atomic(curve_out, curve.str());
            std::cout << "trained " << result.steps << " steps; checkpoint " << checkpoint_out << " ("
                      << model_version(model) << ")\n";
        } else if (design_cmd->parsed()) {
            const GeoProModel model = load_checkpoint(checkpoint_in);
            const auto [target, m] = design_motif.resolve();
            DesignOptions opts;
            opts.length = design_len ? design_len : target.length();
            opts.num_candidates = design_n;
            opts.top_k = design_topk;
            opts.radius = design_radius;
            opts.seed = seed;
            opts.pin_motif = pin_motif;
            opts.threads = threads;
            opts.model_version = model_version(model);
            const auto cands = design(m, opts, model);
            fs::create_directories(design_out);
            std::vector<FastaEntry> fasta;
            std::ostringstream table;
            table << "id,target_id,seed,model_version,mean_token_prob\n";
            for (const auto& c : cands) {
                fasta.push_back({c.id, Vocab::decode(c.sequence)});
                ProteinRecord rec{c.id, c.sequence, c.coords};
                write_file_atomic(fs::path(design_out) / (c.id + ".pdb"), write_pdb_ca(rec));
                double mean = 0;
                for (double p : c.token_prob) mean += p;
                mean /= static_cast<double>(c.token_prob.size());
                table << c.id << ',' << target.id << ',' << c.seed << ',' << c.model_version << ','
                      << csv_double(mean) << '\n';
            }
            write_file_atomic(fs::path(design_out) / "candidates.fasta", write_fasta(fasta));
            write_file_atomic(fs::path(design_out) / "candidates.csv", table.str());
            std::cout << "wrote " << cands.size() << " candidates to " << design_out << '\n';
        } else if (eval_cmd->parsed()) {
            const fs::path dir = cand_dir;
            std::map<std::string, std::string> seqs;
            for (auto& e : parse_fasta(read_text_file(dir / "candidates.fasta"))) seqs[e.id] = e.sequence;
            std::vector<CandidateInput> inputs;
            std::map<std::string, ProteinRecord> targets;
            std::istringstream table(read_text_file(dir / "candidates.csv"));
            std::string line;
            std::getline(table, line);
            std::size_t line_no = 1;
            while (std::getline(table, line)) {
                ++line_no;
                if (line.empty()) continue;
                std::stringstream fields(line);
                std::string id, target_id;
                if (!std::getline(fields, id, ',') || !std::getline(fields, target_id, ',')) {
                    throw ParseError("expected id,target_id", line_no);
                }
                const auto s = seqs.find(id);
                if (s == seqs.end()) throw DataError("candidate '" + id + "' missing from candidates.fasta");
                if (!targets.count(target_id)) {
                    const fs::path tp = fs::path(targets_dir) / (target_id + ".pdb");
                    if (!fs::exists(tp)) throw DataError("no target structure " + tp.string());
                    targets[target_id] = load_pdb_record(tp, 'A');
                }
                const auto cand = parse_pdb_ca(read_text_file(dir / (id + ".pdb")), 'A', id);
                inputs.push_back({id, target_id, Vocab::encode(s->second), cand.record.ca_coords});
            }
            std::map<std::string, std::vector<std::size_t>> motifs;
            if (!eval_motifs.empty()) motifs = load_motifs(eval_motifs);
            std::optional<std::map<std::string, double>> plddt;
            if (!plddt_path.empty()) plddt = parse_plddt_csv(read_text_file(plddt_path));
            const auto report = evaluate_candidates(inputs, targets, motifs, plddt);
            for (const auto& w : report.warnings) spdlog::warn("{}", w);
            std::cout << report.to_table();
            if (!corpus_path.empty()) {
                std::vector<TokenSeq> corpus;
                for (const auto& e : parse_fasta(read_text_file(corpus_path))) corpus.push_back(Vocab::encode(e.sequence));
                for (const auto& c : inputs) {
                    const auto nov = novelty_check(c.sequence, corpus);
                    std::cout << "novelty " << c.id << " exact=" << (nov.exact_match ? "yes" : "no")
                              << " max_identity=" << csv_double(nov.max_identity) << '\n';
                }
            }
            if (!report_out.empty()) write_file_atomic(report_out, report.to_csv());
        } else if (check->parsed()) {
            bool all = true;
            for (const auto& r : run_property_suite(seed)) {
                std::printf("%-20s %s  worst=%.3e  threshold=%.1e  %s  (%.2fs)\n", r.name.c_str(),
                            r.passed ? "PASS" : "FAIL", r.worst, r.threshold, r.detail.c_str(), r.seconds);
                all = all && r.passed;
            }
            return all ? kExitOk : kExitProperty;
        } else if (bound->parsed()) {
            const BoundSign sign = appendix_sign ? BoundSign::kAppendix : BoundSign::kStatement;
            std::cout << "n,K,lip,zeta,delta,objective,bound,slack,holds\n";
            std::uint64_t index = 0;
            for (auto n : bound_n)
                for (auto k : bound_k) {
                    if (k == 0 || n % k != 0) continue;
                    for (double lip : bound_lip)
                        for (double zeta : bound_zeta) {
                            Rng rng = substream(seed, "bound-demo", index++);
                            const auto inst = build_instance(n, k, bound_width, zeta, bound_delta, lip, rng);
                            const auto c = verify_bound(inst, sign);
                            std::cout << n << ',' << k << ',' << csv_double(lip) << ',' << csv_double(zeta)
                                      << ',' << csv_double(bound_delta) << ',' << csv_double(c.objective)
                                      << ',' << csv_double(c.bound) << ',' << csv_double(c.slack) << ','
                                      << (c.holds ? "true" : "false") << '\n';
                        }
                }
        } else if (export_cmd->parsed()) {
            const GeoProModel model = load_checkpoint(export_ckpt);
            const auto [target, m] = export_motif.resolve();
            ad::NoGradScope no_grad;
            Rng rng = substream(seed, "export");
            const auto out = forward_joint(target, m, model, rng);
            const std::string csv = embeddings_csv(target.id, out.feats);
            if (export_out.empty()) std::cout << csv;
            else write_file_atomic(export_out, csv);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}
