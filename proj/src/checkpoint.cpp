#include "geopro/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "geopro/errors.hpp"

namespace geopro {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr std::string_view kMagic = "GEOPRO01";
constexpr std::string_view kArchName = "__arch__";

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

struct Reader {
    std::string_view bytes;
    std::size_t pos = 0;

    template <typename T>
    T get() {
        if (bytes.size() - pos < sizeof(T)) throw DataError("checkpoint truncated at byte " + std::to_string(pos));
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }

    std::string_view take(std::size_t n) {
        if (bytes.size() - pos < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos));
        auto s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

std::vector<double> arch_values(const ModelConfig& c) {
    return {static_cast<double>(c.width),
            static_cast<double>(c.egnn_depth),
            static_cast<double>(c.num_heads),
            static_cast<double>(c.ff_width),
            static_cast<double>(c.max_len),
            static_cast<double>(c.encoder_blocks),
            static_cast<double>(c.decoder_blocks),
            c.edge_attrs == EdgeAttrKind::kNone ? 0.0 : 1.0,
            c.feature_select == FeatureSelect::kAsPrinted ? 0.0 : 1.0,
            c.distance_scale};
}

ModelConfig arch_from_values(const std::vector<double>& v) {
    if (v.size() != 10) throw DataError("checkpoint architecture record has the wrong size");
    auto count = [](double x) {
        if (!(x >= 0) || x != std::floor(x) || x > 1e9) throw DataError("bad architecture value");
        return static_cast<std::size_t>(x);
    };
    ModelConfig c;
    c.width = count(v[0]);
    c.egnn_depth = count(v[1]);
    c.num_heads = count(v[2]);
    c.ff_width = count(v[3]);
    c.max_len = count(v[4]);
    c.encoder_blocks = count(v[5]);
    c.decoder_blocks = count(v[6]);
    c.edge_attrs = count(v[7]) ? EdgeAttrKind::kSequenceSeparation : EdgeAttrKind::kNone;
    c.feature_select = count(v[8]) ? FeatureSelect::kInverted : FeatureSelect::kAsPrinted;
    c.distance_scale = v[9];
    return c;
}

}  // namespace

std::string encode_checkpoint(const std::vector<CheckpointTensor>& tensors, std::uint32_t hash) {
    std::string out(kMagic);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        if (t.name.size() > 0xffff) throw ContractError("tensor name too long: " + t.name);
        if (t.shape.size() > 0xff) throw ContractError("tensor rank too large: " + t.name);
        if (ad::shape_numel(t.shape) != t.values.size()) {
            throw DimensionError("tensor '" + t.name + "' shape does not match its values");
        }
        put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
        out += t.name;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (double v : t.values) put<double>(out, v);
    }
    put<std::uint32_t>(out, hash);
    return out;
}

std::vector<CheckpointTensor> decode_checkpoint(std::string_view bytes, std::uint32_t* hash) {
    Reader r{bytes};
    if (r.take(kMagic.size()) != kMagic) throw DataError("not a checkpoint (bad magic)");
    const auto count = r.get<std::uint32_t>();
    std::vector<CheckpointTensor> out;
    for (std::uint32_t k = 0; k < count; ++k) {
        CheckpointTensor t;
        t.name = std::string(r.take(r.get<std::uint16_t>()));
        const auto rank = r.get<std::uint8_t>();
        for (std::uint8_t d = 0; d < rank; ++d) t.shape.push_back(r.get<std::uint32_t>());
        const std::size_t numel = ad::shape_numel(t.shape);
        if (numel > (bytes.size() - r.pos) / sizeof(double)) {
            throw DataError("checkpoint truncated in tensor '" + t.name + "'");
        }
        t.values.resize(numel);
        for (auto& v : t.values) v = r.get<double>();
        out.push_back(std::move(t));
    }
    const auto h = r.get<std::uint32_t>();
    if (r.pos != bytes.size()) throw DataError("trailing bytes after checkpoint");
    if (hash) *hash = h;
    return out;
}

std::string serialize_model(const GeoProModel& model) {
    std::vector<CheckpointTensor> tensors;
    const auto arch = arch_values(model.config);
    tensors.push_back({std::string(kArchName), {arch.size()}, arch});
    for (const auto& p : model.parameters()) {
        auto d = p.tensor.data();
        tensors.push_back({p.name, p.tensor.shape(), std::vector<double>(d.begin(), d.end())});
    }
    return encode_checkpoint(tensors, model.config.hash());
}

GeoProModel deserialize_model(std::string_view bytes) {
    std::uint32_t hash = 0;
    const auto tensors = decode_checkpoint(bytes, &hash);
    std::map<std::string, const CheckpointTensor*> by_name;
    for (const auto& t : tensors) {
        if (!by_name.emplace(t.name, &t).second) throw DataError("duplicate tensor '" + t.name + "'");
    }
    const auto arch = by_name.find(std::string(kArchName));
    if (arch == by_name.end()) throw DataError("checkpoint has no architecture record");
    const ModelConfig config = arch_from_values(arch->second->values);
    if (config.hash() != hash) {
        throw DataError("checkpoint architecture hash mismatch (file " + std::to_string(hash) +
                        ", computed " + std::to_string(config.hash()) + ")");
    }
    GeoProModel model;
    try {
        model = GeoProModel::init(config, 0);
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint architecture is invalid: ") + e.what());
    }
    auto params = model.parameters();
    if (params.size() + 1 != tensors.size()) {
        throw DataError("checkpoint has " + std::to_string(tensors.size() - 1) +
                        " parameters, architecture expects " + std::to_string(params.size()));
    }
    for (auto& p : params) {
        const auto it = by_name.find(p.name);
        if (it == by_name.end()) throw DataError("checkpoint is missing parameter '" + p.name + "'");
        if (it->second->shape != p.tensor.shape()) {
            throw DataError("parameter '" + p.name + "' has shape " +
                            ad::shape_str(it->second->shape) + ", expected " +
                            ad::shape_str(p.tensor.shape()));
        }
        auto dst = p.tensor.mutable_data();
        std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
    }
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const GeoProModel& model) {
    write_file_atomic(path, serialize_model(model));
}

GeoProModel load_checkpoint(const std::filesystem::path& path) {
    return deserialize_model(read_text_file(path));
}

GeoProModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    GeoProModel m = load_checkpoint(path);
    if (m.config.hash() != expected.hash()) {
        throw DataError("checkpoint architecture (" + m.config.canonical() +
                        ") does not match the requested one (" + expected.canonical() + ")");
    }
    return m;
}

std::string model_version(const GeoProModel& model) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", model.config.hash());
    return buf;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError("expected 'key = value'", line_no);
        if (!out.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'", line_no);
    }
    return out;
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || !std::isfinite(v)) {
        throw ConfigError("bad number for '" + key + "': '" + value + "'");
    }
    return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.front() == '-') {
        throw ConfigError("bad non-negative integer for '" + key + "': '" + value + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("bad boolean for '" + key + "': '" + value + "'");
}

}  // namespace

void apply_config(TrainingConfig& config, const std::map<std::string, std::string>& values) {
    if (auto p = values.find("profile"); p != values.end()) apply_profile(config, p->second);
    for (const auto& [key, value] : values) {
        auto& m = config.model;
        if (key == "profile") continue;
        else if (key == "alpha") config.alpha = parse_double(key, value);
        else if (key == "beta") config.beta = parse_double(key, value);
        else if (key == "batch_size") config.batch_size = parse_count(key, value);
        else if (key == "lr") config.base_lr = parse_double(key, value);
        else if (key == "warmup") config.warmup_steps = parse_count(key, value);
        else if (key == "epochs") config.epochs = parse_count(key, value);
        else if (key == "seed") config.seed = parse_count(key, value);
        else if (key == "topk") config.top_k = static_cast<int>(parse_count(key, value));
        else if (key == "radius") config.radius = parse_double(key, value);
        else if (key == "track_fixed_train_loss") config.track_fixed_train_loss = parse_bool(key, value);
        else if (key == "width") m.width = parse_count(key, value);
        else if (key == "egnn_depth") m.egnn_depth = parse_count(key, value);
        else if (key == "num_heads") m.num_heads = parse_count(key, value);
        else if (key == "ff_width") m.ff_width = parse_count(key, value);
        else if (key == "max_len") m.max_len = parse_count(key, value);
        else if (key == "encoder_blocks") m.encoder_blocks = parse_count(key, value);
        else if (key == "decoder_blocks") m.decoder_blocks = parse_count(key, value);
        else if (key == "distance_scale") m.distance_scale = parse_double(key, value);
        else if (key == "feature_select") m.feature_select = parse_feature_select(value);
        else if (key == "edge_attrs") {
            if (value == "none") m.edge_attrs = EdgeAttrKind::kNone;
            else if (value == "seqsep") m.edge_attrs = EdgeAttrKind::kSequenceSeparation;
            else throw ConfigError("edge_attrs must be none or seqsep, got '" + value + "'");
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
}

std::string format_config(const TrainingConfig& c) {
    std::ostringstream out;
    out.precision(17);
    const auto& m = c.model;
    out << "alpha = " << c.alpha << "\nbeta = " << c.beta << "\nbatch_size = " << c.batch_size
        << "\nlr = " << c.base_lr << "\nwarmup = " << c.warmup_steps << "\nepochs = " << c.epochs
        << "\nseed = " << c.seed << "\ntopk = " << c.top_k << "\nradius = " << c.radius
        << "\ntrack_fixed_train_loss = " << (c.track_fixed_train_loss ? "true" : "false")
        << "\nwidth = " << m.width << "\negnn_depth = " << m.egnn_depth
        << "\nnum_heads = " << m.num_heads << "\nff_width = " << m.ff_width
        << "\nmax_len = " << m.max_len << "\nencoder_blocks = " << m.encoder_blocks
        << "\ndecoder_blocks = " << m.decoder_blocks << "\ndistance_scale = " << m.distance_scale
        << "\nfeature_select = " << to_string(m.feature_select)
        << "\nedge_attrs = " << (m.edge_attrs == EdgeAttrKind::kNone ? "none" : "seqsep") << '\n';
    return out.str();
}

}  // namespace geopro
