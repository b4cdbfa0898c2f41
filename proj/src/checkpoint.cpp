#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "matnet/common.hpp"
#include "matnet/train.hpp"

namespace matnet {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'T', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32(std::string_view data) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (unsigned char b : data) c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

struct ByteWriter {
    std::string out;

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out.append(s); }
};

struct ByteReader {
    std::string_view data;
    std::size_t pos = 0;
    std::string context;

    explicit ByteReader(std::string_view d, std::string ctx) : data(d), context(std::move(ctx)) {}

    void need(std::size_t n) {
        if (pos + n > data.size()) {
            throw IntegrityError("checkpoint truncated while reading " + context);
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view v = data.substr(pos, n);
        pos += n;
        return v;
    }
    bool done() const { return pos == data.size(); }
};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(std::string_view text, const std::string& key) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw IntegrityError("checkpoint config: bad numeric value for '" + key + "'");
    }
    return v;
}

std::size_t parse_size(std::string_view text, const std::string& key) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw IntegrityError("checkpoint config: bad integer value for '" + key + "'");
    }
    return v;
}

bool parse_bool(std::string_view text, const std::string& key) {
    if (text == "1") return true;
    if (text == "0") return false;
    throw IntegrityError("checkpoint config: bad flag value for '" + key + "'");
}

std::string serialize_config(const Checkpoint& ckpt) {
    const ModelConfig& c = ckpt.config;
    std::ostringstream os;
    os << "d_model=" << c.d_model << '\n';
    os << "heads=" << c.heads << '\n';
    os << "layers=" << c.layers << '\n';
    os << "step_in=" << c.step_in << '\n';
    os << "step_out=" << c.step_out << '\n';
    os << "m_factor=" << c.m_factor << '\n';
    os << "ffn_dim=" << c.ffn_dim << '\n';
    os << "weather_dim=" << c.weather_dim << '\n';
    os << "dropout_p=" << fmt_double(c.dropout_p) << '\n';
    os << "encoder=" << to_string(c.encoder) << '\n';
    os << "interpolation=" << to_string(c.interpolation) << '\n';
    os << "attention_scale=" << to_string(c.attention_scale) << '\n';
    os << "encoder_dropout=" << (c.encoder_dropout ? 1 : 0) << '\n';
    os << "embed_baselines=" << (c.embed_baselines ? 1 : 0) << '\n';
    os << "output_bias_init=" << fmt_double(c.output_bias_init) << '\n';
    for (const auto& [k, v] : ckpt.extra) os << "x." << k << '=' << v << '\n';
    return os.str();
}

void parse_config(std::string_view text, Checkpoint& ckpt) {
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        start = nl + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw IntegrityError("checkpoint config: malformed line '" + std::string(line) + "'");
        }
        const std::string key(line.substr(0, eq));
        const std::string_view value = line.substr(eq + 1);
        ModelConfig& c = ckpt.config;
        if (key == "d_model") c.d_model = parse_size(value, key);
        else if (key == "heads") c.heads = parse_size(value, key);
        else if (key == "layers") c.layers = parse_size(value, key);
        else if (key == "step_in") c.step_in = parse_size(value, key);
        else if (key == "step_out") c.step_out = parse_size(value, key);
        else if (key == "m_factor") c.m_factor = parse_size(value, key);
        else if (key == "ffn_dim") c.ffn_dim = parse_size(value, key);
        else if (key == "weather_dim") c.weather_dim = parse_size(value, key);
        else if (key == "dropout_p") c.dropout_p = parse_double(value, key);
        else if (key == "encoder") c.encoder = encoder_kind_from_string(value);
        else if (key == "interpolation") c.interpolation = interpolation_mode_from_string(value);
        else if (key == "attention_scale") c.attention_scale = attention_scale_from_string(value);
        else if (key == "encoder_dropout") c.encoder_dropout = parse_bool(value, key);
        else if (key == "embed_baselines") c.embed_baselines = parse_bool(value, key);
        else if (key == "output_bias_init") c.output_bias_init = parse_double(value, key);
        else if (key.rfind("x.", 0) == 0) ckpt.extra[key.substr(2)] = std::string(value);
        else throw IncompatibilityError("checkpoint config: unrecognized key '" + key + "'");
    }
}

std::string serialize_params(const Checkpoint& ckpt) {
    ByteWriter w;
    w.u64(ckpt.params.size());
    for (const auto& p : ckpt.params) {
        w.u32(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name);
        w.u32(static_cast<std::uint32_t>(p.shape.size()));
        std::size_t numel = 1;
        for (std::size_t d : p.shape) {
            w.u64(d);
            numel *= d;
        }
        if (numel != p.values.size()) {
            throw ContractError("parameter '" + p.name + "' has inconsistent shape");
        }
        for (double v : p.values) w.f64(v);
    }
    return std::move(w.out);
}

void parse_params(std::string_view payload, Checkpoint& ckpt) {
    ByteReader r(payload, "parameters");
    const std::uint64_t count = r.u64();
    ckpt.params.clear();
    ckpt.params.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedArray arr;
        const std::uint32_t name_len = r.u32();
        arr.name = std::string(r.bytes(name_len));
        const std::uint32_t ndim = r.u32();
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            arr.shape.push_back(static_cast<std::size_t>(r.u64()));
            numel *= arr.shape.back();
        }
        if (numel > (1u << 28)) throw IntegrityError("checkpoint parameter implausibly large");
        arr.values.reserve(numel);
        for (std::size_t v = 0; v < numel; ++v) arr.values.push_back(r.f64());
        ckpt.params.push_back(std::move(arr));
    }
    if (!r.done()) throw IntegrityError("checkpoint parameter section has trailing bytes");
}

std::string serialize_scaler(const Checkpoint& ckpt) {
    ByteWriter w;
    w.out.push_back(ckpt.scaler.fitted() ? 1 : 0);
    for (std::size_t c = 0; c < kWeatherNumericCount; ++c) {
        w.f64(ckpt.scaler.fitted() ? ckpt.scaler.mins()[c] : 0.0);
    }
    for (std::size_t c = 0; c < kWeatherNumericCount; ++c) {
        w.f64(ckpt.scaler.fitted() ? ckpt.scaler.maxs()[c] : 0.0);
    }
    return std::move(w.out);
}

void parse_scaler(std::string_view payload, Checkpoint& ckpt) {
    ByteReader r(payload, "scaler statistics");
    const std::string_view flag = r.bytes(1);
    std::array<double, kWeatherNumericCount> mins{};
    std::array<double, kWeatherNumericCount> maxs{};
    for (auto& v : mins) v = r.f64();
    for (auto& v : maxs) v = r.f64();
    if (!r.done()) throw IntegrityError("checkpoint scaler section has trailing bytes");
    if (flag[0] == 1) {
        ckpt.scaler.set_stats(mins, maxs);
    } else if (flag[0] != 0) {
        throw IntegrityError("checkpoint scaler section is malformed");
    }
}

std::string serialize_adam(const AdamSnapshot& snap) {
    ByteWriter w;
    w.u64(static_cast<std::uint64_t>(snap.t));
    w.f64(snap.lr);
    w.u64(snap.m.size());
    for (std::size_t p = 0; p < snap.m.size(); ++p) {
        if (snap.m[p].size() != snap.v[p].size()) {
            throw ContractError("optimizer snapshot has mismatched moment sizes");
        }
        w.u64(snap.m[p].size());
        for (double v : snap.m[p]) w.f64(v);
        for (double v : snap.v[p]) w.f64(v);
    }
    return std::move(w.out);
}

AdamSnapshot parse_adam(std::string_view payload) {
    ByteReader r(payload, "optimizer state");
    AdamSnapshot snap;
    snap.t = static_cast<std::int64_t>(r.u64());
    snap.lr = r.f64();
    const std::uint64_t count = r.u64();
    for (std::uint64_t p = 0; p < count; ++p) {
        const std::uint64_t len = r.u64();
        if (len > (1u << 28)) throw IntegrityError("checkpoint optimizer state implausibly large");
        std::vector<double> m(len), v(len);
        for (auto& x : m) x = r.f64();
        for (auto& x : v) x = r.f64();
        snap.m.push_back(std::move(m));
        snap.v.push_back(std::move(v));
    }
    if (!r.done()) throw IntegrityError("checkpoint optimizer section has trailing bytes");
    return snap;
}

void append_section(ByteWriter& w, std::string_view name, std::string_view payload) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u64(payload.size());
    w.bytes(payload);
    w.u32(crc32(payload));
}

}  // namespace

Checkpoint make_checkpoint(const Model& model, int epoch) {
    Checkpoint ckpt;
    ckpt.config = model.config;
    ckpt.epoch = epoch;
    ckpt.params.reserve(model.params.size());
    for (const auto& [name, t] : model.params.items()) {
        ckpt.params.push_back(NamedArray{name, t.shape(), t.values()});
    }
    return ckpt;
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
    Model model = build_model(checkpoint.config, std::uint64_t{0});
    if (model.params.size() != checkpoint.params.size()) {
        throw IncompatibilityError(
            "checkpoint stores " + std::to_string(checkpoint.params.size()) +
            " parameters but a " + std::string(to_string(checkpoint.config.encoder)) +
            " model built from its config has " + std::to_string(model.params.size()));
    }
    for (const auto& arr : checkpoint.params) {
        Tensor* t;
        try {
            t = &model.params.get(arr.name);
        } catch (const ContractError&) {
            throw IncompatibilityError("checkpoint parameter '" + arr.name +
                                       "' does not exist in the rebuilt model");
        }
        if (t->shape() != arr.shape) {
            throw IncompatibilityError("checkpoint parameter '" + arr.name + "' has shape " +
                                       shape_to_string(arr.shape) + " but the model expects " +
                                       shape_to_string(t->shape()));
        }
        t->mutable_values() = arr.values;
    }
    return model;
}

void checkpoint_save(const std::string& path, const Checkpoint& checkpoint) {
    ByteWriter w;
    w.bytes(std::string_view(kMagic, sizeof(kMagic)));
    w.u32(kVersion);
    const std::uint32_t sections = checkpoint.optimizer ? 6 : 5;
    w.u32(sections);
    append_section(w, "config", serialize_config(checkpoint));
    append_section(w, "params", serialize_params(checkpoint));
    append_section(w, "scaler", serialize_scaler(checkpoint));
    append_section(w, "rng", checkpoint.rng_state);
    {
        ByteWriter e;
        e.u32(static_cast<std::uint32_t>(checkpoint.epoch));
        append_section(w, "epoch", e.out);
    }
    if (checkpoint.optimizer) append_section(w, "adam", serialize_adam(*checkpoint.optimizer));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(w.out.data(), static_cast<std::streamsize>(w.out.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

Checkpoint checkpoint_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    ByteReader r(blob, "header");
    const std::string_view magic = r.bytes(sizeof(kMagic));
    if (magic != std::string_view(kMagic, sizeof(kMagic))) {
        throw IntegrityError("'" + path + "' is not a checkpoint file");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw IncompatibilityError("checkpoint format version " + std::to_string(version) +
                                   "; this build reads version " + std::to_string(kVersion));
    }
    const std::uint32_t sections = r.u32();

    Checkpoint ckpt;
    bool have_config = false, have_params = false, have_scaler = false, have_rng = false,
         have_epoch = false;
    for (std::uint32_t s = 0; s < sections; ++s) {
        r.context = "section header";
        const std::uint32_t name_len = r.u32();
        const std::string name(r.bytes(name_len));
        r.context = "section '" + name + "'";
        const std::uint64_t payload_len = r.u64();
        const std::string_view payload = r.bytes(payload_len);
        const std::uint32_t stored_crc = r.u32();
        if (crc32(payload) != stored_crc) {
            throw IntegrityError("checkpoint section '" + name + "' failed its checksum");
        }
        if (name == "config") {
            parse_config(payload, ckpt);
            have_config = true;
        } else if (name == "params") {
            parse_params(payload, ckpt);
            have_params = true;
        } else if (name == "scaler") {
            parse_scaler(payload, ckpt);
            have_scaler = true;
        } else if (name == "rng") {
            ckpt.rng_state = std::string(payload);
            have_rng = true;
        } else if (name == "epoch") {
            ByteReader er(payload, "epoch");
            ckpt.epoch = static_cast<int>(er.u32());
            have_epoch = true;
        } else if (name == "adam") {
            ckpt.optimizer = parse_adam(payload);
        } else {
            throw IncompatibilityError("checkpoint contains unknown section '" + name + "'");
        }
    }
    if (!r.done()) throw IntegrityError("checkpoint has trailing bytes after the last section");
    if (!have_config || !have_params || !have_scaler || !have_rng || !have_epoch) {
        throw IntegrityError("checkpoint is missing a required section");
    }
    return ckpt;
}

}  // namespace matnet
