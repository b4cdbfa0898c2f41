#include "matnet/runconfig.hpp"

#include <charconv>
#include <fstream>

#include "matnet/common.hpp"

namespace matnet {

namespace {

double to_double(const std::string& value, const std::string& key) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': bad numeric value '" + value + "'");
    }
    return v;
}

template <typename T>
T to_int(const std::string& value, const std::string& key) {
    T v{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': bad integer value '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& value, const std::string& key) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ConfigError("config key '" + key + "': bad flag value '" + value + "'");
}

std::string trimmed(const std::string& text) {
    const std::size_t begin = text.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const std::size_t end = text.find_last_not_of(" \t");
    return text.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_key(RunConfig& config, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trimmed(raw_key);
    const std::string value = trimmed(raw_value);
    auto& m = config.model;
    auto& t = config.train;
    auto& p = config.pipeline;
    if (key == "d_model") m.d_model = to_int<std::size_t>(value, key);
    else if (key == "heads") m.heads = to_int<std::size_t>(value, key);
    else if (key == "layers") m.layers = to_int<std::size_t>(value, key);
    else if (key == "step_in") { m.step_in = to_int<std::size_t>(value, key); p.step_in = m.step_in; }
    else if (key == "step_out") { m.step_out = to_int<std::size_t>(value, key); p.step_out = m.step_out; }
    else if (key == "m_factor") m.m_factor = to_int<std::size_t>(value, key);
    else if (key == "ffn_dim") m.ffn_dim = to_int<std::size_t>(value, key);
    else if (key == "weather_dim") m.weather_dim = to_int<std::size_t>(value, key);
    else if (key == "dropout") m.dropout_p = to_double(value, key);
    else if (key == "encoder") m.encoder = encoder_kind_from_string(value);
    else if (key == "interpolation") m.interpolation = interpolation_mode_from_string(value);
    else if (key == "attention_scale") m.attention_scale = attention_scale_from_string(value);
    else if (key == "encoder_dropout") m.encoder_dropout = to_bool(value, key);
    else if (key == "embed_baselines") m.embed_baselines = to_bool(value, key);
    else if (key == "output_bias_init") m.output_bias_init = to_double(value, key);
    else if (key == "epochs") t.epochs = to_int<int>(value, key);
    else if (key == "batch_size") t.batch_size = to_int<std::size_t>(value, key);
    else if (key == "lr") t.lr = to_double(value, key);
    else if (key == "seed") t.seed = to_int<std::uint64_t>(value, key);
    else if (key == "shuffle") t.shuffle = to_bool(value, key);
    else if (key == "val_fraction") t.val_fraction = to_double(value, key);
    else if (key == "plateau_factor") t.plateau.factor = to_double(value, key);
    else if (key == "plateau_patience") t.plateau.patience = to_int<int>(value, key);
    else if (key == "plateau_min_delta") t.plateau.min_delta = to_double(value, key);
    else if (key == "save_optimizer") t.save_optimizer = to_bool(value, key);
    else if (key == "stride") p.stride = to_int<std::size_t>(value, key);
    else if (key == "boundary") p.boundary = parse_date(value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        }
        apply_config_key(config, line.substr(0, eq), line.substr(eq + 1));
    }
}

RunConfig load_run_config(const std::string& path) {
    RunConfig config;
    apply_config_file(config, path);
    return config;
}

}  // namespace matnet
