#include "matnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "matnet/common.hpp"

namespace matnet {

EncoderKind encoder_kind_from_string(std::string_view name) {
    if (name == "attention") return EncoderKind::attention;
    if (name == "lstm") return EncoderKind::lstm;
    if (name == "gru") return EncoderKind::gru;
    if (name == "bilstm") return EncoderKind::bilstm;
    if (name == "bigru") return EncoderKind::bigru;
    throw ConfigError("unknown encoder kind '" + std::string(name) +
                      "'; expected attention|lstm|gru|bilstm|bigru");
}

std::string_view to_string(EncoderKind kind) {
    switch (kind) {
        case EncoderKind::attention: return "attention";
        case EncoderKind::lstm: return "lstm";
        case EncoderKind::gru: return "gru";
        case EncoderKind::bilstm: return "bilstm";
        case EncoderKind::bigru: return "bigru";
    }
    return "?";
}

InterpolationMode interpolation_mode_from_string(std::string_view name) {
    if (name == "fixed") return InterpolationMode::fixed;
    if (name == "learnable") return InterpolationMode::learnable;
    throw ConfigError("unknown interpolation mode '" + std::string(name) +
                      "'; expected fixed|learnable");
}

std::string_view to_string(InterpolationMode mode) {
    return mode == InterpolationMode::fixed ? "fixed" : "learnable";
}

AttentionScale attention_scale_from_string(std::string_view name) {
    if (name == "per_head") return AttentionScale::per_head;
    if (name == "full_width") return AttentionScale::full_width;
    throw ConfigError("unknown attention scale '" + std::string(name) +
                      "'; expected per_head|full_width");
}

std::string_view to_string(AttentionScale scale) {
    return scale == AttentionScale::per_head ? "per_head" : "full_width";
}

std::string_view branch_name(Branch branch) {
    switch (branch) {
        case Branch::pv: return "pv";
        case Branch::hw: return "hw";
        case Branch::fw: return "fw";
    }
    return "?";
}

void ModelConfig::validate() const {
    if (d_model == 0) throw ConfigError("d_model must be positive");
    if (step_in == 0 || step_out == 0) throw ConfigError("step_in and step_out must be positive");
    if (weather_dim == 0) throw ConfigError("weather_dim must be positive");
    if (m() == 0) throw ConfigError("interpolation width must be positive");
    if (dropout_p < 0.0 || dropout_p > 1.0) {
        throw ConfigError("dropout probability must be in [0,1], got " + std::to_string(dropout_p));
    }
    if (encoder == EncoderKind::attention) {
        if (heads == 0) throw ConfigError("attention needs at least one head");
        if (d_model % heads != 0) {
            throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                              std::to_string(heads) + " heads");
        }
        if (d_model % 2 != 0) {
            throw ConfigError("positional encoding needs an even d_model, got " +
                              std::to_string(d_model));
        }
        if (ffn() < d_model) {
            throw ConfigError("feed-forward width " + std::to_string(ffn()) +
                              " must be at least d_model");
        }
        if (layers == 0) throw ConfigError("attention encoder needs at least one layer");
    }
    if (is_bidirectional() && d_model % 2 != 0) {
        throw ConfigError("bidirectional encoders need an even d_model, got " +
                          std::to_string(d_model));
    }
}

Tensor& ParamStore::add(const std::string& name, Tensor tensor) {
    if (!tensor.defined()) throw ContractError("parameter '" + name + "' is undefined");
    auto [it, inserted] = index_.try_emplace(name, items_.size());
    if (!inserted) throw ContractError("duplicate parameter name '" + name + "'");
    items_.emplace_back(name, std::move(tensor));
    return items_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return items_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return items_[it->second].second;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

void ParamStore::zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
}

namespace {

std::size_t branch_channels(const ModelConfig& cfg, Branch br) {
    return br == Branch::pv ? 1 : cfg.weather_dim;
}

std::size_t branch_steps(const ModelConfig& cfg, Branch br) {
    return br == Branch::fw ? cfg.step_out : cfg.step_in;
}

std::string prefix(Branch br) { return std::string(branch_name(br)); }

void build_embed(Model& model, Branch br, RngStream& rng) {
    const auto& cfg = model.config;
    const std::size_t c_in = branch_channels(cfg, br);
    const std::size_t kernel = br == Branch::pv ? 3 : 1;
    const std::string base = "embed." + prefix(br);
    model.params.add(base + ".weight",
                     Tensor::uniform_init({cfg.d_model, c_in, kernel}, c_in * kernel, rng));
    model.params.add(base + ".bias", Tensor::zeros({cfg.d_model}, true));
}

void build_attention_stack(Model& model, Branch br, RngStream& rng) {
    const auto& cfg = model.config;
    const std::size_t dk = cfg.d_head();
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string base = "enc." + prefix(br) + "." + std::to_string(l) + ".";
        model.params.add(base + "ln1.gain", Tensor::full({cfg.d_model}, 1.0, true));
        model.params.add(base + "ln1.offset", Tensor::zeros({cfg.d_model}, true));
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::string head = base + "attn." + std::to_string(h) + ".";
            model.params.add(head + "wq", Tensor::uniform_init({cfg.d_model, dk}, cfg.d_model, rng));
            model.params.add(head + "wk", Tensor::uniform_init({cfg.d_model, dk}, cfg.d_model, rng));
            model.params.add(head + "wv", Tensor::uniform_init({cfg.d_model, dk}, cfg.d_model, rng));
        }
        model.params.add(base + "attn.wo",
                         Tensor::uniform_init({cfg.heads * dk, cfg.d_model}, cfg.heads * dk, rng));
        model.params.add(base + "ln2.gain", Tensor::full({cfg.d_model}, 1.0, true));
        model.params.add(base + "ln2.offset", Tensor::zeros({cfg.d_model}, true));
        model.params.add(base + "ffn.w1",
                         Tensor::uniform_init({cfg.ffn(), cfg.d_model}, cfg.d_model, rng));
        model.params.add(base + "ffn.b1", Tensor::zeros({cfg.ffn()}, true));
        model.params.add(base + "ffn.w2",
                         Tensor::uniform_init({cfg.d_model, cfg.ffn()}, cfg.ffn(), rng));
        model.params.add(base + "ffn.b2", Tensor::zeros({cfg.d_model}, true));
    }
}

void build_gate(Model& model, const std::string& base, char gate, std::size_t c_in, std::size_t h,
                RngStream& rng) {
    const std::string g(1, gate);
    model.params.add(base + "w_i" + g, Tensor::uniform_init({h, c_in}, c_in, rng));
    model.params.add(base + "b_i" + g, Tensor::zeros({h}, true));
    model.params.add(base + "w_h" + g, Tensor::uniform_init({h, h}, h, rng));
    model.params.add(base + "b_h" + g, Tensor::zeros({h}, true));
}

void build_recurrent_stack(Model& model, Branch br, RngStream& rng) {
    const auto& cfg = model.config;
    const std::size_t hidden = cfg.is_bidirectional() ? cfg.d_model / 2 : cfg.d_model;
    const std::size_t c_in = cfg.embed_baselines ? cfg.d_model : branch_channels(cfg, br);
    const bool is_lstm = cfg.encoder == EncoderKind::lstm || cfg.encoder == EncoderKind::bilstm;
    std::vector<std::string> dirs =
        cfg.is_bidirectional() ? std::vector<std::string>{"fwd", "bwd"}
                               : std::vector<std::string>{"uni"};
    for (const auto& dir : dirs) {
        const std::string base = "rnn." + prefix(br) + "." + dir + ".";
        if (is_lstm) {
            for (char gate : {'i', 'f', 'g', 'o'}) build_gate(model, base, gate, c_in, hidden, rng);
        } else {
            for (char gate : {'r', 'z', 'n'}) build_gate(model, base, gate, c_in, hidden, rng);
        }
    }
}

}  // namespace

Model build_model(const ModelConfig& config, RngStream& init_rng) {
    config.validate();
    Model model;
    model.config = config;
    const bool attention = config.encoder == EncoderKind::attention;
    if (attention || config.embed_baselines) {
        for (Branch br : {Branch::pv, Branch::hw, Branch::fw}) build_embed(model, br, init_rng);
    }
    for (Branch br : {Branch::pv, Branch::hw, Branch::fw}) {
        if (attention) {
            build_attention_stack(model, br, init_rng);
        } else {
            build_recurrent_stack(model, br, init_rng);
        }
    }
    if (attention && config.interpolation == InterpolationMode::learnable) {
        for (Branch br : {Branch::pv, Branch::hw, Branch::fw}) {
            Tensor w = interpolation_weights(branch_steps(config, br), config.m());
            model.params.add("interp." + prefix(br) + ".weight",
                             Tensor::from_values(w.shape(), w.values(), true));
        }
    }
    model.params.add("fusion.l1.weight",
                     Tensor::uniform_init({config.d_model, 2 * config.d_model},
                                          2 * config.d_model, init_rng));
    model.params.add("fusion.l1.bias", Tensor::zeros({config.d_model}, true));
    model.params.add("fusion.l2.weight",
                     Tensor::uniform_init({config.d_model, 2 * config.d_model},
                                          2 * config.d_model, init_rng));
    model.params.add("fusion.l2.bias", Tensor::zeros({config.d_model}, true));
    model.params.add("out.weight",
                     Tensor::uniform_init({config.step_out, config.d_model}, config.d_model,
                                          init_rng));
    model.params.add("out.bias", Tensor::full({config.step_out}, config.output_bias_init, true));
    return model;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
    RngStream rng = named_stream(seed, "init");
    return build_model(config, rng);
}

Tensor positional_encoding(std::size_t steps, std::size_t d_model) {
    if (d_model % 2 != 0) throw ConfigError("positional encoding needs an even width");
    std::vector<double> values(steps * d_model);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; 2 * k < d_model; ++k) {
            const double omega =
                1.0 / std::pow(10000.0, 2.0 * static_cast<double>(k) / static_cast<double>(d_model));
            const double angle = omega * static_cast<double>(t);
            values[t * d_model + 2 * k] = std::sin(angle);
            values[t * d_model + 2 * k + 1] = std::cos(angle);
        }
    }
    return Tensor::from_values({steps, d_model}, std::move(values), false);
}

Tensor interpolation_weights(std::size_t steps, std::size_t m) {
    if (steps == 0 || m == 0) throw ConfigError("interpolation needs positive dimensions");
    std::vector<double> values(steps * m);
    const double md = static_cast<double>(m);
    for (std::size_t t = 0; t < steps; ++t) {
        const double s = (static_cast<double>(t + 1) / static_cast<double>(steps)) * md;
        for (std::size_t j = 0; j < m; ++j) {
            const double u = 1.0 - std::abs(s - static_cast<double>(j + 1)) / md;
            values[t * m + j] = u * u;
        }
    }
    return Tensor::from_values({steps, m}, std::move(values), false);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t scale_width) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2) {
        throw DimensionError("attention expects 2-D q, k, v");
    }
    if (q.extent(1) != k.extent(1)) {
        throw DimensionError("attention q/k width mismatch: " + shape_to_string(q.shape()) +
                             " vs " + shape_to_string(k.shape()));
    }
    if (k.extent(0) != v.extent(0)) {
        throw DimensionError("attention k/v length mismatch: " + shape_to_string(k.shape()) +
                             " vs " + shape_to_string(v.shape()));
    }
    if (scale_width == 0) throw ContractError("attention scale width must be positive");
    Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(scale_width)));
    return matmul(softmax(scores, 1), v);
}

AttentionLayerParams attention_layer_params(Model& model, Branch branch, std::size_t layer) {
    const std::string base = "enc." + prefix(branch) + "." + std::to_string(layer) + ".";
    AttentionLayerParams p;
    for (std::size_t h = 0; h < model.config.heads; ++h) {
        const std::string head = base + "attn." + std::to_string(h) + ".";
        p.wq.push_back(model.params.get(head + "wq"));
        p.wk.push_back(model.params.get(head + "wk"));
        p.wv.push_back(model.params.get(head + "wv"));
    }
    p.wo = model.params.get(base + "attn.wo");
    p.ln1_gain = model.params.get(base + "ln1.gain");
    p.ln1_offset = model.params.get(base + "ln1.offset");
    p.ln2_gain = model.params.get(base + "ln2.gain");
    p.ln2_offset = model.params.get(base + "ln2.offset");
    p.ffn_w1 = model.params.get(base + "ffn.w1");
    p.ffn_b1 = model.params.get(base + "ffn.b1");
    p.ffn_w2 = model.params.get(base + "ffn.w2");
    p.ffn_b2 = model.params.get(base + "ffn.b2");
    return p;
}

LstmParams lstm_params(Model& model, Branch branch, std::string_view direction) {
    const std::string base = "rnn." + prefix(branch) + "." + std::string(direction) + ".";
    auto& ps = model.params;
    return LstmParams{ps.get(base + "w_ii"), ps.get(base + "b_ii"), ps.get(base + "w_hi"),
                      ps.get(base + "b_hi"), ps.get(base + "w_if"), ps.get(base + "b_if"),
                      ps.get(base + "w_hf"), ps.get(base + "b_hf"), ps.get(base + "w_ig"),
                      ps.get(base + "b_ig"), ps.get(base + "w_hg"), ps.get(base + "b_hg"),
                      ps.get(base + "w_io"), ps.get(base + "b_io"), ps.get(base + "w_ho"),
                      ps.get(base + "b_ho")};
}

GruParams gru_params(Model& model, Branch branch, std::string_view direction) {
    const std::string base = "rnn." + prefix(branch) + "." + std::string(direction) + ".";
    auto& ps = model.params;
    return GruParams{ps.get(base + "w_ir"), ps.get(base + "b_ir"), ps.get(base + "w_hr"),
                     ps.get(base + "b_hr"), ps.get(base + "w_iz"), ps.get(base + "b_iz"),
                     ps.get(base + "w_hz"), ps.get(base + "b_hz"), ps.get(base + "w_in"),
                     ps.get(base + "b_in"), ps.get(base + "w_hn"), ps.get(base + "b_hn")};
}

Tensor multi_head_attention(const Tensor& x, const AttentionLayerParams& p,
                            const ModelConfig& config) {
    const std::size_t width =
        config.attention_scale == AttentionScale::per_head ? config.d_head() : config.d_model;
    std::vector<Tensor> heads;
    heads.reserve(config.heads);
    for (std::size_t h = 0; h < config.heads; ++h) {
        Tensor q = matmul(x, p.wq[h]);
        Tensor k = matmul(x, p.wk[h]);
        Tensor v = matmul(x, p.wv[h]);
        heads.push_back(scaled_dot_attention(q, k, v, width));
    }
    Tensor joined = config.heads == 1 ? heads.front() : concat(heads, 1);
    return matmul(joined, p.wo);
}

Tensor encoder_layer(const Tensor& x, const AttentionLayerParams& p, const ModelConfig& config,
                     bool training, RngStream* rng) {
    Tensor attn = multi_head_attention(layer_norm(x, p.ln1_gain, p.ln1_offset), p, config);
    if (config.encoder_dropout) attn = dropout(attn, config.dropout_p, training, rng);
    Tensor x1 = add(x, attn);
    Tensor f = linear_affine(layer_norm(x1, p.ln2_gain, p.ln2_offset), p.ffn_w1, p.ffn_b1);
    f = linear_affine(relu(f), p.ffn_w2, p.ffn_b2);
    if (config.encoder_dropout) f = dropout(f, config.dropout_p, training, rng);
    return add(x1, f);
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmParams& p) {
    Tensor i = sigmoid(add(linear_affine(x, p.w_ii, p.b_ii), linear_affine(h_prev, p.w_hi, p.b_hi)));
    Tensor f = sigmoid(add(linear_affine(x, p.w_if, p.b_if), linear_affine(h_prev, p.w_hf, p.b_hf)));
    Tensor g = tanh_act(add(linear_affine(x, p.w_ig, p.b_ig), linear_affine(h_prev, p.w_hg, p.b_hg)));
    Tensor o = sigmoid(add(linear_affine(x, p.w_io, p.b_io), linear_affine(h_prev, p.w_ho, p.b_ho)));
    Tensor c_t = add(mul(f, c_prev), mul(i, g));
    Tensor h_t = mul(o, tanh_act(c_t));
    return {h_t, c_t};
}

Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruParams& p) {
    Tensor r = sigmoid(add(linear_affine(x, p.w_ir, p.b_ir), linear_affine(h_prev, p.w_hr, p.b_hr)));
    Tensor z = sigmoid(add(linear_affine(x, p.w_iz, p.b_iz), linear_affine(h_prev, p.w_hz, p.b_hz)));
    Tensor n = tanh_act(add(linear_affine(x, p.w_in, p.b_in),
                            mul(r, linear_affine(h_prev, p.w_hn, p.b_hn))));
    return add(sub(n, mul(z, n)), mul(z, h_prev));
}

Tensor embed_branch(const Tensor& x, Model& model, Branch branch) {
    const std::string base = "embed." + prefix(branch);
    const std::size_t padding = branch == Branch::pv ? 1 : 0;
    Tensor y = conv1d(transpose(x), model.params.get(base + ".weight"),
                      model.params.get(base + ".bias"), padding);
    return transpose(y);
}

Tensor dense_interpolate(const Tensor& s, const Tensor& w) {
    if (s.ndim() != 2 || w.ndim() != 2 || s.extent(0) != w.extent(0)) {
        throw DimensionError("dense interpolation: encoder output " + shape_to_string(s.shape()) +
                             " does not match weights " + shape_to_string(w.shape()));
    }
    return matmul(transpose(w), s);
}

Tensor encode_branch_attention(const Tensor& x, Model& model, Branch branch, bool training,
                               RngStream* rng) {
    const auto& cfg = model.config;
    const std::size_t steps = x.extent(0);
    Tensor h = add(embed_branch(x, model, branch), positional_encoding(steps, cfg.d_model));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        AttentionLayerParams p = attention_layer_params(model, branch, l);
        h = encoder_layer(h, p, cfg, training, rng);
    }
    Tensor w = cfg.interpolation == InterpolationMode::learnable
                   ? model.params.get("interp." + prefix(branch) + ".weight")
                   : interpolation_weights(steps, cfg.m());
    Tensor u = dense_interpolate(h, w);
    return row(u, u.extent(0) - 1);
}

Tensor encode_branch_recurrent(const Tensor& x_in, Model& model, Branch branch) {
    const auto& cfg = model.config;
    Tensor x = cfg.embed_baselines ? embed_branch(x_in, model, branch) : x_in;
    const std::size_t steps = x.extent(0);
    const std::size_t hidden = cfg.is_bidirectional() ? cfg.d_model / 2 : cfg.d_model;
    const bool is_lstm = cfg.encoder == EncoderKind::lstm || cfg.encoder == EncoderKind::bilstm;

    auto run_direction = [&](std::string_view dir, bool reversed) {
        Tensor h = Tensor::zeros({hidden});
        Tensor c = Tensor::zeros({hidden});
        LstmParams lp;
        GruParams gp;
        if (is_lstm) {
            lp = lstm_params(model, branch, dir);
        } else {
            gp = gru_params(model, branch, dir);
        }
        for (std::size_t t = 0; t < steps; ++t) {
            const std::size_t idx = reversed ? steps - 1 - t : t;
            Tensor x_t = row(x, idx);
            if (is_lstm) {
                auto [h_t, c_t] = lstm_step(x_t, h, c, lp);
                h = h_t;
                c = c_t;
            } else {
                h = gru_step(x_t, h, gp);
            }
        }
        return h;
    };

    if (!cfg.is_bidirectional()) return run_direction("uni", false);
    Tensor fwd = run_direction("fwd", false);
    Tensor bwd = run_direction("bwd", true);
    return concat(fwd, bwd, 0);
}

Tensor fusion_forward(const Tensor& pv_rep, const Tensor& hw_rep, const Tensor& fw_rep,
                      Model& model, bool training, RngStream* rng) {
    const auto& cfg = model.config;
    auto& ps = model.params;
    Tensor z1 = dropout(concat(pv_rep, hw_rep, 0), cfg.dropout_p, training, rng);
    Tensor h1 = relu(linear_affine(z1, ps.get("fusion.l1.weight"), ps.get("fusion.l1.bias")));
    Tensor z2 = dropout(concat(h1, fw_rep, 0), cfg.dropout_p, training, rng);
    Tensor h2 = relu(linear_affine(z2, ps.get("fusion.l2.weight"), ps.get("fusion.l2.bias")));
    Tensor o = dropout(h2, cfg.dropout_p, training, rng);
    return sigmoid(linear_affine(o, ps.get("out.weight"), ps.get("out.bias")));
}

Tensor branch_input(const SampleWindow& sample, Branch branch, const ModelConfig& config) {
    if (sample.step_in != config.step_in || sample.step_out != config.step_out ||
        sample.weather_dim != config.weather_dim) {
        throw DimensionError("sample geometry (" + std::to_string(sample.step_in) + "," +
                             std::to_string(sample.step_out) + "," +
                             std::to_string(sample.weather_dim) +
                             ") does not match the model config (" +
                             std::to_string(config.step_in) + "," +
                             std::to_string(config.step_out) + "," +
                             std::to_string(config.weather_dim) + ")");
    }
    switch (branch) {
        case Branch::pv:
            if (sample.pv.size() != sample.step_in) throw DimensionError("bad pv history length");
            return Tensor::from_values({sample.step_in, 1}, sample.pv);
        case Branch::hw:
            if (sample.hw.size() != sample.step_in * sample.weather_dim) {
                throw DimensionError("bad historical weather size");
            }
            return Tensor::from_values({sample.step_in, sample.weather_dim}, sample.hw);
        case Branch::fw:
            if (sample.fw.size() != sample.step_out * sample.weather_dim) {
                throw DimensionError("bad future weather size");
            }
            return Tensor::from_values({sample.step_out, sample.weather_dim}, sample.fw);
    }
    throw ContractError("unreachable branch");
}

Tensor model_forward(const SampleWindow& sample, Model& model, bool training, RngStream* rng) {
    const bool attention = model.config.encoder == EncoderKind::attention;
    Tensor reps[3];
    std::size_t i = 0;
    for (Branch br : {Branch::pv, Branch::hw, Branch::fw}) {
        Tensor x = branch_input(sample, br, model.config);
        reps[i++] = attention ? encode_branch_attention(x, model, br, training, rng)
                              : encode_branch_recurrent(x, model, br);
    }
    return fusion_forward(reps[0], reps[1], reps[2], model, training, rng);
}

void AblationSpec::validate() const {
    if (!enable_pv && !enable_hw && !enable_fw) {
        throw ConfigError("ablation would disable every branch");
    }
}

std::string AblationSpec::label() const {
    std::string out;
    for (auto [on, name] : {std::pair{enable_pv, "pv"}, std::pair{enable_hw, "hw"},
                            std::pair{enable_fw, "fw"}}) {
        if (!on) continue;
        if (!out.empty()) out += '+';
        out += name;
    }
    return out.empty() ? "none" : out;
}

Tensor ablate_forward(const SampleWindow& sample, Model& model, const AblationSpec& spec,
                      bool training, RngStream* rng) {
    spec.validate();
    SampleWindow masked = sample;
    if (!spec.enable_pv) std::fill(masked.pv.begin(), masked.pv.end(), 0.0);
    if (!spec.enable_hw) std::fill(masked.hw.begin(), masked.hw.end(), 0.0);
    if (!spec.enable_fw) std::fill(masked.fw.begin(), masked.fw.end(), 0.0);
    return model_forward(masked, model, training, rng);
}

}  // namespace matnet
