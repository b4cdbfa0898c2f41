#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "matnet/data.hpp"
#include "matnet/ops.hpp"
#include "matnet/rng.hpp"
#include "matnet/tensor.hpp"

namespace matnet {

enum class EncoderKind { attention, lstm, gru, bilstm, bigru };
enum class InterpolationMode { fixed, learnable };
enum class AttentionScale { per_head, full_width };
enum class Branch { pv, hw, fw };

EncoderKind encoder_kind_from_string(std::string_view name);
std::string_view to_string(EncoderKind kind);
InterpolationMode interpolation_mode_from_string(std::string_view name);
std::string_view to_string(InterpolationMode mode);
AttentionScale attention_scale_from_string(std::string_view name);
std::string_view to_string(AttentionScale scale);
std::string_view branch_name(Branch branch);

struct ModelConfig {
    std::size_t d_model = 512;
    std::size_t heads = 8;
    std::size_t layers = 3;
    std::size_t step_in = 24;
    std::size_t step_out = 24;
    std::size_t m_factor = 0;     // interpolation width M; 0 means step_in
    std::size_t ffn_dim = 0;      // 0 means 4*d_model
    std::size_t weather_dim = kEncodedWeatherWidth;
    double dropout_p = 0.2;
    EncoderKind encoder = EncoderKind::attention;
    InterpolationMode interpolation = InterpolationMode::fixed;
    AttentionScale attention_scale = AttentionScale::per_head;
    bool encoder_dropout = false;   // dropout inside encoder sublayers as well
    bool embed_baselines = false;   // conv embeddings in front of recurrent encoders
    double output_bias_init = -2.1972245773362196;  // logit(0.1)

    std::size_t m() const { return m_factor == 0 ? step_in : m_factor; }
    std::size_t ffn() const { return ffn_dim == 0 ? 4 * d_model : ffn_dim; }
    std::size_t d_head() const { return d_model / heads; }
    bool is_recurrent() const { return encoder != EncoderKind::attention; }
    bool is_bidirectional() const {
        return encoder == EncoderKind::bilstm || encoder == EncoderKind::bigru;
    }

    void validate() const;  // throws ConfigError
};

// Ordered parameter registry; iteration order is the creation order, which is
// also the checkpoint and optimizer-state order.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor tensor);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::size_t size() const { return items_.size(); }
    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    void zero_grads();
    std::size_t total_elements() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Model {
    ModelConfig config;
    ParamStore params;
};

Model build_model(const ModelConfig& config, RngStream& init_rng);
Model build_model(const ModelConfig& config, std::uint64_t seed);

// Interleaved sin/cos positional table, [steps x d_model], no gradient.
Tensor positional_encoding(std::size_t steps, std::size_t d_model);

// Quadratic interpolation weights, [steps x m]: w[t][j] = (1 - |s - (j+1)|/m)^2
// with s = (t+1)/steps * m.
Tensor interpolation_weights(std::size_t steps, std::size_t m);

// softmax(q k^T / sqrt(scale_width)) v for 2-D q, k, v.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t scale_width);

// Parameter bundles are cheap views into the store.
struct AttentionLayerParams {
    std::vector<Tensor> wq, wk, wv;  // one [d_model x d_head] matrix per head
    Tensor wo;                       // [heads*d_head x d_model]
    Tensor ln1_gain, ln1_offset;
    Tensor ln2_gain, ln2_offset;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct LstmParams {
    Tensor w_ii, b_ii, w_hi, b_hi;
    Tensor w_if, b_if, w_hf, b_hf;
    Tensor w_ig, b_ig, w_hg, b_hg;
    Tensor w_io, b_io, w_ho, b_ho;
};

struct GruParams {
    Tensor w_ir, b_ir, w_hr, b_hr;
    Tensor w_iz, b_iz, w_hz, b_hz;
    Tensor w_in, b_in, w_hn, b_hn;
};

AttentionLayerParams attention_layer_params(Model& model, Branch branch, std::size_t layer);
LstmParams lstm_params(Model& model, Branch branch, std::string_view direction);
GruParams gru_params(Model& model, Branch branch, std::string_view direction);

Tensor multi_head_attention(const Tensor& x, const AttentionLayerParams& p,
                            const ModelConfig& config);

// Pre-norm transformer block: x1 = x + MHA(LN(x)); out = x1 + FFN(LN(x1)).
Tensor encoder_layer(const Tensor& x, const AttentionLayerParams& p, const ModelConfig& config,
                     bool training = false, RngStream* rng = nullptr);

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmParams& p);
Tensor gru_step(const Tensor& x, const Tensor& h_prev, const GruParams& p);

// Conv embedding producing [steps x d_model]; pv uses kernel 3 with padding 1,
// weather branches use a pointwise kernel.
Tensor embed_branch(const Tensor& x, Model& model, Branch branch);

// U = W^T S collapses [steps x d_model] to [m x d_model]; the last row is the
// branch representation.
Tensor dense_interpolate(const Tensor& s, const Tensor& w);

// Branch input -> d_model representation vector, attention path.
Tensor encode_branch_attention(const Tensor& x, Model& model, Branch branch, bool training,
                               RngStream* rng);

// Branch input -> d_model representation vector, recurrent path. Bidirectional
// kinds run d_model/2 cells each way and concatenate the final states.
Tensor encode_branch_recurrent(const Tensor& x, Model& model, Branch branch);

// Two-level fusion head: concat(pv,hw) -> dropout -> dense+relu,
// concat(.,fw) -> dropout -> dense+relu, dropout -> linear -> sigmoid.
Tensor fusion_forward(const Tensor& pv_rep, const Tensor& hw_rep, const Tensor& fw_rep,
                      Model& model, bool training, RngStream* rng);

// Full forward pass for any encoder kind; output is [step_out] in (0,1).
Tensor model_forward(const SampleWindow& sample, Model& model, bool training = false,
                     RngStream* rng = nullptr);

struct AblationSpec {
    bool enable_pv = true;
    bool enable_hw = true;
    bool enable_fw = true;

    void validate() const;  // at least one branch must stay enabled
    std::string label() const;  // e.g. "pv+fw"
};

// Forward pass with disabled branch inputs replaced by zeros before the
// encoder, leaving the architecture untouched.
Tensor ablate_forward(const SampleWindow& sample, Model& model, const AblationSpec& spec,
                      bool training = false, RngStream* rng = nullptr);

// Branch input tensors from a sample, [steps x channels], without gradients.
Tensor branch_input(const SampleWindow& sample, Branch branch, const ModelConfig& config);

}  // namespace matnet
