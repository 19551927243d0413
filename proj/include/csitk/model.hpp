#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csitk/preprocess.hpp"
#include "csitk/tensor.hpp"

namespace csitk::model {

struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int max_len = 16;
  int feature_dim = 32;  // d = 2*N_t*N_r
  bool plain_head = false;

  int d_k() const { return d_model / n_heads; }
  void validate() const;

  static ModelConfig desk();
  // 12 layers, 12 heads, d_model 768 for the full 64x64x4 dataset.
  static ModelConfig paper_scale();
};

struct LayerParams {
  std::vector<Tensor> w_q, w_k, w_v;  // per head, [d_model, d_k]
  Tensor w_o;                         // [h*d_k, d_model]
  Tensor ffn_w1, ffn_b1;              // [d_model, d_ff], [d_ff]
  Tensor ffn_w2, ffn_b2;              // [d_ff, d_model], [d_model]
  Tensor ln1_gain, ln1_bias;          // [d_model]
  Tensor ln2_gain, ln2_bias;          // [d_model]
};

struct ModelParams {
  Tensor time_embedding;            // [max_len, d_model]
  Tensor feature_w, feature_b;      // [d, d_model], [d_model]
  std::vector<LayerParams> layers;
  Tensor head_inter_w, head_inter_b;  // [d_model, d_model], [d_model]
  Tensor head_ln_gain, head_ln_bias;  // [d_model]
  Tensor head_out_w, head_out_b;      // [d_model, d], [d]

  // Fixed enumeration order shared by checkpoints, optimizers, and tape
  // lifting. F is called as f(name, tensor&).
  template <typename Self, typename F>
  static void visit_impl(Self& self, F&& f) {
    f("time_embedding", self.time_embedding);
    f("feature_w", self.feature_w);
    f("feature_b", self.feature_b);
    for (size_t l = 0; l < self.layers.size(); ++l) {
      auto& lp = self.layers[l];
      const std::string prefix = "layer" + std::to_string(l) + ".";
      for (size_t h = 0; h < lp.w_q.size(); ++h) {
        const std::string head = prefix + "head" + std::to_string(h) + ".";
        f(head + "w_q", lp.w_q[h]);
        f(head + "w_k", lp.w_k[h]);
        f(head + "w_v", lp.w_v[h]);
      }
      f(prefix + "w_o", lp.w_o);
      f(prefix + "ffn_w1", lp.ffn_w1);
      f(prefix + "ffn_b1", lp.ffn_b1);
      f(prefix + "ffn_w2", lp.ffn_w2);
      f(prefix + "ffn_b2", lp.ffn_b2);
      f(prefix + "ln1_gain", lp.ln1_gain);
      f(prefix + "ln1_bias", lp.ln1_bias);
      f(prefix + "ln2_gain", lp.ln2_gain);
      f(prefix + "ln2_bias", lp.ln2_bias);
    }
    f("head_inter_w", self.head_inter_w);
    f("head_inter_b", self.head_inter_b);
    f("head_ln_gain", self.head_ln_gain);
    f("head_ln_bias", self.head_ln_bias);
    f("head_out_w", self.head_out_w);
    f("head_out_b", self.head_out_b);
  }
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  int64_t count() const;
};

// Node-id mirror of ModelParams for graph building; `all` lists ids in visit
// order.
struct TapedLayer {
  std::vector<Tape::NodeId> w_q, w_k, w_v;
  Tape::NodeId w_o, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tape::NodeId ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct TapedParams {
  Tape::NodeId time_embedding, feature_w, feature_b;
  std::vector<TapedLayer> layers;
  Tape::NodeId head_inter_w, head_inter_b, head_ln_gain, head_ln_bias;
  Tape::NodeId head_out_w, head_out_b;
  std::vector<Tape::NodeId> all;
};

TapedParams lift_params(Tape& tape, const ModelParams& params, bool requires_grad);

// Z_0 = E_Time + x W_Feature + b_Feature.
Tape::NodeId embed(Tape& tape, Tape::NodeId x, const TapedParams& p);

// Masked multi-head self-attention (pre-residual output).
Tape::NodeId mhsa(Tape& tape, Tape::NodeId z, const TapedLayer& layer,
                  const preprocess::AttentionMask& attn_mask, int n_heads, int d_k);

// Post-LN encoder layer: z = LN(z + MHSA(z)); z = LN(z + FFN(z)).
Tape::NodeId encoder_layer(Tape& tape, Tape::NodeId z, const TapedLayer& layer,
                           const preprocess::AttentionMask& attn_mask, int n_heads, int d_k);

// Reconstruction head: LN(GELU(z W_inter + b)) W_Out + b_Out, or the plain
// affine map when plain_head is set.
Tape::NodeId head(Tape& tape, Tape::NodeId z, const TapedParams& p, bool plain_head);

// Interface shared by the transformer and the trainable baselines.
class Trainable {
 public:
  virtual ~Trainable() = default;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual std::vector<Tensor*> parameters() = 0;
  // Fixed input row count the model expects (L_max); 0 = accepts any [n_s, d].
  virtual int sequence_capacity() const { return 0; }
  virtual Tape::NodeId forward_on_tape(Tape& tape, const std::vector<Tape::NodeId>& param_ids,
                                       Tape::NodeId x,
                                       const preprocess::AttentionMask& attn_mask) const = 0;
  // Inference convenience; runs the tape with frozen parameters.
  Tensor forward(const Tensor& x, const preprocess::AttentionMask& attn_mask);
};

class TransformerModel : public Trainable {
 public:
  TransformerModel(ModelConfig config, uint64_t seed);
  TransformerModel(ModelConfig config, ModelParams params);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  std::vector<std::string> parameter_names() const override;
  std::vector<Tensor*> parameters() override;
  int sequence_capacity() const override { return config_.max_len; }
  Tape::NodeId forward_on_tape(Tape& tape, const std::vector<Tape::NodeId>& param_ids,
                               Tape::NodeId x,
                               const preprocess::AttentionMask& attn_mask) const override;

 private:
  ModelConfig config_;
  ModelParams params_;
};

ModelParams init_params(const ModelConfig& config, uint64_t seed);

}  // namespace csitk::model
