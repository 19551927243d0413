#include "csitk/model.hpp"

#include <cmath>

#include "csitk/errors.hpp"
#include "csitk/rng.hpp"

namespace csitk::model {
namespace {

Tensor uniform_init(std::vector<int> shape, int fan_in, SplitMix64 rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values) v = rng.next_uniform(-bound, bound);
  return t;
}

Tensor normal_init(std::vector<int> shape, double std_dev, SplitMix64 rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = rng.next_normal() * std_dev;
  return t;
}

// Mirrors ModelParams::visit order over a flat id list.
TapedParams index_params(const ModelConfig& cfg, const std::vector<Tape::NodeId>& ids) {
  TapedParams tp;
  size_t k = 0;
  auto next = [&]() {
    if (k >= ids.size()) throw ShapeError("forward_on_tape: too few parameter ids");
    return ids[k++];
  };
  tp.time_embedding = next();
  tp.feature_w = next();
  tp.feature_b = next();
  tp.layers.resize(static_cast<size_t>(cfg.n_layers));
  for (TapedLayer& lp : tp.layers) {
    lp.w_q.resize(static_cast<size_t>(cfg.n_heads));
    lp.w_k.resize(static_cast<size_t>(cfg.n_heads));
    lp.w_v.resize(static_cast<size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
      lp.w_q[static_cast<size_t>(h)] = next();
      lp.w_k[static_cast<size_t>(h)] = next();
      lp.w_v[static_cast<size_t>(h)] = next();
    }
    lp.w_o = next();
    lp.ffn_w1 = next();
    lp.ffn_b1 = next();
    lp.ffn_w2 = next();
    lp.ffn_b2 = next();
    lp.ln1_gain = next();
    lp.ln1_bias = next();
    lp.ln2_gain = next();
    lp.ln2_bias = next();
  }
  tp.head_inter_w = next();
  tp.head_inter_b = next();
  tp.head_ln_gain = next();
  tp.head_ln_bias = next();
  tp.head_out_w = next();
  tp.head_out_b = next();
  if (k != ids.size()) throw ShapeError("forward_on_tape: too many parameter ids");
  tp.all = ids;
  return tp;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_len <= 0 ||
      feature_dim <= 0)
    throw ConfigError("ModelConfig: all dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("ModelConfig: d_model (" + std::to_string(d_model) +
                      ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.d_model = 768;
  c.n_layers = 12;
  c.n_heads = 12;
  c.d_ff = 3072;
  c.max_len = 64;
  c.feature_dim = 512;
  return c;
}

int64_t ModelParams::count() const {
  int64_t n = 0;
  visit([&](const std::string&, const Tensor& t) { n += static_cast<int64_t>(t.values.size()); });
  return n;
}

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
  config.validate();
  const int dm = config.d_model, dk = config.d_k(), dff = config.d_ff, d = config.feature_dim;
  uint64_t k = 0;
  auto rng = [&]() { return substream(seed, {kInitStream, k++}); };

  ModelParams p;
  p.time_embedding = normal_init({config.max_len, dm}, 0.02, rng());
  p.feature_w = uniform_init({d, dm}, d, rng());
  p.feature_b = Tensor::zeros({dm});
  p.layers.resize(static_cast<size_t>(config.n_layers));
  for (LayerParams& lp : p.layers) {
    for (int h = 0; h < config.n_heads; ++h) {
      lp.w_q.push_back(uniform_init({dm, dk}, dm, rng()));
      lp.w_k.push_back(uniform_init({dm, dk}, dm, rng()));
      lp.w_v.push_back(uniform_init({dm, dk}, dm, rng()));
    }
    lp.w_o = uniform_init({config.n_heads * dk, dm}, config.n_heads * dk, rng());
    lp.ffn_w1 = uniform_init({dm, dff}, dm, rng());
    lp.ffn_b1 = Tensor::zeros({dff});
    lp.ffn_w2 = uniform_init({dff, dm}, dff, rng());
    lp.ffn_b2 = Tensor::zeros({dm});
    lp.ln1_gain = Tensor::full({dm}, 1.0);
    lp.ln1_bias = Tensor::zeros({dm});
    lp.ln2_gain = Tensor::full({dm}, 1.0);
    lp.ln2_bias = Tensor::zeros({dm});
  }
  p.head_inter_w = uniform_init({dm, dm}, dm, rng());
  p.head_inter_b = Tensor::zeros({dm});
  p.head_ln_gain = Tensor::full({dm}, 1.0);
  p.head_ln_bias = Tensor::zeros({dm});
  p.head_out_w = uniform_init({dm, d}, dm, rng());
  p.head_out_b = Tensor::zeros({d});
  return p;
}

TapedParams lift_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  std::vector<Tape::NodeId> ids;
  params.visit([&](const std::string&, const Tensor& t) {
    ids.push_back(tape.leaf(t, requires_grad));
  });
  ModelConfig cfg;
  cfg.max_len = params.time_embedding.rows();
  cfg.d_model = params.time_embedding.cols();
  cfg.n_layers = static_cast<int>(params.layers.size());
  cfg.n_heads = params.layers.empty() ? 1 : static_cast<int>(params.layers[0].w_q.size());
  cfg.d_ff = params.layers.empty() ? 1 : static_cast<int>(params.layers[0].ffn_b1.size());
  cfg.feature_dim = params.head_out_w.cols();
  return index_params(cfg, ids);
}

Tape::NodeId embed(Tape& tape, Tape::NodeId x, const TapedParams& p) {
  const Tape::NodeId projected =
      tape.add_row_vector(tape.matmul(x, p.feature_w), p.feature_b);
  return tape.add(projected, p.time_embedding);
}

Tape::NodeId mhsa(Tape& tape, Tape::NodeId z, const TapedLayer& layer,
                  const preprocess::AttentionMask& attn_mask, int n_heads, int d_k) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
  std::vector<Tape::NodeId> heads;
  heads.reserve(static_cast<size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    const Tape::NodeId q = tape.matmul(z, layer.w_q[static_cast<size_t>(h)]);
    const Tape::NodeId k = tape.matmul(z, layer.w_k[static_cast<size_t>(h)]);
    const Tape::NodeId v = tape.matmul(z, layer.w_v[static_cast<size_t>(h)]);
    const Tape::NodeId scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt_dk);
    const Tape::NodeId weights = tape.softmax_rows(scores, &attn_mask.data);
    heads.push_back(tape.matmul(weights, v));
  }
  const Tape::NodeId concat = n_heads == 1 ? heads[0] : tape.concat_cols(heads);
  return tape.matmul(concat, layer.w_o);
}

Tape::NodeId encoder_layer(Tape& tape, Tape::NodeId z, const TapedLayer& layer,
                           const preprocess::AttentionMask& attn_mask, int n_heads, int d_k) {
  const Tape::NodeId attn = mhsa(tape, z, layer, attn_mask, n_heads, d_k);
  z = tape.layer_norm(tape.add(z, attn), layer.ln1_gain, layer.ln1_bias);
  const Tape::NodeId hidden =
      tape.relu(tape.add_row_vector(tape.matmul(z, layer.ffn_w1), layer.ffn_b1));
  const Tape::NodeId ffn = tape.add_row_vector(tape.matmul(hidden, layer.ffn_w2), layer.ffn_b2);
  return tape.layer_norm(tape.add(z, ffn), layer.ln2_gain, layer.ln2_bias);
}

Tape::NodeId head(Tape& tape, Tape::NodeId z, const TapedParams& p, bool plain_head) {
  if (plain_head) return tape.add_row_vector(tape.matmul(z, p.head_out_w), p.head_out_b);
  const Tape::NodeId inter =
      tape.gelu(tape.add_row_vector(tape.matmul(z, p.head_inter_w), p.head_inter_b));
  const Tape::NodeId normed = tape.layer_norm(inter, p.head_ln_gain, p.head_ln_bias);
  return tape.add_row_vector(tape.matmul(normed, p.head_out_w), p.head_out_b);
}

Tensor Trainable::forward(const Tensor& x, const preprocess::AttentionMask& attn_mask) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  for (Tensor* t : parameters()) ids.push_back(tape.leaf(*t, false));
  const Tape::NodeId out = forward_on_tape(tape, ids, tape.leaf(x, false), attn_mask);
  return tape.value(out);
}

TransformerModel::TransformerModel(ModelConfig config, uint64_t seed)
    : config_(config), params_(init_params(config, seed)) {}

TransformerModel::TransformerModel(ModelConfig config, ModelParams params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

std::vector<std::string> TransformerModel::parameter_names() const {
  std::vector<std::string> names;
  params_.visit([&](const std::string& n, const Tensor&) { names.push_back(n); });
  return names;
}

std::vector<Tensor*> TransformerModel::parameters() {
  std::vector<Tensor*> out;
  params_.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

Tape::NodeId TransformerModel::forward_on_tape(Tape& tape,
                                               const std::vector<Tape::NodeId>& param_ids,
                                               Tape::NodeId x,
                                               const preprocess::AttentionMask& attn_mask) const {
  const Tensor& xin = tape.value(x);
  if (xin.shape != std::vector<int>{config_.max_len, config_.feature_dim})
    throw ShapeError("transformer forward: input shape " + xin.shape_str() + ", want [" +
                     std::to_string(config_.max_len) + "," + std::to_string(config_.feature_dim) +
                     "]");
  if (static_cast<int>(attn_mask.data.size()) != config_.max_len)
    throw ShapeError("transformer forward: attention mask length mismatch");

  const TapedParams tp = index_params(config_, param_ids);
  Tape::NodeId z = embed(tape, x, tp);
  for (int l = 0; l < config_.n_layers; ++l)
    z = encoder_layer(tape, z, tp.layers[static_cast<size_t>(l)], attn_mask, config_.n_heads,
                      config_.d_k());
  return head(tape, z, tp, config_.plain_head);
}

}  // namespace csitk::model
