#include "csitk/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "csitk/errors.hpp"
#include "csitk/rng.hpp"

namespace csitk::train {
namespace {

using preprocess::AttentionMask;
using preprocess::FeatureMatrix;
using preprocess::MaskMatrix;
using preprocess::MaskSpec;

Tensor inverted_mask_tensor(const MaskMatrix& m) {
  Tensor t = Tensor::zeros({m.n_s, m.d});
  for (size_t i = 0; i < m.data.size(); ++i) t.values[i] = m.data[i] ? 0.0 : 1.0;
  return t;
}

void shuffle_indices(std::vector<int>& idx, SplitMix64& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
}

}  // namespace

void TrainConfig::validate() const {
  // lr = 0 is a legal degenerate run (params stay frozen); only reject signs
  // that would ascend the loss.
  if (learning_rate < 0.0) throw ConfigError("TrainConfig: learning rate must be >= 0");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
}

double mse_metric(const Tensor& x, const Tensor& x_hat, const Tensor* scope) {
  if (!x.same_shape(x_hat))
    throw ShapeError("mse_metric: shapes " + x.shape_str() + " vs " + x_hat.shape_str());
  if (scope && !scope->same_shape(x))
    throw ShapeError("mse_metric: scope shape " + scope->shape_str() + " vs " + x.shape_str());
  double total = 0.0;
  double count = 0.0;
  for (size_t i = 0; i < x.values.size(); ++i) {
    const double w = scope ? scope->values[i] : 1.0;
    const double r = x.values[i] - x_hat.values[i];
    total += w * r * r;
    count += w;
  }
  if (count == 0.0) throw DegenerateInputError("mse_metric: empty scope");
  return total / count;
}

double mse_objective(const std::vector<Tensor>& x, const std::vector<Tensor>& x_hat) {
  if (x.empty() || x.size() != x_hat.size())
    throw ShapeError("mse_objective: batch size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!x[i].same_shape(x_hat[i])) throw ShapeError("mse_objective: sample shape mismatch");
    for (size_t k = 0; k < x[i].values.size(); ++k) {
      const double r = x[i].values[k] - x_hat[i].values[k];
      total += r * r;
    }
  }
  return total / static_cast<double>(x.size());
}

Tape::NodeId squared_residual_sum(Tape& tape, Tape::NodeId pred, const Tensor& target,
                                  const Tensor* scope) {
  const Tape::NodeId target_id = tape.leaf(target, false);
  const Tape::NodeId r = tape.sub(target_id, pred);
  Tape::NodeId sq = tape.mul(r, r);
  if (scope) sq = tape.mul(sq, tape.leaf(*scope, false));
  return tape.sum(sq);
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: param/grad count mismatch");
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    if (!theta.same_shape(grads[p])) throw ShapeError("sgd_step: grad shape mismatch");
    for (size_t i = 0; i < theta.values.size(); ++i) theta.values[i] -= lr * grads[p].values[i];
  }
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: param/grad count mismatch");
  if (state.m.empty()) {
    for (const Tensor* t : params) {
      state.m.push_back(Tensor::zeros(t->shape));
      state.v.push_back(Tensor::zeros(t->shape));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state size mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    if (!theta.same_shape(grads[p])) throw ShapeError("adam_step: grad shape mismatch");
    for (size_t i = 0; i < theta.values.size(); ++i) {
      const double g = grads[p].values[i];
      double& m = state.m[p].values[i];
      double& v = state.v[p].values[i];
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      theta.values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

TrainResult train(model::Trainable& m, const std::vector<FeatureMatrix>& samples,
                  const TrainConfig& cfg, AdamState* resume_state) {
  cfg.validate();
  if (samples.empty()) throw TrainingError("train: empty sample set");

  const std::vector<Tensor*> params = m.parameters();
  AdamState local_state;
  AdamState& state = resume_state ? *resume_state : local_state;

  const int n = static_cast<int>(samples.size());
  const int n_s = samples[0].n_s;
  const int d = samples[0].d();
  for (const FeatureMatrix& s : samples)
    if (s.n_s != n_s || s.d() != d) throw ShapeError("train: inconsistent sample shapes");

  TrainResult result;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(samples.size());
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    SplitMix64 shuffle_rng =
        substream(cfg.seed, {kShuffleStream, static_cast<uint64_t>(epoch)});
    shuffle_indices(order, shuffle_rng);

    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      // Ascending dataset order inside the batch keeps full-batch training
      // independent of the shuffle.
      std::sort(batch.begin(), batch.end());
      const double batch_n = static_cast<double>(batch.size());

      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (const Tensor* t : params) grads.push_back(Tensor::zeros(t->shape));

      double sq_total = 0.0;
      double count_total = 0.0;
      for (int idx : batch) {
        const FeatureMatrix& target = samples[static_cast<size_t>(idx)];
        MaskSpec spec = cfg.mask_spec;
        spec.seed = preprocess::mask_seed_for(
            cfg.mask_spec.seed,
            static_cast<uint64_t>(cfg.fresh_mask_each_epoch ? epoch : 0), idx);
        const MaskMatrix mask = preprocess::make_mask(spec, n_s, d);
        const FeatureMatrix masked = preprocess::apply_mask(target, mask);

        Tape tape;
        std::vector<Tape::NodeId> ids;
        ids.reserve(params.size());
        for (const Tensor* t : params) ids.push_back(tape.leaf(*t, true));

        const int capacity = m.sequence_capacity();
        if (capacity > 0 && capacity < n_s)
          throw ShapeError("train: sample length " + std::to_string(n_s) +
                           " exceeds model capacity " + std::to_string(capacity));
        const bool padded = capacity > n_s;
        AttentionMask attn;
        Tape::NodeId x;
        if (padded) {
          auto [pad_x, pad_mask] = preprocess::pad_and_attention_mask(masked, capacity);
          attn = std::move(pad_mask);
          x = tape.leaf(pad_x.data, false);
        } else {
          attn.data.assign(static_cast<size_t>(n_s), 1);
          x = tape.leaf(masked.data, false);
        }
        Tape::NodeId pred = m.forward_on_tape(tape, ids, x, attn);
        if (padded) pred = tape.slice_rows(pred, 0, n_s);
        if (!tape.value(pred).same_shape(target.data))
          throw ShapeError("train: prediction shape " + tape.value(pred).shape_str() +
                           " does not match target " + target.data.shape_str());

        Tensor scope;
        const Tensor* scope_ptr = nullptr;
        if (cfg.loss_scope == TrainConfig::LossScope::kMaskedOnly) {
          scope = inverted_mask_tensor(mask);
          scope_ptr = &scope;
        }
        const Tape::NodeId loss = squared_residual_sum(tape, pred, target.data, scope_ptr);
        tape.backward(loss);

        sq_total += tape.value(loss).values[0];
        count_total += scope_ptr ? [&] {
          double c = 0.0;
          for (double v : scope.values) c += v;
          return c;
        }()
                                 : static_cast<double>(target.data.values.size());
        for (size_t p = 0; p < params.size(); ++p) {
          const Tensor& g = tape.grad(ids[p]);
          for (size_t i = 0; i < g.values.size(); ++i) grads[p].values[i] += g.values[i];
        }
      }

      for (Tensor& g : grads)
        for (double& v : g.values) v /= batch_n;

      if (count_total == 0.0)
        throw TrainingError("train: loss scope selected no elements in batch");
      const double metric = sq_total / count_total;
      if (!std::isfinite(metric))
        throw TrainingError("train: non-finite loss at step " + std::to_string(step) +
                            " (diverging learning rate?)");

      if (cfg.optimizer == TrainConfig::Optimizer::kSgd)
        sgd_step(params, grads, cfg.learning_rate);
      else
        adam_step(params, grads, state, cfg.learning_rate);

      result.history.push_back({step, epoch, metric});
      ++step;
    }
  }
  return result;
}

Split split_dataset(const channel::Dataset& ds, double val_fraction, uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("split_dataset: val_fraction must be in [0, 1)");
  std::map<int, std::vector<int>> by_scenario;
  for (size_t i = 0; i < ds.tensors.size(); ++i)
    by_scenario[static_cast<int>(ds.tensors[i].scenario)].push_back(static_cast<int>(i));

  Split split;
  for (auto& [scenario, indices] : by_scenario) {
    SplitMix64 rng = substream(seed, {kSplitStream, static_cast<uint64_t>(scenario)});
    shuffle_indices(indices, rng);
    const int n_val = val_fraction == 0.0
                          ? 0
                          : std::max(1, static_cast<int>(std::floor(
                                            val_fraction * static_cast<double>(indices.size()))));
    for (size_t i = 0; i < indices.size(); ++i)
      (static_cast<int>(i) < n_val ? split.val_indices : split.train_indices)
          .push_back(indices[i]);
  }
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.val_indices.begin(), split.val_indices.end());
  return split;
}

}  // namespace csitk::train
