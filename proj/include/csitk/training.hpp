#pragma once

#include <cstdint>
#include <vector>

#include "csitk/channel.hpp"
#include "csitk/model.hpp"
#include "csitk/preprocess.hpp"
#include "csitk/tensor.hpp"

namespace csitk::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 20;
  enum class Optimizer { kSgd, kAdam };
  Optimizer optimizer = Optimizer::kAdam;
  preprocess::MaskSpec mask_spec = preprocess::MaskSpec::bernoulli(0.85, 1);
  uint64_t seed = 1;
  enum class LossScope { kAllPositions, kMaskedOnly };
  LossScope loss_scope = LossScope::kAllPositions;
  // Redraw stochastic masks every epoch (EveryKth is inherently fixed).
  bool fresh_mask_each_epoch = true;

  void validate() const;
};

struct StepRecord {
  int step = 0;   // global optimizer step, 0-based
  int epoch = 0;  // 0-based
  double loss = 0.0;  // per-element MSE over the batch (reported metric)
};

struct TrainResult {
  std::vector<StepRecord> history;
};

struct AdamState {
  std::vector<Tensor> m, v;
  int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Reported metric: mean squared residual per in-scope element. `scope` is an
// optional 0/1 tensor of the same shape; entries outside it contribute
// nothing and are excluded from the divisor.
double mse_metric(const Tensor& x, const Tensor& x_hat, const Tensor* scope = nullptr);

// Training objective (paper form): mean over the batch of the per-sample sum
// of squared residuals.
double mse_objective(const std::vector<Tensor>& x, const std::vector<Tensor>& x_hat);

// On-tape per-sample loss term: sum of squared residuals against a constant
// target, optionally restricted by a 0/1 scope tensor.
Tape::NodeId squared_residual_sum(Tape& tape, Tape::NodeId pred, const Tensor& target,
                                  const Tensor* scope = nullptr);

// theta <- theta - lr * g, exactly.
void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr);

// Bias-corrected Adam; state is created lazily on first use.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr);

// Algorithm-1 training loop: per batch, mask -> forward -> MSE -> backward ->
// update. Deterministic for a fixed (config, samples) pair; samples inside a
// batch are processed in ascending dataset order, so full-batch training is
// invariant to the shuffle. Throws TrainingError when the loss diverges.
TrainResult train(model::Trainable& m, const std::vector<preprocess::FeatureMatrix>& samples,
                  const TrainConfig& cfg, AdamState* resume_state = nullptr);

struct Split {
  std::vector<int> train_indices;
  std::vector<int> val_indices;
};

// Deterministic 90/10-style split, stratified per scenario.
Split split_dataset(const channel::Dataset& ds, double val_fraction, uint64_t seed);

}  // namespace csitk::train
