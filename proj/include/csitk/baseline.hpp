#pragma once

#include <cstdint>

#include "csitk/model.hpp"
#include "csitk/tensor.hpp"

namespace csitk::baseline {

// Closed-form ridge regression on flattened matrices; the last weight row is
// the bias term (inputs are augmented with a constant-1 column).
struct LinRegModel {
  Tensor weights;  // [D_in + 1, D_out]
  double ridge_lambda = 1e-8;
};

// Solves (X'X + lambda I) w = X'Y on the augmented X. Uses the dual form
// X'(XX' + lambda I)^{-1} Y when N < D, which also yields the minimum-norm
// solution as lambda -> 0.
LinRegModel linreg_fit(const Tensor& x, const Tensor& y, double lambda = 1e-8);

Tensor linreg_predict(const LinRegModel& m, const Tensor& x);

// One-hidden-layer ReLU MLP over flattened feature matrices. Implements
// Trainable so it shares the transformer's training loop, loss, and masking.
class MlpModel : public model::Trainable {
 public:
  MlpModel(int n_s, int d, int hidden, uint64_t seed);

  int n_s() const { return n_s_; }
  int d() const { return d_; }
  int hidden() const { return hidden_; }

  std::vector<std::string> parameter_names() const override;
  std::vector<Tensor*> parameters() override;
  Tape::NodeId forward_on_tape(Tape& tape, const std::vector<Tape::NodeId>& param_ids,
                               Tape::NodeId x,
                               const preprocess::AttentionMask& attn_mask) const override;

  Tensor w1, b1;  // [n_s*d, hidden], [hidden]
  Tensor w2, b2;  // [hidden, n_s*d], [n_s*d]

 private:
  int n_s_ = 0, d_ = 0, hidden_ = 0;
};

}  // namespace csitk::baseline
