#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace csitk {

// Dense row-major tensor of 64-bit floats. Training runs in double
// precision; dataset files keep 32-bit storage.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> v);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> v);

  int64_t size() const { return static_cast<int64_t>(values.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const;
  int cols() const;

  double& at(int r, int c);
  double at(int r, int c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

// Reverse-mode autodiff tape over Tensor. The graph is append-only and
// acyclic by construction: an op's inputs always precede it, so walking
// ids in reverse is a reverse topological order and backward() visits
// each node exactly once.
class Tape {
 public:
  using NodeId = int;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId leaf(Tensor value, bool requires_grad = false);

  // Matrix products on rank-2 tensors. Backward: dA = dC * B^T, dB = A^T * dC.
  NodeId matmul(NodeId a, NodeId b);
  // a[m,k] * b[n,k]^T -> [m,n].
  NodeId matmul_nt(NodeId a, NodeId b);

  // Elementwise ops on identically shaped tensors.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);

  // x[m,n] + v[n] broadcast over rows.
  NodeId add_row_vector(NodeId x, NodeId v);
  NodeId scale(NodeId x, double s);

  // Row softmax with optional column validity mask. Invalid columns get
  // exactly zero weight (additive -inf logits); rows are stabilized by
  // max subtraction. A row with no valid column is an error.
  NodeId softmax_rows(NodeId x, const std::vector<uint8_t>* valid_cols = nullptr);

  // Per-row standardization followed by the affine gain/bias transform.
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);

  // Exact Gaussian-CDF GELU: x * Phi(x).
  NodeId gelu(NodeId x);
  // max(0, x); derivative at 0 is defined as 0.
  NodeId relu(NodeId x);

  NodeId concat_cols(const std::vector<NodeId>& xs);
  NodeId slice_rows(NodeId x, int row_begin, int row_end);
  NodeId reshape(NodeId x, std::vector<int> new_shape);

  // Sum of all entries -> scalar [1].
  NodeId sum(NodeId x);

  // Accumulates d(root)/d(node) into grad() for every contributing node.
  // root must be scalar. May be called more than once (grads accumulate).
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backprop;
  };

  NodeId push(Tensor value, bool requires_grad, std::function<void()> backprop);
  Tensor& grad_buf(NodeId id);

  std::vector<Node> nodes_;
};

// Max relative gradient error between the tape and central differences,
// evaluated per parameter element. The relative error of a pair (a, n)
// is |a - n| / (|a| + |n| + 1e-3).
struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_param = -1;
  int64_t worst_index = -1;
};

// build must add one leaf per entry of params (in order, requires_grad as
// given by the tape) and return a scalar node.
GradCheckResult grad_check(
    const std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>& build,
    const std::vector<Tensor>& params, double step = 1e-5);

}  // namespace csitk
