#include "csitk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "csitk/errors.hpp"

namespace csitk {

namespace {

int64_t shape_product(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in tensor shape");
    n *= d;
  }
  return n;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gauss_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
double gauss_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

}  // namespace

Tensor::Tensor(std::vector<int> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (shape_product(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("tensor value count does not match shape");
}

Tensor Tensor::zeros(std::vector<int> shape) {
  const int64_t n = shape_product(shape);
  Tensor t;
  t.shape = std::move(shape);
  t.values.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.values.begin(), t.values.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor({1, n}, std::move(v));
}

int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not rank 2");
  return shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not rank 2");
  return shape[1];
}

double& Tensor::at(int r, int c) {
  return values[static_cast<size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return values[static_cast<size_t>(r) * cols() + c];
}

bool Tensor::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tape::NodeId Tape::push(Tensor value, bool requires_grad, std::function<void()> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.grad.values.empty())
    throw ShapeError("grad(): node has no accumulated gradient (run backward first)");
  return n.grad;
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const int m = ta.rows(), k = ta.cols(), n = tb.cols();
  if (tb.rows() != k)
    throw ShapeError("matmul: inner dimensions differ " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = Tensor::zeros({m, n});
  const double* pa = ta.values.data();
  const double* pb = tb.values.data();
  double* po = out.values.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = pa[static_cast<size_t>(i) * k + p];
      const double* brow = pb + static_cast<size_t>(p) * n;
      double* orow = po + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, a, b, m, k, n]() {
      const Tensor& dc = nodes_[id].grad;
      if (nodes_[a].requires_grad) {
        Tensor& da = grad_buf(a);
        const double* pdc = dc.values.data();
        const double* pb2 = nodes_[b].value.values.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* dcrow = pdc + static_cast<size_t>(i) * n;
            const double* brow = pb2 + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
            da.values[static_cast<size_t>(i) * k + p] += acc;
          }
      }
      if (nodes_[b].requires_grad) {
        Tensor& db = grad_buf(b);
        const double* pdc = dc.values.data();
        const double* pa2 = nodes_[a].value.values.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const double av = pa2[static_cast<size_t>(i) * k + p];
            const double* dcrow = pdc + static_cast<size_t>(i) * n;
            double* dbrow = db.values.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
          }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const int m = ta.rows(), k = ta.cols(), n = tb.rows();
  if (tb.cols() != k)
    throw ShapeError("matmul_nt: inner dimensions differ " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* arow = ta.values.data() + static_cast<size_t>(i) * k;
      const double* brow = tb.values.data() + static_cast<size_t>(j) * k;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out.values[static_cast<size_t>(i) * n + j] = acc;
    }
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    // c = a b^T: da = dc * b, db = dc^T * a.
    nodes_[id].backprop = [this, id, a, b, m, k, n]() {
      const Tensor& dc = nodes_[id].grad;
      if (nodes_[a].requires_grad) {
        Tensor& da = grad_buf(a);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double d = dc.values[static_cast<size_t>(i) * n + j];
            const double* brow = nodes_[b].value.values.data() + static_cast<size_t>(j) * k;
            double* darow = da.values.data() + static_cast<size_t>(i) * k;
            for (int p = 0; p < k; ++p) darow[p] += d * brow[p];
          }
      }
      if (nodes_[b].requires_grad) {
        Tensor& db = grad_buf(b);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double d = dc.values[static_cast<size_t>(i) * n + j];
            const double* arow = nodes_[a].value.values.data() + static_cast<size_t>(i) * k;
            double* dbrow = db.values.data() + static_cast<size_t>(j) * k;
            for (int p = 0; p < k; ++p) dbrow[p] += d * arow[p];
          }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw ShapeError("add: shapes differ " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += tb.values[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, a, b]() {
      const Tensor& dc = nodes_[id].grad;
      for (NodeId p : {a, b}) {
        if (!nodes_[p].requires_grad) continue;
        Tensor& dp = grad_buf(p);
        for (size_t i = 0; i < dc.values.size(); ++i) dp.values[i] += dc.values[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw ShapeError("sub: shapes differ " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] -= tb.values[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, a, b]() {
      const Tensor& dc = nodes_[id].grad;
      if (nodes_[a].requires_grad) {
        Tensor& da = grad_buf(a);
        for (size_t i = 0; i < dc.values.size(); ++i) da.values[i] += dc.values[i];
      }
      if (nodes_[b].requires_grad) {
        Tensor& db = grad_buf(b);
        for (size_t i = 0; i < dc.values.size(); ++i) db.values[i] -= dc.values[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw ShapeError("mul: shapes differ " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= tb.values[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, a, b]() {
      const Tensor& dc = nodes_[id].grad;
      if (nodes_[a].requires_grad) {
        Tensor& da = grad_buf(a);
        const Tensor& vb = nodes_[b].value;
        for (size_t i = 0; i < dc.values.size(); ++i) da.values[i] += dc.values[i] * vb.values[i];
      }
      if (nodes_[b].requires_grad) {
        Tensor& db = grad_buf(b);
        const Tensor& va = nodes_[a].value;
        for (size_t i = 0; i < dc.values.size(); ++i) db.values[i] += dc.values[i] * va.values[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::add_row_vector(NodeId x, NodeId v) {
  const Tensor& tx = value(x);
  const Tensor& tv = value(v);
  const int m = tx.rows(), n = tx.cols();
  if (static_cast<int64_t>(n) != tv.size())
    throw ShapeError("add_row_vector: vector length " + tv.shape_str() + " vs cols of " + tx.shape_str());
  Tensor out = tx;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.values[static_cast<size_t>(i) * n + j] += tv.values[j];
  const bool rg = requires_grad(x) || requires_grad(v);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x, v, m, n]() {
      const Tensor& dc = nodes_[id].grad;
      if (nodes_[x].requires_grad) {
        Tensor& dx = grad_buf(x);
        for (size_t i = 0; i < dc.values.size(); ++i) dx.values[i] += dc.values[i];
      }
      if (nodes_[v].requires_grad) {
        Tensor& dv = grad_buf(v);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) dv.values[j] += dc.values[static_cast<size_t>(i) * n + j];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::scale(NodeId x, double s) {
  Tensor out = value(x);
  for (double& v : out.values) v *= s;
  const bool rg = requires_grad(x);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x, s]() {
      const Tensor& dc = nodes_[id].grad;
      Tensor& dx = grad_buf(x);
      for (size_t i = 0; i < dc.values.size(); ++i) dx.values[i] += s * dc.values[i];
    };
  }
  return id;
}

Tape::NodeId Tape::softmax_rows(NodeId x, const std::vector<uint8_t>* valid_cols) {
  const Tensor& tx = value(x);
  const int m = tx.rows(), n = tx.cols();
  std::vector<uint8_t> mask;
  if (valid_cols) {
    if (static_cast<int>(valid_cols->size()) != n)
      throw ShapeError("softmax_rows: mask length does not match column count");
    mask = *valid_cols;
  } else {
    mask.assign(n, 1);
  }
  int valid_count = 0;
  for (uint8_t b : mask) valid_count += (b != 0);
  if (valid_count == 0) throw DegenerateInputError("softmax_rows: no valid columns");

  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (mask[j] && tx.at(i, j) > mx) mx = tx.at(i, j);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      const double e = std::exp(tx.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < n; ++j)
      if (mask[j]) out.at(i, j) /= denom;
  }
  const bool rg = requires_grad(x);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x, m, n]() {
      const Tensor& y = nodes_[id].value;
      const Tensor& dy = nodes_[id].grad;
      Tensor& dx = grad_buf(x);
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dy.at(i, j) * y.at(i, j);
        for (int j = 0; j < n; ++j)
          dx.at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
      }
    };
  }
  return id;
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Tensor& tx = value(x);
  const int m = tx.rows(), n = tx.cols();
  if (value(gain).size() != n || value(bias).size() != n)
    throw ShapeError("layer_norm: gain/bias length must equal column count");
  Tensor normed = Tensor::zeros({m, n});
  std::vector<double> inv_std(m);
  for (int i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += tx.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = tx.at(i, j) - mean;
      var += d * d;
    }
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (int j = 0; j < n; ++j) normed.at(i, j) = (tx.at(i, j) - mean) * is;
  }
  Tensor out = Tensor::zeros({m, n});
  const Tensor& g = value(gain);
  const Tensor& b = value(bias);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = normed.at(i, j) * g.values[j] + b.values[j];

  const bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x, gain, bias, m, n, normed, inv_std]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& g = nodes_[gain].value;
      if (nodes_[gain].requires_grad) {
        Tensor& dg = grad_buf(gain);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) dg.values[j] += dy.at(i, j) * normed.at(i, j);
      }
      if (nodes_[bias].requires_grad) {
        Tensor& db = grad_buf(bias);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) db.values[j] += dy.at(i, j);
      }
      if (nodes_[x].requires_grad) {
        Tensor& dx = grad_buf(x);
        for (int i = 0; i < m; ++i) {
          // dxhat = dy * g; dx = (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat)) * inv_std
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (int j = 0; j < n; ++j) {
            const double dxh = dy.at(i, j) * g.values[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * normed.at(i, j);
          }
          mean_dxhat /= n;
          mean_dxhat_xhat /= n;
          for (int j = 0; j < n; ++j) {
            const double dxh = dy.at(i, j) * g.values[j];
            dx.at(i, j) += (dxh - mean_dxhat - normed.at(i, j) * mean_dxhat_xhat) * inv_std[i];
          }
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::gelu(NodeId x) {
  const Tensor& tx = value(x);
  Tensor out = tx;
  for (double& v : out.values) v = v * gauss_cdf(v);
  const bool rg = requires_grad(x);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& vx = nodes_[x].value;
      Tensor& dx = grad_buf(x);
      for (size_t i = 0; i < dy.values.size(); ++i) {
        const double v = vx.values[i];
        dx.values[i] += dy.values[i] * (gauss_cdf(v) + v * gauss_pdf(v));
      }
    };
  }
  return id;
}

Tape::NodeId Tape::relu(NodeId x) {
  const Tensor& tx = value(x);
  Tensor out = tx;
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  const bool rg = requires_grad(x);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x]() {
      const Tensor& dy = nodes_[id].grad;
      const Tensor& vx = nodes_[x].value;
      Tensor& dx = grad_buf(x);
      for (size_t i = 0; i < dy.values.size(); ++i)
        if (vx.values[i] > 0.0) dx.values[i] += dy.values[i];
    };
  }
  return id;
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: empty input list");
  const int m = value(xs[0]).rows();
  int total = 0;
  bool rg = false;
  for (NodeId x : xs) {
    if (value(x).rows() != m) throw ShapeError("concat_cols: row counts differ");
    total += value(x).cols();
    rg = rg || requires_grad(x);
  }
  Tensor out = Tensor::zeros({m, total});
  int off = 0;
  for (NodeId x : xs) {
    const Tensor& tx = value(x);
    const int n = tx.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(i, off + j) = tx.at(i, j);
    off += n;
  }
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    std::vector<NodeId> parents = xs;
    nodes_[id].backprop = [this, id, parents, m, total]() {
      const Tensor& dc = nodes_[id].grad;
      int off2 = 0;
      for (NodeId x : parents) {
        const int n = nodes_[x].value.cols();
        if (nodes_[x].requires_grad) {
          Tensor& dx = grad_buf(x);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) dx.at(i, j) += dc.values[static_cast<size_t>(i) * total + off2 + j];
        }
        off2 += n;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::slice_rows(NodeId x, int row_begin, int row_end) {
  const Tensor& tx = value(x);
  const int m = tx.rows(), n = tx.cols();
  if (row_begin < 0 || row_end > m || row_begin >= row_end)
    throw ShapeError("slice_rows: invalid row range");
  const int rows = row_end - row_begin;
  Tensor out = Tensor::zeros({rows, n});
  std::copy(tx.values.begin() + static_cast<size_t>(row_begin) * n,
            tx.values.begin() + static_cast<size_t>(row_end) * n, out.values.begin());
  const bool rg = requires_grad(x);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x, row_begin, n, rows]() {
      const Tensor& dc = nodes_[id].grad;
      Tensor& dx = grad_buf(x);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < n; ++j)
          dx.values[static_cast<size_t>(row_begin + i) * n + j] += dc.values[static_cast<size_t>(i) * n + j];
    };
  }
  return id;
}

Tape::NodeId Tape::reshape(NodeId x, std::vector<int> new_shape) {
  const Tensor& tx = value(x);
  Tensor out;
  out.shape = std::move(new_shape);
  if (shape_product(out.shape) != tx.size())
    throw ShapeError("reshape: element count mismatch");
  out.values = tx.values;
  const bool rg = requires_grad(x);
  NodeId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x]() {
      const Tensor& dc = nodes_[id].grad;
      Tensor& dx = grad_buf(x);
      for (size_t i = 0; i < dc.values.size(); ++i) dx.values[i] += dc.values[i];
    };
  }
  return id;
}

Tape::NodeId Tape::sum(NodeId x) {
  const Tensor& tx = value(x);
  double acc = 0.0;
  for (double v : tx.values) acc += v;
  const bool rg = requires_grad(x);
  NodeId id = push(Tensor::scalar(acc), rg, nullptr);
  if (rg) {
    nodes_[id].backprop = [this, id, x]() {
      const double d = nodes_[id].grad.values[0];
      Tensor& dx = grad_buf(x);
      for (double& v : dx.values) v += d;
    };
  }
  return id;
}

void Tape::backward(NodeId root) {
  if (value(root).size() != 1)
    throw ShapeError("backward: root node is not a scalar");
  // Interior seeds are scratch for this pass; only leaf grads accumulate
  // across repeated backward calls.
  for (Node& n : nodes_)
    if (n.backprop) n.grad = Tensor();
  grad_buf(root).values[0] += 1.0;
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backprop) continue;
    if (n.grad.values.empty()) continue;  // not reached from root
    n.backprop();
  }
  // A trainable leaf the root never touched has gradient exactly zero.
  for (Node& n : nodes_)
    if (!n.backprop && n.requires_grad && n.grad.values.empty())
      n.grad = Tensor::zeros(n.value.shape);
}

GradCheckResult grad_check(
    const std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>& build,
    const std::vector<Tensor>& params, double step) {
  // Analytic gradients from one tape pass.
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    ids.reserve(params.size());
    for (const Tensor& p : params) ids.push_back(tape.leaf(p, true));
    Tape::NodeId out = build(tape, ids);
    if (tape.value(out).size() != 1)
      throw ShapeError("grad_check: build must return a scalar node");
    tape.backward(out);
    for (Tape::NodeId id : ids) analytic.push_back(tape.grad(id));
  }

  auto eval = [&](const std::vector<Tensor>& p) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    ids.reserve(p.size());
    for (const Tensor& t : p) ids.push_back(tape.leaf(t, false));
    return tape.value(build(tape, ids)).values[0];
  };

  GradCheckResult result;
  std::vector<Tensor> work = params;
  for (size_t pi = 0; pi < work.size(); ++pi) {
    for (size_t i = 0; i < work[pi].values.size(); ++i) {
      const double orig = work[pi].values[i];
      work[pi].values[i] = orig + step;
      const double fp = eval(work);
      work[pi].values[i] = orig - step;
      const double fm = eval(work);
      work[pi].values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi].values[i];
      const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-3);
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_param = static_cast<int>(pi);
        result.worst_index = static_cast<int64_t>(i);
      }
    }
  }
  return result;
}

}  // namespace csitk
