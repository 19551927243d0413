#include "csitk/baseline.hpp"

#include <cmath>

#include "csitk/errors.hpp"
#include "csitk/rng.hpp"

namespace csitk::baseline {
namespace {

// Dense symmetric positive-definite solve via Cholesky; a [n,n] row-major,
// b [n,m]; returns x with a*x = b.
Tensor spd_solve(Tensor a, Tensor b) {
  const int n = a.rows();
  const int m = b.cols();
  double* pa = a.values.data();
  // In-place lower Cholesky.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = pa[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        sum -= pa[static_cast<size_t>(i) * n + k] * pa[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (sum <= 0.0)
          throw DegenerateInputError(
              "linreg_fit: singular normal equations (increase ridge lambda)");
        pa[static_cast<size_t>(i) * n + j] = std::sqrt(sum);
      } else {
        pa[static_cast<size_t>(i) * n + j] = sum / pa[static_cast<size_t>(j) * n + j];
      }
    }
  }
  // Solve L z = b, then L' x = z, column-block at a time.
  Tensor x = b;
  double* px = x.values.data();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) {
      const double l = pa[static_cast<size_t>(i) * n + k];
      for (int c = 0; c < m; ++c)
        px[static_cast<size_t>(i) * m + c] -= l * px[static_cast<size_t>(k) * m + c];
    }
    const double inv = 1.0 / pa[static_cast<size_t>(i) * n + i];
    for (int c = 0; c < m; ++c) px[static_cast<size_t>(i) * m + c] *= inv;
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) {
      const double l = pa[static_cast<size_t>(k) * n + i];
      for (int c = 0; c < m; ++c)
        px[static_cast<size_t>(i) * m + c] -= l * px[static_cast<size_t>(k) * m + c];
    }
    const double inv = 1.0 / pa[static_cast<size_t>(i) * n + i];
    for (int c = 0; c < m; ++c) px[static_cast<size_t>(i) * m + c] *= inv;
  }
  return x;
}

Tensor augment_ones(const Tensor& x) {
  const int n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros({n, d + 1});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.at(i, j) = x.at(i, j);
    out.at(i, d) = 1.0;
  }
  return out;
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeError("baseline matmul: inner dimensions differ");
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = a.values[static_cast<size_t>(i) * k + p];
      for (int j = 0; j < n; ++j)
        out.values[static_cast<size_t>(i) * n + j] +=
            av * b.values[static_cast<size_t>(p) * n + j];
    }
  return out;
}

Tensor transpose(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace

LinRegModel linreg_fit(const Tensor& x, const Tensor& y, double lambda) {
  if (x.rows() != y.rows()) throw ShapeError("linreg_fit: row count mismatch");
  if (lambda < 0.0) throw ConfigError("linreg_fit: lambda must be >= 0");
  if (!x.all_finite() || !y.all_finite())
    throw DegenerateInputError("linreg_fit: non-finite inputs");

  const Tensor xa = augment_ones(x);
  const int n = xa.rows(), d = xa.cols();
  LinRegModel model;
  model.ridge_lambda = lambda;

  if (d <= n) {
    // Primal: (X'X + lambda I) w = X'Y.
    const Tensor xt = transpose(xa);
    Tensor gram = matmul_plain(xt, xa);
    for (int i = 0; i < d; ++i) gram.at(i, i) += lambda;
    model.weights = spd_solve(std::move(gram), matmul_plain(xt, y));
  } else {
    // Dual: w = X'(XX' + lambda I)^{-1} Y.
    Tensor gram = matmul_plain(xa, transpose(xa));
    for (int i = 0; i < n; ++i) gram.at(i, i) += lambda;
    model.weights = matmul_plain(transpose(xa), spd_solve(std::move(gram), y));
  }
  return model;
}

Tensor linreg_predict(const LinRegModel& m, const Tensor& x) {
  if (x.cols() + 1 != m.weights.rows())
    throw ShapeError("linreg_predict: feature count mismatch");
  return matmul_plain(augment_ones(x), m.weights);
}

MlpModel::MlpModel(int n_s, int d, int hidden, uint64_t seed)
    : n_s_(n_s), d_(d), hidden_(hidden) {
  if (n_s <= 0 || d <= 0 || hidden <= 0) throw ConfigError("MlpModel: dimensions must be positive");
  const int d_in = n_s * d;
  auto uniform = [&](std::vector<int> shape, int fan_in, uint64_t idx) {
    SplitMix64 rng = substream(seed, {kInitStream, idx});
    Tensor t = Tensor::zeros(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values) v = rng.next_uniform(-bound, bound);
    return t;
  };
  w1 = uniform({d_in, hidden}, d_in, 0);
  b1 = Tensor::zeros({hidden});
  w2 = uniform({hidden, d_in}, hidden, 1);
  b2 = Tensor::zeros({d_in});
}

std::vector<std::string> MlpModel::parameter_names() const { return {"w1", "b1", "w2", "b2"}; }

std::vector<Tensor*> MlpModel::parameters() { return {&w1, &b1, &w2, &b2}; }

Tape::NodeId MlpModel::forward_on_tape(Tape& tape, const std::vector<Tape::NodeId>& param_ids,
                                       Tape::NodeId x,
                                       const preprocess::AttentionMask&) const {
  if (param_ids.size() != 4) throw ShapeError("mlp forward: want 4 parameter ids");
  const Tensor& xin = tape.value(x);
  if (xin.shape != std::vector<int>{n_s_, d_})
    throw ShapeError("mlp forward: input shape " + xin.shape_str() + ", want [" +
                     std::to_string(n_s_) + "," + std::to_string(d_) + "]");
  const Tape::NodeId flat = tape.reshape(x, {1, n_s_ * d_});
  const Tape::NodeId hidden =
      tape.relu(tape.add_row_vector(tape.matmul(flat, param_ids[0]), param_ids[1]));
  const Tape::NodeId out =
      tape.add_row_vector(tape.matmul(hidden, param_ids[2]), param_ids[3]);
  return tape.reshape(out, {n_s_, d_});
}

}  // namespace csitk::baseline
