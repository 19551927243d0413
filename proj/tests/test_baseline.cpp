#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "csitk/baseline.hpp"
#include "csitk/errors.hpp"
#include "csitk/preprocess.hpp"
#include "csitk/rng.hpp"
#include "csitk/training.hpp"

using namespace csitk::baseline;
using csitk::DegenerateInputError;
using csitk::ShapeError;
using csitk::SplitMix64;
using csitk::Tensor;
using csitk::preprocess::FeatureMatrix;
using csitk::preprocess::MaskSpec;

namespace {

Tensor random_matrix(int rows, int cols, uint64_t seed) {
  Tensor t = Tensor::zeros({rows, cols});
  SplitMix64 rng(seed);
  for (double& v : t.values) v = rng.next_normal();
  return t;
}

double ridge_loss(const Tensor& x, const Tensor& y, const LinRegModel& m) {
  const Tensor pred = linreg_predict(m, x);
  double sq = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const double r = pred.values[i] - y.values[i];
    sq += r * r;
  }
  double reg = 0.0;
  for (double w : m.weights.values) reg += w * w;
  return sq + m.ridge_lambda * reg;
}

// 3x3 Gauss-Jordan inverse: an oracle independent of the Cholesky path.
Tensor invert3(const Tensor& a) {
  Tensor aug = Tensor::zeros({3, 6});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) aug.at(i, j) = a.at(i, j);
    aug.at(i, 3 + i) = 1.0;
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(aug.at(r, col)) > std::abs(aug.at(pivot, col))) pivot = r;
    for (int j = 0; j < 6; ++j) std::swap(aug.at(col, j), aug.at(pivot, j));
    const double inv = 1.0 / aug.at(col, col);
    for (int j = 0; j < 6; ++j) aug.at(col, j) *= inv;
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = aug.at(r, col);
      for (int j = 0; j < 6; ++j) aug.at(r, j) -= f * aug.at(col, j);
    }
  }
  Tensor out = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.at(i, j) = aug.at(i, 3 + j);
  return out;
}

}  // namespace

TEST_CASE("exact linear recovery with zero ridge") {
  const int n = 40, d = 3;
  const Tensor x = random_matrix(n, d, 11);
  Tensor y = Tensor::zeros({n, d});
  for (size_t i = 0; i < y.values.size(); ++i) y.values[i] = 2.0 * x.values[i];

  const LinRegModel m = linreg_fit(x, y, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      CHECK(std::abs(m.weights.at(i, j) - (i == j ? 2.0 : 0.0)) <= 1e-8);
  for (int j = 0; j < d; ++j) CHECK(std::abs(m.weights.at(d, j)) <= 1e-8);  // bias row

  const Tensor pred = linreg_predict(m, x);
  for (size_t i = 0; i < pred.values.size(); ++i)
    CHECK(std::abs(pred.values[i] - y.values[i]) <= 1e-6);
}

TEST_CASE("huge ridge shrinks weights to zero") {
  const Tensor x = random_matrix(30, 4, 12);
  const Tensor y = random_matrix(30, 2, 13);
  const LinRegModel m = linreg_fit(x, y, 1e12);
  for (double w : m.weights.values) CHECK(std::abs(w) <= 1e-8);
}

TEST_CASE("underdetermined fit matches the minimum-norm oracle") {
  // Hand case first: one sample, X = [1, 0] (augmented [1, 0, 1]), target 2.
  // Minimum-norm solution is X'(XX')^{-1} 2 = [1, 0, 1].
  const Tensor x1({1, 2}, {1.0, 0.0});
  const Tensor y1({1, 1}, {2.0});
  const LinRegModel m1 = linreg_fit(x1, y1, 1e-12);
  CHECK(m1.weights.values[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(m1.weights.values[1]) <= 1e-6);
  CHECK(m1.weights.values[2] == doctest::Approx(1.0).epsilon(1e-6));

  // General N < D: compare against an independent pseudo-inverse route
  // w = Xa' (Xa Xa')^{-1} Y computed with Gauss-Jordan.
  const int n = 3, d = 6;
  const Tensor x = random_matrix(n, d, 14);
  const Tensor y = random_matrix(n, 2, 15);
  const LinRegModel m = linreg_fit(x, y, 1e-10);

  Tensor xa = Tensor::zeros({n, d + 1});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) xa.at(i, j) = x.at(i, j);
    xa.at(i, d) = 1.0;
  }
  Tensor gram = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k <= d; ++k) s += xa.at(i, k) * xa.at(j, k);
      gram.at(i, j) = s;
    }
  const Tensor ginv = invert3(gram);
  Tensor coef = Tensor::zeros({n, 2});  // (XX')^{-1} Y
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += ginv.at(i, k) * y.at(k, j);
      coef.at(i, j) = s;
    }
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += xa.at(k, i) * coef.at(k, j);
      CHECK(std::abs(m.weights.at(i, j) - s) <= 1e-6);
    }
}

TEST_CASE("first-order optimality of the ridge solution") {
  const int n = 30, d = 5, d_out = 2;
  const Tensor x = random_matrix(n, d, 16);
  const Tensor y = random_matrix(n, d_out, 17);
  const double lambda = 1e-3;
  const LinRegModel m = linreg_fit(x, y, lambda);

  // Residual gradient Xa'(Xa w - Y) + lambda w must vanish relative to Xa'Y.
  Tensor xa = Tensor::zeros({n, d + 1});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) xa.at(i, j) = x.at(i, j);
    xa.at(i, d) = 1.0;
  }
  const Tensor pred = linreg_predict(m, x);
  double grad_sq = 0.0, ref_sq = 0.0;
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j < d_out; ++j) {
      double g = lambda * m.weights.at(i, j);
      double ref = 0.0;
      for (int k = 0; k < n; ++k) {
        g += xa.at(k, i) * (pred.at(k, j) - y.at(k, j));
        ref += xa.at(k, i) * y.at(k, j);
      }
      grad_sq += g * g;
      ref_sq += ref * ref;
    }
  CHECK(std::sqrt(grad_sq) <= 1e-6 * std::sqrt(ref_sq));

  // No single-coordinate nudge of +-1e-3 improves the regularized loss.
  const double base = ridge_loss(x, y, m);
  SplitMix64 pick(18);
  for (int trial = 0; trial < 10; ++trial) {
    const size_t idx = static_cast<size_t>(pick.next_u64() % m.weights.values.size());
    for (const double delta : {1e-3, -1e-3}) {
      LinRegModel nudged = m;
      nudged.weights.values[idx] += delta;
      CHECK(ridge_loss(x, y, nudged) >= base - 1e-12);
    }
  }
}

TEST_CASE("linreg input validation") {
  const Tensor x = random_matrix(4, 2, 19);
  const Tensor y = random_matrix(5, 2, 20);
  CHECK_THROWS_AS(linreg_fit(x, y, 1e-8), ShapeError);

  Tensor bad = x;
  bad.values[0] = std::nan("");
  CHECK_THROWS_AS(linreg_fit(bad, random_matrix(4, 2, 21), 1e-8), DegenerateInputError);

  const LinRegModel m = linreg_fit(x, random_matrix(4, 3, 22), 1e-8);
  CHECK_THROWS_AS(linreg_predict(m, random_matrix(4, 3, 23)), ShapeError);
}

TEST_CASE("mlp with zero output weights predicts its output bias") {
  MlpModel mlp(3, 4, 8, 24);
  for (double& v : mlp.w2.values) v = 0.0;
  for (double& v : mlp.b2.values) v = 0.75;

  csitk::preprocess::AttentionMask attn;
  attn.data.assign(3, 1);
  const Tensor out = mlp.forward(random_matrix(3, 4, 25), attn);
  CHECK(out.shape == std::vector<int>{3, 4});
  for (double v : out.values) CHECK(v == 0.75);
}

TEST_CASE("mlp overfits a fixed batch at desk dims") {
  MlpModel mlp(16, 32, 512, 7);
  std::vector<FeatureMatrix> samples;
  for (int i = 0; i < 4; ++i) {
    FeatureMatrix fm;
    fm.n_s = 16;
    fm.n_t = 8;
    fm.n_r = 2;
    fm.data = random_matrix(16, 32, 400 + static_cast<uint64_t>(i));
    samples.push_back(fm);
  }
  csitk::train::TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 500;  // B = N: one step per epoch
  cfg.learning_rate = 1e-3;
  cfg.fresh_mask_each_epoch = false;
  const csitk::train::TrainResult r = csitk::train::train(mlp, samples, cfg);
  CHECK(r.history.back().loss < 0.1 * r.history.front().loss);
}

TEST_CASE("mlp reaches linreg quality on linearly reconstructable data") {
  // Row 1 of every sample is 2x row 0 plus light noise; EveryKth(2) masks
  // row 1, so reconstruction is a (noisy) linear task both models can solve.
  const int n_s = 2, d = 4, n = 60;
  std::vector<FeatureMatrix> samples;
  SplitMix64 rng(777);
  for (int i = 0; i < n; ++i) {
    FeatureMatrix fm;
    fm.n_s = n_s;
    fm.n_t = 2;
    fm.n_r = 1;
    fm.data = Tensor::zeros({n_s, d});
    for (int j = 0; j < d; ++j) {
      const double v = rng.next_normal();
      fm.data.at(0, j) = v;
      fm.data.at(1, j) = 2.0 * v + 0.1 * rng.next_normal();
    }
    samples.push_back(fm);
  }
  const MaskSpec mask_spec = MaskSpec::every_kth(2);
  const int flat = n_s * d;

  Tensor x = Tensor::zeros({n, flat}), y = Tensor::zeros({n, flat});
  for (int i = 0; i < n; ++i) {
    const auto mask = csitk::preprocess::make_mask(mask_spec, n_s, d);
    const FeatureMatrix masked = csitk::preprocess::apply_mask(samples[static_cast<size_t>(i)], mask);
    for (int j = 0; j < flat; ++j) {
      x.values[static_cast<size_t>(i * flat + j)] = masked.data.values[static_cast<size_t>(j)];
      y.values[static_cast<size_t>(i * flat + j)] =
          samples[static_cast<size_t>(i)].data.values[static_cast<size_t>(j)];
    }
  }
  const LinRegModel lin = linreg_fit(x, y, 1e-8);
  const double lin_mse = csitk::train::mse_metric(y, linreg_predict(lin, x));
  CHECK(lin_mse > 0.0);

  MlpModel mlp(n_s, d, 64, 9);
  csitk::train::TrainConfig cfg;
  cfg.batch_size = n;
  cfg.epochs = 400;
  cfg.learning_rate = 1e-2;
  cfg.mask_spec = mask_spec;
  cfg.fresh_mask_each_epoch = false;
  csitk::train::train(mlp, samples, cfg);

  double sq = 0.0;
  int64_t count = 0;
  csitk::preprocess::AttentionMask attn;
  attn.data.assign(static_cast<size_t>(n_s), 1);
  for (const FeatureMatrix& s : samples) {
    const auto mask = csitk::preprocess::make_mask(mask_spec, n_s, d);
    const Tensor out = mlp.forward(csitk::preprocess::apply_mask(s, mask).data, attn);
    for (size_t j = 0; j < out.values.size(); ++j) {
      const double r = out.values[j] - s.data.values[j];
      sq += r * r;
      ++count;
    }
  }
  const double mlp_mse = sq / static_cast<double>(count);
  CHECK(mlp_mse <= 2.0 * lin_mse);
}
