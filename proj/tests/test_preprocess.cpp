#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csitk/channel.hpp"
#include "csitk/errors.hpp"
#include "csitk/preprocess.hpp"
#include "csitk/rng.hpp"

using namespace csitk::preprocess;
using csitk::ConfigError;
using csitk::DegenerateInputError;
using csitk::ShapeError;
using csitk::SplitMix64;
using csitk::channel::Complex;
using csitk::channel::CsiTensor;

namespace {

CsiTensor random_csi(int n_s, int n_t, int n_r, uint64_t seed) {
  SplitMix64 rng(seed);
  CsiTensor h = CsiTensor::zeros(n_s, n_t, n_r);
  for (Complex& z : h.data) z = Complex(rng.next_uniform(-2, 2), rng.next_uniform(-2, 2));
  return h;
}

}  // namespace

TEST_CASE("split_and_normalize zero mean unit std") {
  const CsiTensor h = random_csi(16, 8, 2, 42);
  const SplitNormalized parts = split_and_normalize(h);
  REQUIRE(parts.stats.size() == 1);

  for (const csitk::Tensor* part : {&parts.real_part, &parts.imag_part}) {
    double mean = 0.0;
    for (double v : part->values) mean += v;
    mean /= static_cast<double>(part->values.size());
    double var = 0.0;
    for (double v : part->values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(part->values.size());
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-6);
  }
}

TEST_CASE("split_and_normalize per-subcarrier mode") {
  const CsiTensor h = random_csi(6, 8, 4, 43);
  const SplitNormalized parts = split_and_normalize(h, NormScope::kPerSubcarrier);
  REQUIRE(parts.stats.size() == 6);
  const int cols = 32;
  for (int s = 0; s < 6; ++s) {
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += parts.real_part.at(s, j);
    mean /= cols;
    CHECK(std::abs(mean) <= 1e-6);
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = parts.real_part.at(s, j) - mean;
      var += d * d;
    }
    CHECK(std::abs(std::sqrt(var / cols) - 1.0) <= 1e-6);
  }
}

TEST_CASE("split_and_normalize rejects constant input") {
  CsiTensor h = CsiTensor::zeros(4, 2, 2);
  for (Complex& z : h.data) z = Complex(3.0, -1.0);
  CHECK_THROWS_AS(split_and_normalize(h), DegenerateInputError);
}

TEST_CASE("normalize/denormalize and flatten/unflatten round trips") {
  const CsiTensor h = random_csi(16, 8, 2, 44);

  for (NormScope scope : {NormScope::kGlobal, NormScope::kPerSubcarrier}) {
    const SplitNormalized parts = split_and_normalize(h, scope);
    const CsiTensor back = denormalize(parts);
    for (size_t i = 0; i < h.data.size(); ++i) {
      CHECK(std::abs(back.data[i].real() - h.data[i].real()) <=
            1e-6 * (std::abs(h.data[i].real()) + 1.0));
      CHECK(std::abs(back.data[i].imag() - h.data[i].imag()) <=
            1e-6 * (std::abs(h.data[i].imag()) + 1.0));
    }

    // flatten/unflatten is an exact bijection.
    const FeatureMatrix x = flatten(parts);
    CHECK(x.d() == 2 * 8 * 2);
    const SplitNormalized split = unflatten(x);
    CHECK(split.real_part.values == parts.real_part.values);
    CHECK(split.imag_part.values == parts.imag_part.values);

    const CsiTensor full = defeaturize(featurize(h, scope));
    for (size_t i = 0; i < h.data.size(); ++i)
      CHECK(std::abs(full.data[i] - h.data[i]) <= 1e-6 * (std::abs(h.data[i]) + 1.0));
  }
}

TEST_CASE("flatten row layout for 1x1 antennas") {
  CsiTensor h = CsiTensor::zeros(2, 1, 1);
  h.data = {Complex(1.0, 2.0), Complex(-3.0, 0.5)};
  // Bypass normalization to check raw layout.
  SplitNormalized parts;
  parts.n_s = 2;
  parts.n_t = 1;
  parts.n_r = 1;
  parts.real_part = csitk::Tensor({2, 1}, {1.0, -3.0});
  parts.imag_part = csitk::Tensor({2, 1}, {2.0, 0.5});
  parts.stats.push_back({});
  const FeatureMatrix x = flatten(parts);
  CHECK(x.data.shape == std::vector<int>{2, 2});
  CHECK(x.data.at(0, 0) == 1.0);
  CHECK(x.data.at(0, 1) == 2.0);
  CHECK(x.data.at(1, 0) == -3.0);
  CHECK(x.data.at(1, 1) == 0.5);
}

TEST_CASE("paper-scale feature dimension") {
  // N_t=64, N_r=4 -> d = 2*64*4 = 512.
  FeatureMatrix x;
  x.n_t = 64;
  x.n_r = 4;
  CHECK(x.d() == 512);
}

TEST_CASE("bernoulli mask") {
  const MaskMatrix all = make_mask(MaskSpec::bernoulli(1.0, 7), 8, 16);
  for (uint8_t b : all.data) CHECK(b == 1);
  const MaskMatrix none = make_mask(MaskSpec::bernoulli(0.0, 7), 8, 16);
  for (uint8_t b : none.data) CHECK(b == 0);

  // Empirical keep rate within binomial 3-sigma for n >= 1e4.
  const double p = 0.7;
  const int n_s = 100, d = 128;
  const MaskMatrix m = make_mask(MaskSpec::bernoulli(p, 11), n_s, d);
  double kept = 0;
  for (uint8_t b : m.data) kept += b;
  const double n = static_cast<double>(n_s) * d;
  const double sigma = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(kept / n - p) <= 3 * sigma);

  CHECK_THROWS_AS(make_mask(MaskSpec::bernoulli(1.5, 0), 4, 4), ConfigError);
}

TEST_CASE("every-kth mask") {
  const MaskMatrix m = make_mask(MaskSpec::every_kth(10), 64, 12);
  const std::vector<int> expect = {0, 10, 20, 30, 40, 50, 60};
  CHECK(m.masked_rows() == expect);

  // Row-level: every entry of a masked row is zero, all other rows intact.
  for (int s = 0; s < 64; ++s) {
    const bool masked = s % 10 == 0;
    for (int j = 0; j < 12; ++j) CHECK(m.at(s, j) == (masked ? 0 : 1));
  }

  // Seed-independent; ceil(N_s/k) masked rows.
  MaskSpec a = MaskSpec::every_kth(7);
  a.seed = 1;
  MaskSpec b = MaskSpec::every_kth(7);
  b.seed = 999;
  CHECK(make_mask(a, 30, 4).data == make_mask(b, 30, 4).data);
  CHECK(static_cast<int>(make_mask(a, 30, 4).masked_rows().size()) == (30 + 6) / 7);

  CHECK_THROWS_AS(make_mask(MaskSpec::every_kth(0), 4, 4), ConfigError);
}

TEST_CASE("ratio sweep mask") {
  const int n_s = 10000;
  const double gamma = 0.3;
  const MaskMatrix m = make_mask(MaskSpec::ratio_sweep(gamma, 13), n_s, 2);
  const double frac = static_cast<double>(m.masked_rows().size()) / n_s;
  const double sigma = std::sqrt(gamma * (1 - gamma) / n_s);
  CHECK(std::abs(frac - gamma) <= 3 * sigma);

  // Row-level scheme: rows are all-kept or all-masked.
  for (int s = 0; s < 100; ++s) CHECK(m.at(s, 0) == m.at(s, 1));

  const MaskMatrix keep_all = make_mask(MaskSpec::ratio_sweep(0.0, 13), 1000, 2);
  CHECK(keep_all.masked_rows().empty());
  const MaskMatrix drop_all = make_mask(MaskSpec::ratio_sweep(1.0, 13), 100, 2);
  CHECK(static_cast<int>(drop_all.masked_rows().size()) == 100);
}

TEST_CASE("apply_mask semantics") {
  const CsiTensor h = random_csi(8, 4, 2, 50);
  const FeatureMatrix x = featurize(h);
  const int d = x.d();

  const MaskMatrix ones = make_mask(MaskSpec::bernoulli(1.0, 3), 8, d);
  CHECK(apply_mask(x, ones).data.values == x.data.values);

  const MaskMatrix zeros = make_mask(MaskSpec::bernoulli(0.0, 3), 8, d);
  for (double v : apply_mask(x, zeros).data.values) CHECK(v == 0.0);

  const MaskMatrix mixed = make_mask(MaskSpec::bernoulli(0.6, 17), 8, d);
  const FeatureMatrix masked = apply_mask(x, mixed);
  for (size_t i = 0; i < masked.data.values.size(); ++i) {
    if (mixed.data[i])
      CHECK(masked.data.values[i] == x.data.values[i]);  // bit-exact
    else
      CHECK(masked.data.values[i] == 0.0);
  }

  // Idempotence.
  const FeatureMatrix twice = apply_mask(masked, mixed);
  CHECK(twice.data.values == masked.data.values);

  MaskMatrix wrong = mixed;
  wrong.n_s = 4;
  wrong.data.resize(static_cast<size_t>(4) * d);
  CHECK_THROWS_AS(apply_mask(x, wrong), ShapeError);
}

TEST_CASE("padding and attention mask") {
  const CsiTensor h = random_csi(3, 2, 1, 60);
  const FeatureMatrix x = featurize(h);

  auto [same, full_mask] = pad_and_attention_mask(x, 3);
  CHECK(same.data.values == x.data.values);
  CHECK(full_mask.data == std::vector<uint8_t>{1, 1, 1});

  auto [padded, mask] = pad_and_attention_mask(x, 5);
  CHECK(padded.data.shape == std::vector<int>{5, x.d()});
  CHECK(mask.data == std::vector<uint8_t>{1, 1, 1, 0, 0});
  CHECK(mask.valid_count() == 3);
  for (int s = 3; s < 5; ++s)
    for (int j = 0; j < x.d(); ++j) CHECK(padded.data.at(s, j) == 0.0);
  // Valid rows are copied bit-exactly.
  for (int s = 0; s < 3; ++s)
    for (int j = 0; j < x.d(); ++j) CHECK(padded.data.at(s, j) == x.data.at(s, j));

  CHECK_THROWS_AS(pad_and_attention_mask(x, 2), ShapeError);
}
