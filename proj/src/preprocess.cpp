#include "csitk/preprocess.hpp"

#include <cmath>
#include <cstring>

#include "csitk/errors.hpp"
#include "csitk/rng.hpp"

namespace csitk::preprocess {
namespace {

constexpr double kDegenerateStd = 1e-12;

NormStats stats_over(const double* re, const double* im, size_t n) {
  NormStats s;
  double mr = 0.0, mi = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mr += re[i];
    mi += im[i];
  }
  mr /= static_cast<double>(n);
  mi /= static_cast<double>(n);
  double vr = 0.0, vi = 0.0;
  for (size_t i = 0; i < n; ++i) {
    vr += (re[i] - mr) * (re[i] - mr);
    vi += (im[i] - mi) * (im[i] - mi);
  }
  s.mean_real = mr;
  s.mean_imag = mi;
  s.std_real = std::sqrt(vr / static_cast<double>(n));
  s.std_imag = std::sqrt(vi / static_cast<double>(n));
  if (s.std_real <= kDegenerateStd || s.std_imag <= kDegenerateStd)
    throw DegenerateInputError("split_and_normalize: near-constant real or imaginary part");
  return s;
}

}  // namespace

std::vector<int> MaskMatrix::masked_rows() const {
  std::vector<int> rows;
  for (int s = 0; s < n_s; ++s) {
    bool all_zero = true;
    for (int j = 0; j < d; ++j)
      if (at(s, j)) {
        all_zero = false;
        break;
      }
    if (all_zero) rows.push_back(s);
  }
  return rows;
}

int AttentionMask::valid_count() const {
  int n = 0;
  for (uint8_t b : data) n += b;
  return n;
}

MaskSpec MaskSpec::bernoulli(double p, uint64_t seed) {
  MaskSpec m;
  m.scheme = Scheme::kBernoulli;
  m.keep_prob = p;
  m.seed = seed;
  return m;
}

MaskSpec MaskSpec::every_kth(int k) {
  MaskSpec m;
  m.scheme = Scheme::kEveryKth;
  m.k = k;
  return m;
}

MaskSpec MaskSpec::ratio_sweep(double gamma, uint64_t seed) {
  MaskSpec m;
  m.scheme = Scheme::kRatioSweep;
  m.masked_fraction = gamma;
  m.seed = seed;
  return m;
}

SplitNormalized split_and_normalize(const channel::CsiTensor& h, NormScope scope) {
  if (!h.all_finite()) throw DegenerateInputError("split_and_normalize: non-finite input");
  const int n_s = h.n_s;
  const int cols = h.n_t * h.n_r;
  SplitNormalized out;
  out.scope = scope;
  out.n_s = n_s;
  out.n_t = h.n_t;
  out.n_r = h.n_r;
  out.real_part = Tensor::zeros({n_s, cols});
  out.imag_part = Tensor::zeros({n_s, cols});
  for (size_t i = 0; i < h.data.size(); ++i) {
    out.real_part.values[i] = h.data[i].real();
    out.imag_part.values[i] = h.data[i].imag();
  }

  if (scope == NormScope::kGlobal) {
    out.stats.push_back(
        stats_over(out.real_part.values.data(), out.imag_part.values.data(), h.data.size()));
  } else {
    out.stats.reserve(static_cast<size_t>(n_s));
    for (int s = 0; s < n_s; ++s)
      out.stats.push_back(stats_over(out.real_part.values.data() + static_cast<size_t>(s) * cols,
                                     out.imag_part.values.data() + static_cast<size_t>(s) * cols,
                                     static_cast<size_t>(cols)));
  }

  for (int s = 0; s < n_s; ++s) {
    const NormStats& st = out.stats[scope == NormScope::kGlobal ? 0 : static_cast<size_t>(s)];
    double* re = out.real_part.values.data() + static_cast<size_t>(s) * cols;
    double* im = out.imag_part.values.data() + static_cast<size_t>(s) * cols;
    for (int j = 0; j < cols; ++j) {
      re[j] = (re[j] - st.mean_real) / st.std_real;
      im[j] = (im[j] - st.mean_imag) / st.std_imag;
    }
  }
  return out;
}

channel::CsiTensor denormalize(const SplitNormalized& parts) {
  channel::CsiTensor h = channel::CsiTensor::zeros(parts.n_s, parts.n_t, parts.n_r);
  const int cols = parts.n_t * parts.n_r;
  for (int s = 0; s < parts.n_s; ++s) {
    const NormStats& st =
        parts.stats[parts.scope == NormScope::kGlobal ? 0 : static_cast<size_t>(s)];
    const double* re = parts.real_part.values.data() + static_cast<size_t>(s) * cols;
    const double* im = parts.imag_part.values.data() + static_cast<size_t>(s) * cols;
    for (int j = 0; j < cols; ++j)
      h.data[static_cast<size_t>(s) * cols + j] =
          channel::Complex(re[j] * st.std_real + st.mean_real, im[j] * st.std_imag + st.mean_imag);
  }
  return h;
}

FeatureMatrix flatten(const SplitNormalized& parts) {
  const int cols = parts.n_t * parts.n_r;
  if (parts.real_part.shape != std::vector<int>{parts.n_s, cols} ||
      !parts.real_part.same_shape(parts.imag_part))
    throw ShapeError("flatten: real/imag parts have inconsistent shapes");
  FeatureMatrix x;
  x.stats = parts.stats;
  x.scope = parts.scope;
  x.n_s = parts.n_s;
  x.n_t = parts.n_t;
  x.n_r = parts.n_r;
  x.data = Tensor::zeros({parts.n_s, 2 * cols});
  for (int s = 0; s < parts.n_s; ++s) {
    double* row = x.data.values.data() + static_cast<size_t>(s) * 2 * cols;
    std::memcpy(row, parts.real_part.values.data() + static_cast<size_t>(s) * cols,
                sizeof(double) * static_cast<size_t>(cols));
    std::memcpy(row + cols, parts.imag_part.values.data() + static_cast<size_t>(s) * cols,
                sizeof(double) * static_cast<size_t>(cols));
  }
  return x;
}

SplitNormalized unflatten(const FeatureMatrix& x) {
  const int cols = x.n_t * x.n_r;
  if (x.data.shape != std::vector<int>{x.n_s, 2 * cols})
    throw ShapeError("unflatten: feature matrix shape does not match dims");
  SplitNormalized parts;
  parts.stats = x.stats;
  parts.scope = x.scope;
  parts.n_s = x.n_s;
  parts.n_t = x.n_t;
  parts.n_r = x.n_r;
  parts.real_part = Tensor::zeros({x.n_s, cols});
  parts.imag_part = Tensor::zeros({x.n_s, cols});
  for (int s = 0; s < x.n_s; ++s) {
    const double* row = x.data.values.data() + static_cast<size_t>(s) * 2 * cols;
    std::memcpy(parts.real_part.values.data() + static_cast<size_t>(s) * cols, row,
                sizeof(double) * static_cast<size_t>(cols));
    std::memcpy(parts.imag_part.values.data() + static_cast<size_t>(s) * cols, row + cols,
                sizeof(double) * static_cast<size_t>(cols));
  }
  return parts;
}

FeatureMatrix featurize(const channel::CsiTensor& h, NormScope scope) {
  return flatten(split_and_normalize(h, scope));
}

channel::CsiTensor defeaturize(const FeatureMatrix& x) { return denormalize(unflatten(x)); }

uint64_t mask_seed_for(uint64_t base, uint64_t draw, int sample) {
  uint64_t key = SplitMix64::mix(base, kMaskStream);
  key = SplitMix64::mix(key, draw);
  return SplitMix64::mix(key, static_cast<uint64_t>(sample));
}

MaskMatrix make_mask(const MaskSpec& spec, int n_s, int d) {
  if (n_s <= 0 || d <= 0) throw ConfigError("make_mask: shape must be positive");
  MaskMatrix m;
  m.n_s = n_s;
  m.d = d;
  m.data.assign(static_cast<size_t>(n_s) * d, 1);

  switch (spec.scheme) {
    case MaskSpec::Scheme::kBernoulli: {
      if (spec.keep_prob < 0.0 || spec.keep_prob > 1.0)
        throw ConfigError("make_mask: Bernoulli keep probability must be in [0, 1]");
      SplitMix64 rng(spec.seed);
      for (uint8_t& b : m.data) b = rng.next_double() < spec.keep_prob ? 1 : 0;
      break;
    }
    case MaskSpec::Scheme::kEveryKth: {
      if (spec.k < 1) throw ConfigError("make_mask: EveryKth k must be >= 1");
      for (int s = 0; s < n_s; s += spec.k)
        std::memset(m.data.data() + static_cast<size_t>(s) * d, 0, static_cast<size_t>(d));
      break;
    }
    case MaskSpec::Scheme::kRatioSweep: {
      if (spec.masked_fraction < 0.0 || spec.masked_fraction > 1.0)
        throw ConfigError("make_mask: RatioSweep fraction must be in [0, 1]");
      SplitMix64 rng(spec.seed);
      for (int s = 0; s < n_s; ++s) {
        const bool keep = rng.next_double() > spec.masked_fraction;
        if (!keep) std::memset(m.data.data() + static_cast<size_t>(s) * d, 0, static_cast<size_t>(d));
      }
      break;
    }
  }
  return m;
}

FeatureMatrix apply_mask(const FeatureMatrix& x, const MaskMatrix& m) {
  if (x.data.shape != std::vector<int>{m.n_s, m.d})
    throw ShapeError("apply_mask: mask shape " + std::to_string(m.n_s) + "x" + std::to_string(m.d) +
                     " does not match features " + x.data.shape_str());
  FeatureMatrix out = x;
  for (size_t i = 0; i < out.data.values.size(); ++i)
    if (!m.data[i]) out.data.values[i] = 0.0;
  return out;
}

std::pair<FeatureMatrix, AttentionMask> pad_and_attention_mask(const FeatureMatrix& x,
                                                               int target_len) {
  if (x.n_s > target_len)
    throw ShapeError("pad_and_attention_mask: sequence length " + std::to_string(x.n_s) +
                     " exceeds target " + std::to_string(target_len));
  FeatureMatrix padded = x;
  const int d = x.data.cols();
  padded.data = Tensor::zeros({target_len, d});
  std::memcpy(padded.data.values.data(), x.data.values.data(),
              sizeof(double) * x.data.values.size());
  AttentionMask mask;
  mask.data.assign(static_cast<size_t>(target_len), 0);
  for (int s = 0; s < x.n_s; ++s) mask.data[static_cast<size_t>(s)] = 1;
  return {std::move(padded), std::move(mask)};
}

}  // namespace csitk::preprocess
