#pragma once

#include <cstdint>
#include <vector>

#include "csitk/channel.hpp"
#include "csitk/tensor.hpp"

namespace csitk::preprocess {

struct NormStats {
  double mean_real = 0.0;
  double std_real = 1.0;
  double mean_imag = 0.0;
  double std_imag = 1.0;
};

enum class NormScope { kGlobal, kPerSubcarrier };

// Real/imaginary planes of one CSI tensor, each [N_s, N_t*N_r] with columns
// in row-major (t, r) order, normalized to zero mean and unit (population)
// std. `stats` has one entry for kGlobal, N_s entries for kPerSubcarrier.
struct SplitNormalized {
  Tensor real_part;
  Tensor imag_part;
  std::vector<NormStats> stats;
  NormScope scope = NormScope::kGlobal;
  int n_s = 0, n_t = 0, n_r = 0;
};

// Model-facing features: row s = [normalized re block | normalized im block],
// d = 2*N_t*N_r.
struct FeatureMatrix {
  Tensor data;  // [N_s, d]
  std::vector<NormStats> stats;
  NormScope scope = NormScope::kGlobal;
  int n_s = 0, n_t = 0, n_r = 0;

  int d() const { return 2 * n_t * n_r; }
};

struct MaskSpec {
  enum class Scheme { kBernoulli, kEveryKth, kRatioSweep };
  Scheme scheme = Scheme::kBernoulli;
  double keep_prob = 0.85;      // Bernoulli: element kept with probability p
  int k = 10;                   // EveryKth: rows with index % k == 0 masked
  double masked_fraction = 0.0; // RatioSweep: row kept iff u > gamma
  uint64_t seed = 0;

  static MaskSpec bernoulli(double p, uint64_t seed);
  static MaskSpec every_kth(int k);
  static MaskSpec ratio_sweep(double gamma, uint64_t seed);
};

struct MaskMatrix {
  int n_s = 0;
  int d = 0;
  std::vector<uint8_t> data;  // row-major, 1 = keep

  uint8_t at(int s, int j) const { return data[static_cast<size_t>(s) * d + j]; }
  // Rows whose every entry is masked (for report auditing).
  std::vector<int> masked_rows() const;
};

struct AttentionMask {
  std::vector<uint8_t> data;  // 1 = valid token, prefix property holds
  int valid_count() const;
};

SplitNormalized split_and_normalize(const channel::CsiTensor& h,
                                    NormScope scope = NormScope::kGlobal);

// Undo split_and_normalize exactly (up to float rounding).
channel::CsiTensor denormalize(const SplitNormalized& parts);

FeatureMatrix flatten(const SplitNormalized& parts);
SplitNormalized unflatten(const FeatureMatrix& x);

// Convenience composition used by the pipeline.
FeatureMatrix featurize(const channel::CsiTensor& h, NormScope scope = NormScope::kGlobal);
channel::CsiTensor defeaturize(const FeatureMatrix& x);

MaskMatrix make_mask(const MaskSpec& spec, int n_s, int d);

// Per-(draw, sample) mask seed shared by training (draw = epoch) and
// evaluation (draw = 0 or sweep point).
uint64_t mask_seed_for(uint64_t base, uint64_t draw, int sample);

FeatureMatrix apply_mask(const FeatureMatrix& x, const MaskMatrix& m);

// Zero-pads rows [n_s, target_len) and returns the matching attention mask.
std::pair<FeatureMatrix, AttentionMask> pad_and_attention_mask(const FeatureMatrix& x,
                                                               int target_len);

}  // namespace csitk::preprocess
