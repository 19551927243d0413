#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "csitk/rng.hpp"

namespace csitk::channel {

using Complex = std::complex<double>;

inline constexpr double kLightSpeed = 2.998e8;  // m/s

enum class ScenarioId { kStationary, kHighSpeed, kUrbanMacro };
enum class DelayProfileId { kTdlA, kTdlC, kTdlD };

std::string to_string(ScenarioId id);
std::string to_string(DelayProfileId id);
ScenarioId scenario_from_string(const std::string& name);
DelayProfileId profile_from_string(const std::string& name);

// Complex channel tensor, row-major [subcarrier][tx][rx].
struct CsiTensor {
  int n_s = 0;
  int n_t = 0;
  int n_r = 0;
  std::vector<Complex> data;
  int cell_id = 0;
  int ue_id = 0;
  ScenarioId scenario = ScenarioId::kStationary;

  static CsiTensor zeros(int n_s, int n_t, int n_r);

  Complex& at(int s, int t, int r) {
    return data[(static_cast<size_t>(s) * n_t + t) * n_r + r];
  }
  const Complex& at(int s, int t, int r) const {
    return data[(static_cast<size_t>(s) * n_t + t) * n_r + r];
  }
  size_t size() const { return data.size(); }
  bool all_finite() const;
};

struct MultipathComponent {
  Complex gain;    // alpha_p
  double aod = 0;  // radians, departure
  double aoa = 0;  // radians, arrival
  double delay = 0;  // seconds
};

struct PathLossParams {
  double exponent = 3.0;       // beta
  double ref_frequency = 1e9;  // f0, Hz
  double freq_scaling = 2.0;   // gamma
};

struct DopplerParams {
  double speed = 0.0;                 // m/s
  double carrier_frequency = 3.5e9;   // Hz
  double light_speed = kLightSpeed;   // m/s
};

struct ScenarioConfig {
  ScenarioId id = ScenarioId::kStationary;
  DelayProfileId profile = DelayProfileId::kTdlA;
  double rms_delay_spread = 100e-9;  // seconds
  DopplerParams doppler;
  int path_count = 24;
  double rician_k = 0.0;  // LOS power ratio; 0 = pure NLOS

  static ScenarioConfig stationary();
  static ScenarioConfig high_speed();
  static ScenarioConfig urban_macro();
};

struct DatasetConfig {
  int cells = 2;
  int ues_per_cell = 20;
  std::vector<ScenarioConfig> scenarios;
  int n_subcarriers = 16;
  int n_tx = 8;
  int n_rx = 2;
  double subcarrier_spacing = 30e3;  // Hz
  double snr_db = 100.0;
  uint64_t seed = 1;
  PathLossParams path_loss;
  double distance_min_m = 50.0;   // per-UE distance draw bounds
  double distance_max_m = 500.0;

  int total_matrices() const {
    return cells * ues_per_cell * static_cast<int>(scenarios.size());
  }

  // Small configuration for tests and local runs.
  static DatasetConfig desk(uint64_t seed = 1);
  // Full-scale configuration: C=10, U=200, S=3, 64x64x4 tensors.
  static DatasetConfig paper_scale(uint64_t seed = 1);
};

struct Dataset {
  DatasetConfig config;
  std::vector<CsiTensor> tensors;  // index = (cell*U + ue)*S + scenario
};

// Doppler frequency shift v*f_c/c.
double doppler_shift(const DopplerParams& params);

// Path gain (1/d^beta) * (f_c/f0)^gamma.
double path_loss(double distance_m, double f_c, const PathLossParams& params);

// ULA response, entry k = exp(j*pi*k*sin(angle)); all entries unit modulus.
std::vector<Complex> steering_vector(int n_antennas, double angle);

// Draw the multipath profile for one channel realization. Delays follow an
// exponential profile rescaled so the realized power-weighted RMS delay
// spread hits the configured target; powers are normalized to sum to 1.
// With rician_k > 0 the first component is a delay-0 LOS tap carrying a
// K/(K+1) power fraction.
std::vector<MultipathComponent> sample_paths(const ScenarioConfig& scenario, SplitMix64& rng);

// H_{s,t,r} = sum_p alpha_p a_t(theta_p)[t] conj(a_r(phi_p)[r]) e^{-j2pi f_s tau_p},
// f_s = s * spacing.
CsiTensor synthesize(const std::vector<MultipathComponent>& paths, int n_s, int n_t, int n_r,
                     double subcarrier_spacing);

CsiTensor generate_csi(const ScenarioConfig& scenario, int n_s, int n_t, int n_r,
                       double subcarrier_spacing, SplitMix64& rng);

// Adds circularly symmetric complex Gaussian noise with per-entry variance
// mean|h|^2 / 10^(snr_db/10).
CsiTensor add_awgn(const CsiTensor& h, double snr_db, SplitMix64& rng);

// Common phase rotation exp(j*2pi*delta_f*snapshot_time) on every entry.
CsiTensor apply_doppler_rotation(const CsiTensor& h, double delta_f, double snapshot_time);

// Per-path alternative: rotates each component by exp(j*2pi*delta_f*cos(aoa)*t),
// using the arrival angle as the motion-relative angle.
std::vector<MultipathComponent> rotate_paths_doppler(std::vector<MultipathComponent> paths,
                                                     double delta_f, double snapshot_time);

// Generates the full C*U*S dataset. Each (cell, ue, scenario) triple uses an
// independent RNG substream of config.seed, so the result is bit-identical
// across runs and thread counts.
Dataset generate_dataset(const DatasetConfig& config, int threads = 1);

}  // namespace csitk::channel
