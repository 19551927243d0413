#include "csitk/channel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

#include "csitk/errors.hpp"

namespace csitk::channel {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Power-weighted RMS delay spread; weights must sum to 1.
double rms_delay_spread(const std::vector<double>& delays, const std::vector<double>& powers) {
  double mean = 0.0;
  for (size_t i = 0; i < delays.size(); ++i) mean += powers[i] * delays[i];
  double var = 0.0;
  for (size_t i = 0; i < delays.size(); ++i) {
    const double d = delays[i] - mean;
    var += powers[i] * d * d;
  }
  return std::sqrt(std::max(var, 0.0));
}

}  // namespace

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kStationary: return "stationary";
    case ScenarioId::kHighSpeed: return "high_speed";
    case ScenarioId::kUrbanMacro: return "urban_macro";
  }
  return "unknown";
}

std::string to_string(DelayProfileId id) {
  switch (id) {
    case DelayProfileId::kTdlA: return "tdl_a";
    case DelayProfileId::kTdlC: return "tdl_c";
    case DelayProfileId::kTdlD: return "tdl_d";
  }
  return "unknown";
}

ScenarioId scenario_from_string(const std::string& name) {
  if (name == "stationary") return ScenarioId::kStationary;
  if (name == "high_speed") return ScenarioId::kHighSpeed;
  if (name == "urban_macro") return ScenarioId::kUrbanMacro;
  throw ConfigError("unknown scenario id: " + name);
}

DelayProfileId profile_from_string(const std::string& name) {
  if (name == "tdl_a") return DelayProfileId::kTdlA;
  if (name == "tdl_c") return DelayProfileId::kTdlC;
  if (name == "tdl_d") return DelayProfileId::kTdlD;
  throw ConfigError("unknown delay profile: " + name);
}

CsiTensor CsiTensor::zeros(int n_s, int n_t, int n_r) {
  if (n_s <= 0 || n_t <= 0 || n_r <= 0)
    throw ConfigError("CsiTensor dimensions must be positive");
  CsiTensor h;
  h.n_s = n_s;
  h.n_t = n_t;
  h.n_r = n_r;
  h.data.assign(static_cast<size_t>(n_s) * n_t * n_r, Complex(0.0, 0.0));
  return h;
}

bool CsiTensor::all_finite() const {
  for (const Complex& z : data)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

ScenarioConfig ScenarioConfig::stationary() {
  ScenarioConfig c;
  c.id = ScenarioId::kStationary;
  c.profile = DelayProfileId::kTdlA;
  c.rms_delay_spread = 100e-9;
  c.doppler.speed = 0.0;
  return c;
}

ScenarioConfig ScenarioConfig::high_speed() {
  ScenarioConfig c;
  c.id = ScenarioId::kHighSpeed;
  c.profile = DelayProfileId::kTdlC;
  c.rms_delay_spread = 300e-9;
  c.doppler.speed = 120.0 / 3.6;  // 120 km/h
  c.doppler.carrier_frequency = 3.5e9;
  return c;
}

ScenarioConfig ScenarioConfig::urban_macro() {
  ScenarioConfig c;
  c.id = ScenarioId::kUrbanMacro;
  c.profile = DelayProfileId::kTdlD;
  c.rms_delay_spread = 500e-9;
  c.doppler.speed = 0.0;
  c.rician_k = 10.0;  // TDL-D is the LOS profile
  return c;
}

DatasetConfig DatasetConfig::desk(uint64_t seed) {
  DatasetConfig c;
  c.cells = 2;
  c.ues_per_cell = 20;
  c.scenarios = {ScenarioConfig::stationary(), ScenarioConfig::high_speed(),
                 ScenarioConfig::urban_macro()};
  c.n_subcarriers = 16;
  c.n_tx = 8;
  c.n_rx = 2;
  c.seed = seed;
  return c;
}

DatasetConfig DatasetConfig::paper_scale(uint64_t seed) {
  DatasetConfig c = desk(seed);
  c.cells = 10;
  c.ues_per_cell = 200;
  c.n_subcarriers = 64;
  c.n_tx = 64;
  c.n_rx = 4;
  return c;
}

double doppler_shift(const DopplerParams& params) {
  if (params.speed < 0.0) throw ConfigError("doppler_shift: speed must be >= 0");
  if (params.carrier_frequency <= 0.0)
    throw ConfigError("doppler_shift: carrier frequency must be > 0");
  if (params.speed == 0.0) return 0.0;
  return params.speed * params.carrier_frequency / params.light_speed;
}

double path_loss(double distance_m, double f_c, const PathLossParams& params) {
  if (distance_m <= 0.0) throw ConfigError("path_loss: distance must be > 0");
  if (f_c <= 0.0) throw ConfigError("path_loss: carrier frequency must be > 0");
  if (params.ref_frequency <= 0.0)
    throw ConfigError("path_loss: reference frequency must be > 0");
  return std::pow(distance_m, -params.exponent) *
         std::pow(f_c / params.ref_frequency, params.freq_scaling);
}

std::vector<Complex> steering_vector(int n_antennas, double angle) {
  if (n_antennas < 1) throw ConfigError("steering_vector: need at least one antenna");
  std::vector<Complex> a(static_cast<size_t>(n_antennas));
  const double phase_step = M_PI * std::sin(angle);
  for (int k = 0; k < n_antennas; ++k)
    a[static_cast<size_t>(k)] = std::polar(1.0, phase_step * k);
  return a;
}

std::vector<MultipathComponent> sample_paths(const ScenarioConfig& scenario, SplitMix64& rng) {
  const int p_count = scenario.path_count;
  if (p_count <= 0) throw ConfigError("sample_paths: path_count must be >= 1");
  const double sigma = scenario.rms_delay_spread;
  const double k_factor = scenario.rician_k;
  const bool los = k_factor > 0.0;

  std::vector<double> delays(static_cast<size_t>(p_count), 0.0);
  std::vector<double> powers(static_cast<size_t>(p_count), 0.0);
  std::vector<double> aods(static_cast<size_t>(p_count), 0.0);
  std::vector<double> aoas(static_cast<size_t>(p_count), 0.0);
  std::vector<double> phases(static_cast<size_t>(p_count), 0.0);

  for (int p = 0; p < p_count; ++p) {
    const bool is_los = los && p == 0;
    delays[static_cast<size_t>(p)] = is_los || sigma <= 0.0 ? 0.0 : rng.next_exponential(sigma);
    aods[static_cast<size_t>(p)] = rng.next_uniform(-M_PI / 2.0, M_PI / 2.0);
    aoas[static_cast<size_t>(p)] = rng.next_uniform(-M_PI / 2.0, M_PI / 2.0);
    phases[static_cast<size_t>(p)] = is_los ? 0.0 : rng.next_uniform(0.0, kTwoPi);
  }

  // Exponential power profile over the raw delays, normalized so the NLOS
  // taps carry 1/(K+1) of the unit total (all of it when K = 0).
  const double nlos_budget = los ? 1.0 / (k_factor + 1.0) : 1.0;
  double nlos_sum = 0.0;
  const int first_nlos = los ? 1 : 0;
  for (int p = first_nlos; p < p_count; ++p)
    nlos_sum += std::exp(-delays[static_cast<size_t>(p)] / (sigma > 0.0 ? sigma : 1.0));
  for (int p = first_nlos; p < p_count; ++p) {
    const double w = std::exp(-delays[static_cast<size_t>(p)] / (sigma > 0.0 ? sigma : 1.0));
    powers[static_cast<size_t>(p)] = nlos_sum > 0.0 ? nlos_budget * w / nlos_sum : 0.0;
  }
  if (los) {
    powers[0] = k_factor / (k_factor + 1.0);
    if (p_count == 1) powers[0] = 1.0;  // keep total power exactly 1
  }

  // Rescale delays so the realized power-weighted spread hits the target.
  if (sigma > 0.0) {
    const double realized = rms_delay_spread(delays, powers);
    if (realized > 0.0) {
      const double scale = sigma / realized;
      for (double& d : delays) d *= scale;
    }
  }

  std::vector<MultipathComponent> paths(static_cast<size_t>(p_count));
  for (int p = 0; p < p_count; ++p) {
    MultipathComponent& mc = paths[static_cast<size_t>(p)];
    mc.gain = std::polar(std::sqrt(powers[static_cast<size_t>(p)]), phases[static_cast<size_t>(p)]);
    mc.aod = aods[static_cast<size_t>(p)];
    mc.aoa = aoas[static_cast<size_t>(p)];
    mc.delay = delays[static_cast<size_t>(p)];
  }
  return paths;
}

CsiTensor synthesize(const std::vector<MultipathComponent>& paths, int n_s, int n_t, int n_r,
                     double subcarrier_spacing) {
  CsiTensor h = CsiTensor::zeros(n_s, n_t, n_r);
  std::vector<Complex> outer(static_cast<size_t>(n_t) * n_r);
  for (const MultipathComponent& mc : paths) {
    const std::vector<Complex> at = steering_vector(n_t, mc.aod);
    const std::vector<Complex> ar = steering_vector(n_r, mc.aoa);
    for (int t = 0; t < n_t; ++t)
      for (int r = 0; r < n_r; ++r)
        outer[static_cast<size_t>(t) * n_r + r] =
            at[static_cast<size_t>(t)] * std::conj(ar[static_cast<size_t>(r)]);
    for (int s = 0; s < n_s; ++s) {
      const double f_s = s * subcarrier_spacing;
      const Complex w = mc.gain * std::polar(1.0, -kTwoPi * f_s * mc.delay);
      Complex* row = h.data.data() + static_cast<size_t>(s) * n_t * n_r;
      for (size_t i = 0; i < outer.size(); ++i) row[i] += w * outer[i];
    }
  }
  return h;
}

CsiTensor generate_csi(const ScenarioConfig& scenario, int n_s, int n_t, int n_r,
                       double subcarrier_spacing, SplitMix64& rng) {
  CsiTensor h = synthesize(sample_paths(scenario, rng), n_s, n_t, n_r, subcarrier_spacing);
  h.scenario = scenario.id;
  return h;
}

CsiTensor add_awgn(const CsiTensor& h, double snr_db, SplitMix64& rng) {
  if (!h.all_finite()) throw DegenerateInputError("add_awgn: input has non-finite entries");
  double signal_power = 0.0;
  for (const Complex& z : h.data) signal_power += std::norm(z);
  signal_power /= static_cast<double>(h.data.size());
  if (signal_power <= 0.0)
    throw DegenerateInputError("add_awgn: zero-power input with finite SNR");
  const double noise_var = signal_power / std::pow(10.0, snr_db / 10.0);
  const double component_std = std::sqrt(noise_var / 2.0);
  CsiTensor out = h;
  for (Complex& z : out.data) {
    const double re = rng.next_normal() * component_std;
    const double im = rng.next_normal() * component_std;
    z += Complex(re, im);
  }
  return out;
}

CsiTensor apply_doppler_rotation(const CsiTensor& h, double delta_f, double snapshot_time) {
  CsiTensor out = h;
  const double angle = kTwoPi * delta_f * snapshot_time;
  if (angle == 0.0) return out;
  const Complex rot = std::polar(1.0, angle);
  for (Complex& z : out.data) z *= rot;
  return out;
}

std::vector<MultipathComponent> rotate_paths_doppler(std::vector<MultipathComponent> paths,
                                                     double delta_f, double snapshot_time) {
  for (MultipathComponent& mc : paths) {
    const double angle = kTwoPi * delta_f * std::cos(mc.aoa) * snapshot_time;
    if (angle != 0.0) mc.gain *= std::polar(1.0, angle);
  }
  return paths;
}

Dataset generate_dataset(const DatasetConfig& config, int threads) {
  if (config.cells <= 0 || config.ues_per_cell <= 0 || config.scenarios.empty())
    throw ConfigError("generate_dataset: cells, ues_per_cell, scenarios must be non-empty");
  if (config.n_subcarriers <= 0 || config.n_tx <= 0 || config.n_rx <= 0)
    throw ConfigError("generate_dataset: tensor dimensions must be positive");
  if (config.distance_min_m <= 0.0 || config.distance_max_m < config.distance_min_m)
    throw ConfigError("generate_dataset: invalid distance bounds");
  if (config.path_loss.exponent < 2.0 || config.path_loss.exponent > 4.0)
    std::cerr << "warning: path loss exponent " << config.path_loss.exponent
              << " outside the typical [2, 4] range\n";

  const int s_count = static_cast<int>(config.scenarios.size());
  const int total = config.total_matrices();
  Dataset ds;
  ds.config = config;
  ds.tensors.resize(static_cast<size_t>(total));

  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const int s = i % s_count;
      const int u = (i / s_count) % config.ues_per_cell;
      const int c = i / (s_count * config.ues_per_cell);
      const ScenarioConfig& scenario = config.scenarios[static_cast<size_t>(s)];

      SplitMix64 rng = substream(config.seed, {kDatasetStream, static_cast<uint64_t>(c),
                                               static_cast<uint64_t>(u), static_cast<uint64_t>(s)});
      CsiTensor h = generate_csi(scenario, config.n_subcarriers, config.n_tx, config.n_rx,
                                 config.subcarrier_spacing, rng);

      // Per-UE distance (shared across the UE's scenarios) scales the channel.
      SplitMix64 dist_rng = substream(
          config.seed, {kDatasetStream, 0xD157ull, static_cast<uint64_t>(c), static_cast<uint64_t>(u)});
      const double dist = dist_rng.next_uniform(config.distance_min_m, config.distance_max_m);
      const double gain = path_loss(dist, scenario.doppler.carrier_frequency, config.path_loss);
      for (Complex& z : h.data) z *= gain;

      h = add_awgn(h, config.snr_db, rng);
      h.cell_id = c;
      h.ue_id = u;
      h.scenario = scenario.id;
      ds.tensors[static_cast<size_t>(i)] = std::move(h);
    }
  };

  const int n_threads = std::max(1, std::min(threads, total));
  if (n_threads == 1) {
    worker(0, total);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    const int chunk = (total + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(total, begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }
  return ds;
}

}  // namespace csitk::channel
