#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include "csitk/channel.hpp"
#include "csitk/dataset_io.hpp"
#include "csitk/errors.hpp"
#include "csitk/rng.hpp"

using namespace csitk::channel;
using csitk::ConfigError;
using csitk::DegenerateInputError;
using csitk::IoError;
using csitk::SplitMix64;

namespace {

double realized_rms_spread(const std::vector<MultipathComponent>& paths) {
  double mean = 0.0, power = 0.0;
  for (const auto& p : paths) {
    mean += std::norm(p.gain) * p.delay;
    power += std::norm(p.gain);
  }
  mean /= power;
  double var = 0.0;
  for (const auto& p : paths) {
    const double d = p.delay - mean;
    var += std::norm(p.gain) * d * d;
  }
  return std::sqrt(var / power);
}

}  // namespace

TEST_CASE("doppler shift formula") {
  CHECK(doppler_shift({0.0, 3.5e9, kLightSpeed}) == 0.0);
  // 120 km/h at 3.5 GHz: v*f_c/c = (120/3.6)*3.5e9/2.998e8.
  const double hs = doppler_shift(ScenarioConfig::high_speed().doppler);
  CHECK(hs == doctest::Approx(389.14832110295754).epsilon(1e-12));
  CHECK(doppler_shift({30.0, 1e9, 3e8}) == doctest::Approx(100.0).epsilon(1e-12));

  // Inversion: shift * c / f_c recovers v.
  SplitMix64 rng(7);
  for (int i = 0; i < 50; ++i) {
    DopplerParams p;
    p.speed = rng.next_uniform(0.1, 200.0);
    p.carrier_frequency = rng.next_uniform(1e8, 1e10);
    const double v = doppler_shift(p) * p.light_speed / p.carrier_frequency;
    CHECK(std::abs(v - p.speed) / p.speed <= 1e-9);
  }

  CHECK_THROWS_AS(doppler_shift({-1.0, 1e9, 3e8}), ConfigError);
  CHECK_THROWS_AS(doppler_shift({1.0, 0.0, 3e8}), ConfigError);
}

TEST_CASE("path loss formula") {
  PathLossParams p;  // beta=3, f0=1e9, gamma=2
  CHECK(path_loss(1.0, p.ref_frequency, p) == doctest::Approx(1.0).epsilon(1e-12));

  p.exponent = 2.0;
  CHECK(path_loss(10.0, p.ref_frequency, p) == doctest::Approx(0.01).epsilon(1e-12));

  p.exponent = 4.0;
  p.freq_scaling = 1.0;
  CHECK(path_loss(2.0, 2.0 * p.ref_frequency, p) == doctest::Approx(0.125).epsilon(1e-12));

  // Monotone decreasing in distance.
  PathLossParams q;
  double prev = path_loss(1.0, 2e9, q);
  for (double d = 2.0; d < 600.0; d *= 1.7) {
    const double g = path_loss(d, 2e9, q);
    CHECK(g < prev);
    prev = g;
  }

  CHECK_THROWS_AS(path_loss(0.0, 1e9, q), ConfigError);
  CHECK_THROWS_AS(path_loss(-5.0, 1e9, q), ConfigError);
}

TEST_CASE("steering vector") {
  const auto broadside = steering_vector(4, 0.0);
  REQUIRE(broadside.size() == 4);
  for (const Complex& z : broadside) {
    CHECK(z.real() == 1.0);
    CHECK(z.imag() == 0.0);
  }

  // angle = pi/2: entry k = exp(j*pi*k), so [1, -1].
  const auto endfire = steering_vector(2, M_PI / 2.0);
  CHECK(endfire[0] == Complex(1.0, 0.0));
  CHECK(endfire[1].real() == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(endfire[1].imag()) <= 1e-15);

  SplitMix64 rng(3);
  for (int i = 0; i < 30; ++i) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 64);
    const auto a = steering_vector(n, rng.next_uniform(-M_PI / 2, M_PI / 2));
    for (const Complex& z : a) CHECK(std::abs(std::abs(z) - 1.0) <= 1e-12);
  }

  CHECK_THROWS_AS(steering_vector(0, 0.0), ConfigError);
}

TEST_CASE("sample_paths power normalization and angles") {
  SplitMix64 rng(11);
  for (const ScenarioConfig& sc :
       {ScenarioConfig::stationary(), ScenarioConfig::high_speed(), ScenarioConfig::urban_macro()}) {
    for (int i = 0; i < 20; ++i) {
      const auto paths = sample_paths(sc, rng);
      REQUIRE(static_cast<int>(paths.size()) == sc.path_count);
      double power = 0.0;
      for (const auto& p : paths) {
        power += std::norm(p.gain);
        CHECK(p.delay >= 0.0);
        CHECK(std::abs(p.aod) <= M_PI / 2);
        CHECK(std::abs(p.aoa) <= M_PI / 2);
      }
      CHECK(std::abs(power - 1.0) <= 1e-9);
    }
  }

  ScenarioConfig bad = ScenarioConfig::stationary();
  bad.path_count = 0;
  CHECK_THROWS_AS(sample_paths(bad, rng), ConfigError);
}

TEST_CASE("sample_paths rician LOS tap") {
  ScenarioConfig sc = ScenarioConfig::urban_macro();  // K = 10
  SplitMix64 rng(21);
  for (int i = 0; i < 10; ++i) {
    const auto paths = sample_paths(sc, rng);
    CHECK(paths[0].delay == 0.0);
    CHECK(std::norm(paths[0].gain) == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
    CHECK(paths[0].gain.imag() == 0.0);  // deterministic LOS phase
    CHECK(paths[0].gain.real() > 0.0);
  }

  // Degenerate single-path LOS: delay 0, |alpha| = 1.
  sc.path_count = 1;
  sc.rician_k = 1e12;
  const auto one = sample_paths(sc, rng);
  REQUIRE(one.size() == 1);
  CHECK(one[0].delay == 0.0);
  CHECK(std::abs(std::abs(one[0].gain) - 1.0) <= 1e-12);
}

TEST_CASE("sample_paths realized delay spread hits the target") {
  // The sampler rescales each draw onto the configured spread, so every
  // nondegenerate draw lands on target; the +-20% Monte Carlo contract is
  // implied a fortiori.
  ScenarioConfig sc = ScenarioConfig::stationary();
  sc.path_count = 32;
  SplitMix64 rng(5);
  double avg = 0.0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) {
    const auto paths = sample_paths(sc, rng);
    const double spread = realized_rms_spread(paths);
    CHECK(std::abs(spread - 100e-9) / 100e-9 <= 1e-9);
    avg += spread;
  }
  avg /= draws;
  CHECK(avg >= 0.8 * 100e-9);
  CHECK(avg <= 1.2 * 100e-9);

  // Rician profile with its dominant delay-0 tap must also hit the target.
  SplitMix64 rng2(6);
  const auto um = sample_paths(ScenarioConfig::urban_macro(), rng2);
  CHECK(std::abs(realized_rms_spread(um) - 500e-9) / 500e-9 <= 1e-9);
}

TEST_CASE("synthesize single trivial path gives all-ones tensor") {
  MultipathComponent p;
  p.gain = Complex(1.0, 0.0);
  p.aod = 0.0;
  p.aoa = 0.0;
  p.delay = 0.0;
  const CsiTensor h = synthesize({p}, 3, 4, 2, 30e3);
  CHECK(h.n_s == 3);
  CHECK(h.n_t == 4);
  CHECK(h.n_r == 2);
  REQUIRE(h.data.size() == 3u * 4u * 2u);
  for (const Complex& z : h.data) {
    CHECK(z.real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(z.imag()) <= 1e-15);
  }
}

TEST_CASE("synthesize is additive over path lists") {
  SplitMix64 rng(17);
  ScenarioConfig sc = ScenarioConfig::high_speed();
  sc.path_count = 6;
  const auto paths = sample_paths(sc, rng);
  const std::vector<MultipathComponent> a(paths.begin(), paths.begin() + 3);
  const std::vector<MultipathComponent> b(paths.begin() + 3, paths.end());
  const CsiTensor h_all = synthesize(paths, 8, 4, 2, 30e3);
  const CsiTensor h_a = synthesize(a, 8, 4, 2, 30e3);
  const CsiTensor h_b = synthesize(b, 8, 4, 2, 30e3);
  for (size_t i = 0; i < h_all.data.size(); ++i)
    CHECK(std::abs(h_all.data[i] - (h_a.data[i] + h_b.data[i])) <= 1e-12);
}

TEST_CASE("add_awgn calibration") {
  // Unit-power tensor with >= 1e5 entries.
  CsiTensor h = CsiTensor::zeros(100, 32, 32);
  for (auto& z : h.data) z = Complex(1.0, 0.0);

  SplitMix64 rng(23);
  const CsiTensor noisy = add_awgn(h, 20.0, rng);
  double noise_power = 0.0;
  for (size_t i = 0; i < h.data.size(); ++i) noise_power += std::norm(noisy.data[i] - h.data[i]);
  noise_power /= static_cast<double>(h.data.size());
  const double realized_snr = 10.0 * std::log10(1.0 / noise_power);
  CHECK(std::abs(realized_snr - 20.0) <= 0.5);

  // snr 0 dB: noise power == signal power within 5% on a 64x64x4 tensor.
  CsiTensor h2 = CsiTensor::zeros(64, 64, 4);
  for (auto& z : h2.data) z = Complex(0.5, -0.5);  // power 0.5
  SplitMix64 rng2(29);
  const CsiTensor noisy2 = add_awgn(h2, 0.0, rng2);
  double np2 = 0.0;
  for (size_t i = 0; i < h2.data.size(); ++i) np2 += std::norm(noisy2.data[i] - h2.data[i]);
  np2 /= static_cast<double>(h2.data.size());
  CHECK(std::abs(np2 - 0.5) / 0.5 <= 0.05);

  // Effectively infinite SNR: output equals input to 1e-6 relative.
  SplitMix64 rng3(31);
  const CsiTensor quiet = add_awgn(h2, 300.0, rng3);
  for (size_t i = 0; i < h2.data.size(); ++i)
    CHECK(std::abs(quiet.data[i] - h2.data[i]) <= 1e-6 * std::abs(h2.data[i]));

  CsiTensor silent = CsiTensor::zeros(2, 2, 2);
  SplitMix64 rng4(37);
  CHECK_THROWS_AS(add_awgn(silent, 20.0, rng4), DegenerateInputError);
}

TEST_CASE("doppler rotation preserves magnitudes") {
  SplitMix64 rng(41);
  ScenarioConfig sc = ScenarioConfig::high_speed();
  SplitMix64 gen_rng(43);
  const CsiTensor h = generate_csi(sc, 8, 4, 2, 30e3, gen_rng);

  // delta_f = 0: bit-identical.
  const CsiTensor same = apply_doppler_rotation(h, 0.0, 1e-3);
  for (size_t i = 0; i < h.data.size(); ++i) CHECK(same.data[i] == h.data[i]);

  // delta_f * t = 0.5 -> multiply by exp(j pi) = -1.
  const CsiTensor flipped = apply_doppler_rotation(h, 500.0, 1e-3);
  for (size_t i = 0; i < h.data.size(); ++i)
    CHECK(std::abs(flipped.data[i] + h.data[i]) <= 1e-12);

  const CsiTensor rotated = apply_doppler_rotation(h, rng.next_uniform(0.0, 400.0), 1e-3);
  for (size_t i = 0; i < h.data.size(); ++i)
    CHECK(std::abs(std::abs(rotated.data[i]) - std::abs(h.data[i])) <= 1e-12);
}

TEST_CASE("per-path doppler rotation preserves path powers") {
  SplitMix64 rng(47);
  const auto paths = sample_paths(ScenarioConfig::high_speed(), rng);
  const auto same = rotate_paths_doppler(paths, 0.0, 1e-3);
  for (size_t i = 0; i < paths.size(); ++i) CHECK(same[i].gain == paths[i].gain);
  const auto rotated = rotate_paths_doppler(paths, 250.0, 1e-3);
  for (size_t i = 0; i < paths.size(); ++i)
    CHECK(std::abs(std::abs(rotated[i].gain) - std::abs(paths[i].gain)) <= 1e-12);
}

TEST_CASE("generate_dataset counts and determinism") {
  DatasetConfig cfg = DatasetConfig::desk(99);
  cfg.cells = 1;
  cfg.ues_per_cell = 2;
  const Dataset ds = generate_dataset(cfg);
  REQUIRE(static_cast<int>(ds.tensors.size()) == 6);  // 1*2*3

  int per_scenario[3] = {0, 0, 0};
  for (const CsiTensor& h : ds.tensors) {
    CHECK(h.all_finite());
    per_scenario[static_cast<int>(h.scenario)]++;
  }
  CHECK(per_scenario[0] == 2);
  CHECK(per_scenario[1] == 2);
  CHECK(per_scenario[2] == 2);

  // Bit-identical across repeat runs and thread counts.
  const Dataset again = generate_dataset(cfg, 1);
  const Dataset threaded = generate_dataset(cfg, 3);
  for (size_t i = 0; i < ds.tensors.size(); ++i)
    for (size_t k = 0; k < ds.tensors[i].data.size(); ++k) {
      CHECK(again.tensors[i].data[k] == ds.tensors[i].data[k]);
      CHECK(threaded.tensors[i].data[k] == ds.tensors[i].data[k]);
    }

  DatasetConfig bad = cfg;
  bad.cells = 0;
  CHECK_THROWS_AS(generate_dataset(bad), ConfigError);
}

TEST_CASE("dataset round-trips through CSID v1") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "csitk_test_csid";
  fs::remove_all(dir);

  DatasetConfig cfg = DatasetConfig::desk(123);
  cfg.cells = 1;
  cfg.ues_per_cell = 3;
  const Dataset ds = generate_dataset(cfg);
  csitk::io::write_dataset(dir.string(), ds);

  const Dataset back = csitk::io::read_dataset(dir.string());
  CHECK(back.config.cells == cfg.cells);
  CHECK(back.config.ues_per_cell == cfg.ues_per_cell);
  CHECK(back.config.seed == cfg.seed);
  CHECK(back.config.scenarios.size() == cfg.scenarios.size());
  CHECK(back.config.scenarios[2].rician_k == cfg.scenarios[2].rician_k);
  REQUIRE(back.tensors.size() == ds.tensors.size());
  for (size_t i = 0; i < ds.tensors.size(); ++i) {
    CHECK(back.tensors[i].cell_id == ds.tensors[i].cell_id);
    CHECK(back.tensors[i].ue_id == ds.tensors[i].ue_id);
    CHECK(back.tensors[i].scenario == ds.tensors[i].scenario);
    for (size_t k = 0; k < ds.tensors[i].data.size(); ++k) {
      // Storage is float32; the round-trip must be exact at that precision.
      CHECK(back.tensors[i].data[k].real() ==
            static_cast<double>(static_cast<float>(ds.tensors[i].data[k].real())));
      CHECK(back.tensors[i].data[k].imag() ==
            static_cast<double>(static_cast<float>(ds.tensors[i].data[k].imag())));
    }
  }

  // Re-serializing yields byte-identical files.
  const fs::path dir2 = fs::temp_directory_path() / "csitk_test_csid2";
  fs::remove_all(dir2);
  csitk::io::write_dataset(dir2.string(), ds);
  for (const char* name : {"manifest.json", "data.bin"}) {
    std::ifstream a(dir / name, std::ios::binary);
    std::ifstream b(dir2 / name, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }

  // Wrong magic must be rejected.
  {
    std::ifstream f(dir / "manifest.json");
    nlohmann::json m;
    f >> m;
    m["magic"] = "XXXX";
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2);
  }
  CHECK_THROWS_AS(csitk::io::read_dataset(dir.string()), IoError);

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("read_dataset rejects truncated payload") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "csitk_test_csid_trunc";
  fs::remove_all(dir);
  DatasetConfig cfg = DatasetConfig::desk(5);
  cfg.cells = 1;
  cfg.ues_per_cell = 1;
  csitk::io::write_dataset(dir.string(), generate_dataset(cfg));
  fs::resize_file(dir / "data.bin", 16);
  CHECK_THROWS_AS(csitk::io::read_dataset(dir.string()), IoError);
  fs::remove_all(dir);
}
