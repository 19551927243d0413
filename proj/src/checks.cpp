#include "csitk/checks.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <utility>

#include "csitk/channel.hpp"
#include "csitk/checkpoint.hpp"
#include "csitk/dataset_io.hpp"
#include "csitk/errors.hpp"
#include "csitk/experiments.hpp"
#include "csitk/model.hpp"
#include "csitk/preprocess.hpp"
#include "csitk/rng.hpp"
#include "csitk/tensor.hpp"

namespace csitk::checks {
namespace {

constexpr double kOpGradTol = 1e-4;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Tensor random_tensor(std::vector<int> shape, SplitMix64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = rng.next_normal();
  return t;
}

using Builder = std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

CheckResult grad_op_check(const std::string& op, const Builder& build,
                          const std::vector<Tensor>& params) {
  const GradCheckResult r = grad_check(build, params);
  return {"grad/" + op, r.max_rel_err < kOpGradTol,
          "max rel err " + fmt(r.max_rel_err) + " (tol " + fmt(kOpGradTol) + ")"};
}

// Manual finite-difference comparison for mul so the fault-injection fixture
// can corrupt the analytic side and prove a wrong backprop rule is caught.
CheckResult grad_mul_check(SplitMix64& rng, bool inject_bug) {
  std::vector<Tensor> params = {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
  const auto objective = [](const std::vector<Tensor>& p) {
    double s = 0.0;
    for (int64_t i = 0; i < p[0].size(); ++i) s += p[0].values[i] * p[1].values[i];
    return s;
  };

  Tape tape;
  const Tape::NodeId a = tape.leaf(params[0], true);
  const Tape::NodeId b = tape.leaf(params[1], true);
  tape.backward(tape.sum(tape.mul(a, b)));
  std::vector<Tensor> analytic = {tape.grad(a), tape.grad(b)};
  if (inject_bug) analytic[0].values[0] += 0.01;  // simulated wrong d(mul)/da rule

  const double step = 1e-5;
  double max_rel = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    for (int64_t i = 0; i < params[p].size(); ++i) {
      std::vector<Tensor> lo = params, hi = params;
      lo[p].values[i] -= step;
      hi[p].values[i] += step;
      const double numeric = (objective(hi) - objective(lo)) / (2 * step);
      const double a_v = analytic[p].values[i];
      max_rel = std::max(max_rel,
                         std::abs(a_v - numeric) / (std::abs(a_v) + std::abs(numeric) + 1e-3));
    }
  }
  return {"grad/mul", max_rel < kOpGradTol,
          "max rel err " + fmt(max_rel) + " (tol " + fmt(kOpGradTol) + ")"};
}

void gradient_checks(std::vector<CheckResult>& out, SplitMix64& rng, bool inject_bug) {
  const auto t23 = [&] { return random_tensor({2, 3}, rng); };

  out.push_back(grad_op_check(
      "add", [](Tape& t, const std::vector<Tape::NodeId>& p) { return t.sum(t.add(p[0], p[1])); },
      {t23(), t23()}));
  out.push_back(grad_op_check(
      "sub", [](Tape& t, const std::vector<Tape::NodeId>& p) { return t.sum(t.sub(p[0], p[1])); },
      {t23(), t23()}));
  out.push_back(grad_mul_check(rng, inject_bug));
  out.push_back(grad_op_check(
      "matmul",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        return t.sum(t.mul(t.matmul(p[0], p[1]), t.matmul(p[0], p[1])));
      },
      {random_tensor({2, 3}, rng), random_tensor({3, 4}, rng)}));
  out.push_back(grad_op_check(
      "matmul_nt",
      [](Tape& t, const std::vector<Tape::NodeId>& p) { return t.sum(t.matmul_nt(p[0], p[1])); },
      {random_tensor({2, 3}, rng), random_tensor({4, 3}, rng)}));
  out.push_back(grad_op_check(
      "add_row_vector",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        const Tape::NodeId y = t.add_row_vector(p[0], p[1]);
        return t.sum(t.mul(y, y));
      },
      {random_tensor({3, 4}, rng), random_tensor({4}, rng)}));
  out.push_back(grad_op_check(
      "scale",
      [](Tape& t, const std::vector<Tape::NodeId>& p) { return t.sum(t.scale(p[0], -1.7)); },
      {t23()}));
  out.push_back(grad_op_check(
      "softmax_rows",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        const Tape::NodeId y = t.softmax_rows(p[0]);
        return t.sum(t.mul(y, y));
      },
      {random_tensor({3, 5}, rng)}));
  out.push_back(grad_op_check(
      "softmax_rows_masked",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        static const std::vector<uint8_t> valid = {1, 0, 1, 1, 0};
        const Tape::NodeId y = t.softmax_rows(p[0], &valid);
        return t.sum(t.mul(y, y));
      },
      {random_tensor({3, 5}, rng)}));
  out.push_back(grad_op_check(
      "layer_norm",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        const Tape::NodeId y = t.layer_norm(p[0], p[1], p[2]);
        return t.sum(t.mul(y, y));
      },
      {random_tensor({3, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)}));
  out.push_back(grad_op_check(
      "gelu",
      [](Tape& t, const std::vector<Tape::NodeId>& p) { return t.sum(t.gelu(p[0])); }, {t23()}));
  out.push_back(grad_op_check(
      "relu",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        return t.sum(t.mul(t.relu(p[0]), t.relu(p[0])));
      },
      {t23()}));
  out.push_back(grad_op_check(
      "concat_cols",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        const Tape::NodeId y = t.concat_cols({p[0], p[1]});
        return t.sum(t.mul(y, y));
      },
      {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)}));
  out.push_back(grad_op_check(
      "slice_rows",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        const Tape::NodeId y = t.slice_rows(p[0], 1, 3);
        return t.sum(t.mul(y, y));
      },
      {random_tensor({4, 3}, rng)}));
  out.push_back(grad_op_check(
      "reshape",
      [](Tape& t, const std::vector<Tape::NodeId>& p) {
        const Tape::NodeId y = t.reshape(p[0], {3, 2});
        return t.sum(t.mul(y, y));
      },
      {t23()}));
}

void softmax_checks(std::vector<CheckResult>& out, SplitMix64& rng) {
  Tape tape;
  const Tape::NodeId x = tape.leaf(random_tensor({5, 7}, rng));
  const Tensor& plain = tape.value(tape.softmax_rows(x));
  double worst_row = 0.0;
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 7; ++j) s += plain.at(i, j);
    worst_row = std::max(worst_row, std::abs(s - 1.0));
  }
  out.push_back({"softmax/rows_sum_to_one", worst_row < 1e-12,
                 "max |row sum - 1| = " + fmt(worst_row)});

  const std::vector<uint8_t> valid = {1, 0, 1, 1, 0, 1, 0};
  const Tensor& masked = tape.value(tape.softmax_rows(x, &valid));
  bool zeros_exact = true;
  double worst_masked_row = 0.0;
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 7; ++j) {
      if (!valid[static_cast<size_t>(j)] && masked.at(i, j) != 0.0) zeros_exact = false;
      s += masked.at(i, j);
    }
    worst_masked_row = std::max(worst_masked_row, std::abs(s - 1.0));
  }
  out.push_back({"softmax/masked_cols_exact_zero", zeros_exact && worst_masked_row < 1e-12,
                 std::string("masked columns ") + (zeros_exact ? "are" : "are NOT") +
                     " exactly zero; max |row sum - 1| = " + fmt(worst_masked_row)});
}

void layer_norm_checks(std::vector<CheckResult>& out, SplitMix64& rng) {
  Tape tape;
  const int d = 16;
  const Tape::NodeId x = tape.leaf(random_tensor({4, d}, rng));
  const Tape::NodeId gain = tape.leaf(Tensor({d}, std::vector<double>(d, 1.0)));
  const Tape::NodeId bias = tape.leaf(Tensor::zeros({d}));
  const Tensor& y = tape.value(tape.layer_norm(x, gain, bias));
  double worst_mean = 0.0, worst_var = 0.0;
  for (int i = 0; i < 4; ++i) {
    double m = 0.0, sq = 0.0;
    for (int j = 0; j < d; ++j) m += y.at(i, j);
    m /= d;
    for (int j = 0; j < d; ++j) sq += (y.at(i, j) - m) * (y.at(i, j) - m);
    worst_mean = std::max(worst_mean, std::abs(m));
    worst_var = std::max(worst_var, std::abs(sq / d - 1.0));
  }
  out.push_back({"layer_norm/row_moments", worst_mean < 1e-9 && worst_var < 1e-3,
                 "max |mean| = " + fmt(worst_mean) + ", max |var - 1| = " + fmt(worst_var)});
}

void mask_checks(std::vector<CheckResult>& out, uint64_t seed) {
  using preprocess::MaskSpec;

  const int n_s = 64, d = 64;
  const double p = 0.85;
  const preprocess::MaskMatrix bern =
      preprocess::make_mask(MaskSpec::bernoulli(p, seed), n_s, d);
  int64_t kept = 0;
  for (uint8_t v : bern.data) kept += v;
  const double n = static_cast<double>(n_s) * d;
  const double sigma = std::sqrt(n * p * (1 - p));
  const double dev = std::abs(static_cast<double>(kept) - n * p);
  out.push_back({"mask/bernoulli_keep_rate", dev <= 3 * sigma,
                 "kept " + std::to_string(kept) + " of " + std::to_string(static_cast<int>(n)) +
                     ", |dev| = " + fmt(dev) + " vs 3 sigma = " + fmt(3 * sigma)});

  const preprocess::MaskMatrix every = preprocess::make_mask(MaskSpec::every_kth(10), 64, 8);
  const std::vector<int> expect = {0, 10, 20, 30, 40, 50, 60};
  out.push_back({"mask/every_kth_rows", every.masked_rows() == expect,
                 "masked rows of EveryKth(10) on 64 subcarriers"});

  bool sweep_ok = true;
  std::string sweep_detail;
  for (double gamma : {0.1, 0.3, 0.5}) {
    const int rows = 1000;
    const preprocess::MaskMatrix m =
        preprocess::make_mask(MaskSpec::ratio_sweep(gamma, seed + 7), rows, 4);
    const double masked = static_cast<double>(m.masked_rows().size());
    const double s = std::sqrt(rows * gamma * (1 - gamma));
    const double dv = std::abs(masked - rows * gamma);
    if (dv > 3 * s) sweep_ok = false;
    sweep_detail += "gamma " + fmt(gamma) + ": |dev| " + fmt(dv) + " vs " + fmt(3 * s) + "; ";
  }
  out.push_back({"mask/ratio_sweep_fraction", sweep_ok, sweep_detail});
}

std::filesystem::path scratch_dir() {
  return std::filesystem::temp_directory_path() /
         ("csitk_check_" + std::to_string(::getpid()));
}

void roundtrip_checks(std::vector<CheckResult>& out, uint64_t seed) {
  const std::filesystem::path root = scratch_dir();
  std::filesystem::remove_all(root);

  {
    channel::DatasetConfig cfg = channel::DatasetConfig::desk(seed);
    cfg.cells = 1;
    cfg.ues_per_cell = 2;
    const channel::Dataset ds = channel::generate_dataset(cfg);
    const std::string dir = (root / "ds").string();
    io::write_dataset(dir, ds);
    const channel::Dataset back = io::read_dataset(dir);
    bool ok = back.tensors.size() == ds.tensors.size() &&
              io::dataset_config_to_json(back.config) == io::dataset_config_to_json(ds.config);
    // Storage is float32: the round trip must match to the quantization, exactly.
    for (size_t i = 0; ok && i < ds.tensors.size(); ++i)
      for (size_t k = 0; ok && k < ds.tensors[i].data.size(); ++k) {
        const auto orig = ds.tensors[i].data[k];
        const auto got = back.tensors[i].data[k];
        ok = got.real() == static_cast<double>(static_cast<float>(orig.real())) &&
             got.imag() == static_cast<double>(static_cast<float>(orig.imag()));
      }
    out.push_back({"roundtrip/dataset", ok, "write + read of a 6-matrix CSID container"});
  }

  {
    model::ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    cfg.max_len = 4;
    cfg.feature_dim = 6;
    model::TransformerModel m(cfg, seed);
    const std::string dir = (root / "ckpt").string();
    io::save_model(dir, m);
    model::TransformerModel back = io::load_model(dir);
    bool ok = true;
    auto orig_params = m.parameters();
    auto back_params = back.parameters();
    for (size_t i = 0; ok && i < orig_params.size(); ++i)
      ok = orig_params[i]->values == back_params[i]->values;
    out.push_back({"roundtrip/checkpoint", ok, "save + load of a tiny transformer"});
  }

  {
    experiments::ExperimentReport rep;
    rep.experiment = "check";
    rep.config = {{"k", 1}};
    rep.rows.push_back({{{"case", "a"}}, "mse", 0.5});
    const nlohmann::json j = experiments::report_to_json(rep);
    const bool ok =
        experiments::report_to_json(experiments::report_from_json(j)).dump() == j.dump();
    out.push_back({"roundtrip/report", ok, "report JSON encode + decode"});
  }

  std::filesystem::remove_all(root);
}

}  // namespace

std::vector<CheckResult> run_checks(const CheckOptions& opt) {
  std::vector<CheckResult> out;
  SplitMix64 rng(SplitMix64::mix(opt.seed, 0xC0FFEE));
  gradient_checks(out, rng, opt.inject_grad_bug);
  softmax_checks(out, rng);
  layer_norm_checks(out, rng);
  mask_checks(out, opt.seed);
  roundtrip_checks(out, opt.seed);
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results)
    if (!r.pass) return false;
  return true;
}

nlohmann::json checks_to_json(const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  int failed = 0;
  for (const CheckResult& r : results) {
    checks.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    if (!r.pass) failed++;
  }
  return {{"checks", checks},
          {"passed", static_cast<int>(results.size()) - failed},
          {"failed", failed}};
}

}  // namespace csitk::checks
