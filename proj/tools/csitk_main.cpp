// csitk: generate CSI datasets, train reconstruction models, run the
// evaluation suite, and self-check the numeric core.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csitk/channel.hpp"
#include "csitk/checkpoint.hpp"
#include "csitk/checks.hpp"
#include "csitk/dataset_io.hpp"
#include "csitk/errors.hpp"
#include "csitk/experiments.hpp"
#include "csitk/model.hpp"
#include "csitk/preprocess.hpp"
#include "csitk/training.hpp"
#include "csitk/version.hpp"

namespace {

using csitk::ConfigError;
using csitk::IoError;
using csitk::channel::Dataset;
using csitk::channel::DatasetConfig;
using csitk::model::ModelConfig;
using csitk::preprocess::MaskSpec;
using csitk::preprocess::NormScope;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// "bernoulli:0.85" | "every:10" | "ratio:0.3"; the run seed feeds the
// stochastic schemes.
MaskSpec parse_mask_flag(const std::string& text, uint64_t seed) {
  const size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("mask '" + text + "': expected scheme:value, e.g. bernoulli:0.85 or every:10");
  const std::string scheme = text.substr(0, colon);
  const std::string value = text.substr(colon + 1);
  try {
    if (scheme == "bernoulli") return MaskSpec::bernoulli(std::stod(value), seed);
    if (scheme == "every") return MaskSpec::every_kth(std::stoi(value));
    if (scheme == "ratio") return MaskSpec::ratio_sweep(std::stod(value), seed);
  } catch (const std::exception&) {
    throw ConfigError("mask '" + text + "': bad value '" + value + "'");
  }
  throw ConfigError("mask '" + text + "': unknown scheme '" + scheme +
                    "' (use bernoulli:p, every:k, or ratio:g)");
}

NormScope parse_norm_flag(const std::string& text) {
  if (text == "global") return NormScope::kGlobal;
  if (text == "per_subcarrier") return NormScope::kPerSubcarrier;
  throw ConfigError("norm '" + text + "': use global or per_subcarrier");
}

std::string join_argv(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << content;
  if (!f) throw IoError("write failed: " + path);
}

// Everything needed to reproduce the run: exact command, materialized
// configuration, seed, and the artifacts it produced.
void write_run_manifest(const std::string& dir, const std::string& command,
                        const json& resolved_config, uint64_t seed,
                        const std::vector<std::string>& artifacts) {
  const json j = {{"command", command},
                  {"resolved_config", resolved_config},
                  {"seed", seed},
                  {"artifacts", artifacts},
                  {"version", csitk::kToolkitVersion}};
  write_text_file((std::filesystem::path(dir) / "run_manifest.json").string(), j.dump(2) + "\n");
}

struct GenFlags {
  std::string preset = "desk";
  std::string out;
  uint64_t seed = 1;
  int threads = default_threads();
  int cells = 0, ues = 0, subcarriers = 0, tx = 0, rx = 0;
  double snr_db = 0.0;
};

int cmd_gen(const GenFlags& f, const CLI::App& cmd, const std::string& command) {
  DatasetConfig cfg =
      f.preset == "paper" ? DatasetConfig::paper_scale(f.seed) : DatasetConfig::desk(f.seed);
  if (cmd.count("--cells")) cfg.cells = f.cells;
  if (cmd.count("--ues")) cfg.ues_per_cell = f.ues;
  if (cmd.count("--snr-db")) cfg.snr_db = f.snr_db;
  if (cmd.count("--subcarriers")) cfg.n_subcarriers = f.subcarriers;
  if (cmd.count("--tx")) cfg.n_tx = f.tx;
  if (cmd.count("--rx")) cfg.n_rx = f.rx;

  const Dataset ds = csitk::channel::generate_dataset(cfg, f.threads);
  csitk::io::write_dataset(f.out, ds);

  const std::filesystem::path out(f.out);
  write_run_manifest(f.out, command,
                     {{"dataset", csitk::io::dataset_config_to_json(cfg)},
                      {"preset", f.preset},
                      {"threads", f.threads}},
                     f.seed, {(out / "manifest.json").string(), (out / "data.bin").string()});
  std::cout << "wrote " << ds.tensors.size() << " matrices to " << f.out << "\n";
  return kExitOk;
}

struct TrainFlags {
  std::string data;
  std::string model_preset = "desk";
  double lr = 0.0;
  int batch = 0;
  int epochs = 0;
  std::string mask = "bernoulli:0.85";
  std::string optimizer = "adam";
  uint64_t seed = 1;
  std::string out;
  double val_fraction = 0.1;
  std::string norm = "global";
  std::string loss_scope = "all";
  bool fresh_mask = true;
};

int cmd_train(const TrainFlags& f, const std::string& command) {
  const Dataset ds = csitk::io::read_dataset(f.data);

  ModelConfig mcfg =
      f.model_preset == "paper" ? ModelConfig::paper_scale() : ModelConfig::desk();
  mcfg.max_len = ds.config.n_subcarriers;
  mcfg.feature_dim = 2 * ds.config.n_tx * ds.config.n_rx;
  mcfg.validate();

  csitk::train::TrainConfig tc;
  tc.learning_rate = f.lr;
  tc.batch_size = f.batch;
  tc.epochs = f.epochs;
  tc.optimizer = f.optimizer == "sgd" ? csitk::train::TrainConfig::Optimizer::kSgd
                                      : csitk::train::TrainConfig::Optimizer::kAdam;
  tc.mask_spec = parse_mask_flag(f.mask, f.seed);
  tc.seed = f.seed;
  tc.loss_scope = f.loss_scope == "masked" ? csitk::train::TrainConfig::LossScope::kMaskedOnly
                                           : csitk::train::TrainConfig::LossScope::kAllPositions;
  tc.fresh_mask_each_epoch = f.fresh_mask;
  tc.validate();

  const NormScope scope = parse_norm_flag(f.norm);
  const csitk::train::Split split = csitk::train::split_dataset(ds, f.val_fraction, f.seed);
  std::vector<csitk::preprocess::FeatureMatrix> samples;
  samples.reserve(split.train_indices.size());
  for (int i : split.train_indices)
    samples.push_back(csitk::preprocess::featurize(ds.tensors[static_cast<size_t>(i)], scope));

  csitk::model::TransformerModel m(mcfg, f.seed);
  const csitk::train::TrainResult result = csitk::train::train(m, samples, tc);

  const json resolved = {{"dataset", csitk::io::dataset_config_to_json(ds.config)},
                         {"model", csitk::io::model_config_to_json(mcfg)},
                         {"training", csitk::experiments::train_config_to_json(tc)},
                         {"val_fraction", f.val_fraction},
                         {"norm_scope", f.norm}};
  csitk::io::save_model(f.out, m, {{"resolved_config", resolved}, {"seed", f.seed}});

  std::string csv = "step,epoch,loss\n";
  for (const csitk::train::StepRecord& r : result.history)
    csv += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," +
           json(r.loss).dump() + "\n";
  const std::filesystem::path out(f.out);
  write_text_file((out / "loss.csv").string(), csv);

  write_run_manifest(f.out, command, resolved, f.seed,
                     {(out / "manifest.json").string(), (out / "params.bin").string(),
                      (out / "loss.csv").string()});
  const double final_loss = result.history.empty() ? 0.0 : result.history.back().loss;
  std::cout << "trained " << result.history.size() << " steps, final batch loss "
            << final_loss << ", checkpoint in " << f.out << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string data;
  std::string ckpt;
  std::string experiment = "all";
  std::string out;
  uint64_t seed = 1;
  double val_fraction = 0.1;
  std::string mask = "every:10";
  std::string norm = "global";
  int threads = default_threads();
  double train_lr = 1e-3;
  int train_batch = 32;
  int train_epochs = 20;
  int mlp_hidden = 512;
};

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "reconstruction", "scenario",   "mask-sweep", "subcarrier",
      "cross-scenario", "error-dist", "doppler",    "baselines"};
  return names;
}

int cmd_eval(const EvalFlags& f, const std::string& command) {
  const Dataset ds = csitk::io::read_dataset(f.data);
  csitk::model::TransformerModel m = csitk::io::load_model(f.ckpt);

  const int feature_dim = 2 * ds.config.n_tx * ds.config.n_rx;
  if (m.config().feature_dim != feature_dim || m.config().max_len < ds.config.n_subcarriers)
    throw ConfigError("checkpoint expects [" + std::to_string(m.config().max_len) + ", " +
                      std::to_string(m.config().feature_dim) + "] inputs but the dataset is [" +
                      std::to_string(ds.config.n_subcarriers) + ", " +
                      std::to_string(feature_dim) + "]");

  csitk::experiments::RunOptions opt;
  opt.val_fraction = f.val_fraction;
  opt.seed = f.seed;
  opt.mask_spec = parse_mask_flag(f.mask, f.seed);
  opt.norm_scope = parse_norm_flag(f.norm);

  // Budget for the experiments that train their own models; they reuse the
  // evaluation mask so trained and evaluated conditions match.
  csitk::train::TrainConfig tc;
  tc.learning_rate = f.train_lr;
  tc.batch_size = f.train_batch;
  tc.epochs = f.train_epochs;
  tc.mask_spec = opt.mask_spec;
  tc.seed = f.seed;
  tc.validate();

  using Runner = std::function<csitk::experiments::ExperimentReport()>;
  const std::map<std::string, Runner> runners = {
      {"reconstruction", [&] { return csitk::experiments::run_reconstruction(m, ds, opt); }},
      {"scenario", [&] { return csitk::experiments::run_scenario_wise(m, ds, opt); }},
      {"mask-sweep",
       [&] {
         return csitk::experiments::run_masking_sweep(m, ds, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5},
                                                      opt);
       }},
      {"subcarrier", [&] { return csitk::experiments::run_subcarrier_groups(m, ds, 8, opt); }},
      {"cross-scenario",
       [&] { return csitk::experiments::run_cross_scenario(ds, m.config(), tc, opt); }},
      {"error-dist", [&] { return csitk::experiments::run_error_distribution(m, ds, 50, 8, opt); }},
      {"doppler",
       [&] {
         return csitk::experiments::run_doppler_sweep(m, ds, {0.0, 100.0, 200.0, 300.0, 400.0},
                                                      1e-3, opt);
       }},
      {"baselines",
       [&] {
         return csitk::experiments::run_baseline_comparison(ds, m.config(), tc, f.mlp_hidden,
                                                            opt);
       }},
  };

  std::vector<std::string> selected;
  if (f.experiment == "all")
    selected = experiment_names();
  else
    selected.push_back(f.experiment);

  std::vector<std::string> artifacts;
  for (const std::string& name : selected) {
    const csitk::experiments::ExperimentReport rep = runners.at(name)();
    for (std::string& path : csitk::experiments::emit_report(rep, f.out))
      artifacts.push_back(std::move(path));
    std::cout << "experiment " << name << ": " << rep.rows.size() << " rows\n";
  }

  write_run_manifest(f.out, command,
                     {{"experiment", f.experiment},
                      {"options", csitk::experiments::run_options_to_json(opt)},
                      {"training", csitk::experiments::train_config_to_json(tc)},
                      {"mlp_hidden", f.mlp_hidden},
                      {"dataset", csitk::io::dataset_config_to_json(ds.config)},
                      {"model", csitk::io::model_config_to_json(m.config())},
                      {"threads", f.threads}},
                     f.seed, artifacts);
  std::cout << "wrote " << artifacts.size() << " report files to " << f.out << "\n";
  return kExitOk;
}

struct CheckFlags {
  bool as_json = false;
  bool inject_grad_bug = false;
  uint64_t seed = 1;
};

int cmd_check(const CheckFlags& f) {
  csitk::checks::CheckOptions opt;
  opt.inject_grad_bug = f.inject_grad_bug;
  opt.seed = f.seed;
  const std::vector<csitk::checks::CheckResult> results = csitk::checks::run_checks(opt);

  if (f.as_json) {
    std::cout << csitk::checks::checks_to_json(results).dump(2) << "\n";
  } else {
    int failed = 0;
    for (const csitk::checks::CheckResult& r : results) {
      std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
      if (!r.pass) failed++;
    }
    std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
  }
  return csitk::checks::all_passed(results) ? kExitOk : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI reconstruction toolkit"};
  app.set_version_flag("--version", csitk::kToolkitVersion);
  app.set_config("--config", "", "Read flags from an INI/TOML file; command-line values win");
  app.require_subcommand(1);

  GenFlags gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a CSI dataset");
  gen_cmd->add_option("--preset", gen.preset, "Dataset preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")
      ->envname("CSI_BERT_SEED")
      ->capture_default_str();
  gen_cmd->add_option("--threads", gen.threads, "Worker threads")->capture_default_str();
  gen_cmd->add_option("--cells", gen.cells, "Override cell count");
  gen_cmd->add_option("--ues", gen.ues, "Override UEs per cell");
  gen_cmd->add_option("--snr-db", gen.snr_db, "Override SNR in dB");
  gen_cmd->add_option("--subcarriers", gen.subcarriers, "Override subcarrier count");
  gen_cmd->add_option("--tx", gen.tx, "Override transmit antennas");
  gen_cmd->add_option("--rx", gen.rx, "Override receive antennas");

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the transformer reconstructor");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--model-preset", train.model_preset, "Model preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "Learning rate")->required();
  train_cmd->add_option("--batch", train.batch, "Batch size")->required();
  train_cmd->add_option("--epochs", train.epochs, "Epochs")->required();
  train_cmd->add_option("--mask", train.mask, "Mask scheme (bernoulli:p | every:k | ratio:g)")
      ->capture_default_str();
  train_cmd->add_option("--optimizer", train.optimizer, "Optimizer")
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Master seed")
      ->envname("CSI_BERT_SEED")
      ->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint directory")->required();
  train_cmd->add_option("--val-fraction", train.val_fraction, "Held-out fraction")
      ->capture_default_str();
  train_cmd->add_option("--norm", train.norm, "Normalization scope")
      ->check(CLI::IsMember({"global", "per_subcarrier"}))
      ->capture_default_str();
  train_cmd->add_option("--loss-scope", train.loss_scope, "Loss over all or masked positions")
      ->check(CLI::IsMember({"all", "masked"}))
      ->capture_default_str();
  train_cmd->add_flag("--fresh-mask,!--no-fresh-mask", train.fresh_mask,
                      "Redraw stochastic masks each epoch");

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Run evaluation experiments");
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint directory")->required();
  {
    std::vector<std::string> valid = experiment_names();
    valid.insert(valid.begin(), "all");
    eval_cmd->add_option("--experiment", eval.experiment, "Experiment to run")
        ->check(CLI::IsMember(valid))
        ->capture_default_str();
  }
  eval_cmd->add_option("--out", eval.out, "Report directory")->required();
  eval_cmd->add_option("--seed", eval.seed, "Master seed")
      ->envname("CSI_BERT_SEED")
      ->capture_default_str();
  eval_cmd->add_option("--val-fraction", eval.val_fraction, "Held-out fraction")
      ->capture_default_str();
  eval_cmd->add_option("--mask", eval.mask, "Evaluation mask scheme")->capture_default_str();
  eval_cmd->add_option("--norm", eval.norm, "Normalization scope")
      ->check(CLI::IsMember({"global", "per_subcarrier"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval.threads, "Worker threads")->capture_default_str();
  eval_cmd->add_option("--train-lr", eval.train_lr, "LR for experiments that train")
      ->capture_default_str();
  eval_cmd->add_option("--train-batch", eval.train_batch, "Batch size for experiments that train")
      ->capture_default_str();
  eval_cmd->add_option("--train-epochs", eval.train_epochs, "Epochs for experiments that train")
      ->capture_default_str();
  eval_cmd->add_option("--mlp-hidden", eval.mlp_hidden, "MLP baseline hidden width")
      ->capture_default_str();

  CheckFlags check;
  CLI::App* check_cmd = app.add_subcommand("check", "Run the fast invariant suite");
  check_cmd->add_flag("--json", check.as_json, "Emit machine-readable results");
  check_cmd->add_option("--seed", check.seed, "Master seed")
      ->envname("CSI_BERT_SEED")
      ->capture_default_str();
  check_cmd->add_flag("--inject-grad-bug", check.inject_grad_bug)->group("");  // test fixture

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::string command = join_argv(argc, argv);
  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, *gen_cmd, command);
    if (train_cmd->parsed()) return cmd_train(train, command);
    if (eval_cmd->parsed()) return cmd_eval(eval, command);
    if (check_cmd->parsed()) return cmd_check(check);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
  return kExitUsage;
}
