#include "csitk/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csitk/baseline.hpp"
#include "csitk/dataset_io.hpp"
#include "csitk/checkpoint.hpp"
#include "csitk/errors.hpp"
#include "csitk/rng.hpp"
#include "csitk/version.hpp"

namespace csitk::experiments {
namespace {

using channel::CsiTensor;
using channel::Dataset;
using preprocess::AttentionMask;
using preprocess::FeatureMatrix;
using preprocess::MaskMatrix;
using preprocess::MaskSpec;
using preprocess::NormScope;

std::string norm_scope_name(NormScope scope) {
  return scope == NormScope::kGlobal ? "global" : "per_subcarrier";
}

int scenario_of(const Dataset& ds, int index) {
  return index % static_cast<int>(ds.config.scenarios.size());
}

std::string scenario_name(const Dataset& ds, int scenario) {
  return channel::to_string(ds.config.scenarios[static_cast<size_t>(scenario)].id);
}

std::vector<int> indices_of_scenario(const Dataset& ds, const std::vector<int>& pool,
                                     int scenario) {
  std::vector<int> out;
  for (int i : pool)
    if (scenario_of(ds, i) == scenario) out.push_back(i);
  return out;
}

ExperimentReport base_report(const std::string& name, const Dataset& ds, const RunOptions& opt,
                             const train::Split& split) {
  ExperimentReport rep;
  rep.experiment = name;
  rep.config = {{"dataset", io::dataset_config_to_json(ds.config)},
                {"val_fraction", opt.val_fraction},
                {"mask", mask_spec_to_json(opt.mask_spec)},
                {"norm_scope", norm_scope_name(opt.norm_scope)},
                {"seed", opt.seed}};
  rep.environment = {{"seed", opt.seed}, {"version", kToolkitVersion}};
  rep.extra = {{"split", {{"val_indices", split.val_indices},
                          {"train_count", split.train_indices.size()}}}};
  return rep;
}

void check_finite_rows(const ExperimentReport& rep) {
  for (const ReportRow& row : rep.rows)
    if (!std::isfinite(row.value))
      throw TrainingError("experiment '" + rep.experiment + "': non-finite metric value");
}

uint64_t derived_seed(uint64_t base, uint64_t salt) {
  return SplitMix64::mix(SplitMix64::mix(base, kExperimentStream), salt);
}

std::string format_number(double v) { return nlohmann::json(v).dump(); }

// Flattens featurized samples into (masked, original) design matrices with
// the draw-0 training masks, i.e. exactly what the trainable models saw.
std::pair<Tensor, Tensor> linreg_design(const std::vector<FeatureMatrix>& samples,
                                        const MaskSpec& mask_spec) {
  if (samples.empty()) throw DegenerateInputError("linreg_design: no samples");
  const int n_s = samples[0].n_s;
  const int d = samples[0].d();
  const int flat = n_s * d;
  const int n = static_cast<int>(samples.size());
  Tensor x = Tensor::zeros({n, flat});
  Tensor y = Tensor::zeros({n, flat});
  for (int i = 0; i < n; ++i) {
    MaskSpec spec = mask_spec;
    spec.seed = preprocess::mask_seed_for(mask_spec.seed, 0, i);
    const MaskMatrix mask = preprocess::make_mask(spec, n_s, d);
    const FeatureMatrix masked = preprocess::apply_mask(samples[static_cast<size_t>(i)], mask);
    std::copy(masked.data.values.begin(), masked.data.values.end(),
              x.values.begin() + static_cast<int64_t>(i) * flat);
    std::copy(samples[static_cast<size_t>(i)].data.values.begin(),
              samples[static_cast<size_t>(i)].data.values.end(),
              y.values.begin() + static_cast<int64_t>(i) * flat);
  }
  return {std::move(x), std::move(y)};
}

Predictor linreg_predictor(baseline::LinRegModel model) {
  return [model = std::move(model)](const FeatureMatrix& masked, const AttentionMask&,
                                    int) -> Tensor {
    const int n_s = masked.data.rows();
    const int d = masked.data.cols();
    Tensor flat({1, n_s * d}, masked.data.values);
    Tensor pred = baseline::linreg_predict(model, flat);
    return Tensor({n_s, d}, std::move(pred.values));
  };
}

}  // namespace

double EvalResult::row_range_mse(int begin, int end) const {
  if (begin < 0 || end > static_cast<int>(row_sq.size()) || begin >= end)
    throw ConfigError("row_range_mse: bad row range");
  double sq = 0.0;
  int64_t n = 0;
  for (int i = begin; i < end; ++i) {
    sq += row_sq[static_cast<size_t>(i)];
    n += row_count[static_cast<size_t>(i)];
  }
  if (n == 0) throw DegenerateInputError("row_range_mse: empty range");
  return sq / static_cast<double>(n);
}

Predictor model_predictor(model::Trainable& m) {
  return [&m](const FeatureMatrix& masked, const AttentionMask& attn, int) -> Tensor {
    const int n_s = masked.data.rows();
    const int capacity = m.sequence_capacity();
    if (capacity > 0 && capacity < n_s)
      throw ShapeError("model_predictor: sample length " + std::to_string(n_s) +
                       " exceeds model capacity " + std::to_string(capacity));
    if (capacity > n_s) {
      auto [padded, pad_attn] = preprocess::pad_and_attention_mask(masked, capacity);
      Tensor out = m.forward(padded.data, pad_attn);
      Tensor sliced = Tensor::zeros({n_s, masked.data.cols()});
      std::copy(out.values.begin(), out.values.begin() + sliced.size(),
                sliced.values.begin());
      return sliced;
    }
    return m.forward(masked.data, attn);
  };
}

Predictor zero_predictor() {
  return [](const FeatureMatrix& masked, const AttentionMask&, int) {
    return Tensor::zeros(masked.data.shape);
  };
}

EvalResult evaluate(const Dataset& ds, const std::vector<int>& indices, const Predictor& predict,
                    const EvalConfig& cfg, const ResidualSink& sink) {
  if (indices.empty()) throw DegenerateInputError("evaluate: no indices");
  EvalResult result;
  double sq_total = 0.0;
  for (int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(ds.tensors.size()))
      throw ConfigError("evaluate: index " + std::to_string(idx) + " out of range");
    const CsiTensor* h = &ds.tensors[static_cast<size_t>(idx)];
    CsiTensor transformed;
    if (cfg.pre_transform) {
      transformed = cfg.pre_transform(*h, idx);
      h = &transformed;
    }
    const FeatureMatrix target = preprocess::featurize(*h, cfg.norm_scope);
    const int n_s = target.n_s;
    const int d = target.d();

    if (result.row_sq.empty()) {
      result.row_sq.assign(static_cast<size_t>(n_s), 0.0);
      result.row_count.assign(static_cast<size_t>(n_s), 0);
    } else if (static_cast<int>(result.row_sq.size()) != n_s) {
      throw ShapeError("evaluate: inconsistent sample lengths");
    }

    MaskSpec spec = cfg.mask_spec;
    spec.seed = preprocess::mask_seed_for(cfg.mask_spec.seed, 0, idx);
    const MaskMatrix mask = preprocess::make_mask(spec, n_s, d);
    const FeatureMatrix masked = preprocess::apply_mask(target, mask);
    AttentionMask attn;
    attn.data.assign(static_cast<size_t>(n_s), 1);

    const Tensor x_hat = predict(masked, attn, idx);
    if (!x_hat.same_shape(target.data))
      throw ShapeError("evaluate: prediction shape " + x_hat.shape_str() +
                       " does not match target " + target.data.shape_str());
    if (!x_hat.all_finite()) throw TrainingError("evaluate: non-finite prediction");

    std::vector<double> residuals(static_cast<size_t>(d));
    for (int s = 0; s < n_s; ++s) {
      double row_sq = 0.0;
      for (int j = 0; j < d; ++j) {
        const double r = x_hat.at(s, j) - target.data.at(s, j);
        residuals[static_cast<size_t>(j)] = r;
        row_sq += r * r;
      }
      result.row_sq[static_cast<size_t>(s)] += row_sq;
      result.row_count[static_cast<size_t>(s)] += d;
      sq_total += row_sq;
      if (sink) sink(idx, s, residuals);
    }
    result.count += static_cast<int64_t>(n_s) * d;
  }
  result.mse = sq_total / static_cast<double>(result.count);
  return result;
}

PreparedData prepare_data(const Dataset& ds, const RunOptions& opt) {
  PreparedData data;
  data.split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  data.train_samples.reserve(data.split.train_indices.size());
  for (int i : data.split.train_indices)
    data.train_samples.push_back(
        preprocess::featurize(ds.tensors[static_cast<size_t>(i)], opt.norm_scope));
  data.val_samples.reserve(data.split.val_indices.size());
  for (int i : data.split.val_indices)
    data.val_samples.push_back(
        preprocess::featurize(ds.tensors[static_cast<size_t>(i)], opt.norm_scope));
  return data;
}

ExperimentReport run_reconstruction(model::Trainable& m, const Dataset& ds,
                                    const RunOptions& opt) {
  const train::Split split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  ExperimentReport rep = base_report("reconstruction", ds, opt, split);
  rep.paper_reference = {{"overall_mse", 0.011035}};

  const EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
  const EvalResult r = evaluate(ds, split.val_indices, model_predictor(m), ec);
  rep.rows.push_back({{{"split", "val"}}, "mse", r.mse});
  rep.extra["elements"] = r.count;
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_scenario_wise(model::Trainable& m, const Dataset& ds,
                                   const RunOptions& opt) {
  const train::Split split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  ExperimentReport rep = base_report("scenario_wise", ds, opt, split);
  rep.paper_reference = {{"stationary", 0.003185},
                         {"high_speed", 0.003179},
                         {"urban_macro", 0.026609}};

  const EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
  const Predictor pred = model_predictor(m);
  const int n_scenarios = static_cast<int>(ds.config.scenarios.size());
  for (int s = 0; s < n_scenarios; ++s) {
    const std::vector<int> indices = indices_of_scenario(ds, split.val_indices, s);
    const EvalResult r = evaluate(ds, indices, pred, ec);
    rep.rows.push_back({{{"scenario", scenario_name(ds, s)}}, "mse", r.mse});
  }
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_masking_sweep(model::Trainable& m, const Dataset& ds,
                                   const std::vector<double>& gamma_grid,
                                   const RunOptions& opt) {
  const train::Split split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  ExperimentReport rep = base_report("masking_sweep", ds, opt, split);
  rep.config["gamma_grid"] = gamma_grid;

  const Predictor pred = model_predictor(m);
  for (size_t i = 0; i < gamma_grid.size(); ++i) {
    EvalConfig ec;
    ec.norm_scope = opt.norm_scope;
    ec.mask_spec =
        MaskSpec::ratio_sweep(gamma_grid[i], derived_seed(opt.seed, 0x300 + i));
    const EvalResult r = evaluate(ds, split.val_indices, pred, ec);
    rep.rows.push_back({{{"gamma", format_number(gamma_grid[i])}}, "mse", r.mse});
  }
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_subcarrier_groups(model::Trainable& m, const Dataset& ds, int group_size,
                                       const RunOptions& opt) {
  if (group_size <= 0) throw ConfigError("run_subcarrier_groups: group size must be positive");
  const train::Split split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  ExperimentReport rep = base_report("subcarrier_groups", ds, opt, split);
  rep.config["group_size"] = group_size;
  rep.paper_reference = {{"0-7", 0.012956},   {"8-15", 0.075252},  {"16-23", 0.074781},
                         {"24-31", 0.075120}, {"32-39", 0.076423}, {"40-47", 0.077504},
                         {"48-55", 0.079439}, {"56-63", 0.080906}};

  const EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
  const EvalResult r = evaluate(ds, split.val_indices, model_predictor(m), ec);
  const int n_s = static_cast<int>(r.row_sq.size());
  for (int begin = 0; begin < n_s; begin += group_size) {
    const int end = std::min(n_s, begin + group_size);
    const std::string label =
        std::to_string(begin) + "-" + std::to_string(end - 1);
    rep.rows.push_back({{{"group", label}}, "mse", r.row_range_mse(begin, end)});
  }
  rep.extra["overall_mse"] = r.mse;
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_cross_scenario(const Dataset& ds, const model::ModelConfig& model_cfg,
                                    const train::TrainConfig& train_cfg,
                                    const RunOptions& opt) {
  const PreparedData data = prepare_data(ds, opt);
  ExperimentReport rep = base_report("cross_scenario", ds, opt, data.split);
  rep.config["model"] = io::model_config_to_json(model_cfg);
  rep.config["training"] = train_config_to_json(train_cfg);
  rep.paper_reference = {
      {"stationary", {{"stationary", 0.003185}, {"high_speed", 0.003182}, {"urban_macro", 0.026610}}},
      {"high_speed", {{"stationary", 0.003185}, {"high_speed", 0.003182}, {"urban_macro", 0.026611}}},
      {"urban_macro", {{"stationary", 0.003185}, {"high_speed", 0.003182}, {"urban_macro", 0.026611}}}};

  const int n_scenarios = static_cast<int>(ds.config.scenarios.size());
  const EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
  for (int train_s = 0; train_s < n_scenarios; ++train_s) {
    std::vector<FeatureMatrix> samples;
    for (size_t k = 0; k < data.split.train_indices.size(); ++k)
      if (scenario_of(ds, data.split.train_indices[k]) == train_s)
        samples.push_back(data.train_samples[k]);

    model::TransformerModel m(model_cfg, derived_seed(opt.seed, 0x100 + train_s));
    train::train(m, samples, train_cfg);

    const Predictor pred = model_predictor(m);
    for (int eval_s = 0; eval_s < n_scenarios; ++eval_s) {
      const std::vector<int> indices = indices_of_scenario(ds, data.split.val_indices, eval_s);
      const EvalResult r = evaluate(ds, indices, pred, ec);
      rep.rows.push_back({{{"train_scenario", scenario_name(ds, train_s)},
                           {"eval_scenario", scenario_name(ds, eval_s)}},
                          "mse",
                          r.mse});
    }
  }
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_error_distribution(model::Trainable& m, const Dataset& ds, int n_bins,
                                        int group_size, const RunOptions& opt) {
  if (n_bins <= 0) throw ConfigError("run_error_distribution: n_bins must be positive");
  if (group_size <= 0)
    throw ConfigError("run_error_distribution: group size must be positive");
  const train::Split split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  ExperimentReport rep = base_report("error_distribution", ds, opt, split);
  rep.config["n_bins"] = n_bins;
  rep.config["group_size"] = group_size;

  const EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
  const Predictor pred = model_predictor(m);

  // Pass 1: global residual range so all groups share bin edges.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const EvalResult first =
      evaluate(ds, split.val_indices, pred, ec,
               [&](int, int, const std::vector<double>& res) {
                 for (double r : res) {
                   lo = std::min(lo, r);
                   hi = std::max(hi, r);
                 }
               });
  if (!(hi > lo)) {  // all residuals identical (e.g. perfect oracle)
    lo -= 0.5;
    hi += 0.5;
  }
  const int n_s = static_cast<int>(first.row_sq.size());
  const int n_groups = (n_s + group_size - 1) / group_size;
  const double width = (hi - lo) / n_bins;

  // Pass 2: per-group histogram counts.
  std::vector<std::vector<int64_t>> counts(
      static_cast<size_t>(n_groups), std::vector<int64_t>(static_cast<size_t>(n_bins), 0));
  evaluate(ds, split.val_indices, pred, ec, [&](int, int row, const std::vector<double>& res) {
    const size_t group = static_cast<size_t>(row / group_size);
    for (double r : res) {
      int bin = static_cast<int>((r - lo) / width);
      bin = std::clamp(bin, 0, n_bins - 1);
      counts[group][static_cast<size_t>(bin)]++;
    }
  });

  std::vector<double> edges(static_cast<size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i) edges[static_cast<size_t>(i)] = lo + width * i;
  rep.extra["bin_edges"] = edges;

  for (int g = 0; g < n_groups; ++g) {
    const int begin = g * group_size;
    const int end = std::min(n_s, begin + group_size);
    const std::string label = std::to_string(begin) + "-" + std::to_string(end - 1);
    for (int b = 0; b < n_bins; ++b)
      rep.rows.push_back({{{"group", label}, {"bin", std::to_string(b)}},
                          "count",
                          static_cast<double>(counts[static_cast<size_t>(g)][static_cast<size_t>(b)])});
  }
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_doppler_sweep(model::Trainable& m, const Dataset& ds,
                                   const std::vector<double>& delta_grid, double snapshot_time,
                                   const RunOptions& opt) {
  const train::Split split = train::split_dataset(ds, opt.val_fraction, opt.seed);
  ExperimentReport rep = base_report("doppler_sweep", ds, opt, split);
  rep.config["delta_grid_hz"] = delta_grid;
  rep.config["snapshot_time_s"] = snapshot_time;
  rep.paper_reference = {{"0", 0.011037}, {"400", 0.011043}};

  const Predictor pred = model_predictor(m);
  for (double delta : delta_grid) {
    EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
    if (delta != 0.0)
      ec.pre_transform = [delta, snapshot_time](const CsiTensor& h, int) {
        return channel::apply_doppler_rotation(h, delta, snapshot_time);
      };
    const EvalResult r = evaluate(ds, split.val_indices, pred, ec);
    rep.rows.push_back({{{"delta_hz", format_number(delta)}}, "mse", r.mse});
  }
  check_finite_rows(rep);
  return rep;
}

ExperimentReport run_baseline_comparison(const Dataset& ds, const model::ModelConfig& model_cfg,
                                         const train::TrainConfig& train_cfg, int mlp_hidden,
                                         const RunOptions& opt) {
  if (mlp_hidden <= 0)
    throw ConfigError("run_baseline_comparison: hidden width must be positive");
  const PreparedData data = prepare_data(ds, opt);
  ExperimentReport rep = base_report("baseline_comparison", ds, opt, data.split);
  rep.config["model"] = io::model_config_to_json(model_cfg);
  rep.config["training"] = train_config_to_json(train_cfg);
  rep.config["mlp_hidden"] = mlp_hidden;
  rep.paper_reference = {{"transformer", 0.011035}, {"linreg", 0.309207}, {"mlp", 0.314465}};

  const EvalConfig ec{opt.mask_spec, opt.norm_scope, nullptr};
  const int n_s = data.train_samples[0].n_s;
  const int d = data.train_samples[0].d();

  model::TransformerModel transformer(model_cfg, derived_seed(opt.seed, 0x200));
  train::train(transformer, data.train_samples, train_cfg);
  rep.rows.push_back({{{"model", "transformer"}},
                      "mse",
                      evaluate(ds, data.split.val_indices, model_predictor(transformer), ec).mse});

  const auto [x, y] = linreg_design(data.train_samples, train_cfg.mask_spec);
  const baseline::LinRegModel lin = baseline::linreg_fit(x, y);
  rep.rows.push_back({{{"model", "linreg"}},
                      "mse",
                      evaluate(ds, data.split.val_indices, linreg_predictor(lin), ec).mse});

  baseline::MlpModel mlp(n_s, d, mlp_hidden, derived_seed(opt.seed, 0x201));
  train::train(mlp, data.train_samples, train_cfg);
  rep.rows.push_back({{{"model", "mlp"}},
                      "mse",
                      evaluate(ds, data.split.val_indices, model_predictor(mlp), ec).mse});

  rep.rows.push_back({{{"model", "zero"}},
                      "mse",
                      evaluate(ds, data.split.val_indices, zero_predictor(), ec).mse});
  check_finite_rows(rep);
  return rep;
}

nlohmann::json mask_spec_to_json(const MaskSpec& spec) {
  switch (spec.scheme) {
    case MaskSpec::Scheme::kBernoulli:
      return {{"scheme", "bernoulli"}, {"keep_prob", spec.keep_prob}, {"seed", spec.seed}};
    case MaskSpec::Scheme::kEveryKth:
      return {{"scheme", "every_kth"}, {"k", spec.k}};
    case MaskSpec::Scheme::kRatioSweep:
      return {{"scheme", "ratio_sweep"}, {"gamma", spec.masked_fraction}, {"seed", spec.seed}};
  }
  throw ConfigError("mask_spec_to_json: unknown scheme");
}

MaskSpec mask_spec_from_json(const nlohmann::json& j) {
  const std::string scheme = j.at("scheme").get<std::string>();
  if (scheme == "bernoulli")
    return MaskSpec::bernoulli(j.at("keep_prob").get<double>(), j.at("seed").get<uint64_t>());
  if (scheme == "every_kth") return MaskSpec::every_kth(j.at("k").get<int>());
  if (scheme == "ratio_sweep")
    return MaskSpec::ratio_sweep(j.at("gamma").get<double>(), j.at("seed").get<uint64_t>());
  throw ConfigError("mask_spec_from_json: unknown scheme '" + scheme + "'");
}

nlohmann::json train_config_to_json(const train::TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"optimizer", cfg.optimizer == train::TrainConfig::Optimizer::kSgd ? "sgd" : "adam"},
          {"mask", mask_spec_to_json(cfg.mask_spec)},
          {"seed", cfg.seed},
          {"loss_scope",
           cfg.loss_scope == train::TrainConfig::LossScope::kAllPositions ? "all" : "masked"},
          {"fresh_mask_each_epoch", cfg.fresh_mask_each_epoch}};
}

train::TrainConfig train_config_from_json(const nlohmann::json& j) {
  train::TrainConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  const std::string opt = j.at("optimizer").get<std::string>();
  if (opt == "sgd")
    cfg.optimizer = train::TrainConfig::Optimizer::kSgd;
  else if (opt == "adam")
    cfg.optimizer = train::TrainConfig::Optimizer::kAdam;
  else
    throw ConfigError("train_config_from_json: unknown optimizer '" + opt + "'");
  cfg.mask_spec = mask_spec_from_json(j.at("mask"));
  cfg.seed = j.at("seed").get<uint64_t>();
  const std::string scope = j.at("loss_scope").get<std::string>();
  if (scope == "all")
    cfg.loss_scope = train::TrainConfig::LossScope::kAllPositions;
  else if (scope == "masked")
    cfg.loss_scope = train::TrainConfig::LossScope::kMaskedOnly;
  else
    throw ConfigError("train_config_from_json: unknown loss scope '" + scope + "'");
  cfg.fresh_mask_each_epoch = j.at("fresh_mask_each_epoch").get<bool>();
  cfg.validate();
  return cfg;
}

nlohmann::json run_options_to_json(const RunOptions& opt) {
  return {{"val_fraction", opt.val_fraction},
          {"seed", opt.seed},
          {"mask", mask_spec_to_json(opt.mask_spec)},
          {"norm_scope", norm_scope_name(opt.norm_scope)}};
}

RunOptions run_options_from_json(const nlohmann::json& j) {
  RunOptions opt;
  opt.val_fraction = j.at("val_fraction").get<double>();
  opt.seed = j.at("seed").get<uint64_t>();
  opt.mask_spec = mask_spec_from_json(j.at("mask"));
  const std::string scope = j.at("norm_scope").get<std::string>();
  if (scope == "global")
    opt.norm_scope = NormScope::kGlobal;
  else if (scope == "per_subcarrier")
    opt.norm_scope = NormScope::kPerSubcarrier;
  else
    throw ConfigError("run_options_from_json: unknown norm scope '" + scope + "'");
  return opt;
}

}  // namespace csitk::experiments
