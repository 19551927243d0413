#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "csitk/channel.hpp"
#include "csitk/model.hpp"
#include "csitk/preprocess.hpp"
#include "csitk/training.hpp"

namespace csitk::experiments {

struct ReportRow {
  std::map<std::string, std::string> labels;
  std::string metric;
  double value = 0.0;
};

struct ExperimentReport {
  std::string experiment;
  nlohmann::json config;           // echo of everything the run was given
  nlohmann::json environment;      // seed, toolkit version
  nlohmann::json paper_reference;  // reference values, never asserted
  nlohmann::json extra;            // experiment-specific blobs (edges, splits)
  std::vector<ReportRow> rows;
};

// Prediction callback: receives the masked features, the attention mask for
// the valid rows, and the dataset index (so test oracles can look targets
// up). Returns x_hat with the same shape as the sample's feature matrix.
using Predictor = std::function<Tensor(const preprocess::FeatureMatrix& masked,
                                       const preprocess::AttentionMask& attn, int index)>;

// Wraps a trained model, handling padding to its sequence capacity.
Predictor model_predictor(model::Trainable& m);
Predictor zero_predictor();

struct EvalConfig {
  preprocess::MaskSpec mask_spec = preprocess::MaskSpec::every_kth(10);
  preprocess::NormScope norm_scope = preprocess::NormScope::kGlobal;
  // Optional CSI-domain transform applied before featurization.
  std::function<channel::CsiTensor(const channel::CsiTensor&, int index)> pre_transform;
};

// Optional residual consumer: called once per evaluated sample row with the
// signed residuals (x_hat - x) for that subcarrier row.
using ResidualSink =
    std::function<void(int index, int row, const std::vector<double>& residuals)>;

struct EvalResult {
  double mse = 0.0;
  int64_t count = 0;
  std::vector<double> row_sq;      // per-subcarrier squared-residual sums
  std::vector<int64_t> row_count;  // per-subcarrier element counts

  double row_range_mse(int begin, int end) const;  // rows [begin, end)
};

EvalResult evaluate(const channel::Dataset& ds, const std::vector<int>& indices,
                    const Predictor& predict, const EvalConfig& cfg,
                    const ResidualSink& sink = nullptr);

// Options shared by all experiment runners.
struct RunOptions {
  double val_fraction = 0.1;
  uint64_t seed = 1;
  preprocess::MaskSpec mask_spec = preprocess::MaskSpec::every_kth(10);
  preprocess::NormScope norm_scope = preprocess::NormScope::kGlobal;
};

ExperimentReport run_reconstruction(model::Trainable& m, const channel::Dataset& ds,
                                    const RunOptions& opt = {});

ExperimentReport run_scenario_wise(model::Trainable& m, const channel::Dataset& ds,
                                   const RunOptions& opt = {});

ExperimentReport run_masking_sweep(model::Trainable& m, const channel::Dataset& ds,
                                   const std::vector<double>& gamma_grid = {0.0, 0.1, 0.2, 0.3,
                                                                            0.4, 0.5},
                                   const RunOptions& opt = {});

ExperimentReport run_subcarrier_groups(model::Trainable& m, const channel::Dataset& ds,
                                       int group_size = 8, const RunOptions& opt = {});

ExperimentReport run_cross_scenario(const channel::Dataset& ds,
                                    const model::ModelConfig& model_cfg,
                                    const train::TrainConfig& train_cfg,
                                    const RunOptions& opt = {});

ExperimentReport run_error_distribution(model::Trainable& m, const channel::Dataset& ds,
                                        int n_bins = 50, int group_size = 8,
                                        const RunOptions& opt = {});

ExperimentReport run_doppler_sweep(model::Trainable& m, const channel::Dataset& ds,
                                   const std::vector<double>& delta_grid = {0.0, 100.0, 200.0,
                                                                            300.0, 400.0},
                                   double snapshot_time = 1e-3, const RunOptions& opt = {});

ExperimentReport run_baseline_comparison(const channel::Dataset& ds,
                                         const model::ModelConfig& model_cfg,
                                         const train::TrainConfig& train_cfg,
                                         int mlp_hidden = 512, const RunOptions& opt = {});

// Featurizes the scenario-stratified training/validation split of a dataset.
struct PreparedData {
  train::Split split;
  std::vector<preprocess::FeatureMatrix> train_samples;
  std::vector<preprocess::FeatureMatrix> val_samples;  // parallel to split.val_indices
};
PreparedData prepare_data(const channel::Dataset& ds, const RunOptions& opt);

// --- config plumbing shared with the CLI ---

nlohmann::json mask_spec_to_json(const preprocess::MaskSpec& spec);
preprocess::MaskSpec mask_spec_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const train::TrainConfig& cfg);
train::TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json run_options_to_json(const RunOptions& opt);
RunOptions run_options_from_json(const nlohmann::json& j);

// --- report serialization ---

struct ReportFormats {
  bool json = true;
  bool csv = true;
  bool svg = true;
};

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const ExperimentReport& report);
std::string report_to_svg(const ExperimentReport& report);

// Writes <dir>/<experiment>.{json,csv,svg}; returns the paths written.
std::vector<std::string> emit_report(const ExperimentReport& report, const std::string& dir,
                                     const ReportFormats& formats = {});

}  // namespace csitk::experiments
