// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: configuration, in-memory per-seed runs, on-disk
// stages with content-hash caching, ablation sweeps and result tables.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "imuloc/csi/csi.hpp"
#include "imuloc/eval/eval.hpp"
#include "imuloc/fit/fit.hpp"
#include "imuloc/io/csv.hpp"
#include "imuloc/model/model.hpp"
#include "imuloc/sim/scenario.hpp"
#include "imuloc/sim/simulate.hpp"

namespace imuloc::pipeline {

struct PreprocessConfig {
  csi::FeatureConfig features;
  csi::AlignConfig align;

  nlohmann::json to_json() const;
  static PreprocessConfig from_json(const nlohmann::json& j);
};

struct EpochSchedule {
  int supervised = 600;
  std::vector<int> refinement = {100, 200, 300, 400};  ///< entry 0 is the IMU-supervised model

  nlohmann::json to_json() const;
};

struct AblationSpec {
  std::string knob;  ///< cp_noise_sigma | cp_count | cp_radius | snr_threshold
  std::vector<double> values;
  /// Radius used with the cp_count knob (random control points).
  double radius_m = 0.2;

  void validate() const;
  nlohmann::json to_json() const;
};

struct ExperimentConfig {
  sim::ScenarioConfig scenario;
  std::vector<std::uint64_t> seeds;
  PreprocessConfig preprocess;
  fit::FitConfig fit;
  model::TrainConfig train;
  EpochSchedule epochs;
  double pseudo_label_noise_m = 0.05;  ///< label-noise augmentation for pseudo-labels
  eval::SmootherConfig smoother;
  bool smooth_predictions = true;
  int knn_k = 7;
  /// Train/test only on samples between the first and last control point.
  bool restrict_to_enclosed = true;
  bool train_dead_reckoning_model = true;
  std::optional<AblationSpec> ablation;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Trajectory, channel and features shared by every seed.
struct SharedData {
  sim::TrajectorySeries truth;
  csi::FeatureMatrix features;
  std::vector<std::size_t> sample_of_row;
  csi::AlignmentReport alignment;
};

sim::CfrDataset simulate_channel(const sim::ScenarioConfig& scenario, const sim::TrajectorySeries& truth);
csi::FeatureMatrix preprocess(const sim::CfrDataset& cfr, const PreprocessConfig& config,
                              csi::AlignmentReport* report = nullptr);
SharedData build_shared(const ExperimentConfig& config);
std::vector<std::size_t> sample_of_rows(const sim::CfrDataset& cfr, const csi::FeatureMatrix& features);

/// Per-seed IMU, control points and train/test rows.
struct SeedInputs {
  sim::ImuSeries imu;
  std::vector<sim::ControlPoint> control_points;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

/// IMU readings and control points for one seed.
std::pair<sim::ImuSeries, std::vector<sim::ControlPoint>> simulate_sensors(const ExperimentConfig& config,
                                                                            const sim::TrajectorySeries& truth,
                                                                            std::uint64_t seed);

/// Train/test rows for one seed, restricted to enclosed samples if configured.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(
    const ExperimentConfig& config, const std::vector<sim::ControlPoint>& control_points,
    const std::vector<std::size_t>& sample_of_row, std::uint64_t seed);

SeedInputs simulate_seed(const ExperimentConfig& config, const sim::TrajectorySeries& truth,
                         const std::vector<std::size_t>& sample_of_row, std::uint64_t seed);

struct LabelSet {
  fit::TrajectoryFit forward_backward;
  fit::TrajectoryFit dead_reckoning;
  eval::ErrorReport fb_error;  ///< over training rows
  eval::ErrorReport dr_error;
};

LabelSet fit_labels(const ExperimentConfig& config, const SharedData& shared, const SeedInputs& inputs,
                    std::uint64_t seed);

eval::RefinementData refinement_data(const SharedData& shared, const SeedInputs& inputs);

struct SeedOutcome {
  std::uint64_t seed = 0;
  eval::ErrorReport fb_labels;
  eval::ErrorReport dr_labels;
  eval::ErrorReport supervised;
  eval::ErrorReport dead_reckoning_model;
  eval::ErrorReport knn;
  std::vector<eval::IterationResult> refinement;  ///< [0] is the IMU-supervised model
};

struct SeedRunOptions {
  bool supervised = true;
  bool dead_reckoning_model = true;
  bool knn = true;
  int refinement_iterations = -1;  ///< -1: all configured iterations
};

/// Full in-memory pipeline for one seed.
SeedOutcome run_seed(const ExperimentConfig& config, const SharedData& shared, std::uint64_t seed,
                     const SeedRunOptions& options = {});

// ---------------------------------------------------------------- tables

struct MethodRow {
  std::string method;
  std::string control_points;
  eval::SeedStats mean, median, p90;
};

/// Headline summary: supervised, dead-reckoning labels, IMU-supervised,
/// IMU-supervised-IR.
std::vector<MethodRow> summary_rows(const std::vector<SeedOutcome>& outcomes, const std::string& cp_label);
std::vector<MethodRow> imu_error_rows(const std::vector<SeedOutcome>& outcomes, const std::string& cp_label);
std::vector<MethodRow> knn_rows(const std::vector<SeedOutcome>& outcomes, const std::string& cp_label);

/// Values in centimeters, "mean ± std" per column.
io::CsvTable rows_to_csv(const std::vector<MethodRow>& rows);
std::string rows_to_text(const std::vector<MethodRow>& rows);
io::CsvTable per_seed_csv(const std::vector<SeedOutcome>& outcomes);
io::CsvTable iteration_csv(const std::vector<SeedOutcome>& outcomes);

// ---------------------------------------------------------------- stages

enum class Stage { kSimulate, kPreprocess, kFit, kTrain, kRefine, kEvaluate };

const char* stage_name(Stage stage);
std::vector<Stage> all_stages();

/// Stage inputs are missing; names the stage that must run first.
class DependencyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct RunOptions {
  std::filesystem::path out_dir;
  bool use_cache = true;
  unsigned threads = 1;
  std::function<void(const std::string&)> log;
};

struct RunReport {
  std::vector<std::string> executed;  ///< "<stage>" or "<stage>/seed_<s>"
  std::vector<std::string> cached;
};

/// Runs one stage for all seeds, reusing cached outputs whose content hash
/// still matches.
RunReport run_stage(const ExperimentConfig& config, Stage stage, const RunOptions& options);

/// Runs the given stages in dependency order.
RunReport run_pipeline(const ExperimentConfig& config, const std::vector<Stage>& stages, const RunOptions& options);

/// Sweeps config.ablation over all seeds and writes ablation.csv (long format).
io::CsvTable run_ablation(const ExperimentConfig& config, const RunOptions& options);

/// Ablation sweep without disk access; long-format rows.
io::CsvTable ablation_table(const ExperimentConfig& config, unsigned threads,
                            const std::function<void(const std::string&)>& log = {});

/// Applies an ablation knob value to a copy of the configuration.
ExperimentConfig with_knob(const ExperimentConfig& config, const std::string& knob, double value, double radius_m);

/// Environment variable that overrides the default output root.
inline constexpr const char* kOutputRootEnv = "IMULOC_OUT";
std::filesystem::path default_output_root();

}  // namespace imuloc::pipeline
