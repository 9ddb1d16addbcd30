// SPDX-License-Identifier: Apache-2.0
//
// Error metrics, the constant-velocity RTS smoother and the iterative
// pseudo-label refinement loop.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "imuloc/common.hpp"
#include "imuloc/csi/csi.hpp"
#include "imuloc/fit/fit.hpp"
#include "imuloc/model/model.hpp"
#include "imuloc/sim/types.hpp"

namespace imuloc::eval {

/// Euclidean distance over the first two columns, one value per row.
std::vector<double> horizontal_error(const RowMatrix& pred, const RowMatrix& truth);

/// Linear interpolation between order statistics at rank q * (n - 1), q in [0, 1].
double percentile(std::vector<double> values, double q);

struct ErrorReport {
  std::vector<double> errors;
  double mean = 0;
  double median = 0;
  double p90 = 0;

  static ErrorReport from_errors(std::vector<double> errors);
  nlohmann::json summary_json() const;
};

/// Across-seed statistics of one scalar; std uses n - 1 (0 for a single seed).
struct SeedStats {
  std::size_t count = 0;
  double mean = 0;
  double std = 0;
  double q10 = 0;
  double q90 = 0;
};

SeedStats seed_stats(const std::vector<double>& values);

struct SmootherConfig {
  double process_noise = 0.1;      ///< white-acceleration density, m/s^2
  double observation_noise = 0.1;  ///< position measurement sigma, m
  double initial_velocity_sigma = 1e3;

  void validate() const;
  nlohmann::json to_json() const;
  static SmootherConfig from_json(const nlohmann::json& j);
};

/// Kalman filter plus Rauch-Tung-Striebel pass, independent per axis under a
/// constant-velocity model. Timestamps must be strictly increasing.
RowMatrix rts_smooth(const RowMatrix& positions, std::span<const double> timestamps, const SmootherConfig& config);

/// Inputs shared by all refinement iterations. Feature row r belongs to
/// trajectory sample `sample_of_row[r]`.
struct RefinementData {
  const RowMatrixF* features = nullptr;
  csi::FeatureLayout layout;
  std::vector<std::size_t> sample_of_row;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  const sim::ImuSeries* imu = nullptr;
  const std::vector<sim::ControlPoint>* control_points = nullptr;
  const RowMatrix* truth = nullptr;             ///< per trajectory sample
  const std::vector<double>* timestamps = nullptr;

  void validate() const;
};

struct RefinementConfig {
  fit::FitConfig fit;
  model::TrainConfig train;
  std::vector<int> epochs = {100, 200, 300, 400};  ///< one entry per iteration
  SmootherConfig smoother;
  bool smooth_predictions = true;
};

struct IterationResult {
  int iteration = 0;
  RowMatrix pseudo_labels;            ///< per trajectory sample
  ErrorReport pseudo_label_error;     ///< over training rows
  ErrorReport test_error;
  RowMatrix test_predictions;         ///< after optional smoothing
  std::vector<double> loss_curve;
  std::string model_hash;
  model::MlpF model;
};

/// Rows of `m` selected by `rows`.
RowMatrixF select_rows(const RowMatrixF& m, const std::vector<std::size_t>& rows);
RowMatrix select_rows(const RowMatrix& m, const std::vector<std::size_t>& rows);

/// Scores predictions for data.test_rows (in that order), optionally smoothing
/// them in time order first.
ErrorReport score_predictions(RowMatrix pred, const RefinementData& data, const SmootherConfig& smoother, bool smooth,
                              RowMatrix* smoothed = nullptr);

/// Predicts test rows, optionally smooths them in time order, and scores them.
ErrorReport score_model(const model::MlpF& net, const RefinementData& data, const SmootherConfig& smoother,
                        bool smooth, RowMatrix* predictions = nullptr);

/// One refinement step. Iteration 0 (previous == nullptr) fits without
/// anchors; later iterations anchor the fit to `previous`'s predictions on the
/// training samples. Always trains a freshly initialized network.
IterationResult refinement_iteration(const RefinementData& data, const RefinementConfig& config, std::uint64_t seed,
                                     int iteration, const model::MlpF* previous);

/// Iteration 0 fits without anchors; iteration i >= 1 anchors the fit to the
/// previous model's predictions on training samples. Every iteration trains
/// a freshly initialized network.
std::vector<IterationResult> refinement_loop(const RefinementData& data, const RefinementConfig& config,
                                             std::uint64_t seed,
                                             const std::function<void(const IterationResult&)>& on_iteration = {});

}  // namespace imuloc::eval
