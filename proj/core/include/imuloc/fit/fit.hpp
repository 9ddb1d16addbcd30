// SPDX-License-Identifier: Apache-2.0
//
// Forward-backward trajectory fitting between control points.
//
// A segment of N IMU steps is integrated forward from the start anchor and
// backward from the end anchor with corrected accelerations a + a_cor:
//
//   forward:  v[n] = v[n-1] + a~[n] dt[n],   x[n] = x[n-1] + v[n] dt[n]
//   backward: v[n-1] = v[n] - a~[n] dt[n],   x[n-1] = x[n] - v[n] dt[n]
//
// The corrections minimize
//   w_x * sum |xF - xB|^2 + w_v * sum |vF - vB|^2 + w_reg * sum |a_cor|^2
// over all N+1 states; pseudo-labels are (xF + xB) / 2. With model anchors
// the position term becomes sum |xF - m|^2 + |xB - m|^2 over anchored states.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "imuloc/common.hpp"
#include "imuloc/sim/types.hpp"

namespace imuloc::fit {

/// N+1 integrated states, row 0 is the initial state.
struct IntegratedStates {
  RowMatrix positions;
  RowMatrix velocities;
};

/// Plain double integration: velocity first, then position with the new velocity.
IntegratedStates dead_reckon(const RowMatrix& accel, const Vector& x0, const Vector& v0, std::span<const double> dt);

/// Backward counterpart of dead_reckon from a terminal state; exact inverse.
IntegratedStates dead_reckon_backward(const RowMatrix& accel, const Vector& x_end, const Vector& v_end,
                                      std::span<const double> dt);

/// IMU steps between two control points. accel row n-1 is applied over dt[n-1].
struct Segment {
  std::vector<double> dt;
  RowMatrix accel;
  Vector x_start, v_start;
  Vector x_end, v_end;

  std::size_t steps() const { return dt.size(); }
  int dim() const { return static_cast<int>(accel.cols()); }
  void validate() const;
};

IntegratedStates integrate_forward(const Segment& segment, const RowMatrix& corrections);
IntegratedStates integrate_backward(const Segment& segment, const RowMatrix& corrections);

/// Per-state model predictions used as refinement anchors; mask selects the
/// states that carry a prediction (training samples).
struct ModelAnchors {
  RowMatrix positions;
  std::vector<std::uint8_t> mask;
};

struct LossWeights {
  double position = 1.0;
  double velocity = 1e3;
  double regularization = 1e4;
};

/// Unweighted terms plus the weighted total.
struct LossTerms {
  double total = 0;
  double position = 0;
  double velocity = 0;
  double regularization = 0;
};

/// Evaluates the objective; if `gradient` is given it receives d total / d a_cor
/// computed by reverse accumulation through both recurrences.
LossTerms fb_loss(const Segment& segment, const RowMatrix& corrections, const LossWeights& weights,
                  const ModelAnchors* anchors = nullptr, RowMatrix* gradient = nullptr);

enum class Optimizer { kConjugateGradient, kGradientDescent };

struct FitConfig {
  double learning_rate = 1e-4;  ///< gradient-descent step; unused by CG
  int steps = 2000;
  LossWeights weights;
  /// Std of the Gaussian initialization of the corrections. A variance of
  /// 1e-4 (m/s^2)^2 corresponds to 0.01.
  double init_sigma = 0.01;
  Optimizer optimizer = Optimizer::kConjugateGradient;
  /// CG stops early once |grad| <= tolerance * |grad_0|.
  double gradient_tolerance = 1e-10;

  void validate() const;
  nlohmann::json to_json() const;
  static FitConfig from_json(const nlohmann::json& j);
};

struct FitResult {
  RowMatrix x_fwd, x_bwd;
  RowMatrix v_fwd, v_bwd;
  RowMatrix pseudo_labels;
  RowMatrix corrections;
  LossTerms initial;
  LossTerms final;
  int steps_run = 0;
  int best_step = 0;
  /// Total loss of the best iterate after each step (index 0 = init).
  std::vector<double> best_loss_history;
};

/// Optimizes the corrections from a Gaussian init and returns the best
/// iterate. Throws NumericalError with the step index on divergence.
FitResult fit_segment(const Segment& segment, const FitConfig& config, std::uint64_t seed,
                      const ModelAnchors* anchors = nullptr);

struct SegmentDiagnostics {
  std::size_t index = 0;
  std::size_t begin_sample = 0;
  std::size_t end_sample = 0;
  LossTerms initial;
  LossTerms final;
  double forward_end_gap = 0;    ///< |xF[N] - x_end|
  double backward_start_gap = 0; ///< |xB[0] - x_start|
  int steps_run = 0;
};

struct TrajectoryFit {
  RowMatrix pseudo_labels;
  /// 1 for samples outside any pair of anchors (one-sided dead reckoning).
  std::vector<std::uint8_t> one_sided;
  std::vector<SegmentDiagnostics> segments;
};

/// Pairs of consecutive control-point sample indices.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(const std::vector<sim::ControlPoint>& control_points);

Segment make_segment(const sim::ImuSeries& imu, const sim::ControlPoint& start, const sim::ControlPoint& end);

/// Fits every segment independently (segment-parallel; per-segment RNG from
/// (seed, segment)). Control-point samples take the measured position.
TrajectoryFit fit_trajectory(const sim::ImuSeries& imu, const std::vector<sim::ControlPoint>& control_points,
                             const FitConfig& config, std::uint64_t seed, const RowMatrix* model_positions = nullptr,
                             const std::vector<std::uint8_t>* model_mask = nullptr);

/// Baseline labels: each segment dead-reckoned forward from its start anchor
/// only, no end constraint and no corrections.
TrajectoryFit dead_reckoning_labels(const sim::ImuSeries& imu, const std::vector<sim::ControlPoint>& control_points);

}  // namespace imuloc::fit
