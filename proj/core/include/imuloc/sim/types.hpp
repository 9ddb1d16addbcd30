// SPDX-License-Identifier: Apache-2.0
//
// Value types shared by the simulator and the trajectory fitter.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "imuloc/common.hpp"

namespace imuloc::sim {

/// Ground-truth UE motion. Velocities and accelerations are the backward
/// differences that the dead-reckoning recurrence inverts exactly:
///   v[n] = (x[n] - x[n-1]) / dt[n],  a[n] = (v[n] - v[n-1]) / dt[n]
/// with v[0] = v[1] and a[0] = 0.
struct TrajectorySeries {
  std::vector<double> timestamps;
  RowMatrix positions;
  RowMatrix velocities;
  RowMatrix accelerations;

  std::size_t size() const { return timestamps.size(); }
  int dim() const { return static_cast<int>(positions.cols()); }

  /// dt[n] = t[n] - t[n-1]; dt[0] repeats dt[1] so every row has a step.
  std::vector<double> step_durations() const;

  /// Throws InputError on shape or monotonicity violations.
  void validate() const;
};

/// Builds velocities/accelerations from positions by backward differences.
TrajectorySeries derive_kinematics(std::vector<double> timestamps, RowMatrix positions);

/// Noisy global-frame accelerometer output, one row per trajectory sample.
/// Row n carries the acceleration applied over the step ending at sample n.
struct ImuSeries {
  std::vector<double> dt;
  RowMatrix accel;
  double temperature = 25.0;

  std::size_t size() const { return dt.size(); }
  int dim() const { return static_cast<int>(accel.cols()); }
  void validate() const;
};

/// Accelerometer error model. Defaults are the smartphone-grade imuSensor
/// settings used throughout the experiments.
struct ImuNoiseConfig {
  double temperature_scale_factor = 0.008;  ///< %/degC
  double constant_bias = 0.1962;            ///< m/s^2
  double temperature_bias = 0.0014715;      ///< m/s^2/degC
  double noise_density = 0.0012361;         ///< m/s^2/sqrt(Hz)
  double reference_temperature = 25.0;      ///< degC
  double temperature = 25.0;                ///< run temperature, degC
  std::uint64_t seed = 0;

  void validate() const;
};

/// One precise position/velocity measurement taken while the UE passes a
/// fiducial. `site` identifies the fiducial; one site may be visited often.
struct ControlPoint {
  std::size_t sample_index = 0;
  Vector position;
  Vector velocity;
  double radius = 0.20;
  std::size_t site = 0;
};

}  // namespace imuloc::sim
