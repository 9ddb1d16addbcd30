// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "imuloc/sim/types.hpp"

namespace imuloc::sim {

/// OFDM numerology of the uplink sounding signal.
struct CarrierConfig {
  double bandwidth_hz = 100e6;
  double subcarrier_spacing_hz = 30e3;
  int subcarriers = 3264;
  int pilot_stride = 4;  ///< only every stride-th subtone carries a pilot
  double center_frequency_hz = 3.5e9;

  int pilot_count() const { return (subcarriers + pilot_stride - 1) / pilot_stride; }
  double pilot_spacing_hz() const { return pilot_stride * subcarrier_spacing_hz; }
  /// Delay resolution of the pilot IDFT.
  double bin_duration_s() const { return 1.0 / (pilot_count() * pilot_spacing_hz()); }
  void validate() const;
};

struct Trp {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

struct ChannelConfig {
  int max_reflections = 4;             ///< single-bounce wall images kept per link
  double reflection_coefficient = 0.5; ///< amplitude factor per wall bounce
  double snr_db = 25.0;                ///< LoS SNR at the reference distance
  double snr_reference_distance_m = 10.0;
};

struct WalkerConfig {
  int samples = 2000;
  double step_length_m = 0.20;
  double step_length_jitter = 0.1;  ///< relative std of the step length
  double dt_s = 0.16;
  double dt_jitter = 0.0;           ///< relative half-width of uniform dt jitter
  double turn_sigma_rad = 0.15;
  double wall_margin_m = 0.3;
  /// Distance walked before heading to the next waypoint; 0 disables homing.
  double loop_length_m = 0.0;
  double homing_turn_rad = 0.35;
  std::vector<Eigen::Vector2d> waypoints;
  /// Start position; defaults to the first waypoint, else the floor centroid.
  std::vector<double> start;
  /// Closed patrol route. When set, the walker follows it lap after lap with
  /// a smooth random offset (Ornstein-Uhlenbeck in both axes) that fades to
  /// zero near the route start, and the heading/homing fields are unused.
  std::vector<Eigen::Vector2d> route;
  double route_offset_sigma_m = 0.25;
  double route_offset_correlation_m = 3.0;
  double route_taper_m = 1.5;
};

struct ControlPointSpec {
  enum class Mode { kFixed, kRandom };
  Mode mode = Mode::kFixed;
  /// Fixed mode: fiducials sit at the truth positions of these samples ...
  std::vector<std::size_t> sample_indices{0};
  /// ... and/or at these explicit floor positions.
  std::vector<Eigen::Vector2d> sites;
  std::size_t random_count = 3;
  double radius_m = 0.20;
  double position_noise_sigma_m = 0.0;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::vector<Eigen::Vector2d> floor;  ///< simple polygon, any orientation
  int dimensions = 2;
  double ue_height_m = 1.0;
  std::vector<Trp> trps;
  int antennas_per_trp = 1;
  double antenna_spacing_m = 0.043;
  CarrierConfig carrier;
  ChannelConfig channel;
  WalkerConfig walker;
  ControlPointSpec control_points;
  ImuNoiseConfig imu;
  double train_fraction = 0.9;
  std::uint64_t dataset_seed = 0;

  void validate() const;

  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// 30 m x 20 m floor, 3 TRPs at 3 m, 3 control points, 20 cm steps.
  static ScenarioConfig simulated();
  /// 15 m x 12 m L-shaped floor, 6 TRPs at 4.5 m, 3.4 cm / 160 ms steps,
  /// one revisited start control point.
  static ScenarioConfig warehouse();
  /// Small room with short loops; used for quick end-to-end checks.
  static ScenarioConfig desk();
  static ScenarioConfig preset(const std::string& name);
};

bool point_in_polygon(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon);
double distance_to_boundary(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon);

}  // namespace imuloc::sim
