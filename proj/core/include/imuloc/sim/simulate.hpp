// SPDX-License-Identifier: Apache-2.0
//
// Trajectory, IMU, control-point and channel simulators. Every function is a
// pure function of its arguments and seed.

#pragma once

#include <cstdint>
#include <vector>

#include "imuloc/channel_tensor.hpp"
#include "imuloc/sim/scenario.hpp"
#include "imuloc/sim/types.hpp"

namespace imuloc::sim {

/// Correlated random walk confined to the floor polygon: bounded random
/// heading turns, specular reflection at walls, optional periodic homing to
/// waypoints so fiducials are revisited.
TrajectorySeries simulate_trajectory(const ScenarioConfig& config, std::uint64_t seed);

/// accel = truth * (1 + scale) + bias + white noise with per-axis
/// sigma = noise_density * sqrt(1 / dt).
ImuSeries simulate_imu(const TrajectorySeries& truth, const ImuNoiseConfig& config);

/// Per-axis standard deviation of the white-noise term for a step of dt.
double imu_white_noise_sigma(const ImuNoiseConfig& config, double dt);

/// Detects every pass of the UE through a fiducial and emits one control
/// point per pass, sorted by sample index.
std::vector<ControlPoint> place_control_points(const TrajectorySeries& truth, const ControlPointSpec& spec,
                                               std::uint64_t seed);

/// Channel frequency responses on the pilot subtones.
struct CfrDataset {
  CarrierConfig carrier;
  ChannelTensor cfr;                    ///< bins == pilot count
  std::vector<float> snr_db;            ///< injected SNR per (sample, TRP, antenna)
  std::vector<std::int64_t> sample_index;
};

/// Image-method multipath: LoS plus single-bounce wall reflections, complex
/// Gaussian receiver noise. Per-sample RNG derived from (seed, sample).
CfrDataset synth_csi(const TrajectorySeries& truth, const ScenarioConfig& config, std::uint64_t seed);

/// Propagation delay of the direct path between a UE position and a TRP antenna.
double los_delay_s(const ScenarioConfig& config, const Eigen::Vector2d& ue, std::size_t trp, std::size_t antenna);

/// Uniform random split of sample indices; returns (train, test), both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_samples(std::size_t count,
                                                                            double train_fraction,
                                                                            std::uint64_t seed);

}  // namespace imuloc::sim
