// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "imuloc/sim/simulate.hpp"

namespace imuloc::sim {

double imu_white_noise_sigma(const ImuNoiseConfig& config, double dt) {
  return config.noise_density * std::sqrt(1.0 / dt);
}

ImuSeries simulate_imu(const TrajectorySeries& truth, const ImuNoiseConfig& config) {
  config.validate();
  if (truth.size() < 2) throw InputError("simulate_imu: trajectory needs at least 2 samples");
  truth.validate();

  const int dim = truth.dim();
  auto rng = make_rng(config.seed, Stream::kImu);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  // Bias is drawn once per run: the scalar constant bias is split evenly over
  // the axes (magnitude / sqrt(D) each) with an independent random sign.
  const double delta_t = config.temperature - config.reference_temperature;
  const double scale_error = config.temperature_scale_factor / 100.0 * delta_t;
  Vector bias(dim);
  for (int d = 0; d < dim; ++d) {
    const double sign = coin(rng) ? 1.0 : -1.0;
    bias[d] = sign * config.constant_bias / std::sqrt(static_cast<double>(dim)) + config.temperature_bias * delta_t;
  }

  ImuSeries imu;
  imu.temperature = config.temperature;
  imu.dt = truth.step_durations();
  imu.accel.resize(truth.accelerations.rows(), dim);
  for (Eigen::Index n = 0; n < imu.accel.rows(); ++n) {
    const double sigma = imu_white_noise_sigma(config, imu.dt[static_cast<std::size_t>(n)]);
    for (int d = 0; d < dim; ++d) {
      const double white = sigma * gauss(rng);
      imu.accel(n, d) = truth.accelerations(n, d) * (1.0 + scale_error) + bias[d] + white;
    }
  }
  return imu;
}

}  // namespace imuloc::sim
