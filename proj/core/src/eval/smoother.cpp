// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "imuloc/eval/eval.hpp"

namespace imuloc::eval {

void SmootherConfig::validate() const {
  if (!(process_noise > 0) || !std::isfinite(process_noise)) throw ConfigError("smoother.process_noise must be > 0");
  if (!(observation_noise > 0) || !std::isfinite(observation_noise)) {
    throw ConfigError("smoother.observation_noise must be > 0");
  }
  if (!(initial_velocity_sigma > 0)) throw ConfigError("smoother.initial_velocity_sigma must be > 0");
}

nlohmann::json SmootherConfig::to_json() const {
  return {{"process_noise", process_noise},
          {"observation_noise", observation_noise},
          {"initial_velocity_sigma", initial_velocity_sigma}};
}

SmootherConfig SmootherConfig::from_json(const nlohmann::json& j) {
  SmootherConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "process_noise") c.process_noise = value.get<double>();
      else if (key == "observation_noise") c.observation_noise = value.get<double>();
      else if (key == "initial_velocity_sigma") c.initial_velocity_sigma = value.get<double>();
      else throw ConfigError("unknown key smoother." + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("smoother: ") + e.what());
  }
  c.validate();
  return c;
}

RowMatrix rts_smooth(const RowMatrix& positions, std::span<const double> timestamps, const SmootherConfig& config) {
  config.validate();
  const auto n = positions.rows();
  const auto d = positions.cols();
  if (n < 2) throw InputError("rts_smooth: need at least two samples");
  if (static_cast<Eigen::Index>(timestamps.size()) != n) throw InputError("rts_smooth: timestamp count mismatch");
  for (Eigen::Index k = 1; k < n; ++k) {
    if (!(timestamps[static_cast<std::size_t>(k)] > timestamps[static_cast<std::size_t>(k - 1)])) {
      throw InputError("rts_smooth: timestamps must be strictly increasing");
    }
  }

  // Axes share one covariance sequence; states are 2 x D (position; velocity).
  using M2 = Eigen::Matrix2d;
  const double r = config.observation_noise * config.observation_noise;
  const double q = config.process_noise * config.process_noise;
  std::vector<M2> p_filt(static_cast<std::size_t>(n)), p_pred(static_cast<std::size_t>(n)), f_mat(static_cast<std::size_t>(n));
  std::vector<Eigen::MatrixXd> x_filt(static_cast<std::size_t>(n)), x_pred(static_cast<std::size_t>(n));

  Eigen::MatrixXd x(2, d);
  x.row(0) = positions.row(0);
  x.row(1).setZero();
  M2 p;
  p << r, 0, 0, config.initial_velocity_sigma * config.initial_velocity_sigma;
  x_filt[0] = x;
  p_filt[0] = p;
  x_pred[0] = x;
  p_pred[0] = p;

  for (Eigen::Index k = 1; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double dt = timestamps[ku] - timestamps[ku - 1];
    M2 f;
    f << 1, dt, 0, 1;
    M2 qk;
    qk << dt * dt * dt / 3, dt * dt / 2, dt * dt / 2, dt;
    qk *= q;
    f_mat[ku] = f;
    x = f * x;
    p = f * p * f.transpose() + qk;
    x_pred[ku] = x;
    p_pred[ku] = p;
    const double s = p(0, 0) + r;
    if (!(s > 0) || !std::isfinite(s)) throw NumericalError("rts_smooth: singular innovation at sample " + std::to_string(k), k);
    const Eigen::Vector2d gain = p.col(0) / s;
    const Eigen::RowVectorXd innovation = positions.row(k) - x.row(0);
    x += gain * innovation;
    p -= gain * p.row(0);
    p = 0.5 * (p + p.transpose());
    x_filt[ku] = x;
    p_filt[ku] = p;
  }

  RowMatrix out(n, d);
  Eigen::MatrixXd xs = x_filt.back();
  out.row(n - 1) = xs.row(0);
  for (Eigen::Index k = n - 2; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    const M2& pp = p_pred[ku + 1];
    const double det = pp.determinant();
    if (!(std::abs(det) > 0) || !std::isfinite(det)) {
      throw NumericalError("rts_smooth: singular predicted covariance at sample " + std::to_string(k + 1), k + 1);
    }
    const M2 c = p_filt[ku] * f_mat[ku + 1].transpose() * pp.inverse();
    xs = x_filt[ku] + c * (xs - x_pred[ku + 1]);
    out.row(k) = xs.row(0);
  }
  if (!out.allFinite()) throw NumericalError("rts_smooth: non-finite output");
  return out;
}

}  // namespace imuloc::eval
