// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "imuloc/sim/simulate.hpp"

namespace imuloc::sim {

std::vector<double> TrajectorySeries::step_durations() const {
  std::vector<double> dt(size());
  for (std::size_t n = 1; n < size(); ++n) dt[n] = timestamps[n] - timestamps[n - 1];
  if (size() >= 2) dt[0] = dt[1];
  return dt;
}

void TrajectorySeries::validate() const {
  const auto n = static_cast<Eigen::Index>(timestamps.size());
  if (positions.rows() != n || velocities.rows() != n || accelerations.rows() != n) {
    throw InputError("trajectory: timestamps/positions/velocities/accelerations row counts differ");
  }
  if (velocities.cols() != positions.cols() || accelerations.cols() != positions.cols()) {
    throw InputError("trajectory: column counts differ");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw InputError("trajectory: timestamps must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

void ImuSeries::validate() const {
  if (static_cast<Eigen::Index>(dt.size()) != accel.rows()) throw InputError("imu: len(dt) != rows(accel)");
  for (std::size_t i = 0; i < dt.size(); ++i) {
    if (!(dt[i] > 0)) throw InputError("imu: dt must be positive (index " + std::to_string(i) + ")");
  }
}

void ImuNoiseConfig::validate() const {
  if (temperature_scale_factor < 0 || constant_bias < 0 || temperature_bias < 0 || noise_density < 0) {
    throw ConfigError("imu: noise magnitudes must be non-negative");
  }
}

TrajectorySeries derive_kinematics(std::vector<double> timestamps, RowMatrix positions) {
  TrajectorySeries t;
  t.timestamps = std::move(timestamps);
  t.positions = std::move(positions);
  const auto n = t.positions.rows();
  if (static_cast<Eigen::Index>(t.timestamps.size()) != n || n < 2) {
    throw InputError("derive_kinematics: need >= 2 samples with one timestamp per position");
  }
  t.velocities = RowMatrix::Zero(n, t.positions.cols());
  t.accelerations = RowMatrix::Zero(n, t.positions.cols());
  for (Eigen::Index i = 1; i < n; ++i) {
    const double dt = t.timestamps[i] - t.timestamps[i - 1];
    t.velocities.row(i) = (t.positions.row(i) - t.positions.row(i - 1)) / dt;
  }
  t.velocities.row(0) = t.velocities.row(1);
  for (Eigen::Index i = 1; i < n; ++i) {
    const double dt = t.timestamps[i] - t.timestamps[i - 1];
    t.accelerations.row(i) = (t.velocities.row(i) - t.velocities.row(i - 1)) / dt;
  }
  t.validate();
  return t;
}

namespace {

double wrap_angle(double a) {
  return std::remainder(a, 2 * std::numbers::pi);
}

bool admissible(const Eigen::Vector2d& p, const ScenarioConfig& c) {
  return point_in_polygon(p, c.floor) && distance_to_boundary(p, c.floor) >= c.walker.wall_margin_m;
}

/// Unit normal of the polygon edge closest to p.
Eigen::Vector2d nearest_edge_normal(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& poly) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d normal(1, 0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d a = poly[i];
    const Eigen::Vector2d ab = poly[(i + 1) % poly.size()] - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const double d = (a + t * ab - p).norm();
    if (d < best) {
      best = d;
      normal = Eigen::Vector2d(-ab.y(), ab.x()).normalized();
    }
  }
  return normal;
}

Eigen::Vector2d polygon_centroid(const std::vector<Eigen::Vector2d>& poly) {
  double area = 0;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const double cross = a.x() * b.y() - b.x() * a.y();
    area += cross;
    c += (a + b) * cross;
  }
  return c / (3 * area);
}

TrajectorySeries follow_route(const ScenarioConfig& config, std::uint64_t seed) {
  const auto& w = config.walker;
  auto rng = make_rng(seed, Stream::kTrajectory);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> cumulative{0.0};
  for (std::size_t i = 0; i < w.route.size(); ++i) {
    cumulative.push_back(cumulative.back() + (w.route[(i + 1) % w.route.size()] - w.route[i]).norm());
  }
  const double lap = cumulative.back();
  if (!(lap > 0)) throw ConfigError("walker: route has zero length");
  auto point_at = [&](double s) {
    s = std::fmod(s, lap);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    const auto i = static_cast<std::size_t>(std::distance(cumulative.begin(), it) - 1);
    const Eigen::Vector2d a = w.route[i];
    const Eigen::Vector2d b = w.route[(i + 1) % w.route.size()];
    const double len = cumulative[i + 1] - cumulative[i];
    return Eigen::Vector2d(len > 0 ? a + (b - a) * ((s - cumulative[i]) / len) : a);
  };

  const auto n = static_cast<std::size_t>(w.samples);
  std::vector<double> t(n, 0.0);
  RowMatrix xy(static_cast<Eigen::Index>(n), 2);
  xy.row(0) = w.route.front().transpose();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double s = 0;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  for (std::size_t i = 1; i < n; ++i) {
    t[i] = t[i - 1] + w.dt_s * (1.0 + w.dt_jitter * unit(rng));
    const double step = w.step_length_m * std::max(0.2, 1.0 + w.step_length_jitter * gauss(rng));
    s += step;
    const double rho = std::exp(-step / w.route_offset_correlation_m);
    const double kick = w.route_offset_sigma_m * std::sqrt(1.0 - rho * rho);
    offset = rho * offset + kick * Eigen::Vector2d(gauss(rng), gauss(rng));
    const double along = std::fmod(s, lap);
    const double to_start = std::min(along, lap - along);
    const double taper = w.route_taper_m > 0 ? std::min(1.0, to_start / w.route_taper_m) : 1.0;
    const Eigen::Vector2d base = point_at(s);
    Eigen::Vector2d p = base + taper * offset;
    for (int k = 0; k < 6 && !admissible(p, config); ++k) p = base + 0.5 * (p - base);
    if (!admissible(p, config)) p = base;
    xy.row(static_cast<Eigen::Index>(i)) = p.transpose();
  }
  RowMatrix positions(static_cast<Eigen::Index>(n), config.dimensions);
  positions.leftCols(2) = xy;
  if (config.dimensions == 3) positions.col(2).setConstant(config.ue_height_m);
  return derive_kinematics(std::move(t), std::move(positions));
}

}  // namespace

TrajectorySeries simulate_trajectory(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& w = config.walker;
  if (!w.route.empty()) return follow_route(config, seed);
  auto rng = make_rng(seed, Stream::kTrajectory);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Eigen::Vector2d pos;
  if (!w.start.empty()) pos = {w.start[0], w.start[1]};
  else if (!w.waypoints.empty()) pos = w.waypoints.front();
  else pos = polygon_centroid(config.floor);
  if (!point_in_polygon(pos, config.floor)) throw ConfigError("walker: start position is outside the floor");

  const auto n = static_cast<std::size_t>(w.samples);
  std::vector<double> t(n, 0.0);
  RowMatrix xy(static_cast<Eigen::Index>(n), 2);
  xy.row(0) = pos.transpose();

  double heading = std::numbers::pi * unit(rng);
  double travelled = 0;
  bool homing = false;
  std::size_t target = w.waypoints.size() > 1 ? 1 : 0;

  for (std::size_t i = 1; i < n; ++i) {
    t[i] = t[i - 1] + w.dt_s * (1.0 + w.dt_jitter * unit(rng));
    const double step = w.step_length_m * std::max(0.2, 1.0 + w.step_length_jitter * gauss(rng));
    if (w.loop_length_m > 0 && travelled >= w.loop_length_m) homing = true;

    Eigen::Vector2d next;
    bool arrived = false;
    if (homing) {
      const Eigen::Vector2d to_target = w.waypoints[target] - pos;
      const double desired = std::atan2(to_target.y(), to_target.x());
      const double turn = std::clamp(wrap_angle(desired - heading), -w.homing_turn_rad, w.homing_turn_rad);
      heading = wrap_angle(heading + turn + 0.3 * w.turn_sigma_rad * gauss(rng));
      if (to_target.norm() <= step) {
        next = w.waypoints[target];
        arrived = true;
      }
    } else {
      heading = wrap_angle(heading + w.turn_sigma_rad * gauss(rng));
    }

    if (!arrived) {
      bool ok = false;
      for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
        Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
        next = pos + step * dir;
        if (admissible(next, config)) {
          ok = true;
          break;
        }
        if (attempt < 8) {
          const Eigen::Vector2d normal = nearest_edge_normal(next, config.floor);
          dir -= 2 * dir.dot(normal) * normal;
          heading = std::atan2(dir.y(), dir.x());
        } else {
          heading = std::numbers::pi * unit(rng);
        }
      }
      if (!ok) next = pos;  // cornered: stand still for one step
    }
    travelled += (next - pos).norm();
    pos = next;
    xy.row(static_cast<Eigen::Index>(i)) = pos.transpose();
    if (arrived) {
      homing = false;
      travelled = 0;
      target = (target + 1) % w.waypoints.size();
    }
  }

  RowMatrix positions(static_cast<Eigen::Index>(n), config.dimensions);
  positions.leftCols(2) = xy;
  if (config.dimensions == 3) positions.col(2).setConstant(config.ue_height_m);
  return derive_kinematics(std::move(t), std::move(positions));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_samples(std::size_t count,
                                                                            double train_fraction,
                                                                            std::uint64_t seed) {
  if (count == 0) throw InputError("split_samples: no samples");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = make_rng(seed, Stream::kSplit);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  n_train = std::clamp<std::size_t>(n_train, 1, count > 1 ? count - 1 : 1);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

}  // namespace imuloc::sim
