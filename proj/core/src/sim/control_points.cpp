// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <map>
#include <numeric>

#include "imuloc/sim/simulate.hpp"

namespace imuloc::sim {

namespace {

double horizontal_distance(const RowMatrix& positions, Eigen::Index i, const Eigen::Vector2d& site) {
  return (positions.row(i).head<2>().transpose() - site).norm();
}

}  // namespace

std::vector<ControlPoint> place_control_points(const TrajectorySeries& truth, const ControlPointSpec& spec,
                                               std::uint64_t seed) {
  truth.validate();
  if (spec.radius_m < 0) throw ConfigError("control points: radius must be >= 0");
  if (spec.position_noise_sigma_m < 0) throw ConfigError("control points: noise sigma must be >= 0");
  const auto n = static_cast<Eigen::Index>(truth.size());
  auto rng = make_rng(seed, Stream::kControlPoints);

  std::vector<Eigen::Vector2d> sites;
  if (spec.mode == ControlPointSpec::Mode::kRandom) {
    if (spec.random_count < 1) throw ConfigError("control points: requested count must be >= 1");
    if (spec.random_count > truth.size()) {
      throw ConfigError("control points: requested count " + std::to_string(spec.random_count) +
                        " exceeds sample count " + std::to_string(truth.size()));
    }
    std::vector<std::size_t> idx(truth.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < spec.random_count; ++k) {
      sites.push_back(truth.positions.row(static_cast<Eigen::Index>(idx[k])).head<2>().transpose());
    }
  } else {
    if (spec.sample_indices.empty() && spec.sites.empty()) {
      throw ConfigError("control points: requested count must be >= 1");
    }
    if (spec.sample_indices.size() + spec.sites.size() > truth.size()) {
      throw ConfigError("control points: more control points than samples");
    }
    for (auto i : spec.sample_indices) {
      if (i >= truth.size()) throw ConfigError("control points: sample index " + std::to_string(i) + " out of range");
      sites.push_back(truth.positions.row(static_cast<Eigen::Index>(i)).head<2>().transpose());
    }
    for (const auto& s : spec.sites) sites.push_back(s);
  }

  // Each maximal run of samples inside a site's radius is one visit, anchored
  // at the run midpoint. Runs touching the ends of the recording anchor there.
  std::map<std::size_t, std::size_t> anchors;  // sample -> site
  for (std::size_t s = 0; s < sites.size(); ++s) {
    Eigen::Index i = 0;
    while (i < n) {
      if (horizontal_distance(truth.positions, i, sites[s]) > spec.radius_m) {
        ++i;
        continue;
      }
      const Eigen::Index begin = i;
      while (i + 1 < n && horizontal_distance(truth.positions, i + 1, sites[s]) <= spec.radius_m) ++i;
      const Eigen::Index end = i;
      Eigen::Index anchor = (begin + end) / 2;
      if (begin == 0) anchor = 0;
      else if (end == n - 1) anchor = n - 1;
      anchors.emplace(static_cast<std::size_t>(anchor), s);
      ++i;
    }
  }

  const std::vector<double> dt = truth.step_durations();
  const int dim = truth.dim();
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto measure = [&](Eigen::Index i) {
    Vector p = truth.positions.row(i).transpose();
    if (spec.position_noise_sigma_m > 0) {
      for (int d = 0; d < dim; ++d) p[d] += spec.position_noise_sigma_m * gauss(rng);
    }
    return p;
  };

  std::vector<ControlPoint> out;
  out.reserve(anchors.size());
  for (const auto& [sample, site] : anchors) {
    const auto k = static_cast<Eigen::Index>(sample);
    ControlPoint cp;
    cp.sample_index = sample;
    cp.site = site;
    cp.radius = spec.radius_m;
    // Velocity is the same backward difference the integrator inverts; the
    // first sample falls back to the forward difference.
    if (k == 0) {
      cp.position = measure(0);
      const Vector next = measure(1);
      cp.velocity = (next - cp.position) / dt[1];
    } else {
      const Vector prev = measure(k - 1);
      cp.position = measure(k);
      cp.velocity = (cp.position - prev) / dt[sample];
    }
    out.push_back(std::move(cp));
  }
  return out;
}

}  // namespace imuloc::sim
