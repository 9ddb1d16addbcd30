// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "imuloc/parallel.hpp"
#include "imuloc/sim/simulate.hpp"

namespace imuloc::sim {

namespace {

constexpr double kSpeedOfLight = 299792458.0;

struct Path {
  double delay_s;
  double gain;
};

Eigen::Vector3d antenna_position(const ScenarioConfig& c, std::size_t trp, std::size_t antenna) {
  return c.trps[trp].position + Eigen::Vector3d(c.antenna_spacing_m * static_cast<double>(antenna), 0, 0);
}

/// LoS plus up to `max_reflections` single-bounce wall images, shortest first.
std::vector<Path> trace_paths(const ScenarioConfig& c, const Eigen::Vector3d& ue, const Eigen::Vector3d& ant) {
  std::vector<Path> paths;
  const double d_los = (ue - ant).norm();
  if (d_los < 1e-3) throw GeometryError("synth_csi: UE is colocated with a TRP antenna");
  paths.push_back({d_los / kSpeedOfLight, 1.0 / d_los});

  std::vector<Path> reflections;
  const auto& poly = c.floor;
  const Eigen::Vector2d ue2 = ue.head<2>();
  const Eigen::Vector2d ant2 = ant.head<2>();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d a = poly[i];
    const Eigen::Vector2d ab = poly[(i + 1) % poly.size()] - a;
    const Eigen::Vector2d normal = Eigen::Vector2d(-ab.y(), ab.x()).normalized();
    const double s_ant = (ant2 - a).dot(normal);
    const double s_ue = (ue2 - a).dot(normal);
    // Antenna on the wall plane (degenerate image) or on the other side of it.
    if (std::abs(s_ant) < 1e-2 || s_ant * s_ue <= 0) continue;
    const Eigen::Vector2d image2 = ant2 - 2 * s_ant * normal;
    // Bounce point: where the UE -> image segment crosses the wall line.
    const double frac = s_ue / (s_ue + s_ant);
    const Eigen::Vector2d bounce = ue2 + frac * (image2 - ue2);
    const double along = (bounce - a).dot(ab) / ab.squaredNorm();
    if (along < 0 || along > 1) continue;
    const Eigen::Vector3d image(image2.x(), image2.y(), ant.z());
    const double d = (ue - image).norm();
    reflections.push_back({d / kSpeedOfLight, c.channel.reflection_coefficient / d});
  }
  std::sort(reflections.begin(), reflections.end(),
            [](const Path& x, const Path& y) { return x.delay_s < y.delay_s; });
  const auto keep = std::min<std::size_t>(reflections.size(), static_cast<std::size_t>(c.channel.max_reflections));
  paths.insert(paths.end(), reflections.begin(), reflections.begin() + static_cast<std::ptrdiff_t>(keep));
  return paths;
}

}  // namespace

double los_delay_s(const ScenarioConfig& config, const Eigen::Vector2d& ue, std::size_t trp, std::size_t antenna) {
  const Eigen::Vector3d u(ue.x(), ue.y(), config.ue_height_m);
  return (u - antenna_position(config, trp, antenna)).norm() / kSpeedOfLight;
}

CfrDataset synth_csi(const TrajectorySeries& truth, const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  truth.validate();
  const std::size_t samples = truth.size();
  const auto trps = config.trps.size();
  const auto antennas = static_cast<std::size_t>(config.antennas_per_trp);
  const auto pilots = static_cast<std::size_t>(config.carrier.pilot_count());

  CfrDataset out;
  out.carrier = config.carrier;
  out.cfr = ChannelTensor(samples, trps, antennas, pilots);
  out.snr_db.assign(samples * trps * antennas, 0.0f);
  out.sample_index.resize(samples);

  const double ref_power = 1.0 / (config.channel.snr_reference_distance_m * config.channel.snr_reference_distance_m);
  const double noise_var = ref_power / std::pow(10.0, config.channel.snr_db / 10.0);
  const double noise_sigma = std::sqrt(noise_var / 2.0);
  const double f0 = config.carrier.center_frequency_hz;
  const double df = config.carrier.pilot_spacing_hz();

  parallel_for(samples, [&](std::size_t begin, std::size_t end) {
    std::vector<std::complex<double>> h(pilots);
    for (std::size_t s = begin; s < end; ++s) {
      out.sample_index[s] = static_cast<std::int64_t>(s);
      auto rng = make_rng(seed, Stream::kChannel, s);
      std::normal_distribution<double> gauss(0.0, 1.0);
      const auto row = truth.positions.row(static_cast<Eigen::Index>(s));
      const Eigen::Vector3d ue(row(0), row(1), config.ue_height_m);
      for (std::size_t t = 0; t < trps; ++t) {
        for (std::size_t a = 0; a < antennas; ++a) {
          std::fill(h.begin(), h.end(), std::complex<double>(0, 0));
          for (const auto& p : trace_paths(config, ue, antenna_position(config, t, a))) {
            std::complex<double> phasor = std::polar(p.gain, -2 * std::numbers::pi * f0 * p.delay_s);
            const std::complex<double> step = std::polar(1.0, -2 * std::numbers::pi * df * p.delay_s);
            for (std::size_t k = 0; k < pilots; ++k) {
              h[k] += phasor;
              phasor *= step;
            }
          }
          double power = 0;
          for (const auto& v : h) power += std::norm(v);
          power /= static_cast<double>(pilots);
          auto frame = out.cfr.frame(s, t, a);
          for (std::size_t k = 0; k < pilots; ++k) {
            const double re = gauss(rng);
            const std::complex<double> noise(noise_sigma * re, noise_sigma * gauss(rng));
            frame[k] = std::complex<float>(h[k] + noise);
          }
          out.snr_db[(s * trps + t) * antennas + a] =
              static_cast<float>(noise_var > 0 ? 10.0 * std::log10(power / noise_var) : INFINITY);
        }
      }
    }
  });
  return out;
}

}  // namespace imuloc::sim
