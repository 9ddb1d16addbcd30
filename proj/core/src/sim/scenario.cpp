// SPDX-License-Identifier: Apache-2.0

#include "imuloc/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imuloc::sim {

using nlohmann::json;

namespace {

Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected [x, y], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json2(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void CarrierConfig::validate() const {
  check(bandwidth_hz > 0 && subcarrier_spacing_hz > 0, "carrier: bandwidth and subcarrier spacing must be positive");
  check(subcarriers > 0 && pilot_stride > 0, "carrier: subcarriers and pilot stride must be positive");
  check(subcarriers * subcarrier_spacing_hz <= bandwidth_hz * (1 + 1e-9),
        "carrier: subcarriers * spacing exceeds the bandwidth");
  check(center_frequency_hz >= 0, "carrier: center frequency must be non-negative");
}

void ScenarioConfig::validate() const {
  check(floor.size() >= 3, "scenario: floor polygon needs at least 3 vertices");
  double area = 0;
  for (std::size_t i = 0; i < floor.size(); ++i) {
    const auto& a = floor[i];
    const auto& b = floor[(i + 1) % floor.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  check(std::abs(area) > 0, "scenario: floor extents must be positive");
  check(dimensions == 2 || dimensions == 3, "scenario: dimensions must be 2 or 3");
  check(!trps.empty(), "scenario: at least one TRP is required");
  check(antennas_per_trp >= 1, "scenario: antennas_per_trp must be >= 1");
  carrier.validate();
  check(channel.max_reflections >= 0, "channel: max_reflections must be >= 0");
  check(channel.snr_reference_distance_m > 0, "channel: snr reference distance must be positive");
  check(walker.samples >= 2, "walker: need at least 2 samples");
  check(walker.step_length_m > 0 && walker.dt_s > 0, "walker: step length and dt must be positive");
  check(walker.step_length_jitter >= 0 && walker.dt_jitter >= 0 && walker.dt_jitter < 1,
        "walker: jitter must be in [0, 1)");
  check(walker.turn_sigma_rad >= 0 && walker.loop_length_m >= 0 && walker.wall_margin_m >= 0,
        "walker: turn sigma, loop length and wall margin must be non-negative");
  check(walker.loop_length_m == 0 || !walker.waypoints.empty(), "walker: homing requires waypoints");
  check(walker.start.empty() || walker.start.size() == 2, "walker: start must be [x, y]");
  check(walker.route.empty() || walker.route.size() >= 2, "walker: route needs at least 2 points");
  check(walker.route_offset_sigma_m >= 0 && walker.route_offset_correlation_m > 0 && walker.route_taper_m >= 0,
        "walker: route offset parameters out of range");
  for (const auto& p : walker.route) check(point_in_polygon(p, floor), "walker: route point outside the floor");
  check(control_points.radius_m >= 0, "control_points: radius must be >= 0");
  check(control_points.position_noise_sigma_m >= 0, "control_points: noise sigma must be >= 0");
  if (control_points.mode == ControlPointSpec::Mode::kRandom) {
    check(control_points.random_count >= 1, "control_points: random count must be >= 1");
  } else {
    check(!control_points.sample_indices.empty() || !control_points.sites.empty(),
          "control_points: fixed mode needs sample indices or sites");
  }
  check(train_fraction > 0 && train_fraction < 1, "scenario: train_fraction must be in (0, 1)");
  imu.validate();
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  ScenarioConfig c;
  if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
  read(j, "name", c.name);
  if (j.contains("floor")) {
    c.floor.clear();
    for (const auto& v : j.at("floor")) c.floor.push_back(vec2(v));
  }
  read(j, "dimensions", c.dimensions);
  read(j, "ue_height_m", c.ue_height_m);
  if (j.contains("trps")) {
    c.trps.clear();
    for (const auto& t : j.at("trps")) {
      const auto& p = t.is_object() ? t.at("position") : t;
      if (!p.is_array() || p.size() != 3) throw ConfigError("trp position must be [x, y, z]");
      c.trps.push_back({Eigen::Vector3d(p[0].get<double>(), p[1].get<double>(), p[2].get<double>())});
    }
  }
  read(j, "antennas_per_trp", c.antennas_per_trp);
  read(j, "antenna_spacing_m", c.antenna_spacing_m);
  if (j.contains("carrier")) {
    const auto& k = j.at("carrier");
    read(k, "bandwidth_hz", c.carrier.bandwidth_hz);
    read(k, "subcarrier_spacing_hz", c.carrier.subcarrier_spacing_hz);
    read(k, "subcarriers", c.carrier.subcarriers);
    read(k, "pilot_stride", c.carrier.pilot_stride);
    read(k, "center_frequency_hz", c.carrier.center_frequency_hz);
  }
  if (j.contains("channel")) {
    const auto& k = j.at("channel");
    read(k, "max_reflections", c.channel.max_reflections);
    read(k, "reflection_coefficient", c.channel.reflection_coefficient);
    read(k, "snr_db", c.channel.snr_db);
    read(k, "snr_reference_distance_m", c.channel.snr_reference_distance_m);
  }
  if (j.contains("walker")) {
    const auto& k = j.at("walker");
    read(k, "samples", c.walker.samples);
    read(k, "step_length_m", c.walker.step_length_m);
    read(k, "step_length_jitter", c.walker.step_length_jitter);
    read(k, "dt_s", c.walker.dt_s);
    read(k, "dt_jitter", c.walker.dt_jitter);
    read(k, "turn_sigma_rad", c.walker.turn_sigma_rad);
    read(k, "wall_margin_m", c.walker.wall_margin_m);
    read(k, "loop_length_m", c.walker.loop_length_m);
    read(k, "homing_turn_rad", c.walker.homing_turn_rad);
    read(k, "start", c.walker.start);
    if (k.contains("waypoints")) {
      c.walker.waypoints.clear();
      for (const auto& v : k.at("waypoints")) c.walker.waypoints.push_back(vec2(v));
    }
    if (k.contains("route")) {
      c.walker.route.clear();
      for (const auto& v : k.at("route")) c.walker.route.push_back(vec2(v));
    }
    read(k, "route_offset_sigma_m", c.walker.route_offset_sigma_m);
    read(k, "route_offset_correlation_m", c.walker.route_offset_correlation_m);
    read(k, "route_taper_m", c.walker.route_taper_m);
  }
  if (j.contains("control_points")) {
    const auto& k = j.at("control_points");
    if (k.contains("mode")) {
      const auto m = k.at("mode").get<std::string>();
      if (m == "fixed") c.control_points.mode = ControlPointSpec::Mode::kFixed;
      else if (m == "random") c.control_points.mode = ControlPointSpec::Mode::kRandom;
      else throw ConfigError("control_points.mode must be 'fixed' or 'random'");
    }
    read(k, "sample_indices", c.control_points.sample_indices);
    if (k.contains("sites")) {
      c.control_points.sites.clear();
      for (const auto& v : k.at("sites")) c.control_points.sites.push_back(vec2(v));
    }
    read(k, "count", c.control_points.random_count);
    read(k, "radius_m", c.control_points.radius_m);
    read(k, "position_noise_sigma_m", c.control_points.position_noise_sigma_m);
  }
  if (j.contains("imu")) {
    const auto& k = j.at("imu");
    read(k, "temperature_scale_factor", c.imu.temperature_scale_factor);
    read(k, "constant_bias", c.imu.constant_bias);
    read(k, "temperature_bias", c.imu.temperature_bias);
    read(k, "noise_density", c.imu.noise_density);
    read(k, "reference_temperature", c.imu.reference_temperature);
    read(k, "temperature", c.imu.temperature);
  }
  read(j, "train_fraction", c.train_fraction);
  read(j, "dataset_seed", c.dataset_seed);
  c.validate();
  return c;
}

json ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  j["floor"] = json::array();
  for (const auto& v : floor) j["floor"].push_back(to_json2(v));
  j["dimensions"] = dimensions;
  j["ue_height_m"] = ue_height_m;
  j["trps"] = json::array();
  for (const auto& t : trps) j["trps"].push_back(json::array({t.position.x(), t.position.y(), t.position.z()}));
  j["antennas_per_trp"] = antennas_per_trp;
  j["antenna_spacing_m"] = antenna_spacing_m;
  j["carrier"] = {{"bandwidth_hz", carrier.bandwidth_hz},
                  {"subcarrier_spacing_hz", carrier.subcarrier_spacing_hz},
                  {"subcarriers", carrier.subcarriers},
                  {"pilot_stride", carrier.pilot_stride},
                  {"center_frequency_hz", carrier.center_frequency_hz}};
  j["channel"] = {{"max_reflections", channel.max_reflections},
                  {"reflection_coefficient", channel.reflection_coefficient},
                  {"snr_db", channel.snr_db},
                  {"snr_reference_distance_m", channel.snr_reference_distance_m}};
  json wp = json::array();
  for (const auto& v : walker.waypoints) wp.push_back(to_json2(v));
  json route = json::array();
  for (const auto& v : walker.route) route.push_back(to_json2(v));
  j["walker"] = {{"samples", walker.samples},
                 {"step_length_m", walker.step_length_m},
                 {"step_length_jitter", walker.step_length_jitter},
                 {"dt_s", walker.dt_s},
                 {"dt_jitter", walker.dt_jitter},
                 {"turn_sigma_rad", walker.turn_sigma_rad},
                 {"wall_margin_m", walker.wall_margin_m},
                 {"loop_length_m", walker.loop_length_m},
                 {"homing_turn_rad", walker.homing_turn_rad},
                 {"waypoints", wp},
                 {"start", walker.start},
                 {"route", route},
                 {"route_offset_sigma_m", walker.route_offset_sigma_m},
                 {"route_offset_correlation_m", walker.route_offset_correlation_m},
                 {"route_taper_m", walker.route_taper_m}};
  json sites = json::array();
  for (const auto& v : control_points.sites) sites.push_back(to_json2(v));
  j["control_points"] = {
      {"mode", control_points.mode == ControlPointSpec::Mode::kFixed ? "fixed" : "random"},
      {"sample_indices", control_points.sample_indices},
      {"sites", sites},
      {"count", control_points.random_count},
      {"radius_m", control_points.radius_m},
      {"position_noise_sigma_m", control_points.position_noise_sigma_m}};
  j["imu"] = {{"temperature_scale_factor", imu.temperature_scale_factor},
              {"constant_bias", imu.constant_bias},
              {"temperature_bias", imu.temperature_bias},
              {"noise_density", imu.noise_density},
              {"reference_temperature", imu.reference_temperature},
              {"temperature", imu.temperature}};
  j["train_fraction"] = train_fraction;
  j["dataset_seed"] = dataset_seed;
  return j;
}

ScenarioConfig ScenarioConfig::simulated() {
  ScenarioConfig c;
  c.name = "simulated";
  c.floor = {{0, 0}, {30, 0}, {30, 20}, {0, 20}};
  c.trps = {{{6, 5, 3}}, {{24, 6, 3}}, {{15, 16, 3}}};
  c.walker.samples = 8982;
  c.walker.step_length_m = 0.20;
  c.walker.dt_s = 0.5;
  c.walker.loop_length_m = 60.0;
  c.walker.waypoints = {{8, 10}, {20, 4}, {22, 15}};
  c.control_points.sample_indices.clear();
  c.control_points.sites = c.walker.waypoints;
  return c;
}

ScenarioConfig ScenarioConfig::warehouse() {
  ScenarioConfig c;
  c.name = "warehouse";
  c.floor = {{0, 0}, {15, 0}, {15, 5}, {5, 5}, {5, 12}, {0, 12}};
  c.trps = {{{0, 0, 4.5}}, {{15, 0, 4.5}}, {{15, 5, 4.5}}, {{5, 5, 4.5}}, {{5, 12, 4.5}}, {{0, 12, 4.5}}};
  c.walker.samples = 10000;
  c.walker.step_length_m = 0.034;
  c.walker.dt_s = 0.16;
  c.walker.route = {{2.5, 1.5}, {13.5, 1.5}, {13.5, 3.5}, {3.5, 3.5}, {3.5, 10.5}, {1.5, 10.5}, {1.5, 1.5}};
  c.control_points.sample_indices = {0};
  return c;
}

ScenarioConfig ScenarioConfig::desk() {
  ScenarioConfig c;
  c.name = "desk";
  c.floor = {{0, 0}, {4, 0}, {4, 3}, {0, 3}};
  c.trps = {{{0.2, 0.2, 2.5}}, {{3.8, 0.4, 2.5}}, {{2.0, 2.8, 2.5}}};
  c.walker.samples = 1200;
  c.walker.step_length_m = 0.05;
  c.walker.dt_s = 0.16;
  c.walker.turn_sigma_rad = 0.15;
  c.walker.wall_margin_m = 0.2;
  c.walker.loop_length_m = 2.5;
  c.walker.waypoints = {{1.0, 1.0}, {3.0, 1.0}, {2.0, 2.2}};
  c.control_points.sample_indices.clear();
  c.control_points.sites = c.walker.waypoints;
  c.channel.snr_reference_distance_m = 3.0;
  return c;
}

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  if (name == "simulated") return simulated();
  if (name == "warehouse") return warehouse();
  if (name == "desk") return desk();
  throw ConfigError("unknown scenario preset '" + name + "'");
}

bool point_in_polygon(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon) {
  bool inside = false;
  for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
    const auto& a = polygon[i];
    const auto& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      inside = !inside;
    }
  }
  return inside;
}

double distance_to_boundary(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& polygon) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Eigen::Vector2d a = polygon[i];
    const Eigen::Vector2d b = polygon[(i + 1) % polygon.size()];
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (a + t * ab - p).norm());
  }
  return best;
}

}  // namespace imuloc::sim
