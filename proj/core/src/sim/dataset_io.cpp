// SPDX-License-Identifier: Apache-2.0

#include "imuloc/sim/dataset_io.hpp"

#include "imuloc/io/csv.hpp"

namespace imuloc::sim {

using nlohmann::json;
using io::Array;
using io::Container;

io::Array matrix_array(const std::string& name, const RowMatrix& m) {
  return Array::f64(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                    std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

RowMatrix matrix_from_array(const io::Array& a) {
  if (a.shape.size() != 2) throw io::ContainerError(io::ContainerError::Kind::kMalformed, "'" + a.name + "' is not 2-D");
  const auto v = a.as_f64();
  RowMatrix m(static_cast<Eigen::Index>(a.shape[0]), static_cast<Eigen::Index>(a.shape[1]));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

json carrier_to_json(const CarrierConfig& c) {
  return {{"bandwidth_hz", c.bandwidth_hz},
          {"subcarrier_spacing_hz", c.subcarrier_spacing_hz},
          {"subcarriers", c.subcarriers},
          {"pilot_stride", c.pilot_stride},
          {"center_frequency_hz", c.center_frequency_hz}};
}

CarrierConfig carrier_from_json(const json& j) {
  CarrierConfig c;
  c.bandwidth_hz = j.at("bandwidth_hz").get<double>();
  c.subcarrier_spacing_hz = j.at("subcarrier_spacing_hz").get<double>();
  c.subcarriers = j.at("subcarriers").get<int>();
  c.pilot_stride = j.at("pilot_stride").get<int>();
  c.center_frequency_hz = j.at("center_frequency_hz").get<double>();
  return c;
}

io::Container trajectory_to_container(const TrajectorySeries& truth) {
  Container c;
  c.arrays.push_back(Array::f64("timestamps", {truth.size()}, truth.timestamps));
  c.arrays.push_back(matrix_array("positions", truth.positions));
  c.metadata = {{"kind", "trajectory"}, {"samples", truth.size()}, {"dimensions", truth.dim()}};
  return c;
}

TrajectorySeries trajectory_from_container(const io::Container& c) {
  return derive_kinematics(c.at("timestamps").as_f64(), matrix_from_array(c.at("positions")));
}

void write_dataset(const std::filesystem::path& path, const TrajectorySeries& truth, const CfrDataset& cfr,
                   json extra_metadata) {
  if (cfr.cfr.samples != truth.size()) throw InputError("write_dataset: CFR and trajectory sample counts differ");
  Container c = trajectory_to_container(truth);
  const auto& t = cfr.cfr;
  c.arrays.push_back(Array::c64("cfr", {t.samples, t.trps, t.antennas, t.bins}, t.data));
  c.arrays.push_back(Array::f32("snr_db", {t.samples, t.trps, t.antennas}, cfr.snr_db));
  c.arrays.push_back(Array::i64("sample_index", {cfr.sample_index.size()}, cfr.sample_index));
  c.metadata = {{"kind", "cfr_dataset"},
                {"samples", t.samples},
                {"trps", t.trps},
                {"antennas", t.antennas},
                {"pilots", t.bins},
                {"dimensions", truth.dim()},
                {"carrier", carrier_to_json(cfr.carrier)},
                {"extra", std::move(extra_metadata)}};
  io::write_container(path, c);
  io::write_text(path.string() + ".json", c.metadata.dump(2) + "\n");
}

StoredDataset read_dataset(const std::filesystem::path& path) {
  const Container c = io::read_container(path);
  if (c.metadata.value("kind", "") != "cfr_dataset") {
    throw io::ContainerError(io::ContainerError::Kind::kMalformed, "'" + path.string() + "' is not a CFR dataset");
  }
  StoredDataset d;
  d.metadata = c.metadata;
  d.truth = trajectory_from_container(c);
  const auto& cfr = c.at("cfr");
  if (cfr.shape.size() != 4) throw io::ContainerError(io::ContainerError::Kind::kMalformed, "cfr must be 4-D");
  d.cfr.carrier = carrier_from_json(c.metadata.at("carrier"));
  d.cfr.cfr.samples = cfr.shape[0];
  d.cfr.cfr.trps = cfr.shape[1];
  d.cfr.cfr.antennas = cfr.shape[2];
  d.cfr.cfr.bins = cfr.shape[3];
  d.cfr.cfr.data = cfr.as_c64();
  d.cfr.snr_db = c.at("snr_db").as_f32();
  d.cfr.sample_index = c.at("sample_index").as_i64();
  return d;
}

io::Container imu_to_container(const ImuSeries& imu) {
  Container c;
  c.arrays.push_back(Array::f64("dt", {imu.dt.size()}, imu.dt));
  c.arrays.push_back(matrix_array("accel", imu.accel));
  c.metadata = {{"kind", "imu"}, {"temperature", imu.temperature}};
  return c;
}

ImuSeries imu_from_container(const io::Container& c) {
  ImuSeries imu;
  imu.dt = c.at("dt").as_f64();
  imu.accel = matrix_from_array(c.at("accel"));
  imu.temperature = c.metadata.value("temperature", 25.0);
  imu.validate();
  return imu;
}

io::Container control_points_to_container(const std::vector<ControlPoint>& cps, int dim) {
  const auto n = cps.size();
  std::vector<std::int64_t> index(n), site(n);
  std::vector<double> radius(n);
  RowMatrix pos(static_cast<Eigen::Index>(n), dim), vel(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    index[i] = static_cast<std::int64_t>(cps[i].sample_index);
    site[i] = static_cast<std::int64_t>(cps[i].site);
    radius[i] = cps[i].radius;
    pos.row(static_cast<Eigen::Index>(i)) = cps[i].position.transpose();
    vel.row(static_cast<Eigen::Index>(i)) = cps[i].velocity.transpose();
  }
  Container c;
  c.arrays.push_back(Array::i64("sample_index", {n}, index));
  c.arrays.push_back(Array::i64("site", {n}, site));
  c.arrays.push_back(Array::f64("radius", {n}, radius));
  c.arrays.push_back(matrix_array("position", pos));
  c.arrays.push_back(matrix_array("velocity", vel));
  c.metadata = {{"kind", "control_points"}, {"count", n}};
  return c;
}

std::vector<ControlPoint> control_points_from_container(const io::Container& c) {
  const auto index = c.at("sample_index").as_i64();
  const auto site = c.at("site").as_i64();
  const auto radius = c.at("radius").as_f64();
  const RowMatrix pos = matrix_from_array(c.at("position"));
  const RowMatrix vel = matrix_from_array(c.at("velocity"));
  std::vector<ControlPoint> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out[i].sample_index = static_cast<std::size_t>(index[i]);
    out[i].site = static_cast<std::size_t>(site[i]);
    out[i].radius = radius[i];
    out[i].position = pos.row(static_cast<Eigen::Index>(i)).transpose();
    out[i].velocity = vel.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return out;
}

}  // namespace imuloc::sim
