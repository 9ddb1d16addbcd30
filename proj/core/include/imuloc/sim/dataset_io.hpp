// SPDX-License-Identifier: Apache-2.0
//
// Persistence of simulated datasets in the binary container, plus the JSON
// sidecar written next to every dataset file.

#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "imuloc/io/container.hpp"
#include "imuloc/sim/simulate.hpp"

namespace imuloc::sim {

struct StoredDataset {
  TrajectorySeries truth;
  CfrDataset cfr;
  nlohmann::json metadata;
};

/// Arrays: timestamps f64[S], positions f64[S,D], cfr c64[S,T,A,K],
/// snr_db f32[S,T,A], sample_index i64[S]. Metadata carries dimensions and the
/// carrier config; a copy goes to `<path>.json`.
void write_dataset(const std::filesystem::path& path, const TrajectorySeries& truth, const CfrDataset& cfr,
                   nlohmann::json extra_metadata = nlohmann::json::object());
StoredDataset read_dataset(const std::filesystem::path& path);

io::Container imu_to_container(const ImuSeries& imu);
ImuSeries imu_from_container(const io::Container& c);

io::Container control_points_to_container(const std::vector<ControlPoint>& cps, int dim);
std::vector<ControlPoint> control_points_from_container(const io::Container& c);

io::Container trajectory_to_container(const TrajectorySeries& truth);
TrajectorySeries trajectory_from_container(const io::Container& c);

nlohmann::json carrier_to_json(const CarrierConfig& c);
CarrierConfig carrier_from_json(const nlohmann::json& j);

/// Helpers for row-major matrices stored as f64 arrays.
io::Array matrix_array(const std::string& name, const RowMatrix& m);
RowMatrix matrix_from_array(const io::Array& a);

}  // namespace imuloc::sim
