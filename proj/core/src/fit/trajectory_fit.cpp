// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "imuloc/fit/fit.hpp"
#include "imuloc/parallel.hpp"

namespace imuloc::fit {

namespace {

void check_inputs(const sim::ImuSeries& imu, const std::vector<sim::ControlPoint>& cps) {
  imu.validate();
  if (cps.empty()) throw ConfigError("trajectory fit: at least one control point is required");
  for (std::size_t k = 0; k < cps.size(); ++k) {
    if (cps[k].sample_index >= imu.size()) throw InputError("control point sample index out of range");
    if (k > 0 && cps[k].sample_index <= cps[k - 1].sample_index) {
      throw InputError("control points must have strictly increasing sample indices");
    }
    if (cps[k].position.size() != imu.dim() || cps[k].velocity.size() != imu.dim()) {
      throw InputError("control point dimension does not match the IMU");
    }
  }
}

// Dead reckoning outside the first and last control points.
void fill_open_ends(const sim::ImuSeries& imu, const std::vector<sim::ControlPoint>& cps, TrajectoryFit& out) {
  const std::size_t first = cps.front().sample_index;
  Eigen::RowVectorXd x = cps.front().position.transpose();
  Eigen::RowVectorXd v = cps.front().velocity.transpose();
  for (std::size_t s = first; s-- > 0;) {
    // Step s+1 leads from sample s to s+1; invert it.
    const double h = imu.dt[s + 1];
    const Eigen::RowVectorXd v_prev = v - imu.accel.row(static_cast<Eigen::Index>(s + 1)) * h;
    x = x - v * h;
    v = v_prev;
    out.pseudo_labels.row(static_cast<Eigen::Index>(s)) = x;
    out.one_sided[s] = 1;
  }
  const std::size_t last = cps.back().sample_index;
  x = cps.back().position.transpose();
  v = cps.back().velocity.transpose();
  for (std::size_t s = last + 1; s < imu.size(); ++s) {
    const double h = imu.dt[s];
    v = v + imu.accel.row(static_cast<Eigen::Index>(s)) * h;
    x = x + v * h;
    out.pseudo_labels.row(static_cast<Eigen::Index>(s)) = x;
    out.one_sided[s] = 1;
  }
  for (const auto& cp : cps) out.pseudo_labels.row(static_cast<Eigen::Index>(cp.sample_index)) = cp.position.transpose();
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(const std::vector<sim::ControlPoint>& control_points) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 1; k < control_points.size(); ++k) {
    out.emplace_back(control_points[k - 1].sample_index, control_points[k].sample_index);
  }
  return out;
}

Segment make_segment(const sim::ImuSeries& imu, const sim::ControlPoint& start, const sim::ControlPoint& end) {
  if (end.sample_index <= start.sample_index || end.sample_index >= imu.size()) {
    throw InputError("make_segment: invalid control point pair");
  }
  const auto b = static_cast<Eigen::Index>(start.sample_index);
  const auto n = static_cast<Eigen::Index>(end.sample_index - start.sample_index);
  Segment seg;
  seg.dt.assign(imu.dt.begin() + b + 1, imu.dt.begin() + b + 1 + n);
  seg.accel = imu.accel.middleRows(b + 1, n);
  seg.x_start = start.position;
  seg.v_start = start.velocity;
  seg.x_end = end.position;
  seg.v_end = end.velocity;
  return seg;
}

TrajectoryFit fit_trajectory(const sim::ImuSeries& imu, const std::vector<sim::ControlPoint>& control_points,
                             const FitConfig& config, std::uint64_t seed, const RowMatrix* model_positions,
                             const std::vector<std::uint8_t>* model_mask) {
  check_inputs(imu, control_points);
  config.validate();
  if ((model_positions == nullptr) != (model_mask == nullptr)) {
    throw InputError("fit_trajectory: model positions and mask must be given together");
  }
  if (model_positions != nullptr &&
      (model_positions->rows() != static_cast<Eigen::Index>(imu.size()) || model_positions->cols() != imu.dim() ||
       model_mask->size() != imu.size())) {
    throw InputError("fit_trajectory: model anchors must have one row per IMU sample");
  }

  TrajectoryFit out;
  out.pseudo_labels = RowMatrix::Zero(static_cast<Eigen::Index>(imu.size()), imu.dim());
  out.one_sided.assign(imu.size(), 0);
  const auto bounds = segment_bounds(control_points);
  out.segments.resize(bounds.size());

  parallel_for(bounds.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto [b, e] = bounds[k];
      const Segment seg = make_segment(imu, control_points[k], control_points[k + 1]);
      ModelAnchors anchors;
      if (model_positions != nullptr) {
        const auto len = static_cast<Eigen::Index>(e - b + 1);
        anchors.positions = model_positions->middleRows(static_cast<Eigen::Index>(b), len);
        anchors.mask.assign(model_mask->begin() + static_cast<std::ptrdiff_t>(b),
                            model_mask->begin() + static_cast<std::ptrdiff_t>(e + 1));
      }
      FitResult r;
      try {
        r = fit_segment(seg, config, mix_seed(seed) ^ mix_seed(k + 1), model_positions ? &anchors : nullptr);
      } catch (const NumericalError& err) {
        throw NumericalError("segment " + std::to_string(k) + ": " + err.what(), err.index());
      }
      for (std::size_t s = b + 1; s < e; ++s) {
        out.pseudo_labels.row(static_cast<Eigen::Index>(s)) = r.pseudo_labels.row(static_cast<Eigen::Index>(s - b));
      }
      const auto last = static_cast<Eigen::Index>(e - b);
      auto& diag = out.segments[k];
      diag.index = k;
      diag.begin_sample = b;
      diag.end_sample = e;
      diag.initial = r.initial;
      diag.final = r.final;
      diag.forward_end_gap = (r.x_fwd.row(last).transpose() - seg.x_end).norm();
      diag.backward_start_gap = (r.x_bwd.row(0).transpose() - seg.x_start).norm();
      diag.steps_run = r.steps_run;
    }
  });

  fill_open_ends(imu, control_points, out);
  return out;
}

TrajectoryFit dead_reckoning_labels(const sim::ImuSeries& imu, const std::vector<sim::ControlPoint>& control_points) {
  check_inputs(imu, control_points);
  TrajectoryFit out;
  out.pseudo_labels = RowMatrix::Zero(static_cast<Eigen::Index>(imu.size()), imu.dim());
  out.one_sided.assign(imu.size(), 0);
  const auto bounds = segment_bounds(control_points);
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto [b, e] = bounds[k];
    const Segment seg = make_segment(imu, control_points[k], control_points[k + 1]);
    const auto fwd = dead_reckon(seg.accel, seg.x_start, seg.v_start, seg.dt);
    for (std::size_t s = b + 1; s < e; ++s) {
      out.pseudo_labels.row(static_cast<Eigen::Index>(s)) = fwd.positions.row(static_cast<Eigen::Index>(s - b));
    }
    const auto last = static_cast<Eigen::Index>(e - b);
    SegmentDiagnostics diag;
    diag.index = k;
    diag.begin_sample = b;
    diag.end_sample = e;
    diag.forward_end_gap = (fwd.positions.row(last).transpose() - seg.x_end).norm();
    out.segments.push_back(diag);
  }
  fill_open_ends(imu, control_points, out);
  return out;
}

}  // namespace imuloc::fit
