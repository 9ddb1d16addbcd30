// SPDX-License-Identifier: Apache-2.0

#include "imuloc/fit/fit.hpp"

namespace imuloc::fit {

namespace {

void check_shapes(const RowMatrix& accel, const Vector& x, const Vector& v, std::span<const double> dt) {
  if (static_cast<Eigen::Index>(dt.size()) != accel.rows()) throw InputError("integration: len(dt) != rows(accel)");
  if (x.size() != accel.cols() || v.size() != accel.cols()) {
    throw InputError("integration: state dimension does not match acceleration columns");
  }
}

}  // namespace

IntegratedStates dead_reckon(const RowMatrix& accel, const Vector& x0, const Vector& v0, std::span<const double> dt) {
  check_shapes(accel, x0, v0, dt);
  const auto n = accel.rows();
  IntegratedStates s{RowMatrix(n + 1, accel.cols()), RowMatrix(n + 1, accel.cols())};
  s.positions.row(0) = x0.transpose();
  s.velocities.row(0) = v0.transpose();
  for (Eigen::Index i = 1; i <= n; ++i) {
    const double h = dt[static_cast<std::size_t>(i - 1)];
    s.velocities.row(i) = s.velocities.row(i - 1) + accel.row(i - 1) * h;
    s.positions.row(i) = s.positions.row(i - 1) + s.velocities.row(i) * h;
  }
  return s;
}

IntegratedStates dead_reckon_backward(const RowMatrix& accel, const Vector& x_end, const Vector& v_end,
                                      std::span<const double> dt) {
  check_shapes(accel, x_end, v_end, dt);
  const auto n = accel.rows();
  IntegratedStates s{RowMatrix(n + 1, accel.cols()), RowMatrix(n + 1, accel.cols())};
  s.positions.row(n) = x_end.transpose();
  s.velocities.row(n) = v_end.transpose();
  for (Eigen::Index i = n; i >= 1; --i) {
    const double h = dt[static_cast<std::size_t>(i - 1)];
    s.velocities.row(i - 1) = s.velocities.row(i) - accel.row(i - 1) * h;
    s.positions.row(i - 1) = s.positions.row(i) - s.velocities.row(i) * h;
  }
  return s;
}

void Segment::validate() const {
  if (dt.empty()) throw InputError("segment: needs at least one step");
  if (static_cast<Eigen::Index>(dt.size()) != accel.rows()) throw InputError("segment: len(dt) != rows(accel)");
  const auto d = accel.cols();
  if (x_start.size() != d || v_start.size() != d || x_end.size() != d || v_end.size() != d) {
    throw InputError("segment: anchor dimension does not match acceleration columns");
  }
  if (!x_start.allFinite() || !v_start.allFinite() || !x_end.allFinite() || !v_end.allFinite()) {
    throw InputError("segment: anchors must be finite");
  }
}

IntegratedStates integrate_forward(const Segment& segment, const RowMatrix& corrections) {
  if (corrections.rows() != segment.accel.rows() || corrections.cols() != segment.accel.cols()) {
    throw InputError("integrate_forward: corrections shape differs from segment accel");
  }
  return dead_reckon(segment.accel + corrections, segment.x_start, segment.v_start, segment.dt);
}

IntegratedStates integrate_backward(const Segment& segment, const RowMatrix& corrections) {
  if (corrections.rows() != segment.accel.rows() || corrections.cols() != segment.accel.cols()) {
    throw InputError("integrate_backward: corrections shape differs from segment accel");
  }
  return dead_reckon_backward(segment.accel + corrections, segment.x_end, segment.v_end, segment.dt);
}

}  // namespace imuloc::fit
