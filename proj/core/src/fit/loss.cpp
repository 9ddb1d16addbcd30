// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "imuloc/fit/fit.hpp"

namespace imuloc::fit {

LossTerms fb_loss(const Segment& segment, const RowMatrix& corrections, const LossWeights& weights,
                  const ModelAnchors* anchors, RowMatrix* gradient) {
  const auto fwd = integrate_forward(segment, corrections);
  const auto bwd = integrate_backward(segment, corrections);
  const auto n = static_cast<Eigen::Index>(segment.steps());
  const auto d = segment.accel.cols();

  if (anchors != nullptr) {
    if (anchors->positions.rows() != n + 1 || anchors->positions.cols() != d ||
        static_cast<Eigen::Index>(anchors->mask.size()) != n + 1) {
      throw InputError("fb_loss: model anchors must cover all N+1 states");
    }
  }

  // Direct partial derivatives of the weighted loss w.r.t. each state.
  RowMatrix gxf = RowMatrix::Zero(n + 1, d);
  RowMatrix gxb = RowMatrix::Zero(n + 1, d);
  const RowMatrix dv = fwd.velocities - bwd.velocities;

  LossTerms t;
  if (anchors == nullptr) {
    const RowMatrix dx = fwd.positions - bwd.positions;
    t.position = dx.squaredNorm();
    gxf = 2.0 * weights.position * dx;
    gxb = -gxf;
  } else {
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (!anchors->mask[static_cast<std::size_t>(i)]) continue;
      const auto ef = fwd.positions.row(i) - anchors->positions.row(i);
      const auto eb = bwd.positions.row(i) - anchors->positions.row(i);
      t.position += ef.squaredNorm() + eb.squaredNorm();
      gxf.row(i) = 2.0 * weights.position * ef;
      gxb.row(i) = 2.0 * weights.position * eb;
    }
  }
  t.velocity = dv.squaredNorm();
  t.regularization = corrections.squaredNorm();
  t.total = weights.position * t.position + weights.velocity * t.velocity + weights.regularization * t.regularization;

  if (gradient == nullptr) return t;

  const RowMatrix gvf = 2.0 * weights.velocity * dv;
  const RowMatrix gvb = -gvf;
  gradient->setZero(n, d);

  // Forward chain: x[i] feeds x[i+1]; v[i] feeds v[i+1] and x[i].
  Eigen::RowVectorXd xbar = Eigen::RowVectorXd::Zero(d);
  Eigen::RowVectorXd vbar = Eigen::RowVectorXd::Zero(d);
  for (Eigen::Index i = n; i >= 1; --i) {
    const double h = segment.dt[static_cast<std::size_t>(i - 1)];
    xbar += gxf.row(i);
    vbar += gvf.row(i) + xbar * h;
    gradient->row(i - 1) += vbar * h;
  }

  // Backward chain runs the other way: x[i] feeds x[i-1]; v[i] feeds v[i-1]
  // and x[i-1] (with -dt[i]); a[i] enters v[i-1] with -dt[i].
  Eigen::RowVectorXd xbbar = gxb.row(0);
  Eigen::RowVectorXd vbbar = gvb.row(0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    const double h = segment.dt[static_cast<std::size_t>(i - 1)];
    gradient->row(i - 1) -= vbbar * h;
    vbbar = gvb.row(i) + vbbar - xbbar * h;
    xbbar = gxb.row(i) + xbbar;
  }

  *gradient += 2.0 * weights.regularization * corrections;
  return t;
}

}  // namespace imuloc::fit
