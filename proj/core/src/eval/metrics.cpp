// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imuloc/eval/eval.hpp"

namespace imuloc::eval {

std::vector<double> horizontal_error(const RowMatrix& pred, const RowMatrix& truth) {
  if (pred.rows() != truth.rows()) throw InputError("horizontal_error: length mismatch");
  if (pred.cols() < 2 || truth.cols() < 2) throw InputError("horizontal_error: need at least two coordinates");
  std::vector<double> out(static_cast<std::size_t>(pred.rows()));
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = std::hypot(pred(i, 0) - truth(i, 0), pred(i, 1) - truth(i, 1));
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile: empty input");
  if (!(q >= 0 && q <= 1)) throw InputError("percentile: q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ErrorReport ErrorReport::from_errors(std::vector<double> errors) {
  ErrorReport r;
  r.errors = std::move(errors);
  if (r.errors.empty()) return r;
  r.mean = std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / static_cast<double>(r.errors.size());
  r.median = percentile(r.errors, 0.5);
  r.p90 = percentile(r.errors, 0.9);
  return r;
}

nlohmann::json ErrorReport::summary_json() const {
  return {{"count", errors.size()}, {"mean", mean}, {"median", median}, {"p90", p90}};
}

SeedStats seed_stats(const std::vector<double>& values) {
  SeedStats s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  s.q10 = percentile(values, 0.1);
  s.q90 = percentile(values, 0.9);
  return s;
}

}  // namespace imuloc::eval
