// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <utility>

#include "imuloc/model/model.hpp"
#include "imuloc/parallel.hpp"

namespace imuloc::model {

void KnnModel::validate() const {
  if (features.rows() == 0) throw InputError("knn: empty train set");
  if (labels.rows() != features.rows()) throw InputError("knn: features and labels differ in length");
  if (k < 1 || k > features.rows()) throw ConfigError("knn: k must be in [1, train size]");
}

std::vector<std::vector<std::size_t>> knn_neighbors(const RowMatrixF& train, const RowMatrixF& queries, int k) {
  if (train.rows() == 0) throw InputError("knn: empty train set");
  if (k < 1 || k > train.rows()) throw ConfigError("knn: k must be in [1, train size]");
  if (train.cols() != queries.cols()) throw InputError("knn: feature width mismatch");
  const auto n = static_cast<std::size_t>(train.rows());
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t q = begin; q < end; ++q) {
      const auto query = queries.row(static_cast<Eigen::Index>(q));
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = train.row(static_cast<Eigen::Index>(i));
        double d = 0;
        for (Eigen::Index c = 0; c < row.size(); ++c) d += std::abs(static_cast<double>(row[c]) - query[c]);
        dist[i] = {d, i};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
      auto& ids = out[q];
      ids.resize(kk);
      for (std::size_t j = 0; j < kk; ++j) ids[j] = dist[j].second;
    }
  });
  return out;
}

RowMatrix knn_average(const RowMatrix& labels, const std::vector<std::vector<std::size_t>>& neighbors) {
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(neighbors.size()), labels.cols());
  for (std::size_t q = 0; q < neighbors.size(); ++q) {
    if (neighbors[q].empty()) throw InputError("knn_average: empty neighbor list");
    for (std::size_t i : neighbors[q]) out.row(static_cast<Eigen::Index>(q)) += labels.row(static_cast<Eigen::Index>(i));
    out.row(static_cast<Eigen::Index>(q)) /= static_cast<double>(neighbors[q].size());
  }
  return out;
}

RowMatrix knn_predict(const KnnModel& model, const RowMatrixF& queries) {
  model.validate();
  return knn_average(model.labels, knn_neighbors(model.features, queries, model.k));
}

}  // namespace imuloc::model
