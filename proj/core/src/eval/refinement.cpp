// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "imuloc/eval/eval.hpp"

namespace imuloc::eval {

void RefinementData::validate() const {
  if (features == nullptr || imu == nullptr || control_points == nullptr || truth == nullptr || timestamps == nullptr) {
    throw InputError("refinement: missing input");
  }
  if (sample_of_row.size() != static_cast<std::size_t>(features->rows())) {
    throw InputError("refinement: sample_of_row must have one entry per feature row");
  }
  for (std::size_t s : sample_of_row) {
    if (s >= imu->size()) throw InputError("refinement: feature row refers to a sample outside the IMU series");
  }
  if (truth->rows() != static_cast<Eigen::Index>(imu->size()) || timestamps->size() != imu->size()) {
    throw InputError("refinement: truth/timestamps must cover every trajectory sample");
  }
  if (train_rows.empty()) throw InputError("refinement: empty training split");
  for (auto rows : {&train_rows, &test_rows}) {
    for (std::size_t r : *rows) {
      if (r >= sample_of_row.size()) throw InputError("refinement: split row out of range");
    }
  }
}

RowMatrixF select_rows(const RowMatrixF& m, const std::vector<std::size_t>& rows) {
  RowMatrixF out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

RowMatrix select_rows(const RowMatrix& m, const std::vector<std::size_t>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

namespace {

std::vector<std::size_t> samples_of(const RefinementData& data, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data.sample_of_row[r]);
  return out;
}

}  // namespace

ErrorReport score_predictions(RowMatrix pred, const RefinementData& data, const SmootherConfig& smoother, bool smooth,
                              RowMatrix* smoothed) {
  if (data.test_rows.empty()) return {};
  if (pred.rows() != static_cast<Eigen::Index>(data.test_rows.size())) {
    throw InputError("score_predictions: one prediction per test row expected");
  }
  const auto samples = samples_of(data, data.test_rows);
  if (smooth && pred.rows() >= 2) {
    std::vector<double> t;
    t.reserve(samples.size());
    for (std::size_t s : samples) t.push_back((*data.timestamps)[s]);
    pred = rts_smooth(pred, t, smoother);
  }
  const RowMatrix truth = select_rows(*data.truth, samples);
  auto report = ErrorReport::from_errors(horizontal_error(pred, truth));
  if (smoothed != nullptr) *smoothed = std::move(pred);
  return report;
}

ErrorReport score_model(const model::MlpF& net, const RefinementData& data, const SmootherConfig& smoother,
                        bool smooth, RowMatrix* predictions) {
  if (data.test_rows.empty()) return {};
  return score_predictions(model::predict(net, select_rows(*data.features, data.test_rows)), data, smoother, smooth,
                           predictions);
}

IterationResult refinement_iteration(const RefinementData& data, const RefinementConfig& config, std::uint64_t seed,
                                     int iteration, const model::MlpF* previous) {
  data.validate();
  if (iteration < 0 || static_cast<std::size_t>(iteration) >= config.epochs.size()) {
    throw ConfigError("refinement: iteration " + std::to_string(iteration) + " has no epoch budget");
  }
  if ((iteration == 0) != (previous == nullptr)) {
    throw InputError("refinement: iterations after the first need the previous model");
  }
  const RowMatrixF train_x = select_rows(*data.features, data.train_rows);
  const auto train_samples = samples_of(data, data.train_rows);
  const RowMatrix train_truth = select_rows(*data.truth, train_samples);
  const int dim = data.imu->dim();

  IterationResult r;
  r.iteration = iteration;
  if (previous == nullptr) {
    r.pseudo_labels = fit::fit_trajectory(*data.imu, *data.control_points, config.fit, seed).pseudo_labels;
  } else {
    const RowMatrix pred = model::predict(*previous, train_x);
    RowMatrix anchors = RowMatrix::Zero(static_cast<Eigen::Index>(data.imu->size()), dim);
    std::vector<std::uint8_t> mask(data.imu->size(), 0);
    for (std::size_t i = 0; i < train_samples.size(); ++i) {
      anchors.row(static_cast<Eigen::Index>(train_samples[i])) = pred.row(static_cast<Eigen::Index>(i)).leftCols(dim);
      mask[train_samples[i]] = 1;
    }
    r.pseudo_labels =
        fit::fit_trajectory(*data.imu, *data.control_points, config.fit, seed, &anchors, &mask).pseudo_labels;
  }
  const RowMatrix train_y = select_rows(r.pseudo_labels, train_samples);
  r.pseudo_label_error = ErrorReport::from_errors(horizontal_error(train_y, train_truth));

  model::TrainConfig tc = config.train;
  tc.epochs = config.epochs[static_cast<std::size_t>(iteration)];
  const std::uint64_t model_seed = mix_seed(seed) ^ mix_seed(0x5eed0000ULL + static_cast<std::uint64_t>(iteration));
  auto trained = model::train_mlp(train_x, train_y, data.layout, tc, model_seed);
  r.model = std::move(trained.final_model);
  r.loss_curve = std::move(trained.loss_curve);
  r.model_hash = model::model_hash(r.model);
  r.test_error = score_model(r.model, data, config.smoother, config.smooth_predictions, &r.test_predictions);
  return r;
}

std::vector<IterationResult> refinement_loop(const RefinementData& data, const RefinementConfig& config,
                                             std::uint64_t seed,
                                             const std::function<void(const IterationResult&)>& on_iteration) {
  if (config.epochs.empty()) throw ConfigError("refinement: at least one iteration is required");
  std::vector<IterationResult> out;
  for (std::size_t it = 0; it < config.epochs.size(); ++it) {
    out.push_back(refinement_iteration(data, config, seed, static_cast<int>(it), it == 0 ? nullptr : &out.back().model));
    if (on_iteration) on_iteration(out.back());
  }
  return out;
}

}  // namespace imuloc::eval
