// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "imuloc/model/model.hpp"

namespace imuloc::model {

namespace {

using json = nlohmann::json;

}  // namespace

void TrainConfig::validate() const {
  for (int w : hidden) {
    if (w <= 0) throw ConfigError("train.hidden widths must be positive");
  }
  if (output_dim <= 0) throw ConfigError("train.output_dim must be positive");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be > 0");
  if (!(lr_drop_factor > 0)) throw ConfigError("train.lr_drop_factor must be > 0");
  if (lr_drop_epochs < 0) throw ConfigError("train.lr_drop_epochs must be >= 0");
  if (!(smooth_l1_beta > 0)) throw ConfigError("train.smooth_l1_beta must be > 0");
  if (!(label_noise_m >= 0)) throw ConfigError("train.label_noise_m must be >= 0");
  if (cir_shift_bins < 0) throw ConfigError("train.cir_shift_bins must be >= 0");
}

json TrainConfig::to_json() const {
  return {{"hidden", hidden},
          {"output_dim", output_dim},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"lr_drop_factor", lr_drop_factor},
          {"lr_drop_epochs", lr_drop_epochs},
          {"smooth_l1_beta", smooth_l1_beta},
          {"label_noise_m", label_noise_m},
          {"cir_shift_bins", cir_shift_bins}};
}

TrainConfig TrainConfig::from_json(const json& j, TrainConfig c) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "hidden") c.hidden = value.get<std::vector<int>>();
      else if (key == "output_dim") c.output_dim = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "lr_drop_factor") c.lr_drop_factor = value.get<double>();
      else if (key == "lr_drop_epochs") c.lr_drop_epochs = value.get<int>();
      else if (key == "smooth_l1_beta") c.smooth_l1_beta = value.get<double>();
      else if (key == "label_noise_m") c.label_noise_m = value.get<double>();
      else if (key == "cir_shift_bins") c.cir_shift_bins = value.get<int>();
      else throw ConfigError("unknown key train." + key);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_json(const json& j) { return from_json(j, TrainConfig{}); }

RowMatrixF pad_labels(const RowMatrix& labels, int dim) {
  RowMatrixF out = RowMatrixF::Zero(labels.rows(), dim);
  const auto cols = std::min<Eigen::Index>(labels.cols(), dim);
  out.leftCols(cols) = labels.leftCols(cols).cast<float>();
  return out;
}

TrainResult train_mlp(const RowMatrixF& features, const RowMatrix& labels, const csi::FeatureLayout& layout,
                      const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch) {
  config.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw InputError("train_mlp: empty training set");
  if (labels.rows() != features.rows()) throw InputError("train_mlp: features and labels differ in length");
  if (config.cir_shift_bins > 0 && layout.width() != static_cast<std::size_t>(features.cols())) {
    throw InputError("train_mlp: feature layout does not match feature width");
  }

  std::vector<int> widths{static_cast<int>(features.cols())};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.output_dim);

  TrainResult out;
  out.final_model = MlpF(widths);
  out.final_model.initialize(seed);
  out.best_model = out.final_model;
  MlpF& net = out.final_model;

  const RowMatrixF targets = pad_labels(labels, config.output_dim);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const int drop_from = config.epochs - config.lr_drop_epochs;
  Adam<float> adam;
  MlpF::Buffer grad(net.parameters().size());
  std::vector<std::size_t> order(n);
  MlpF::Cache cache;
  MlpF::Matrix xb, yb, gout;
  double best_loss = INFINITY;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate * (epoch >= drop_from ? config.lr_drop_factor : 1.0);
    auto shuffle_rng = make_rng(seed, Stream::kTraining, static_cast<std::uint64_t>(epoch));
    auto augment_rng = make_rng(seed, Stream::kAugment, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::uniform_real_distribution<double> noise(-config.label_noise_m, config.label_noise_m);

    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      const auto rows = static_cast<Eigen::Index>(end - begin);
      xb.resize(rows, features.cols());
      yb.resize(rows, config.output_dim);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = static_cast<Eigen::Index>(order[begin + static_cast<std::size_t>(r)]);
        xb.row(r) = features.row(src);
        yb.row(r) = targets.row(src);
        if (config.cir_shift_bins > 0) {
          csi::augment_cir_shift({xb.row(r).data(), static_cast<std::size_t>(xb.cols())}, layout, augment_rng,
                                 config.cir_shift_bins);
        }
        if (config.label_noise_m > 0) {
          for (Eigen::Index c = 0; c < yb.cols(); ++c) yb(r, c) += static_cast<float>(noise(augment_rng));
        }
      }
      const MlpF::Matrix pred = net.forward(xb, &cache);
      const double loss = smooth_l1<float>(pred, yb, config.smooth_l1_beta, &gout);
      if (!std::isfinite(loss)) {
        throw NumericalError("train_mlp: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batches),
                             epoch);
      }
      std::fill(grad.begin(), grad.end(), 0.0f);
      net.backward(cache, gout, grad);
      adam.step(net.parameters(), grad, lr);
      loss_sum += loss;
      ++batches;
    }
    const double mean = loss_sum / static_cast<double>(batches);
    out.loss_curve.push_back(mean);
    if (mean < best_loss) {
      best_loss = mean;
      out.best_epoch = epoch;
      out.best_model = net;
    }
    if (on_epoch) on_epoch(epoch, mean);
  }
  return out;
}

RowMatrix predict(const MlpF& model, const RowMatrixF& features) {
  RowMatrix out(features.rows(), model.output_dim());
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index b = 0; b < features.rows(); b += kChunk) {
    const auto rows = std::min(kChunk, features.rows() - b);
    const MlpF::Matrix x = features.middleRows(b, rows);
    out.middleRows(b, rows) = model.forward(x).cast<double>();
  }
  if (!out.allFinite()) throw NumericalError("predict: non-finite model output");
  return out;
}

}  // namespace imuloc::model
