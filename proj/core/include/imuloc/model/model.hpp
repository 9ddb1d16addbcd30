// SPDX-License-Identifier: Apache-2.0
//
// Training loop, k-NN baseline and checkpoint files for CSI regressors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "imuloc/common.hpp"
#include "imuloc/csi/csi.hpp"
#include "imuloc/model/mlp.hpp"

namespace imuloc::model {

struct TrainConfig {
  std::vector<int> hidden = {1024, 512};
  int output_dim = 3;
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 1e-4;
  double lr_drop_factor = 0.1;
  int lr_drop_epochs = 50;      ///< trailing epochs run at the dropped rate
  double smooth_l1_beta = 1.0;
  double label_noise_m = 0.0;   ///< uniform +-; set for pseudo-labels only
  int cir_shift_bins = 7;       ///< max |shift| of the per-row roll; 0 disables

  void validate() const;
  nlohmann::json to_json() const;
  /// Keys override `base`; unknown keys are a ConfigError.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  MlpF final_model;
  MlpF best_model;         ///< lowest mean epoch training loss
  int best_epoch = 0;
  std::vector<double> loss_curve;  ///< mean batch loss per epoch
};

/// Called after each epoch with (epoch, mean loss).
using EpochCallback = std::function<void(int, double)>;

/// Trains a freshly initialized network. Labels with fewer than output_dim
/// columns are zero padded. Throws NumericalError (index = epoch) when the
/// loss becomes non-finite.
TrainResult train_mlp(const RowMatrixF& features, const RowMatrix& labels, const csi::FeatureLayout& layout,
                      const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Batched inference; returns one row per feature row in double precision.
RowMatrix predict(const MlpF& model, const RowMatrixF& features);

/// Pads or truncates label columns to `dim`.
RowMatrixF pad_labels(const RowMatrix& labels, int dim);

struct KnnModel {
  RowMatrixF features;
  RowMatrix labels;
  int k = 7;

  void validate() const;
};

/// Indices of the k nearest train rows per query (L1, ties to lower index),
/// nearest first.
std::vector<std::vector<std::size_t>> knn_neighbors(const RowMatrixF& train, const RowMatrixF& queries, int k);

/// Label average over precomputed neighbor lists.
RowMatrix knn_average(const RowMatrix& labels, const std::vector<std::vector<std::size_t>>& neighbors);

RowMatrix knn_predict(const KnnModel& model, const RowMatrixF& queries);

struct Checkpoint {
  MlpF model;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const MlpF& model, const std::string& config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// SHA-256 over widths and parameter bytes.
std::string model_hash(const MlpF& model);

}  // namespace imuloc::model
