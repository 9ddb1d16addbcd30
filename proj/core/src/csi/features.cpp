// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "imuloc/csi/csi.hpp"

namespace imuloc::csi {

std::size_t FeatureLayout::index(std::size_t trp, std::size_t antenna, std::size_t bin, std::size_t component) const {
  return ((trp * antennas + antenna) * bins + bin) * values_per_bin + component;
}

FeatureLayout::Position FeatureLayout::position(std::size_t flat) const {
  Position p;
  p.component = flat % values_per_bin;
  flat /= values_per_bin;
  p.bin = flat % bins;
  flat /= bins;
  p.antenna = flat % antennas;
  p.trp = flat / antennas;
  return p;
}

FeatureMatrix filter_and_normalize(const CirDataset& dataset, const FeatureConfig& config) {
  const auto& t = dataset.cir;
  if (std::isnan(config.snr_threshold_db) || config.snr_threshold_db == INFINITY) {
    throw ConfigError("filter_and_normalize: SNR threshold must be finite or -inf");
  }
  if (config.feature_bins == 0 || config.feature_bins > t.bins) {
    throw ConfigError("filter_and_normalize: feature_bins must be in [1, " + std::to_string(t.bins) + "]");
  }
  if (config.reference_trp >= t.trps || config.reference_antenna >= t.antennas) {
    throw ConfigError("filter_and_normalize: reference antenna out of range");
  }
  if (dataset.snr_db.size() != t.samples * t.trps * t.antennas) {
    throw InputError("filter_and_normalize: SNR table does not match the dataset shape");
  }

  FeatureMatrix out;
  out.layout = {t.trps, t.antennas, config.feature_bins, config.kind == FeatureKind::kComplex ? 2u : 1u};
  for (std::size_t s = 0; s < t.samples; ++s) {
    const float snr = dataset.snr_db[(s * t.trps + config.reference_trp) * t.antennas + config.reference_antenna];
    if (!(static_cast<double>(snr) < config.snr_threshold_db)) out.kept.push_back(s);
  }
  if (out.kept.empty()) throw InputError("filter_and_normalize: every sample was filtered out");

  const auto& layout = out.layout;
  out.features = RowMatrixF::Zero(static_cast<Eigen::Index>(out.kept.size()), static_cast<Eigen::Index>(layout.width()));
  out.block_norms.resize(out.kept.size() * layout.blocks());
  for (std::size_t r = 0; r < out.kept.size(); ++r) {
    float* row = out.features.row(static_cast<Eigen::Index>(r)).data();
    for (std::size_t trp = 0; trp < t.trps; ++trp) {
      for (std::size_t a = 0; a < t.antennas; ++a) {
        const auto frame = t.frame(out.kept[r], trp, a);
        float* block = row + layout.index(trp, a, 0);
        double norm2 = 0;
        for (std::size_t b = 0; b < layout.bins; ++b) {
          const std::complex<double> v(frame[b]);
          if (layout.values_per_bin == 1) {
            block[b] = static_cast<float>(std::abs(v));
          } else {
            block[2 * b] = static_cast<float>(v.real());
            block[2 * b + 1] = static_cast<float>(v.imag());
          }
          norm2 += std::norm(v);
        }
        const double norm = std::sqrt(norm2);
        out.block_norms[r * layout.blocks() + trp * t.antennas + a] = static_cast<float>(norm);
        if (norm > 0) {
          for (std::size_t i = 0; i < layout.block_size(); ++i) block[i] = static_cast<float>(block[i] / norm);
        }
      }
    }
  }
  return out;
}

void shift_feature_row(std::span<float> row, const FeatureLayout& layout, int shift) {
  if (row.size() != layout.width()) throw InputError("shift_feature_row: row width does not match layout");
  if (shift == 0) return;
  for (std::size_t blk = 0; blk < layout.blocks(); ++blk) {
    auto block = row.subspan(blk * layout.block_size(), layout.block_size());
    // Shift whole bins; complex layouts move re/im pairs together.
    roll(block, static_cast<std::int64_t>(shift) * static_cast<std::int64_t>(layout.values_per_bin));
  }
}

int draw_cir_shift(std::mt19937_64& rng, int max_shift) {
  std::uniform_int_distribution<int> dist(-max_shift, max_shift);
  return dist(rng);
}

int augment_cir_shift(std::span<float> row, const FeatureLayout& layout, std::mt19937_64& rng, int max_shift) {
  const int shift = draw_cir_shift(rng, max_shift);
  shift_feature_row(row, layout, shift);
  return shift;
}

}  // namespace imuloc::csi
