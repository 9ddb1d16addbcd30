// SPDX-License-Identifier: Apache-2.0
//
// Channel preprocessing: pilot CFR -> CIR, LoS peak alignment, SNR
// estimation, filtering, per-antenna normalization and CIR-shift augmentation.

#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "imuloc/channel_tensor.hpp"
#include "imuloc/common.hpp"
#include "imuloc/sim/scenario.hpp"
#include "imuloc/sim/simulate.hpp"

namespace imuloc::csi {

struct CirDataset {
  sim::CarrierConfig carrier;
  ChannelTensor cir;                       ///< bins == pilot count
  std::vector<float> snr_db;               ///< per (sample, TRP, antenna)
  std::vector<std::int64_t> sample_index;  ///< row -> trajectory sample
};

/// Inverse DFT with the 1/K convention: cir[b] = (1/K) sum_k H[k] e^{+j2pi kb/K}.
/// Hence ||cir||_2 = ||cfr||_2 / sqrt(K). Backed by FFTW; one plan per length.
class InverseDft {
 public:
  explicit InverseDft(std::size_t length);
  ~InverseDft();
  InverseDft(const InverseDft&) = delete;
  InverseDft& operator=(const InverseDft&) = delete;

  std::size_t length() const { return length_; }
  void operator()(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;

 private:
  std::size_t length_;
  void* plan_;
};

std::vector<std::complex<double>> cfr_to_cir(std::span<const std::complex<double>> cfr);

/// Whole-dataset transform; every frame must have pilot_count() subtones.
CirDataset cfr_to_cir(const sim::CfrDataset& cfr);

struct PeakThreshold {
  /// kMaxFraction: level = value * max |cir|; keeps sinc sidelobes (about
  /// 0.22 of the main lobe) from counting as the first peak.
  enum class Kind { kAbsolute, kMedianMultiple, kMaxFraction };
  Kind kind = Kind::kMaxFraction;
  double value = 0.5;

  static PeakThreshold absolute(double v) { return {Kind::kAbsolute, v}; }
  static PeakThreshold median_multiple(double v) { return {Kind::kMedianMultiple, v}; }
  static PeakThreshold max_fraction(double v) { return {Kind::kMaxFraction, v}; }
};

/// Earliest local maximum of |cir| strictly above the threshold.
std::optional<std::size_t> detect_los_peak(std::span<const std::complex<float>> cir,
                                           PeakThreshold threshold = {});

struct AlignConfig {
  std::size_t reference_trp = 0;
  std::size_t reference_antenna = 0;
  std::size_t target_bin = 20;
  PeakThreshold threshold;
};

struct AlignmentReport {
  std::vector<std::int64_t> detected_peak;  ///< -1 where no peak was found
  std::vector<std::int64_t> shift;          ///< roll applied per sample
  std::int64_t median_peak = 0;
  std::size_t missing = 0;

  nlohmann::json to_json() const;
};

/// Rolls every frame of a sample so the reference antenna's first peak lands
/// on target_bin. Samples without a detectable peak use the dataset median.
CirDataset align_los(const CirDataset& dataset, const AlignConfig& config, AlignmentReport* report = nullptr);

/// Circular shift: out[(i + shift) mod n] = in[i].
template <typename T>
void roll(std::span<T> values, std::int64_t shift) {
  const auto n = static_cast<std::int64_t>(values.size());
  if (n == 0) return;
  shift %= n;
  if (shift < 0) shift += n;
  std::rotate(values.begin(), values.begin() + (n - shift) % n, values.end());
}

/// 10 log10(mean |signal|^2 / mean |noise|^2). Zero noise power yields +inf.
double compute_snr_db(std::span<const std::complex<float>> signal, std::span<const std::complex<float>> noise);

/// Window-based SNR for synthetic CIRs lacking symbol structure. The estimate
/// is per subcarrier: (E_window - W * P_tail) / (K * P_tail).
struct SnrWindow {
  std::size_t signal_begin = 10;
  std::size_t signal_end = 74;
  double tail_begin_fraction = 0.5;
  /// Taper before measuring so fractional-delay leakage stays out of the tail.
  bool hann = true;
};

double estimate_snr_db(std::span<const std::complex<float>> cir, const SnrWindow& window);
std::vector<float> estimate_snr(const CirDataset& dataset, const SnrWindow& window);

enum class FeatureKind { kMagnitude, kComplex };

struct FeatureConfig {
  std::size_t feature_bins = 256;
  FeatureKind kind = FeatureKind::kMagnitude;
  double snr_threshold_db = 0.0;
  std::size_t reference_trp = 0;
  std::size_t reference_antenna = 0;
};

/// Flattened layout (TRP-major, antenna, bin[, re/im]).
struct FeatureLayout {
  std::size_t trps = 0;
  std::size_t antennas = 0;
  std::size_t bins = 0;
  std::size_t values_per_bin = 1;

  std::size_t block_size() const { return bins * values_per_bin; }
  std::size_t blocks() const { return trps * antennas; }
  std::size_t width() const { return blocks() * block_size(); }
  std::size_t index(std::size_t trp, std::size_t antenna, std::size_t bin, std::size_t component = 0) const;
  struct Position {
    std::size_t trp, antenna, bin, component;
  };
  Position position(std::size_t flat) const;
};

struct FeatureMatrix {
  RowMatrixF features;
  FeatureLayout layout;
  std::vector<std::size_t> kept;   ///< dataset rows that survived filtering
  std::vector<float> block_norms;  ///< pre-normalization L2 norm per (kept row, block)
};

/// Drops rows whose reference-antenna SNR is below the threshold, truncates to
/// feature_bins, and scales every (row, antenna) block to unit L2 norm.
FeatureMatrix filter_and_normalize(const CirDataset& dataset, const FeatureConfig& config);

/// Rolls each antenna block of a feature row by the same shift (in bins).
void shift_feature_row(std::span<float> row, const FeatureLayout& layout, int shift);

/// Uniform integer in [-max_shift, max_shift].
int draw_cir_shift(std::mt19937_64& rng, int max_shift = 7);

/// Draws a shift and applies it; returns the shift used.
int augment_cir_shift(std::span<float> row, const FeatureLayout& layout, std::mt19937_64& rng, int max_shift = 7);

}  // namespace imuloc::csi
