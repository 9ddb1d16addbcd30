// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "imuloc/csi/csi.hpp"
#include "imuloc/parallel.hpp"

namespace imuloc::csi {

std::optional<std::size_t> detect_los_peak(std::span<const std::complex<float>> cir, PeakThreshold threshold) {
  const std::size_t n = cir.size();
  if (n == 0) throw InputError("detect_los_peak: empty CIR");
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(std::complex<double>(cir[i]));

  double level = threshold.value;
  if (threshold.kind == PeakThreshold::Kind::kMedianMultiple) {
    std::vector<double> sorted = mag;
    auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    level = threshold.value * *mid;
  } else if (threshold.kind == PeakThreshold::Kind::kMaxFraction) {
    level = threshold.value * *std::max_element(mag.begin(), mag.end());
  }
  if (n == 1) return mag[0] > level ? std::optional<std::size_t>(0) : std::nullopt;
  for (std::size_t i = 0; i < n; ++i) {
    const double left = mag[(i + n - 1) % n];
    const double right = mag[(i + 1) % n];
    // First bin of a rising edge's plateau counts as the peak.
    if (mag[i] > level && mag[i] > left && mag[i] >= right) return i;
  }
  return std::nullopt;
}

nlohmann::json AlignmentReport::to_json() const {
  std::int64_t min_shift = 0, max_shift = 0;
  double mean_shift = 0;
  if (!shift.empty()) {
    min_shift = *std::min_element(shift.begin(), shift.end());
    max_shift = *std::max_element(shift.begin(), shift.end());
    for (auto s : shift) mean_shift += static_cast<double>(s);
    mean_shift /= static_cast<double>(shift.size());
  }
  return {{"samples", shift.size()},
          {"missing_peaks", missing},
          {"median_peak", median_peak},
          {"shift_min", min_shift},
          {"shift_max", max_shift},
          {"shift_mean", mean_shift}};
}

CirDataset align_los(const CirDataset& dataset, const AlignConfig& config, AlignmentReport* report) {
  const auto& t = dataset.cir;
  if (config.reference_trp >= t.trps || config.reference_antenna >= t.antennas) {
    throw ConfigError("align_los: reference (TRP " + std::to_string(config.reference_trp) + ", antenna " +
                      std::to_string(config.reference_antenna) + ") out of range");
  }
  if (config.target_bin >= t.bins) throw ConfigError("align_los: target bin must be < number of bins");

  std::vector<std::int64_t> peaks(t.samples, -1);
  parallel_for(t.samples, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto p = detect_los_peak(t.frame(s, config.reference_trp, config.reference_antenna), config.threshold);
      if (p) peaks[s] = static_cast<std::int64_t>(*p);
    }
  });

  std::vector<std::int64_t> found;
  for (auto p : peaks) {
    if (p >= 0) found.push_back(p);
  }
  std::int64_t median = static_cast<std::int64_t>(config.target_bin);
  if (!found.empty()) {
    std::sort(found.begin(), found.end());
    median = found[(found.size() - 1) / 2];
  }

  CirDataset out = dataset;
  std::vector<std::int64_t> shifts(t.samples);
  for (std::size_t s = 0; s < t.samples; ++s) {
    const std::int64_t t0 = peaks[s] >= 0 ? peaks[s] : median;
    shifts[s] = static_cast<std::int64_t>(config.target_bin) - t0;
    for (std::size_t trp = 0; trp < t.trps; ++trp) {
      for (std::size_t a = 0; a < t.antennas; ++a) roll(out.cir.frame(s, trp, a), shifts[s]);
    }
  }
  if (report) {
    report->detected_peak = std::move(peaks);
    report->shift = std::move(shifts);
    report->median_peak = median;
    report->missing = t.samples - found.size();
  }
  return out;
}

}  // namespace imuloc::csi
