// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <vector>

#include "imuloc/csi/csi.hpp"

namespace imuloc::csi {

namespace {

constexpr double kSnrFloorDb = -100.0;

double mean_power(std::span<const std::complex<float>> v) {
  double p = 0;
  for (const auto& x : v) p += std::norm(std::complex<double>(x));
  return p / static_cast<double>(v.size());
}

}  // namespace

double compute_snr_db(std::span<const std::complex<float>> signal, std::span<const std::complex<float>> noise) {
  if (signal.empty() || noise.empty()) throw InputError("compute_snr_db: both symbol sets must be nonempty");
  const double ps = mean_power(signal);
  const double pn = mean_power(noise);
  if (pn == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

double estimate_snr_db(std::span<const std::complex<float>> cir, const SnrWindow& window) {
  const std::size_t k = cir.size();
  const auto tail_begin = static_cast<std::size_t>(window.tail_begin_fraction * static_cast<double>(k));
  if (window.signal_begin >= window.signal_end || window.signal_end > tail_begin || tail_begin >= k) {
    throw ConfigError("estimate_snr_db: signal window must precede a nonempty tail window");
  }
  // A periodic Hann taper over the subcarriers is a circular (-1/4, 1/2, -1/4)
  // convolution in delay. Signal and white noise both scale by 3/8.
  std::vector<std::complex<double>> h(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::complex<double> prev(cir[(i + k - 1) % k]);
    const std::complex<double> next(cir[(i + 1) % k]);
    h[i] = window.hann ? 0.5 * std::complex<double>(cir[i]) - 0.25 * (prev + next) : std::complex<double>(cir[i]);
  }
  double tail_power = 0;
  for (std::size_t i = tail_begin; i < k; ++i) tail_power += std::norm(h[i]);
  tail_power /= static_cast<double>(k - tail_begin);
  double energy = 0;
  for (std::size_t i = window.signal_begin; i < window.signal_end; ++i) energy += std::norm(h[i]);
  if (tail_power == 0) return std::numeric_limits<double>::infinity();
  const double signal = energy - static_cast<double>(window.signal_end - window.signal_begin) * tail_power;
  if (signal <= 0) return kSnrFloorDb;
  return 10.0 * std::log10(signal / (static_cast<double>(k) * tail_power));
}

std::vector<float> estimate_snr(const CirDataset& dataset, const SnrWindow& window) {
  const auto& t = dataset.cir;
  std::vector<float> out(t.samples * t.trps * t.antennas);
  for (std::size_t s = 0; s < t.samples; ++s) {
    for (std::size_t trp = 0; trp < t.trps; ++trp) {
      for (std::size_t a = 0; a < t.antennas; ++a) {
        out[(s * t.trps + trp) * t.antennas + a] = static_cast<float>(estimate_snr_db(t.frame(s, trp, a), window));
      }
    }
  }
  return out;
}

}  // namespace imuloc::csi
