// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace imuloc {

/// Dense complex tensor indexed (sample, TRP, antenna, bin), bin fastest.
struct ChannelTensor {
  std::size_t samples = 0;
  std::size_t trps = 0;
  std::size_t antennas = 0;
  std::size_t bins = 0;
  std::vector<std::complex<float>> data;

  ChannelTensor() = default;
  ChannelTensor(std::size_t s, std::size_t t, std::size_t a, std::size_t b)
      : samples(s), trps(t), antennas(a), bins(b), data(s * t * a * b) {}

  std::size_t frames_per_sample() const { return trps * antennas; }

  std::size_t offset(std::size_t s, std::size_t t, std::size_t a) const {
    return ((s * trps + t) * antennas + a) * bins;
  }

  std::span<std::complex<float>> frame(std::size_t s, std::size_t t, std::size_t a) {
    return {data.data() + offset(s, t, a), bins};
  }
  std::span<const std::complex<float>> frame(std::size_t s, std::size_t t, std::size_t a) const {
    return {data.data() + offset(s, t, a), bins};
  }
};

}  // namespace imuloc
