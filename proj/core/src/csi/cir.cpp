// SPDX-License-Identifier: Apache-2.0

#include <mutex>

#include <fftw3.h>

#include "imuloc/csi/csi.hpp"
#include "imuloc/parallel.hpp"

namespace imuloc::csi {

namespace {
// FFTW's planner is not reentrant; execution with new-array calls is.
std::mutex g_planner_mutex;
}  // namespace

InverseDft::InverseDft(std::size_t length) : length_(length), plan_(nullptr) {
  if (length == 0) throw InputError("InverseDft: length must be positive");
  std::lock_guard lock(g_planner_mutex);
  auto* in = fftw_alloc_complex(length);
  auto* out = fftw_alloc_complex(length);
  plan_ = fftw_plan_dft_1d(static_cast<int>(length), in, out, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  if (!plan_) throw NumericalError("InverseDft: FFTW planning failed");
}

InverseDft::~InverseDft() {
  std::lock_guard lock(g_planner_mutex);
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void InverseDft::operator()(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const {
  if (in.size() != length_ || out.size() != length_) throw InputError("InverseDft: length mismatch");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft(static_cast<fftw_plan>(plan_), reinterpret_cast<fftw_complex*>(scratch.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(length_);
  for (auto& v : out) v *= scale;
}

std::vector<std::complex<double>> cfr_to_cir(std::span<const std::complex<double>> cfr) {
  InverseDft idft(cfr.size());
  std::vector<std::complex<double>> out(cfr.size());
  idft(cfr, out);
  return out;
}

CirDataset cfr_to_cir(const sim::CfrDataset& cfr) {
  const auto pilots = static_cast<std::size_t>(cfr.carrier.pilot_count());
  if (cfr.cfr.bins != pilots) {
    throw InputError("cfr_to_cir: frames have " + std::to_string(cfr.cfr.bins) + " subtones, carrier config implies " +
                     std::to_string(pilots));
  }
  CirDataset out;
  out.carrier = cfr.carrier;
  out.snr_db = cfr.snr_db;
  out.sample_index = cfr.sample_index;
  out.cir = ChannelTensor(cfr.cfr.samples, cfr.cfr.trps, cfr.cfr.antennas, pilots);
  const InverseDft idft(pilots);
  parallel_for(cfr.cfr.samples, [&](std::size_t begin, std::size_t end) {
    std::vector<std::complex<double>> in(pilots), res(pilots);
    for (std::size_t s = begin; s < end; ++s) {
      for (std::size_t t = 0; t < cfr.cfr.trps; ++t) {
        for (std::size_t a = 0; a < cfr.cfr.antennas; ++a) {
          const auto src = cfr.cfr.frame(s, t, a);
          std::copy(src.begin(), src.end(), in.begin());
          idft(in, res);
          auto dst = out.cir.frame(s, t, a);
          for (std::size_t b = 0; b < pilots; ++b) dst[b] = std::complex<float>(res[b]);
        }
      }
    }
  });
  return out;
}

}  // namespace imuloc::csi
