// SPDX-License-Identifier: Apache-2.0
//
// Shared aliases, error types and seeded random streams.

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace imuloc {

/// Row-per-sample matrix (N x D). Rows are contiguous so a sample is a span.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Malformed or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs violate an operation's preconditions (shapes, empty data).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, singular matrices or diverging optimizers. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long index = -1)
      : std::runtime_error(what), index_(index) {}

  /// Step, sample or row at which the failure was detected, -1 if unknown.
  long index() const noexcept { return index_; }

 private:
  long index_;
};

/// Degenerate geometry in the channel synthesizer (UE on top of a TRP).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; used to derive independent substreams.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream identifiers keep substreams of one seed apart.
enum class Stream : std::uint64_t {
  kTrajectory = 1,
  kImu = 2,
  kControlPoints = 3,
  kChannel = 4,
  kSplit = 5,
  kFitInit = 6,
  kModelInit = 7,
  kTraining = 8,
  kAugment = 9,
};

/// Engine seeded from (seed, stream, index). Parallel and serial callers that
/// agree on the triple observe identical draws.
inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  const std::uint64_t s =
      mix_seed(mix_seed(seed) ^ mix_seed(static_cast<std::uint64_t>(stream) << 32 ^ index));
  return std::mt19937_64(s);
}

}  // namespace imuloc
