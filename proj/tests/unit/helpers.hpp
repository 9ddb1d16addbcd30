// SPDX-License-Identifier: Apache-2.0
//
// Small generators shared by the property tests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "imuloc/common.hpp"

namespace imuloc::testing {

inline RowMatrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline RowMatrixF random_matrix_f(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  RowMatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Fresh scratch directory below $IMULOC_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("IMULOC_TEST_TMP");
  const std::filesystem::path root = env != nullptr ? std::filesystem::path(env)
                                                    : std::filesystem::temp_directory_path() / "imuloc_tests";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace imuloc::testing
