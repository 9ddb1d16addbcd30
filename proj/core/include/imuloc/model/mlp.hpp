// SPDX-License-Identifier: Apache-2.0
//
// Fully connected regressor with tanh hidden layers and a linear output.
// Parameters live in one flat buffer; layers are Eigen views into it. Each
// layer block starts on a 64-byte boundary so vectorized kernels see the same
// alignment on every run, which keeps results bitwise reproducible.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>

#include "imuloc/common.hpp"

namespace imuloc::model {

template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using WeightMap = Eigen::Map<Matrix>;
  using ConstWeightMap = Eigen::Map<const Matrix>;
  using BiasMap = Eigen::Map<RowVec>;
  using ConstBiasMap = Eigen::Map<const RowVec>;
  using Buffer = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;
  static constexpr std::size_t kBlockAlign = 64 / sizeof(Scalar);

  /// Activations kept by forward() for backward().
  struct Cache {
    std::vector<Matrix> activations;  ///< input, then each hidden layer output
  };

  Mlp() = default;

  /// widths = {input, hidden..., output}; at least one layer.
  explicit Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ConfigError("mlp: need at least input and output widths");
    std::size_t total = 0;
    auto pad = [](std::size_t n) { return (n + kBlockAlign - 1) / kBlockAlign * kBlockAlign; };
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      if (widths_[l] <= 0 || widths_[l + 1] <= 0) throw ConfigError("mlp: layer widths must be positive");
      weight_offset_.push_back(total);
      total = pad(total + static_cast<std::size_t>(widths_[l]) * static_cast<std::size_t>(widths_[l + 1]));
      bias_offset_.push_back(total);
      total = pad(total + static_cast<std::size_t>(widths_[l + 1]));
    }
    params_.assign(total, Scalar(0));
  }

  const std::vector<int>& widths() const { return widths_; }
  std::size_t layers() const { return widths_.size() - 1; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  /// Number of weights and biases, excluding alignment padding.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layers(); ++l) n += static_cast<std::size_t>(widths_[l] + 1) * static_cast<std::size_t>(widths_[l + 1]);
    return n;
  }
  /// Padded storage; padding entries are zero and receive zero gradient.
  std::span<Scalar> parameters() { return params_; }
  std::span<const Scalar> parameters() const { return params_; }

  /// Weights and biases layer by layer without padding.
  std::vector<Scalar> packed() const {
    std::vector<Scalar> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < layers(); ++l) {
      const auto w = weight(l);
      out.insert(out.end(), w.data(), w.data() + w.size());
      const auto b = bias(l);
      out.insert(out.end(), b.data(), b.data() + b.size());
    }
    return out;
  }

  void unpack(std::span<const Scalar> values) {
    if (values.size() != parameter_count()) throw InputError("mlp: packed parameter count mismatch");
    std::size_t at = 0;
    for (std::size_t l = 0; l < layers(); ++l) {
      auto w = weight(l);
      std::copy_n(values.data() + at, w.size(), w.data());
      at += static_cast<std::size_t>(w.size());
      auto b = bias(l);
      std::copy_n(values.data() + at, b.size(), b.data());
      at += static_cast<std::size_t>(b.size());
    }
  }

  /// Weight of layer l as a (fan_in x fan_out) matrix: z = a W + b.
  WeightMap weight(std::size_t l) { return WeightMap(params_.data() + weight_offset_[l], widths_[l], widths_[l + 1]); }
  ConstWeightMap weight(std::size_t l) const {
    return ConstWeightMap(params_.data() + weight_offset_[l], widths_[l], widths_[l + 1]);
  }
  BiasMap bias(std::size_t l) { return BiasMap(params_.data() + bias_offset_[l], widths_[l + 1]); }
  ConstBiasMap bias(std::size_t l) const { return ConstBiasMap(params_.data() + bias_offset_[l], widths_[l + 1]); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(std::uint64_t seed) {
    auto rng = make_rng(seed, Stream::kModelInit);
    for (std::size_t l = 0; l < layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(u(rng));
      auto b = bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = static_cast<Scalar>(u(rng));
    }
  }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.cols() != input_dim()) {
      throw InputError("mlp: feature dim " + std::to_string(x.cols()) + " != input dim " +
                       std::to_string(input_dim()));
    }
    if (cache != nullptr) {
      cache->activations.resize(layers());
      cache->activations[0] = x;
    }
    Matrix a = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      Matrix z = a * weight(l);
      z.rowwise() += bias(l);
      if (l + 1 < layers()) {
        a = z.array().tanh().matrix();
        if (cache != nullptr) cache->activations[l + 1] = a;
      } else {
        a = std::move(z);
      }
    }
    return a;
  }

  /// Accumulates d loss / d params into `grad` (same layout as parameters())
  /// given d loss / d output for the batch in `cache`.
  void backward(const Cache& cache, const Matrix& grad_out, std::span<Scalar> grad) const {
    if (grad.size() != params_.size()) throw InputError("mlp: gradient buffer has wrong size");
    Matrix delta = grad_out;
    for (std::size_t l = layers(); l-- > 0;) {
      const Matrix& a_in = cache.activations[l];
      WeightMap gw(grad.data() + weight_offset_[l], widths_[l], widths_[l + 1]);
      BiasMap gb(grad.data() + bias_offset_[l], widths_[l + 1]);
      gw.noalias() += a_in.transpose() * delta;
      gb += delta.colwise().sum();
      if (l > 0) {
        Matrix back = delta * weight(l).transpose();
        delta = (back.array() * (Scalar(1) - a_in.array().square())).matrix();
      }
    }
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(widths_);
    const auto src = packed();
    out.unpack(std::vector<Other>(src.begin(), src.end()));
    return out;
  }

 private:
  std::vector<int> widths_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  Buffer params_;
};

using MlpF = Mlp<float>;

/// Smooth-L1 averaged over all elements; writes d loss / d pred when asked.
template <typename Scalar>
double smooth_l1(const typename Mlp<Scalar>::Matrix& pred, const typename Mlp<Scalar>::Matrix& target, double beta,
                 typename Mlp<Scalar>::Matrix* grad = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw InputError("smooth_l1: shape mismatch");
  if (!(beta > 0)) throw InputError("smooth_l1: beta must be > 0");
  const auto count = static_cast<double>(pred.size());
  if (grad != nullptr) grad->resize(pred.rows(), pred.cols());
  double sum = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
    const double ar = std::abs(r);
    double g;
    if (ar < beta) {
      sum += 0.5 * r * r / beta;
      g = r / beta;
    } else {
      sum += ar - 0.5 * beta;
      g = r > 0 ? 1.0 : -1.0;
    }
    if (grad != nullptr) grad->data()[i] = static_cast<Scalar>(g / count);
  }
  return count > 0 ? sum / count : 0.0;
}

/// Adam with bias-corrected moments.
template <typename Scalar>
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  void step(std::span<Scalar> params, std::span<const Scalar> grad, double lr) {
    if (m.size() != params.size()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      params[i] = static_cast<Scalar>(static_cast<double>(params[i]) - lr * mh / (std::sqrt(vh) + epsilon));
    }
  }
};

}  // namespace imuloc::model
