// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "imuloc/io/container.hpp"
#include "imuloc/model/model.hpp"

using namespace imuloc;
using model::Mlp;

namespace {

using MlpD = Mlp<double>;

/// Per-neuron loops over the flat parameter layout: for each layer, fan_in x
/// fan_out weights row-major, then fan_out biases.
std::vector<double> naive_forward(const std::vector<int>& widths, std::span<const double> params,
                                  const std::vector<double>& x) {
  std::vector<double> a = x;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<std::size_t>(widths[l]);
    const auto fan_out = static_cast<std::size_t>(widths[l + 1]);
    std::vector<double> z(fan_out, 0.0);
    for (std::size_t j = 0; j < fan_out; ++j) {
      for (std::size_t i = 0; i < fan_in; ++i) z[j] += a[i] * params[at + i * fan_out + j];
    }
    at += fan_in * fan_out;
    for (std::size_t j = 0; j < fan_out; ++j) z[j] += params[at + j];
    at += fan_out;
    if (l + 2 < widths.size()) {
      for (auto& v : z) v = std::tanh(v);
    }
    a = std::move(z);
  }
  return a;
}

double oracle_smooth_l1(double r, double beta) {
  return std::abs(r) < beta ? 0.5 * r * r / beta : std::abs(r) - 0.5 * beta;
}

}  // namespace

TEST_CASE("forward pass matches per-neuron loops") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> widths{testing::uniform_int(rng, 1, 8)};
    const int hidden = testing::uniform_int(rng, 0, 3);
    for (int h = 0; h < hidden; ++h) widths.push_back(testing::uniform_int(rng, 1, 9));
    widths.push_back(testing::uniform_int(rng, 1, 4));
    MlpD net(widths);
    net.initialize(rng());
    const RowMatrix x = testing::random_matrix(rng, 5, widths.front());
    const auto out = net.forward(x);
    const auto netf = net.cast<float>();
    const auto outf = netf.forward(x.cast<float>());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const std::vector<double> row(x.row(r).data(), x.row(r).data() + x.cols());
      const auto want = naive_forward(widths, net.packed(), row);
      for (std::size_t c = 0; c < want.size(); ++c) {
        CHECK(std::abs(out(r, static_cast<Eigen::Index>(c)) - want[c]) < 1e-12);
        CHECK(std::abs(outf(r, static_cast<Eigen::Index>(c)) - want[c]) < 1e-5);
      }
    }
  }
  MlpD net({3, 2});
  CHECK_THROWS_AS(net.forward(RowMatrix::Zero(1, 4)), InputError);
  CHECK_THROWS_AS(MlpD({3}), ConfigError);
  CHECK_THROWS_AS(MlpD({3, 0, 2}), ConfigError);
}

TEST_CASE("initialization bounds and determinism") {
  MlpD a({16, 8, 3}), b({16, 8, 3});
  a.initialize(7);
  b.initialize(7);
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  CHECK(a.parameter_count() == 16 * 8 + 8 + 8 * 3 + 3);
  CHECK(a.weight(0).cwiseAbs().maxCoeff() <= 0.25);
  CHECK(a.weight(1).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  b.initialize(8);
  CHECK_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST_CASE("smooth l1 values and gradient") {
  MlpD::Matrix pred = MlpD::Matrix::Zero(1, 3);
  MlpD::Matrix target(1, 3);
  target << 0.5, 2.0, -3.0;
  MlpD::Matrix g;
  const double loss = model::smooth_l1<double>(pred, target, 1.0, &g);
  CHECK(loss == doctest::Approx((0.125 + 1.5 + 2.5) / 3.0));
  CHECK(g(0, 0) == doctest::Approx(-0.5 / 3.0));
  CHECK(g(0, 1) == doctest::Approx(-1.0 / 3.0));
  CHECK(g(0, 2) == doctest::Approx(1.0 / 3.0));

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const double beta = testing::uniform(rng, 0.1, 2.0);
    const RowMatrix p = testing::random_matrix(rng, 4, 3, 2.0);
    const RowMatrix t = testing::random_matrix(rng, 4, 3, 2.0);
    double want = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) want += oracle_smooth_l1(p.data()[i] - t.data()[i], beta);
    CHECK(model::smooth_l1<double>(p, t, beta) == doctest::Approx(want / 12.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(model::smooth_l1<double>(pred, MlpD::Matrix::Zero(2, 3), 1.0), InputError);
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(3);
  const double eps = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    MlpD net({4, 3, 3, testing::uniform_int(rng, 1, 3)});
    net.initialize(rng());
    const RowMatrix x = testing::random_matrix(rng, 6, 4);
    const RowMatrix y = testing::random_matrix(rng, 6, net.output_dim(), 2.0);
    const double beta = testing::uniform(rng, 0.2, 1.5);
    MlpD::Cache cache;
    MlpD::Matrix gout;
    model::smooth_l1<double>(net.forward(x, &cache), y, beta, &gout);
    std::vector<double> grad(net.parameters().size(), 0.0);
    net.backward(cache, gout, grad);
    double max_err = 0;
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      const double keep = net.parameters()[i];
      net.parameters()[i] = keep + eps;
      const double up = model::smooth_l1<double>(net.forward(x), y, beta);
      net.parameters()[i] = keep - eps;
      const double down = model::smooth_l1<double>(net.forward(x), y, beta);
      net.parameters()[i] = keep;
      max_err = std::max(max_err, std::abs((up - down) / (2 * eps) - grad[i]));
    }
    CHECK(max_err < 1e-4);
  }
}

TEST_CASE("adam matches a hand unrolled three step update") {
  model::Adam<double> adam;
  std::vector<double> p{1.0, -2.0};
  const std::vector<std::vector<double>> grads{{0.5, -1.0}, {0.1, 2.0}, {-0.3, 0.0}};
  const double lr = 0.01;
  std::vector<double> want = p;
  std::vector<double> m(2, 0.0), v(2, 0.0);
  for (int t = 1; t <= 3; ++t) {
    const auto& g = grads[static_cast<std::size_t>(t - 1)];
    adam.step(p, g, lr);
    for (std::size_t i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      want[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(p[0] == doctest::Approx(want[0]).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(want[1]).epsilon(1e-14));
  }
  // The first step moves every parameter with a nonzero gradient by lr.
  model::Adam<double> fresh;
  std::vector<double> q{0.0, 0.0};
  fresh.step(q, std::vector<double>{3.0, -0.001}, 0.1);
  CHECK(q[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("knn matches brute force with lower-index ties") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = testing::uniform_int(rng, 1, 40);
    const int dims = testing::uniform_int(rng, 1, 5);
    // Small integer coordinates make ties common.
    RowMatrixF train(n, dims), queries(10, dims);
    for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = static_cast<float>(testing::uniform_int(rng, -2, 2));
    for (Eigen::Index i = 0; i < queries.size(); ++i) queries.data()[i] = static_cast<float>(testing::uniform_int(rng, -2, 2));
    const int k = testing::uniform_int(rng, 1, std::min(n, 9));
    const auto got = model::knn_neighbors(train, queries, k);
    REQUIRE(got.size() == 10);
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
      std::vector<std::pair<double, std::size_t>> all;
      for (Eigen::Index i = 0; i < n; ++i) {
        double d = 0;
        for (int c = 0; c < dims; ++c) d += std::abs(static_cast<double>(train(i, c)) - queries(q, c));
        all.emplace_back(d, static_cast<std::size_t>(i));
      }
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> want;
      for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) want.push_back(all[i].second);
      CHECK(got[static_cast<std::size_t>(q)] == want);
    }
  }

  CHECK_THROWS_AS(model::knn_neighbors(RowMatrixF::Zero(3, 2), RowMatrixF::Zero(1, 2), 4), ConfigError);
  CHECK_THROWS_AS(model::knn_neighbors(RowMatrixF::Zero(3, 2), RowMatrixF::Zero(1, 3), 1), InputError);

  model::KnnModel m;
  m.features = RowMatrixF(3, 1);
  m.features << 0, 1, 10;
  m.labels = RowMatrix(3, 2);
  m.labels << 0, 0, 2, 4, 100, 100;
  m.k = 2;
  RowMatrixF q(1, 1);
  q << 0.2f;
  const auto pred = model::knn_predict(m, q);
  CHECK(pred(0, 0) == doctest::Approx(1.0));
  CHECK(pred(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("checkpoint round trip and model hash") {
  const auto dir = testing::scratch_dir("model_ckpt");
  model::MlpF net({5, 4, 3});
  net.initialize(11);
  model::save_checkpoint(dir / "a.ckpt", net, "cfg123");
  const auto back = model::load_checkpoint(dir / "a.ckpt");
  CHECK(back.config_hash == "cfg123");
  CHECK(back.model.widths() == net.widths());
  CHECK(std::equal(net.parameters().begin(), net.parameters().end(), back.model.parameters().begin()));
  CHECK(model::model_hash(back.model) == model::model_hash(net));
  CHECK(model::model_hash(net).size() == 64);

  auto changed = net;
  changed.parameters()[3] = std::nextafter(changed.parameters()[3], 10.0f);
  CHECK(model::model_hash(changed) != model::model_hash(net));
  model::MlpF other({5, 3, 4});
  CHECK(model::model_hash(other) != model::model_hash(model::MlpF({5, 4, 3})));

  CHECK_THROWS_AS(model::load_checkpoint(dir / "missing.ckpt"), io::ContainerError);

  // Padding is not part of the file: the float and double layouts agree.
  const auto wide = net.cast<double>().cast<float>();
  CHECK(model::model_hash(wide) == model::model_hash(net));
  CHECK(net.packed().size() == net.parameter_count());
}

TEST_CASE("training fits a smooth map, is deterministic and tracks the best epoch") {
  std::mt19937_64 rng(5);
  const RowMatrixF x = testing::random_matrix_f(rng, 300, 6);
  RowMatrix y(300, 2);
  for (Eigen::Index r = 0; r < 300; ++r) {
    y(r, 0) = 0.8 * x(r, 0) - 0.5 * x(r, 3);
    y(r, 1) = std::tanh(x(r, 1)) + 0.2 * x(r, 5);
  }
  model::TrainConfig c;
  c.hidden = {16};
  c.output_dim = 2;
  c.epochs = 40;
  c.batch_size = 32;
  c.learning_rate = 1e-2;
  c.lr_drop_epochs = 10;
  c.cir_shift_bins = 0;
  const csi::FeatureLayout layout{1, 1, 6, 1};
  std::vector<double> seen;
  const auto a = model::train_mlp(x, y, layout, c, 3, [&](int, double l) { seen.push_back(l); });
  const auto b = model::train_mlp(x, y, layout, c, 3);
  CHECK(seen == a.loss_curve);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(model::model_hash(a.final_model) == model::model_hash(b.final_model));
  CHECK(a.loss_curve.back() < 0.2 * a.loss_curve.front());
  const auto best = std::min_element(a.loss_curve.begin(), a.loss_curve.end());
  CHECK(a.best_epoch == static_cast<int>(best - a.loss_curve.begin()));

  const auto other = model::train_mlp(x, y, layout, c, 4);
  CHECK(model::model_hash(other.final_model) != model::model_hash(a.final_model));

  const RowMatrix pred = model::predict(a.best_model, x);
  CHECK(pred.rows() == 300);
  CHECK((pred - y).cwiseAbs().mean() < 0.2);

  // Three columns padded to three outputs, two truncated to one.
  const RowMatrixF padded = model::pad_labels(y, 3);
  CHECK(padded.col(2).isZero());
  CHECK(model::pad_labels(y, 1).cols() == 1);

  RowMatrixF bad = x;
  bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(model::train_mlp(bad, y, layout, c, 3), NumericalError);
  CHECK_THROWS_AS(model::train_mlp(x, y.topRows(10), layout, c, 3), InputError);
}

TEST_CASE("zero epochs keep the initialization") {
  std::mt19937_64 rng(6);
  const RowMatrixF x = testing::random_matrix_f(rng, 10, 4);
  model::TrainConfig c;
  c.hidden = {3};
  c.epochs = 0;
  c.cir_shift_bins = 0;
  const auto r = model::train_mlp(x, RowMatrix::Zero(10, 3), csi::FeatureLayout{1, 1, 4, 1}, c, 9);
  model::MlpF init({4, 3, 3});
  init.initialize(9);
  CHECK(model::model_hash(r.best_model) == model::model_hash(init));
  CHECK(r.loss_curve.empty());
}

TEST_CASE("train config json") {
  model::TrainConfig c;
  c.hidden = {32, 16};
  c.label_noise_m = 0.25;
  CHECK(model::TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
  const auto d = model::TrainConfig{};
  CHECK(d.hidden == std::vector<int>{1024, 512});
  CHECK(d.learning_rate == 1e-4);
  CHECK(d.batch_size == 256);
  CHECK(d.epochs == 100);
  CHECK(d.cir_shift_bins == 7);
  CHECK(model::TrainConfig::from_json({{"epochs", 5}}, c).hidden == c.hidden);
  CHECK_THROWS_AS(model::TrainConfig::from_json({{"hidden", {8, 0}}}), ConfigError);
  CHECK_THROWS_AS(model::TrainConfig::from_json({{"batch_size", 0}}), ConfigError);
  CHECK_THROWS_AS(model::TrainConfig::from_json({{"learning_rate", "fast"}}), ConfigError);
  CHECK_THROWS_AS(model::TrainConfig::from_json({{"dropout", 0.1}}), ConfigError);
}
