#include <doctest.h>

#include <cmath>

#include "fd_oracle.hpp"
#include "oracles.hpp"
#include "punn/partition.hpp"
#include "random_models.hpp"

using namespace punn;

namespace {

// Product form written out directly, without the library's recursion.
std::vector<double> naive_partition(const std::vector<double>& g) {
  std::vector<double> h;
  for (std::size_t i = 0; i <= g.size(); ++i) {
    double v = i < g.size() ? g[i] : 1.0;
    for (std::size_t j = 0; j < i; ++j) v *= 1.0 - g[j];
    h.push_back(v);
  }
  return h;
}

PartitionModel radial_model(std::vector<double> radii, std::size_t classes,
                            std::vector<std::size_t> map = {}) {
  std::vector<GateSpec> gates;
  for (double r : radii) gates.push_back(GateSpec::radial(Activation::Sigmoid, std::vector<double>{0, 0}, r, 1));
  return PartitionModel(std::move(gates), classes, std::move(map));
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("recursion examples") {
  CHECK(partition_from_gates(std::vector<double>{0.7}) == std::vector<double>{0.7, 1.0 - 0.7});
  CHECK(partition_from_gates(std::vector<double>{0.5, 0.5}) == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(partition_from_gates(std::vector<double>{0, 0, 0}) == std::vector<double>{0, 0, 0, 1});
}

TEST_CASE("recursion matches the product form") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    auto g = oracle::random_vector(rng, 1 + rng.below(9), 0, 1);
    auto h = partition_from_gates(g);
    auto want = naive_partition(g);
    for (std::size_t j = 0; j < h.size(); ++j) CHECK(h[j] == doctest::Approx(want[j]).epsilon(1e-14));
  }
}

TEST_CASE("class aggregation examples") {
  const std::vector<std::size_t> id{0, 1, 2};
  auto p = class_probs(std::vector<double>{0.2, 0.3, 0.5}, id, 3);
  CHECK(p == std::vector<double>{0.2, 0.3, 0.5});
  const std::vector<std::size_t> rr{0, 1, 0, 1};
  p = class_probs(std::vector<double>{0.1, 0.2, 0.3, 0.4}, rr, 2);
  CHECK(p[0] == doctest::Approx(0.4));
  CHECK(p[1] == doctest::Approx(0.6));
  const std::vector<std::size_t> bal{0, 1, 2, 0, 1, 2};
  p = class_probs(std::vector<double>(6, 1.0 / 6.0), bal, 3);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("default class map is round robin") {
  PartitionModel m = radial_model({1, 1, 1, 1, 1}, 3);
  CHECK(std::vector<std::size_t>(m.class_map().begin(), m.class_map().end()) ==
        std::vector<std::size_t>{0, 1, 2, 0, 1, 2});
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(radial_model({1}, 3), ConfigError);
  CHECK_THROWS_AS(radial_model({1, 1}, 2, {0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(radial_model({1, 1}, 2, {0, 1}), ConfigError);
  CHECK_THROWS_AS(radial_model({1, 1}, 3, {0, 2, 1}), ConfigError);
  CHECK_NOTHROW(radial_model({1, 1}, 2, {1, 0, 1}));
}

TEST_CASE("loss examples") {
  // g = 1 everywhere: sigmoid of a huge argument saturates to exactly 1
  PartitionModel sure = radial_model({1e3}, 2);
  DenseMatrix x(1, 2, 0.0);
  std::vector<std::size_t> y{0};
  CHECK(nll_loss(sure, x, y).loss == doctest::Approx(-std::log1p(1e-10)).epsilon(1e-6));
  // g = 0.5 at the boundary: r = 1, ||x|| = 1
  PartitionModel half = radial_model({1.0}, 2);
  DenseMatrix xb(1, 2, std::vector<double>{1.0, 0.0});
  CHECK(nll_loss(half, xb, y).loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(nll_loss(half, DenseMatrix(0, 2), std::vector<std::size_t>{}), InputShapeError);
}

TEST_CASE("predict tie-break and boundary") {
  CHECK(argmax(std::vector<double>{0.2, 0.5, 0.3}) == 1);
  CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
  PartitionModel half = radial_model({1.0}, 2);
  auto pred = predict(half, std::vector<double>{0.0, 1.0});
  CHECK(pred.probs[0] == doctest::Approx(0.5));
  CHECK(pred.label == 0);
}

TEST_CASE("binary boundary is the level set g = 1/2") {
  PartitionModel m = radial_model({1.0}, 2);
  for (double r = 0.0; r < 3.0; r += 0.05) {
    const std::vector<double> x{r, 0.0};
    const double g = gate_eval(m.gates()[0], x);
    CHECK(predict(m, x).label == (g >= 0.5 ? 0u : 1u));
  }
}

TEST_CASE("stick breaking") {
  CHECK(stick_breaking_check(std::vector<double>{0.3, 0.9, 0.1}, 1) == 0.0);
  CHECK(stick_breaking_check(std::vector<double>{0.3, 0.9, 0.1}, 3) < 1e-15);
  const std::vector<double> ones{1, 1, 1, 1};
  for (std::size_t m = 1; m <= 4; ++m) {
    CHECK(stick_breaking_check(ones, m) == 0.0);
    auto h = partition_from_gates(ones);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += h[j];
    CHECK(s == 1.0);
  }
}

TEST_CASE("partition of unity on random models") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = std::vector<std::size_t>{2, 4, 8}[rng.below(3)];
    PartitionModel m = testing_support::random_model(rng, 2 + rng.below(9), d);
    auto x = oracle::random_vector(rng, d, -3, 3);
    auto h = partition_forward(m, x);
    double s = 0.0;
    for (double v : h) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
    auto p = class_probs(h, m.class_map(), m.num_classes());
    double ps = 0.0;
    for (double v : p) ps += v;
    CHECK(std::abs(ps - 1.0) < 1e-12);
  }
}

TEST_CASE("hierarchical factorization") {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    PartitionModel m = testing_support::random_model(rng, 2 + rng.below(6), 2);
    auto x = oracle::random_vector(rng, 2, -2, 2);
    auto h = partition_forward(m, x);
    double mass = 1.0;
    for (std::size_t j = 0; j + 1 < m.partitions(); ++j) {
      const double g = gate_eval(m.gates()[j], x);
      if (g > 0.0) CHECK(std::abs(h[j] / g - mass) < 1e-12);
      mass *= 1.0 - g;
    }
  }
}

TEST_CASE("batched forward matches single points") {
  Rng rng(6);
  PartitionModel m = testing_support::random_model(rng, 5, 3);
  DenseMatrix x(10, 3);
  for (double& v : x.values()) v = rng.uniform(-2, 2);
  DenseMatrix h = partition_forward(m, x);
  for (std::size_t i = 0; i < 10; ++i) {
    auto hi = partition_forward(m, x.row(i));
    for (std::size_t j = 0; j < 5; ++j) CHECK(h(i, j) == doctest::Approx(hi[j]).epsilon(1e-14));
  }
}

TEST_CASE("loss gradient matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(3);
    const std::size_t k = 2 + rng.below(4);
    PartitionModel m = testing_support::random_model(rng, k, d == 1 ? 2 : d);
    const std::size_t dim = m.input_dim();
    DenseMatrix x(8, dim);
    for (double& v : x.values()) v = rng.uniform(-2, 2);
    std::vector<std::size_t> y(8);
    for (auto& v : y) v = rng.below(m.num_classes());
    LossResult res = nll_loss(m, x, y);
    for (std::size_t gi = 0; gi < m.gates().size(); ++gi) {
      std::vector<double> p0(m.gates()[gi].params().begin(), m.gates()[gi].params().end());
      auto f = [&](std::span<const double> p) {
        PartitionModel mm = m;
        mm.gates()[gi].set_params(p);
        return nll_loss(mm, x, y, {}, false).loss;
      };
      INFO("gate ", gi, " family ", to_string(m.gates()[gi].family()));
      CHECK(max_relative_error(res.grads[gi], testing_support::converged_central_grad(f, p0)) < 1e-4);
    }
  }
}

TEST_CASE("loss gradient stays finite with saturated gates") {
  PartitionModel m = radial_model({1e3, 1e3, 1.0}, 2);
  DenseMatrix x(2, 2, 0.0);
  LossResult res = nll_loss(m, x, std::vector<std::size_t>{1, 0});
  CHECK(std::isfinite(res.loss));
  for (const auto& g : res.grads) {
    for (double v : g) CHECK(std::isfinite(v));
  }
}

TEST_CASE("loss lower bound") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    PartitionModel m = testing_support::random_model(rng, 2 + rng.below(5), 2);
    DenseMatrix x(1, 2, oracle::random_vector(rng, 2, -2, 2));
    std::vector<std::size_t> y{rng.below(m.num_classes())};
    // p_y can exceed 1 by an ulp after summation
    CHECK(nll_loss(m, x, y, {}, false).loss >= -std::log1p(1e-10) - 1e-15);
  }
}

}
