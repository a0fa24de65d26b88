#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "punn/constructive.hpp"

using namespace punn;

namespace {

GridBox square(std::size_t res) { return GridBox{{-1.0, -1.0}, {1.0, 1.0}, {res, res}}; }

ProbabilityMapGrid random_interior_map(Rng& rng, std::size_t k, std::size_t res) {
  GridBox box = square(res);
  ProbabilityMapGrid p;
  p.box = box;
  p.values = DenseMatrix(box.points(), k);
  for (std::size_t i = 0; i < p.values.rows(); ++i) {
    double s = 0.0;
    for (double& v : p.values.row(i)) s += (v = rng.uniform(0.01, 1.0));
    for (double& v : p.values.row(i)) v /= s;
  }
  return p;
}

}  // namespace

TEST_SUITE("constructive") {

TEST_CASE("grid coordinates") {
  GridBox b{{0.0, 10.0}, {1.0, 20.0}, {3, 2}};
  DenseMatrix x = b.coordinates();
  REQUIRE(x.rows() == 6);
  CHECK(x(0, 0) == 0.0);
  CHECK(x(1, 0) == 0.5);
  CHECK(x(2, 0) == 1.0);
  CHECK(x(2, 1) == 10.0);
  CHECK(x(3, 1) == 20.0);
  CHECK_THROWS_AS((GridBox{{0.0}, {0.0}, {2}}.validate()), ConfigError);
}

TEST_CASE("gamma examples") {
  ProbabilityMapGrid p;
  p.box = GridBox{{0.0}, {1.0}, {1}};
  p.values = DenseMatrix(1, 3, std::vector<double>{0.5, 0.25, 0.25});
  GammaGrid g = gamma_from_pmap(p);
  CHECK(g.values(0, 0) == 0.5);
  CHECK(g.values(0, 1) == 0.5);
  p.values = DenseMatrix(1, 2, std::vector<double>{0.3, 0.7});
  CHECK(gamma_from_pmap(p).values(0, 0) == 0.3);
}

TEST_CASE("gamma rejects the simplex boundary") {
  ProbabilityMapGrid p;
  p.box = GridBox{{0.0}, {1.0}, {1}};
  p.values = DenseMatrix(1, 3, std::vector<double>{0.0, 0.5, 0.5});
  CHECK_THROWS_AS(gamma_from_pmap(p), DomainError);
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("round trip reconstructs the map") {
  Rng rng(21);
  for (std::size_t k = 2; k <= 6; ++k) {
    ProbabilityMapGrid p = random_interior_map(rng, k, 50);
    DenseMatrix h = exact_reconstruct(gamma_from_pmap(p));
    double worst = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) worst = std::max(worst, std::abs(h.values()[i] - p.values.values()[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("gamma values lie strictly inside (0, 1)") {
  Rng rng(2);
  ProbabilityMapGrid p = random_interior_map(rng, 5, 10);
  for (double g : gamma_from_pmap(p).values.values()) {
    CHECK(g > 0.0);
    CHECK(g < 1.0);
  }
}

TEST_CASE("phi targets are logits") {
  GammaGrid g;
  g.values = DenseMatrix(1, 3, std::vector<double>{0.5, 0.25, 1e-12});
  PhiGrid phi = phi_targets(g);
  CHECK(phi.values(0, 0) == 0.0);
  CHECK(phi.values(0, 1) == doctest::Approx(std::log(1.0 / 3.0)));
  CHECK(phi.values(0, 2) == doctest::Approx(std::log(kGammaClamp / (1 - kGammaClamp))));
  CHECK(phi.clamped == 1);
  CHECK_THROWS_AS(phi_targets(g, Activation::Gaussian), UnsupportedError);
  g.values(0, 0) = 1.0;
  CHECK_THROWS_AS(phi_targets(g), DomainError);
}

TEST_CASE("constant map is fitted exactly by a bias") {
  ProbabilityMapGrid p = ProbabilityMapGrid::sample(
      square(10), [](std::span<const double>) { return std::vector<double>{0.3, 0.7}; });
  DensityFitConfig cfg;
  cfg.hidden = {};
  cfg.epochs = 50;
  DensityFitResult fit = fit_density_demo(p, cfg);
  CHECK(fit.sup_error < 1e-12);
  CHECK(fit.param_count == 3);
}

TEST_CASE("sigmoid ridge is realized by a linear logit") {
  ProbabilityMapGrid p = ProbabilityMapGrid::sample(square(20), [](std::span<const double> x) {
    const double p1 = oracle::sigmoid(3.0 * x[0] - x[1]);
    return std::vector<double>{p1, 1.0 - p1};
  });
  DensityFitConfig cfg;
  cfg.hidden = {};
  cfg.epochs = 10;
  CHECK(fit_density_demo(p, cfg).sup_error < 1e-10);
}

TEST_CASE("self realizability at small scale") {
  RandomPunnMap target = random_punn_map(square(20), 3, std::vector<std::size_t>{4}, 7);
  CHECK_NOTHROW(target.map.validate());
  DensityFitConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 1000;
  DensityFitResult fit = fit_density_demo(target.map, cfg);
  CHECK(fit.sup_error < 0.05);
  CHECK(fit.sup_error <= fit.gate_bound + 1e-12);
}

TEST_CASE("density fit is deterministic") {
  RandomPunnMap target = random_punn_map(square(10), 3, std::vector<std::size_t>{4}, 1);
  DensityFitConfig cfg;
  cfg.hidden = {4};
  cfg.epochs = 100;
  auto a = fit_density_demo(target.map, cfg), b = fit_density_demo(target.map, cfg);
  CHECK(a.fitted == b.fitted);
  CHECK(a.sup_error == b.sup_error);
}

TEST_CASE("density sweep reports every width") {
  RandomPunnMap target = random_punn_map(square(10), 2, std::vector<std::size_t>{4}, 3);
  DensityFitConfig cfg;
  cfg.epochs = 100;
  const std::vector<std::vector<std::size_t>> sweep{{2}, {8}};
  ConvergenceReport r = density_sweep(target.map, cfg, sweep);
  REQUIRE(r.points.size() == 2);
  CHECK(r.points[0].param_count == 2 * 2 + 2 + 3);
  CHECK(r.monotone == (r.points[1].sup_error <= r.points[0].sup_error));
}

}
