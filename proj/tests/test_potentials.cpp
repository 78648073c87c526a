#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "loggas/potentials.hpp"
#include "loggas/rng.hpp"

using namespace loggas;

namespace {

ConditionalPotential make_dyson(double beta, std::vector<double> ext = {},
                                double r = 1.0, double R = 3.0) {
  return ConditionalPotential::dyson_log(
      beta, r, R, ExteriorConfiguration::make(r, std::move(ext)));
}

ConditionalPotential make_riesz(double beta, double s,
                                std::vector<double> ext = {}, double r = 1.0,
                                double R = 3.0) {
  return ConditionalPotential::riesz(
      beta, s, r, R, ExteriorConfiguration::make(r, std::move(ext)));
}

// Finite-difference derivative of the energy along coordinate i.
double fd_gradient(const ConditionalPotential& pot, const Configuration& c,
                   std::size_t i, double eps) {
  std::vector<double> lo = c.points(), hi = c.points();
  lo[i] -= eps;
  hi[i] += eps;
  return (pot.energy(Configuration(hi)) - pot.energy(Configuration(lo))) /
         (2 * eps);
}

double fd_quadratic_form(const ConditionalPotential& pot,
                         const Configuration& c, const std::vector<double>& v,
                         double eps) {
  std::vector<double> lo = c.points(), hi = c.points();
  for (std::size_t i = 0; i < v.size(); ++i) {
    lo[i] -= eps * v[i];
    hi[i] += eps * v[i];
  }
  const double e0 = pot.energy(c);
  return (pot.energy(Configuration(hi)) - 2 * e0 +
          pot.energy(Configuration(lo))) /
         (eps * eps);
}

}  // namespace

TEST_CASE("log-gas energy has a closed form on a two-point configuration") {
  auto pot = make_dyson(1.0, {2.0});
  // Pair log(1/2) plus exterior log(3/4) at x = 1/2, negated.
  CHECK(pot.energy(Configuration({0.0, 0.5})) ==
        Catch::Approx(std::log(8.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("energies are anchored at zero") {
  auto dyson = make_dyson(2.0, {-2.0, 2.5});
  auto riesz = make_riesz(1.5, 0.4, {-2.0, 2.5});
  CHECK(dyson.energy(Configuration{}) == 0.0);
  CHECK(riesz.energy(Configuration{}) == 0.0);
  // A particle at the origin sits symmetrically to every |y|, so the
  // anchored exterior terms cancel exactly.
  CHECK(dyson.energy(Configuration({0.0})) == 0.0);
  CHECK(riesz.energy(Configuration({0.0})) == 0.0);
}

TEST_CASE("coincident points carry infinite energy") {
  auto dyson = make_dyson(1.0);
  auto riesz = make_riesz(1.0, 0.5);
  Configuration dup = Configuration::from_sorted({0.3, 0.3});
  CHECK(dyson.energy(dup) == kInf);
  CHECK(riesz.energy(dup) == kInf);
  CHECK_THROWS_AS(dyson.gradient(dup), std::domain_error);
  CHECK_THROWS_AS(dyson.hessian_quadratic_form(dup, {1.0, 0.0}),
                  std::domain_error);
}

TEST_CASE("points outside the window are rejected") {
  auto pot = make_dyson(1.0);
  CHECK_THROWS_AS(pot.energy(Configuration({1.5})), std::domain_error);
  CHECK_THROWS_AS(pot.gradient(Configuration({-1.0 - 1e-9})),
                  std::domain_error);
  // The closed window boundary is admissible.
  CHECK(std::isfinite(pot.energy(Configuration({-1.0, 1.0}))));
}

TEST_CASE("constructor validates parameters") {
  auto ext = ExteriorConfiguration::make(1.0, {});
  CHECK_THROWS_AS(ConditionalPotential::dyson_log(0.0, 1.0, 3.0, ext),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConditionalPotential::dyson_log(1.0, 1.0, 0.5, ext),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConditionalPotential::riesz(1.0, 0.0, 1.0, 3.0, ext),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConditionalPotential::riesz(1.0, 1.0, 1.0, 3.0, ext),
                  std::invalid_argument);
}

TEST_CASE("log-gas gradient on a symmetric pair") {
  auto pot = make_dyson(1.0);
  auto g = pot.gradient(Configuration({-0.25, 0.25}));
  REQUIRE(g.size() == 2);
  CHECK(g[0] == Catch::Approx(2.0).epsilon(1e-15));
  CHECK(g[1] == Catch::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("gradients match finite differences of the energy") {
  StreamRng rng(314, 0);
  std::vector<ConditionalPotential> pots;
  pots.push_back(make_dyson(1.0, {-1.5, 2.0}));
  pots.push_back(make_dyson(4.0));
  pots.push_back(make_riesz(1.0, 0.5, {1.6}));
  pots.push_back(make_riesz(2.0, 0.25, {-2.2, 1.4}));
  pots.push_back(make_riesz(1.0, 0.75));

  for (const auto& pot : pots) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t k = 1 + rng.bits() % 4;
      std::vector<double> pts(k);
      for (auto& x : pts) x = rng.uniform(-0.9, 0.9);
      Configuration c(std::move(pts));
      if (c.min_gap() < 0.05) continue;
      bool near_ext = false;
      for (double y : pot.active_exterior())
        for (double x : c.points())
          if (std::abs(x - y) < 0.15) near_ext = true;
      if (near_ext) continue;

      auto g = pot.gradient(c);
      for (std::size_t i = 0; i < c.count(); ++i) {
        const double fd = fd_gradient(pot, c, i, 1e-6);
        REQUIRE(g[i] == Catch::Approx(fd).epsilon(5e-5).margin(5e-7));
      }
    }
  }
}

TEST_CASE("hessian quadratic form matches second differences of the energy") {
  StreamRng rng(2718, 0);
  std::vector<ConditionalPotential> pots;
  pots.push_back(make_dyson(2.0, {-1.8, 2.4}));
  pots.push_back(make_riesz(1.0, 0.5, {1.9}));
  pots.push_back(make_riesz(1.0, 0.3));

  for (const auto& pot : pots) {
    for (int trial = 0; trial < 15; ++trial) {
      const std::size_t k = 2 + rng.bits() % 3;
      std::vector<double> pts(k);
      for (auto& x : pts) x = rng.uniform(-0.85, 0.85);
      Configuration c(std::move(pts));
      if (c.min_gap() < 0.1) continue;
      bool near_ext = false;
      for (double y : pot.active_exterior())
        for (double x : c.points())
          if (std::abs(x - y) < 0.25) near_ext = true;
      if (near_ext) continue;

      std::vector<double> v(k);
      double n2 = 0;
      for (auto& vi : v) {
        vi = rng.normal();
        n2 += vi * vi;
      }
      for (auto& vi : v) vi /= std::sqrt(n2);

      const double q = pot.hessian_quadratic_form(c, v);
      const double fd = fd_quadratic_form(pot, c, v, 1e-5);
      REQUIRE(q == Catch::Approx(fd).epsilon(2e-4).margin(1e-5));
    }
  }
}

TEST_CASE("hessian quadratic form closed forms") {
  // Log-gas pair at unit distance: (v0 - v1)^2 / 1.
  auto dyson = make_dyson(1.0);
  Configuration pair({0.0, 1.0});
  CHECK(dyson.hessian_quadratic_form(pair, {1.0, 0.0}) == 1.0);
  CHECK(dyson.hessian_quadratic_form(pair, {1.0, 1.0}) == 0.0);
  // Riesz s = 1/2: factor s(s+1) = 3/4 at unit distance.
  auto riesz = make_riesz(1.0, 0.5);
  CHECK(riesz.hessian_quadratic_form(pair, {1.0, 0.0}) ==
        Catch::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("exterior points beyond the cutoff change nothing, bitwise") {
  auto near_only_d = make_dyson(1.5, {2.0, -1.7});
  auto with_far_d = make_dyson(1.5, {2.0, -1.7, 50.0, -80.0});
  auto near_only_r = make_riesz(1.0, 0.5, {2.0, -1.7});
  auto with_far_r = make_riesz(1.0, 0.5, {2.0, -1.7, 50.0, -80.0});

  CHECK(with_far_d.active_exterior() == near_only_d.active_exterior());

  StreamRng rng(55, 3);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> pts(3);
    for (auto& x : pts) x = rng.uniform(-0.95, 0.95);
    Configuration c(std::move(pts));
    if (!c.strictly_sorted()) continue;
    std::vector<double> v = {rng.normal(), rng.normal(), rng.normal()};

    CHECK(near_only_d.energy(c) == with_far_d.energy(c));
    CHECK(near_only_r.energy(c) == with_far_r.energy(c));
    CHECK(near_only_d.gradient(c) == with_far_d.gradient(c));
    CHECK(near_only_r.gradient(c) == with_far_r.gradient(c));
    CHECK(near_only_d.hessian_quadratic_form(c, v) ==
          with_far_d.hessian_quadratic_form(c, v));
    CHECK(near_only_r.hessian_quadratic_form(c, v) ==
          with_far_r.hessian_quadratic_form(c, v));
  }
}

TEST_CASE("riesz sqrt fast path agrees with an independent pow evaluation") {
  auto pot = make_riesz(1.3, 0.5, {1.5, -2.1});
  StreamRng rng(808, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pts(3);
    for (auto& x : pts) x = rng.uniform(-0.9, 0.9);
    Configuration c(std::move(pts));
    if (c.min_gap() < 1e-3) continue;

    double acc = 0;
    const auto& x = c.points();
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j)
        acc += std::pow(x[j] - x[i], -0.5);
      for (double y : pot.active_exterior())
        acc += std::pow(std::abs(x[i] - y), -0.5) -
               std::pow(std::abs(y), -0.5);
    }
    REQUIRE(pot.energy(c) == Catch::Approx(1.3 * acc).epsilon(1e-13));
  }
}

TEST_CASE("randomized convexity certificates pass across the parameter grid") {
  for (double beta : {0.5, 1.0, 2.0, 4.0}) {
    auto pot = make_dyson(beta, {2.0, -2.0});
    auto rep = certify_convexity(pot, 3, 60, 5, 11);
    INFO(pot.name());
    CHECK(rep.pass());
    CHECK(rep.min_quadratic_form >= 0.0);
  }
  for (double s : {0.25, 0.5, 0.75}) {
    auto pot = make_riesz(1.0, s, {1.8});
    auto rep = certify_convexity(pot, 3, 60, 5, 12);
    INFO(pot.name());
    CHECK(rep.pass());
    CHECK(rep.min_quadratic_form >= 0.0);
  }
}

TEST_CASE("certificate reports are deterministic in the seed") {
  auto pot = make_dyson(2.0, {2.0});
  auto a = certify_convexity(pot, 4, 30, 4, 77);
  auto b = certify_convexity(pot, 4, 30, 4, 77);
  CHECK(a.min_quadratic_form == b.min_quadratic_form);
  CHECK(a.min_midpoint_slack_rel == b.min_midpoint_slack_rel);
  auto c = certify_convexity(pot, 4, 30, 4, 78);
  CHECK(c.min_quadratic_form != a.min_quadratic_form);
}
