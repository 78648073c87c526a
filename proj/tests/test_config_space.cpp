#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "loggas/config_space.hpp"
#include "loggas/rng.hpp"

using namespace loggas;

TEST_CASE("configuration construction sorts and validates") {
  Configuration c({0.5, -0.25, 0.1});
  REQUIRE(c.count() == 3);
  CHECK(c[0] == -0.25);
  CHECK(c[1] == 0.1);
  CHECK(c[2] == 0.5);
  CHECK(c.strictly_sorted());
  CHECK(c.min_gap() == Catch::Approx(0.35));

  Configuration dup({0.2, 0.2});
  CHECK_FALSE(dup.strictly_sorted());
  CHECK(dup.min_gap() == 0.0);

  Configuration empty;
  CHECK(empty.empty());
  CHECK(empty.min_gap() == kInf);
}

TEST_CASE("window membership includes the boundary") {
  Configuration c({-1.0, 0.0, 1.0});
  CHECK(c.inside_window(1.0));
  CHECK_FALSE(Configuration({1.0 + 1e-12}).inside_window(1.0));
}

TEST_CASE("matching distance on fixed configurations") {
  // Sorted pairing cost (0-1)^2 + (2-3)^2 = 2; crossing pairing costs 10.
  Configuration a({0.0, 2.0});
  Configuration b({1.0, 3.0});
  const double d = matching_distance(a, b);
  CHECK(d == Catch::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(d == matching_distance_bruteforce(a, b));

  CHECK(matching_distance(Configuration({0.0}), Configuration({1.0, 5.0})) ==
        kInf);
  CHECK(matching_distance(a, a) == 0.0);
  CHECK(matching_distance(Configuration{}, Configuration{}) == 0.0);
}

TEST_CASE("sorted pairing equals the brute-force minimum over pairings") {
  StreamRng rng(20240817, 0);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(rng.bits() % 6);
    std::vector<double> xa(k), xb(k);
    for (auto& v : xa) v = rng.uniform(-3.0, 3.0);
    for (auto& v : xb) v = rng.uniform(-3.0, 3.0);
    Configuration a(std::move(xa)), b(std::move(xb));
    const double fast = matching_distance(a, b);
    const double brute = matching_distance_bruteforce(a, b);
    REQUIRE(fast == brute);
  }
}

TEST_CASE("interior-only distance requires identical exterior data") {
  const double r = 1.0;
  Configuration a({-0.5, 3.0});
  Configuration b({0.5, 3.0});
  CHECK(bar_distance(a, b, r) == Catch::Approx(1.0).epsilon(1e-15));

  // Any exterior discrepancy makes interior-only transport impossible.
  CHECK(bar_distance(a, Configuration({0.5, 4.0}), r) == kInf);
  CHECK(bar_distance(a, Configuration({0.5, 3.0, 5.0}), r) == kInf);

  // Equal exterior but unequal interior count.
  CHECK(bar_distance(Configuration({0.0, 0.5, 3.0}),
                     Configuration({0.2, 3.0}), r) == kInf);

  // Exterior-matched distance agrees with the full matching distance.
  Configuration c({-0.3, 0.1, -2.0});
  Configuration d({-0.1, 0.4, -2.0});
  CHECK(bar_distance(c, d, r) == matching_distance(c, d));
}

TEST_CASE("fold maps the line onto the window") {
  CHECK(fold_into_window(0.5, 1.0) == 0.5);
  CHECK(fold_into_window(1.5, 1.0) == Catch::Approx(0.5).epsilon(1e-15));
  CHECK(fold_into_window(-1.5, 1.0) == Catch::Approx(-0.5).epsilon(1e-15));
  CHECK(fold_into_window(3.2, 1.0) == Catch::Approx(-0.8).epsilon(1e-14));
  CHECK(fold_into_window(1.0, 1.0) == 1.0);
  CHECK(fold_into_window(-1.0, 1.0) == -1.0);

  StreamRng rng(7, 1);
  for (int i = 0; i < 20000; ++i) {
    const double r = rng.uniform(0.5, 2.0);
    const double x = rng.uniform(-20.0, 20.0);
    const double y = rng.uniform(-20.0, 20.0);
    const double fx = fold_into_window(x, r);
    const double fy = fold_into_window(y, r);
    REQUIRE(std::abs(fx) <= r);
    // Folding never increases distances.
    REQUIRE(std::abs(fx - fy) <= std::abs(x - y) + 1e-12);
    if (std::abs(x) <= r) REQUIRE(fx == x);
  }
}

TEST_CASE("window restriction, exterior split, and merge round-trip") {
  const double r = 1.0;
  Configuration full({-2.5, -0.75, 0.0, 0.9, 1.0, 1.75});
  Configuration interior = restrict_to_window(full, r);
  ExteriorConfiguration exterior = exterior_of(full, r);

  REQUIRE(interior.count() == 4);
  CHECK(interior[0] == -0.75);
  CHECK(interior[3] == 1.0);  // boundary point stays interior
  REQUIRE(exterior.points.size() == 2);
  CHECK(exterior.points[0] == -2.5);
  CHECK(exterior.points[1] == 1.75);

  CHECK(merge(interior, exterior) == full);
}

TEST_CASE("merge rejects interior points outside the window") {
  ExteriorConfiguration ext = ExteriorConfiguration::make(1.0, {2.0});
  CHECK_THROWS_AS(merge(Configuration({1.5}), ext), std::invalid_argument);
}

TEST_CASE("exterior construction validates the gap to the window") {
  CHECK_THROWS_AS(ExteriorConfiguration::make(1.0, {1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ExteriorConfiguration::make(1.0, {0.5}),
                  std::invalid_argument);
  auto e = ExteriorConfiguration::make(1.0, {3.0, -2.0});
  REQUIRE(e.points.size() == 2);
  CHECK(e.points[0] == -2.0);  // stored sorted
}

TEST_CASE("ensemble CSV round-trips bitwise") {
  StreamRng rng(99, 2);
  std::vector<Configuration> ensemble;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> pts(1 + rng.bits() % 5);
    for (auto& x : pts) x = rng.uniform(-1.0, 1.0);
    ensemble.push_back(Configuration(std::move(pts)));
  }

  std::ostringstream out;
  write_configurations_csv(out, ensemble);
  std::istringstream in(out.str());
  auto back = read_configurations_csv(in);

  REQUIRE(back.size() == ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    REQUIRE(back[i] == ensemble[i]);
}

TEST_CASE("ensemble CSV reader skips metadata comment lines") {
  std::vector<Configuration> ensemble = {Configuration({0.25, -0.5})};
  std::ostringstream out;
  out << "# config_hash=fnv1a64:0123456789abcdef\n";
  write_configurations_csv(out, ensemble);
  std::istringstream in(out.str());
  auto back = read_configurations_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == ensemble[0]);
}

TEST_CASE("ensemble CSV reader rejects malformed input") {
  std::istringstream missing("nope\n0,0,1.0\n");
  CHECK_THROWS_AS(read_configurations_csv(missing), std::invalid_argument);
  std::istringstream bad_row("config_id,particle_index,x\n0,zero,1.0\n");
  CHECK_THROWS_AS(read_configurations_csv(bad_row), std::invalid_argument);
}
