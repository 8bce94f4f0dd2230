#include <doctest.h>

#include <cmath>

#include "steerlab/errors.hpp"
#include "steerlab/stats.hpp"

using namespace steerlab;

// ---------------------------------------------------------------------------
// Logistic fit
// ---------------------------------------------------------------------------

TEST_CASE("4PL fit recovers planted parameters on clean data") {
  LogisticFit truth;
  truth.lower = 0.1;
  truth.upper = 0.85;
  truth.slope = 9.0;
  truth.midpoint = 0.45;
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i <= 40; ++i) {
    const double x = i / 40.0;
    pts.push_back({x, logistic4(truth, x)});
  }
  LogisticFit fit = logistic_fit(pts);
  CHECK(fit.lower == doctest::Approx(truth.lower).epsilon(1e-3));
  CHECK(fit.upper == doctest::Approx(truth.upper).epsilon(1e-3));
  CHECK(fit.slope == doctest::Approx(truth.slope).epsilon(1e-3));
  CHECK(fit.midpoint == doctest::Approx(truth.midpoint).epsilon(1e-3));
  CHECK(fit.r_squared >= 0.999);
  CHECK_FALSE(fit.zero_variance);
}

TEST_CASE("flat data gives a flagged flat fit") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 8; ++i) pts.push_back({i * 0.1, 0.42});
  LogisticFit fit = logistic_fit(pts);
  CHECK(fit.zero_variance);
  CHECK(fit.r_squared == 1.0);
  CHECK(fit.lower == doctest::Approx(0.42));
  CHECK(fit.upper == doctest::Approx(0.42));
}

TEST_CASE("logistic fit never beats the flat fit residual... the other way round") {
  // Optimizer sanity: the fitted SSE never exceeds the flat-fit SSE.
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::pair<double, double>> pts;
    double mean = 0.0;
    for (int i = 0; i < 25; ++i) {
      const double x = i / 24.0;
      const double y = rng.uniform();
      pts.push_back({x, y});
      mean += y;
    }
    mean /= 25.0;
    double flat_sse = 0.0;
    for (auto& [x, y] : pts) flat_sse += (y - mean) * (y - mean);
    LogisticFit fit = logistic_fit(pts);
    CHECK(fit.sse <= flat_sse + 1e-9);
    CHECK(fit.lower <= fit.upper);
    CHECK(fit.r_squared <= 1.0);
  }
}

TEST_CASE("logistic fit needs five points") {
  std::vector<std::pair<double, double>> pts = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(logistic_fit(pts), InputError);
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

TEST_CASE("KS of a sample with itself is zero with p-value one") {
  std::vector<double> a = {0.3, 1.2, -0.5, 2.2};
  TestResult r = ks_test(a, a);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("KS of fully separated two-point samples is one") {
  TestResult r = ks_test({0.0, 0.0}, {1.0, 1.0});
  CHECK(r.statistic == 1.0);
}

// Oracle: hand ECDF enumeration for the interleaved quartets.
TEST_CASE("KS statistic on the interleaved quartets is exactly 0.25") {
  TestResult r = ks_test({1, 2, 3, 4}, {1.5, 2.5, 3.5, 4.5});
  CHECK(r.statistic == 0.25);
}

TEST_CASE("KS is symmetric and bounded") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a, b;
    for (int i = 0; i < 9; ++i) a.push_back(rng.gaussian());
    for (int i = 0; i < 13; ++i) b.push_back(0.4 + rng.gaussian());
    TestResult ab = ks_test(a, b);
    TestResult ba = ks_test(b, a);
    CHECK(ab.statistic == ba.statistic);
    CHECK(ab.p_value == ba.p_value);
    CHECK(ab.statistic >= 0.0);
    CHECK(ab.statistic <= 1.0);
    CHECK(ab.p_value >= 0.0);
    CHECK(ab.p_value <= 1.0);
  }
}

// ---------------------------------------------------------------------------
// Mann-Whitney
// ---------------------------------------------------------------------------

namespace {

// Brute-force pair counting with half-credit for ties.
double mw_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) u += 1.0;
      else if (x == y) u += 0.5;
    }
  }
  return u;
}

}  // namespace

TEST_CASE("Mann-Whitney complete separation and symmetry") {
  CHECK(mann_whitney({1, 2}, {3, 4}).statistic == 0.0);
  CHECK(mann_whitney({3, 4}, {1, 2}).statistic == 4.0);
  // identical samples: U = |a||b|/2
  CHECK(mann_whitney({5, 5, 5}, {5, 5}).statistic == doctest::Approx(3.0));
}

TEST_CASE("Mann-Whitney equals brute-force pair counting on all small samples") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const int na = 1 + static_cast<int>(rng.uniform_u64(6));
    const int nb = 1 + static_cast<int>(rng.uniform_u64(6));
    std::vector<double> a, b;
    // small integer support provokes plenty of ties
    for (int i = 0; i < na; ++i) a.push_back(static_cast<double>(rng.uniform_u64(5)));
    for (int i = 0; i < nb; ++i) b.push_back(static_cast<double>(rng.uniform_u64(5)));
    TestResult r = mann_whitney(a, b);
    CHECK(r.statistic == doctest::Approx(mw_brute_force(a, b)).epsilon(1e-12));
    // U_a + U_b = |a| |b|
    TestResult rb = mann_whitney(b, a);
    CHECK(r.statistic + rb.statistic ==
          doctest::Approx(static_cast<double>(na * nb)).epsilon(1e-12));
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("Mann-Whitney example: U matches exhaustive counting") {
  TestResult r = mann_whitney({1, 2, 4}, {3, 5});
  CHECK(r.statistic == doctest::Approx(mw_brute_force({1, 2, 4}, {3, 5})));
  CHECK(r.statistic == doctest::Approx(1.0));
}

TEST_CASE("Mann-Whitney large-sample path stays sane") {
  Rng rng(8);
  std::vector<double> a, b;
  for (int i = 0; i < 40; ++i) a.push_back(rng.gaussian());
  for (int i = 0; i < 35; ++i) b.push_back(rng.gaussian() + 1.5);
  TestResult r = mann_whitney(a, b);
  CHECK(r.statistic == doctest::Approx(mw_brute_force(a, b)).epsilon(1e-12));
  CHECK(r.p_value < 0.01);  // strongly shifted samples
}

// ---------------------------------------------------------------------------
// GMM
// ---------------------------------------------------------------------------

TEST_CASE("GMM with one component recovers the sample moments") {
  Rng rng(9);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 500; ++i) pts.push_back({1.0 + 0.5 * rng.gaussian(), -2.0 + rng.gaussian()});
  GmmModel m = gmm_fit(pts, 1, Rng(10));
  REQUIRE(m.components.size() == 1);

  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p[0];
    my += p[1];
  }
  mx /= 500.0;
  my /= 500.0;
  CHECK(m.components[0].mean[0] == doctest::Approx(mx).epsilon(1e-6));
  CHECK(m.components[0].mean[1] == doctest::Approx(my).epsilon(1e-6));
  CHECK(m.components[0].weight == doctest::Approx(1.0));

  double vxx = 0.0;
  for (const auto& p : pts) vxx += (p[0] - mx) * (p[0] - mx);
  vxx /= 500.0;
  CHECK(m.components[0].covariance.at(0, 0) == doctest::Approx(vxx + 1e-6).epsilon(1e-6));
}

// Oracle: synthetic generation from two well-separated tight clusters.
TEST_CASE("GMM separates two tight clusters") {
  Rng rng(11);
  std::vector<std::vector<double>> pts;
  std::vector<double> c1 = {0.0, 0.0}, c2 = {5.0, 5.0};
  for (int i = 0; i < 200; ++i) {
    pts.push_back({c1[0] + 0.05 * rng.gaussian(), c1[1] + 0.05 * rng.gaussian()});
    pts.push_back({c2[0] + 0.05 * rng.gaussian(), c2[1] + 0.05 * rng.gaussian()});
  }
  GmmModel m = gmm_fit(pts, 2, Rng(12));
  REQUIRE(m.components.size() == 2);
  // match components to centroids
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]) < 0.05;
  };
  const bool direct = close(m.components[0].mean, c1) && close(m.components[1].mean, c2);
  const bool crossed = close(m.components[0].mean, c2) && close(m.components[1].mean, c1);
  CHECK((direct || crossed));
  CHECK(m.components[0].weight == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("EM log-likelihood trace is non-decreasing on random instances") {
  Rng rng(13);
  for (int instance = 0; instance < 20; ++instance) {
    std::vector<std::vector<double>> pts;
    const int n = 30 + static_cast<int>(rng.uniform_u64(50));
    for (int i = 0; i < n; ++i) pts.push_back({rng.gaussian(), rng.gaussian() * 2.0});
    GmmModel m = gmm_fit(pts, 3, Rng(100 + static_cast<std::uint64_t>(instance)));
    for (std::size_t i = 1; i < m.ll_trace.size(); ++i) {
      CHECK(m.ll_trace[i] >= m.ll_trace[i - 1] - 1e-9 * std::fabs(m.ll_trace[i - 1]));
    }
  }
}

TEST_CASE("GMM input validation") {
  std::vector<std::vector<double>> two = {{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(gmm_fit(two, 3, Rng(1)), InputError);
  CHECK_THROWS_AS(gmm_fit({}, 1, Rng(1)), InputError);
}

// ---------------------------------------------------------------------------
// Strategy area
// ---------------------------------------------------------------------------

TEST_CASE("unit-square corners have hull area one") {
  std::vector<std::pair<double, double>> pts = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0.5, 0.5}};
  StrategyArea a = strategy_area(pts, 0.5);
  CHECK(a.area == doctest::Approx(1.0));
  CHECK_FALSE(a.degenerate);
  CHECK(a.hull.size() == 4);
  CHECK(a.center == std::pair<double, double>{0.5, 0.5});
}

TEST_CASE("identical points give a flagged zero-area hull") {
  std::vector<std::pair<double, double>> pts = {{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}};
  StrategyArea a = strategy_area(pts, 0.5);
  CHECK(a.area == 0.0);
  CHECK(a.degenerate);
}

TEST_CASE("collinear points give a flagged zero-area hull") {
  std::vector<std::pair<double, double>> pts = {{0.1, 0.1}, {0.2, 0.2}, {0.3, 0.3}, {0.4, 0.4}};
  StrategyArea a = strategy_area(pts, 0.2);
  CHECK(a.area == 0.0);
  CHECK(a.degenerate);
}

// Oracle: point-in-polygon containment over every input point.
TEST_CASE("hull contains every input point") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    StrategyArea a = strategy_area(pts, 0.5);
    for (const auto& p : pts) {
      CHECK(point_in_convex_hull(a.hull, p, 1e-9));
    }
  }
}

TEST_CASE("shoelace area is invariant under cyclic permutation") {
  std::vector<std::pair<double, double>> poly = {{0, 0}, {2, 0}, {3, 1.5}, {1, 3}, {-0.5, 1}};
  const double base = polygon_area(poly);
  for (std::size_t shift = 1; shift < poly.size(); ++shift) {
    std::vector<std::pair<double, double>> rotated;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      rotated.push_back(poly[(i + shift) % poly.size()]);
    }
    CHECK(polygon_area(rotated) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("strategy_area needs three points") {
  std::vector<std::pair<double, double>> pts = {{0, 0}, {1, 1}};
  CHECK_THROWS_AS(strategy_area(pts, 0.5), InputError);
}
