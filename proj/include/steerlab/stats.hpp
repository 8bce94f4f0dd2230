#ifndef STEERLAB_STATS_HPP
#define STEERLAB_STATS_HPP

#include <utility>
#include <vector>

#include "steerlab/mat.hpp"
#include "steerlab/rng.hpp"

namespace steerlab {

// Four-parameter logistic y = lower + (upper - lower) / (1 + exp(-slope (x - mid))).
struct LogisticFit {
  double lower = 0.0;
  double upper = 1.0;
  double slope = 1.0;
  double midpoint = 0.5;
  double r_squared = 0.0;
  double sse = 0.0;
  bool zero_variance = false;  // all y equal; flat fit, r_squared defined as 1
};

double logistic4(const LogisticFit& f, double x);

// Least-squares 4PL fit by multi-start Levenberg-Marquardt. Needs >= 5 points.
LogisticFit logistic_fit(const std::vector<std::pair<double, double>>& points);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov: D = sup |ECDF_a - ECDF_b|, p from the
// asymptotic Kolmogorov distribution.
TestResult ks_test(const std::vector<double>& a, const std::vector<double>& b);

// Mann-Whitney U for sample a (midrank ties). Exact enumeration when
// |a| + |b| <= 12, otherwise normal approximation with tie correction.
TestResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

struct GmmComponent {
  double weight = 0.0;
  std::vector<double> mean;
  Mat covariance;  // regularized, symmetric positive-definite
};

struct GmmModel {
  std::vector<GmmComponent> components;
  double log_likelihood = 0.0;
  std::vector<double> ll_trace;  // per EM iteration, non-decreasing
  int iterations = 0;

  // Responsibilities of each component for one point.
  std::vector<double> responsibilities(const std::vector<double>& x) const;
};

struct GmmConfig {
  int max_iterations = 500;
  double rel_tolerance = 1e-8;
  double regularization = 1e-6;  // epsilon * I added to covariances
  int n_starts = 4;
};

// EM from k-means++ initialization; multi-starts use derived seeds and the
// best final likelihood wins (ties by start index).
GmmModel gmm_fit(const std::vector<std::vector<double>>& points, int k, Rng rng,
                 const GmmConfig& cfg = GmmConfig{});

struct StrategyArea {
  std::vector<std::pair<double, double>> points;  // (p_plus, p_minus) per feature
  std::vector<std::pair<double, double>> hull;    // counter-clockwise convex polygon
  double area = 0.0;
  std::pair<double, double> center{0.0, 0.0};  // unsteered baseline point
  bool degenerate = false;                     // collinear input, zero-area hull
};

// Convex hull of the steered probability pairs, shoelace area. Needs >= 3 points.
StrategyArea strategy_area(const std::vector<std::pair<double, double>>& points,
                           double baseline);

// Shoelace area of a simple polygon (absolute value).
double polygon_area(const std::vector<std::pair<double, double>>& polygon);

bool point_in_convex_hull(const std::vector<std::pair<double, double>>& hull,
                          std::pair<double, double> p, double tolerance = 1e-9);

}  // namespace steerlab

#endif  // STEERLAB_STATS_HPP
