#include "steerlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "steerlab/errors.hpp"

namespace steerlab {

double logistic4(const LogisticFit& f, double x) {
  return f.lower + (f.upper - f.lower) / (1.0 + std::exp(-f.slope * (x - f.midpoint)));
}

namespace {

// Solves the 4x4 system A x = b in place; returns false if singular.
bool solve4(double a[4][4], double b[4], double x[4]) {
  int perm[4] = {0, 1, 2, 3};
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-300) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    std::swap(perm[col], perm[pivot]);
    for (int r = col + 1; r < 4; ++r) {
      const double factor = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 4; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  (void)perm;
  return true;
}

double sse_of(const LogisticFit& f, const std::vector<std::pair<double, double>>& pts) {
  double sse = 0.0;
  for (const auto& [x, y] : pts) {
    const double r = y - logistic4(f, x);
    sse += r * r;
  }
  return sse;
}

// One Levenberg-Marquardt descent from the given start.
LogisticFit lm_descend(LogisticFit f, const std::vector<std::pair<double, double>>& pts) {
  double lambda = 1e-3;
  double sse = sse_of(f, pts);
  for (int iter = 0; iter < 200; ++iter) {
    double jtj[4][4] = {};
    double jtr[4] = {};
    for (const auto& [x, y] : pts) {
      const double e = std::exp(-f.slope * (x - f.midpoint));
      const double sig = 1.0 / (1.0 + e);
      const double dsig = sig * (1.0 - sig);
      const double span = f.upper - f.lower;
      const double jac[4] = {
          1.0 - sig,                       // d/d lower
          sig,                             // d/d upper
          span * dsig * (x - f.midpoint),  // d/d slope
          -span * dsig * f.slope,          // d/d midpoint
      };
      const double r = y - logistic4(f, x);
      for (int i = 0; i < 4; ++i) {
        jtr[i] += jac[i] * r;
        for (int j = 0; j < 4; ++j) jtj[i][j] += jac[i] * jac[j];
      }
    }
    double a[4][4];
    double b[4];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] = jtj[i][j];
      a[i][i] += lambda * (jtj[i][i] > 1e-12 ? jtj[i][i] : 1.0);
      b[i] = jtr[i];
    }
    double step[4];
    if (!solve4(a, b, step)) break;
    LogisticFit trial = f;
    trial.lower += step[0];
    trial.upper += step[1];
    trial.slope += step[2];
    trial.midpoint += step[3];
    const double trial_sse = sse_of(trial, pts);
    if (trial_sse < sse) {
      const bool converged = sse - trial_sse < 1e-14 * (1.0 + sse);
      f = trial;
      sse = trial_sse;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (converged) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  f.sse = sse;
  return f;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

}  // namespace

LogisticFit logistic_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 5) throw InputError("logistic_fit: need at least 5 points");

  double y_min = points[0].second, y_max = points[0].second;
  double y_mean = 0.0;
  for (const auto& [x, y] : points) {
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
    y_mean += y;
  }
  y_mean /= static_cast<double>(points.size());
  double ss_tot = 0.0;
  for (const auto& [x, y] : points) ss_tot += (y - y_mean) * (y - y_mean);

  if (y_max - y_min < 1e-14) {
    LogisticFit flat;
    flat.lower = y_mean;
    flat.upper = y_mean;
    flat.slope = 0.0;
    flat.midpoint = 0.0;
    flat.sse = ss_tot;
    flat.r_squared = 1.0;
    flat.zero_variance = true;
    return flat;
  }

  std::vector<double> xs;
  xs.reserve(points.size());
  for (const auto& [x, y] : points) xs.push_back(x);
  std::sort(xs.begin(), xs.end());
  const double x_lo = xs.front();
  const double x_hi = xs.back();
  const double x_range = std::max(x_hi - x_lo, 1e-9);
  const double mids[3] = {xs[xs.size() / 4], xs[xs.size() / 2], xs[(3 * xs.size()) / 4]};
  const double slopes[6] = {1.0 / x_range,  4.0 / x_range,  16.0 / x_range,
                            -1.0 / x_range, -4.0 / x_range, -16.0 / x_range};

  LogisticFit best;
  best.sse = std::numeric_limits<double>::infinity();
  for (double mid : mids) {
    for (double slope : slopes) {
      LogisticFit start;
      start.lower = y_min;
      start.upper = y_max;
      start.slope = slope;
      start.midpoint = mid;
      LogisticFit fit = lm_descend(start, points);
      if (fit.sse < best.sse) best = fit;
    }
  }
  if (best.upper < best.lower) {
    // Canonical orientation: keep lower <= upper, flip the slope instead.
    std::swap(best.lower, best.upper);
    best.slope = -best.slope;
  }
  best.r_squared = ss_tot > 0.0 ? 1.0 - best.sse / ss_tot : 1.0;
  return best;
}

TestResult ks_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw InputError("ks_test: empty sample");
  std::vector<double> sa = a;
  std::vector<double> sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  TestResult out;
  out.statistic = d;
  // Asymptotic Kolmogorov distribution with the small-sample correction term.
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  if (lambda < 1e-12) {
    out.p_value = 1.0;
    return out;
  }
  double q = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  out.p_value = std::min(1.0, std::max(0.0, 2.0 * q));
  return out;
}

namespace {

// Midrank U statistic for the first `na` entries of `pooled_ranks`.
double u_from_ranks(const std::vector<double>& values, const std::vector<bool>& in_a,
                    std::size_t na) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (in_a[t]) rank_sum += rank[t];
  }
  return rank_sum - static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;
}

}  // namespace

TestResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw InputError("mann_whitney: empty sample");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<bool> in_a(n, false);
  for (std::size_t i = 0; i < na; ++i) in_a[i] = true;

  TestResult out;
  out.statistic = u_from_ranks(pooled, in_a, na);
  const double mn = static_cast<double>(na) * static_cast<double>(nb);

  if (n <= 12) {
    // Exact permutation distribution: every assignment of na labels to the
    // pooled values is equally likely under H0.
    const double observed_dev = std::fabs(out.statistic - mn / 2.0);
    long total = 0;
    long as_extreme = 0;
    std::vector<std::size_t> chosen(na);
    for (std::size_t i = 0; i < na; ++i) chosen[i] = i;
    auto next_combination = [&]() -> bool {
      std::size_t k = na;
      while (k-- > 0) {
        if (chosen[k] != k + n - na) {
          ++chosen[k];
          for (std::size_t t = k + 1; t < na; ++t) chosen[t] = chosen[t - 1] + 1;
          return true;
        }
      }
      return false;
    };
    std::vector<bool> mask(n, false);
    do {
      std::fill(mask.begin(), mask.end(), false);
      for (std::size_t idx : chosen) mask[idx] = true;
      const double u = u_from_ranks(pooled, mask, na);
      ++total;
      if (std::fabs(u - mn / 2.0) >= observed_dev - 1e-12) ++as_extreme;
    } while (next_combination());
    out.p_value = static_cast<double>(as_extreme) / static_cast<double>(total);
    return out;
  }

  // Normal approximation with tie correction and continuity correction.
  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double nn = static_cast<double>(n);
  const double var =
      mn / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double dev = std::fabs(out.statistic - mn / 2.0) - 0.5;
  const double z = std::max(dev, 0.0) / std::sqrt(var);
  out.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
  return out;
}

namespace {

double log_gaussian(const std::vector<double>& x, const GmmComponent& comp) {
  const int d = static_cast<int>(comp.mean.size());
  Mat chol = comp.covariance;
  double logdet = 0.0;
  for (int r = 0; r < d; ++r) {
    for (int k = 0; k < r; ++k) {
      double s = chol.at(r, k);
      for (int t = 0; t < k; ++t) s -= chol.at(r, t) * chol.at(k, t);
      chol.at(r, k) = s / chol.at(k, k);
    }
    double s = chol.at(r, r);
    for (int t = 0; t < r; ++t) s -= chol.at(r, t) * chol.at(r, t);
    s = std::max(s, 1e-300);
    chol.at(r, r) = std::sqrt(s);
    logdet += 2.0 * std::log(chol.at(r, r));
  }
  std::vector<double> y(static_cast<std::size_t>(d));
  double maha = 0.0;
  for (int r = 0; r < d; ++r) {
    double s = x[static_cast<std::size_t>(r)] - comp.mean[static_cast<std::size_t>(r)];
    for (int t = 0; t < r; ++t) s -= chol.at(r, t) * y[static_cast<std::size_t>(t)];
    y[static_cast<std::size_t>(r)] = s / chol.at(r, r);
    maha += y[static_cast<std::size_t>(r)] * y[static_cast<std::size_t>(r)];
  }
  return -0.5 * (d * 1.8378770664093454836 + logdet + maha);
}

GmmModel em_single_start(const std::vector<std::vector<double>>& points, int k, Rng rng,
                         const GmmConfig& cfg) {
  const std::size_t n = points.size();
  const int d = static_cast<int>(points[0].size());

  // k-means++ seeding.
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.uniform_u64(n)]);
  std::vector<double> dist2(n, 0.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) {
        double s = 0.0;
        for (int t = 0; t < d; ++t) {
          const double diff = points[i][static_cast<std::size_t>(t)] - c[static_cast<std::size_t>(t)];
          s += diff * diff;
        }
        best = std::min(best, s);
      }
      dist2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(points[rng.uniform_u64(n)]);
      continue;
    }
    double draw = rng.uniform() * total;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < n; ++i) {
      draw -= dist2[i];
      if (draw <= 0.0) {
        pick = i;
        break;
      }
      pick = i;
    }
    centers.push_back(points[pick]);
  }

  GmmModel model;
  model.components.resize(static_cast<std::size_t>(k));
  // Initial covariance: global diagonal variance.
  std::vector<double> gmean(static_cast<std::size_t>(d), 0.0);
  for (const auto& p : points) {
    for (int t = 0; t < d; ++t) gmean[static_cast<std::size_t>(t)] += p[static_cast<std::size_t>(t)];
  }
  for (double& v : gmean) v /= static_cast<double>(n);
  std::vector<double> gvar(static_cast<std::size_t>(d), 0.0);
  for (const auto& p : points) {
    for (int t = 0; t < d; ++t) {
      const double diff = p[static_cast<std::size_t>(t)] - gmean[static_cast<std::size_t>(t)];
      gvar[static_cast<std::size_t>(t)] += diff * diff;
    }
  }
  for (double& v : gvar) v = v / static_cast<double>(n) + cfg.regularization;

  for (int c = 0; c < k; ++c) {
    GmmComponent& comp = model.components[static_cast<std::size_t>(c)];
    comp.weight = 1.0 / k;
    comp.mean = centers[static_cast<std::size_t>(c)];
    comp.covariance = Mat(d, d);
    for (int t = 0; t < d; ++t) comp.covariance.at(t, t) = gvar[static_cast<std::size_t>(t)];
  }

  Mat resp(static_cast<int>(n), k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    // E step.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> lp(static_cast<std::size_t>(k));
      double max_lp = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        lp[static_cast<std::size_t>(c)] =
            std::log(std::max(model.components[static_cast<std::size_t>(c)].weight, 1e-300)) +
            log_gaussian(points[i], model.components[static_cast<std::size_t>(c)]);
        max_lp = std::max(max_lp, lp[static_cast<std::size_t>(c)]);
      }
      double denom = 0.0;
      for (int c = 0; c < k; ++c) denom += std::exp(lp[static_cast<std::size_t>(c)] - max_lp);
      ll += max_lp + std::log(denom);
      for (int c = 0; c < k; ++c) {
        resp.at(static_cast<int>(i), c) = std::exp(lp[static_cast<std::size_t>(c)] - max_lp) / denom;
      }
    }
    model.ll_trace.push_back(ll);
    model.log_likelihood = ll;
    model.iterations = iter + 1;
    if (iter > 0 && ll - prev_ll < cfg.rel_tolerance * std::fabs(prev_ll)) break;
    prev_ll = ll;

    // M step.
    for (int c = 0; c < k; ++c) {
      GmmComponent& comp = model.components[static_cast<std::size_t>(c)];
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp.at(static_cast<int>(i), c);
      nk = std::max(nk, 1e-12);
      comp.weight = nk / static_cast<double>(n);
      std::fill(comp.mean.begin(), comp.mean.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp.at(static_cast<int>(i), c);
        for (int t = 0; t < d; ++t) {
          comp.mean[static_cast<std::size_t>(t)] += r * points[i][static_cast<std::size_t>(t)];
        }
      }
      for (double& v : comp.mean) v /= nk;
      comp.covariance.zero();
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp.at(static_cast<int>(i), c);
        for (int t1 = 0; t1 < d; ++t1) {
          const double d1 = points[i][static_cast<std::size_t>(t1)] - comp.mean[static_cast<std::size_t>(t1)];
          for (int t2 = 0; t2 < d; ++t2) {
            const double d2 = points[i][static_cast<std::size_t>(t2)] - comp.mean[static_cast<std::size_t>(t2)];
            comp.covariance.at(t1, t2) += r * d1 * d2;
          }
        }
      }
      for (int t1 = 0; t1 < d; ++t1) {
        for (int t2 = 0; t2 < d; ++t2) comp.covariance.at(t1, t2) /= nk;
        comp.covariance.at(t1, t1) += cfg.regularization;
      }
    }
  }
  return model;
}

}  // namespace

std::vector<double> GmmModel::responsibilities(const std::vector<double>& x) const {
  std::vector<double> log_probs(components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    log_probs[c] =
        std::log(std::max(components[c].weight, 1e-300)) + log_gaussian(x, components[c]);
  }
  double max_lp = log_probs[0];
  for (double lp : log_probs) max_lp = std::max(max_lp, lp);
  double denom = 0.0;
  std::vector<double> resp(components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    resp[c] = std::exp(log_probs[c] - max_lp);
    denom += resp[c];
  }
  for (double& r : resp) r /= denom;
  return resp;
}

GmmModel gmm_fit(const std::vector<std::vector<double>>& points, int k, Rng rng,
                 const GmmConfig& cfg) {
  if (k < 1) throw InputError("gmm_fit: k must be >= 1");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw InputError("gmm_fit: need at least k points");
  }
  const std::size_t dim = points[0].size();
  if (dim < 1) throw InputError("gmm_fit: empty points");
  for (const auto& p : points) {
    if (p.size() != dim) throw InputError("gmm_fit: inconsistent point dimensions");
  }
  GmmModel best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int start = 0; start < cfg.n_starts; ++start) {
    GmmModel model = em_single_start(points, k, rng.derive(static_cast<std::uint64_t>(start)), cfg);
    if (model.log_likelihood > best_ll) {
      best_ll = model.log_likelihood;
      best = std::move(model);
    }
  }
  return best;
}

double polygon_area(const std::vector<std::pair<double, double>>& polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& [x1, y1] = polygon[i];
    const auto& [x2, y2] = polygon[(i + 1) % polygon.size()];
    twice += x1 * y2 - x2 * y1;
  }
  return 0.5 * std::fabs(twice);
}

namespace {

double cross(const std::pair<double, double>& o, const std::pair<double, double>& a,
             const std::pair<double, double>& b) {
  return (a.first - o.first) * (b.second - o.second) -
         (a.second - o.second) * (b.first - o.first);
}

// Andrew monotone chain; returns counter-clockwise hull without the closing point.
std::vector<std::pair<double, double>> convex_hull(
    std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<std::pair<double, double>> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

bool point_in_convex_hull(const std::vector<std::pair<double, double>>& hull,
                          std::pair<double, double> p, double tolerance) {
  if (hull.empty()) return false;
  if (hull.size() == 1) {
    return std::fabs(p.first - hull[0].first) <= tolerance &&
           std::fabs(p.second - hull[0].second) <= tolerance;
  }
  if (hull.size() == 2) {
    // Distance from the segment.
    const double vx = hull[1].first - hull[0].first;
    const double vy = hull[1].second - hull[0].second;
    const double wx = p.first - hull[0].first;
    const double wy = p.second - hull[0].second;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = wx - t * vx;
    const double dy = wy - t * vy;
    return dx * dx + dy * dy <= tolerance * tolerance;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < -tolerance) return false;  // hull is counter-clockwise
  }
  return true;
}

StrategyArea strategy_area(const std::vector<std::pair<double, double>>& points,
                           double baseline) {
  if (points.size() < 3) throw InputError("strategy_area: need at least 3 points");
  StrategyArea out;
  out.points = points;
  out.center = {baseline, baseline};
  out.hull = convex_hull(points);
  out.area = polygon_area(out.hull);
  out.degenerate = out.hull.size() < 3 || out.area <= 0.0;
  return out;
}

}  // namespace steerlab
