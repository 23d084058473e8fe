#pragma once

// Independent reference computations used only by tests. None of these call
// into the library's numerical code paths.

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "iaip/attr_io.hpp"
#include "iaip/elasso.hpp"

namespace oracle {

inline iaip::io::AttributeMatrix make_matrix(std::size_t n, std::size_t m, const std::vector<std::uint8_t>& data) {
  std::vector<std::string> names, ids;
  for (std::size_t j = 0; j < m; ++j) names.push_back("a" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  return iaip::io::AttributeMatrix(names, ids, data);
}

// Correlated random binary matrix with no constant column. Column j copies a
// random earlier column with probability `copy`, else is Bernoulli(p_j).
inline iaip::io::AttributeMatrix random_binary(std::mt19937_64& rng, std::size_t n, std::size_t m,
                                               double copy = 0.3) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    std::vector<double> prev(m);
    for (auto& p : prev) p = 0.15 + 0.7 * unif(rng);
    std::vector<std::size_t> parent(m);
    for (std::size_t j = 1; j < m; ++j) parent[j] = std::uniform_int_distribution<std::size_t>(0, j - 1)(rng);
    std::vector<std::uint8_t> data(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (j > 0 && unif(rng) < copy) data[i * m + j] = data[i * m + parent[j]];
        else data[i * m + j] = unif(rng) < prev[j] ? 1 : 0;
      }
    bool ok = true;
    for (std::size_t j = 0; j < m && ok; ++j) {
      std::size_t ones = 0;
      for (std::size_t i = 0; i < n; ++i) ones += data[i * m + j];
      ok = ones > 0 && ones < n;
    }
    if (ok) return make_matrix(n, m, data);
  }
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Row-by-row transcription of the nodewise pseudo-log-likelihood.
inline double naive_loglik(const iaip::io::AttributeMatrix& a, std::size_t j, double tau,
                           const std::vector<double>& betas) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double lin = tau;
    double cross = 0.0;
    std::size_t s = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      if (k == j) continue;
      lin += betas[s] * a(i, k);
      cross += betas[s] * a(i, j) * a(i, k);
      ++s;
    }
    total += tau * a(i, j) + cross - softplus(lin);
  }
  return total;
}

// Population standard deviation of each non-target column.
inline std::vector<double> predictor_sd(const iaip::io::AttributeMatrix& a, std::size_t j) {
  std::vector<double> sd;
  const double n = static_cast<double>(a.rows());
  for (std::size_t k = 0; k < a.cols(); ++k) {
    if (k == j) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) mean += a(i, k);
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) ss += (a(i, k) - mean) * (a(i, k) - mean);
    sd.push_back(std::sqrt(ss / n));
  }
  return sd;
}

// -loglik/N + rho * sum_k sd_k |beta_k|, evaluated directly.
inline double penalized_objective(const iaip::io::AttributeMatrix& a, std::size_t j, double rho, double tau,
                                  const std::vector<double>& betas) {
  const auto sd = predictor_sd(a, j);
  double pen = 0.0;
  for (std::size_t k = 0; k < betas.size(); ++k) pen += sd[k] * std::abs(betas[k]);
  return -naive_loglik(a, j, tau, betas) / static_cast<double>(a.rows()) + rho * pen;
}

// Gradient of -loglik/N w.r.t. (tau, beta) on the original scale.
inline std::vector<double> loss_gradient(const iaip::io::AttributeMatrix& a, std::size_t j, double tau,
                                         const std::vector<double>& betas) {
  std::vector<double> g(betas.size() + 1, 0.0);
  const double n = static_cast<double>(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double lin = tau;
    std::size_t s = 0;
    for (std::size_t k = 0; k < a.cols(); ++k)
      if (k != j) lin += betas[s++] * a(i, k);
    const double resid = 1.0 / (1.0 + std::exp(-lin)) - a(i, j);
    g[0] += resid / n;
    s = 0;
    for (std::size_t k = 0; k < a.cols(); ++k)
      if (k != j) g[1 + s++] += resid * a(i, k) / n;
  }
  return g;
}

struct OracleFit {
  double tau = 0.0;
  std::vector<double> betas;
  double objective = 0.0;
  std::size_t iterations = 0;
};

// Exact cyclic coordinate descent on the same objective, in coordinates
// scaled by the predictor sd. Each coordinate is minimized exactly on the
// true loss (safeguarded 1-D Newton on the subgradient), not on a quadratic
// surrogate. Stops when a full sweep moves no coordinate by more than `step_tol`.
inline OracleFit cd_l1_logistic(const iaip::io::AttributeMatrix& a, std::size_t j, double rho,
                                double step_tol = 1e-13, std::size_t max_sweeps = 200000) {
  const std::size_t n = a.rows();
  const auto sd = predictor_sd(a, j);
  const std::size_t p = sd.size();
  // Column 0 is the intercept; columns 1..p are centered and scaled.
  std::vector<std::vector<double>> z(p + 1, std::vector<double>(n, 1.0));
  std::vector<double> mean(p, 0.0), y(n);
  {
    std::size_t s = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      if (k == j) continue;
      for (std::size_t i = 0; i < n; ++i) mean[s] += a(i, k);
      mean[s] /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) z[s + 1][i] = sd[s] > 0 ? (a(i, k) - mean[s]) / sd[s] : 0.0;
      ++s;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] = a(i, j);
  }
  const double nn = static_cast<double>(n);
  auto sigmoid = [](double e) { return e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e)); };

  std::vector<double> x(p + 1, 0.0), eta(n, 0.0);
  // d/dt and d2/dt2 of the mean loss along coordinate k, moved by d from x_k.
  auto derivs = [&](std::size_t k, double d, double& g, double& h) {
    g = h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = sigmoid(eta[i] + d * z[k][i]);
      g += (pr - y[i]) * z[k][i];
      h += pr * (1.0 - pr) * z[k][i] * z[k][i];
    }
    g /= nn;
    h /= nn;
  };
  // Root of the increasing function t -> loss'(t) + c, searched in (lo, hi).
  auto solve = [&](std::size_t k, double c, double t, double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
      double g, h;
      derivs(k, t - x[k], g, h);
      g += c;
      if (g == 0.0) return t;
      if (g < 0) lo = t;
      else hi = t;
      double next = h > 0 ? t - g / h : t;
      if (!(next > lo && next < hi)) {
        if (std::isfinite(lo) && std::isfinite(hi)) next = 0.5 * (lo + hi);
        else if (std::isfinite(lo)) next = lo + std::max(1.0, std::abs(lo));
        else next = hi - std::max(1.0, std::abs(hi));
      }
      if (std::abs(next - t) <= 1e-15 * (1.0 + std::abs(t))) return next;
      t = next;
    }
    return t;
  };
  const double inf = std::numeric_limits<double>::infinity();

  std::size_t sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double move = 0.0;
    for (std::size_t k = 0; k <= p; ++k) {
      double t;
      if (k == 0) {
        t = solve(0, 0.0, x[0], -inf, inf);
      } else if (sd[k - 1] == 0.0) {
        t = 0.0;
      } else {
        double g0, h0;
        derivs(k, -x[k], g0, h0);
        if (std::abs(g0) <= rho) t = 0.0;
        else if (g0 < -rho) t = solve(k, rho, std::max(x[k], 0.0), 0.0, inf);
        else t = solve(k, -rho, std::min(x[k], 0.0), -inf, 0.0);
      }
      const double d = t - x[k];
      if (d != 0.0) {
        for (std::size_t i = 0; i < n; ++i) eta[i] += d * z[k][i];
        x[k] = t;
      }
      move = std::max(move, std::abs(d));
    }
    if (move < step_tol) break;
  }

  OracleFit out;
  out.iterations = sweep;
  out.betas.assign(p, 0.0);
  out.tau = x[0];
  double f = 0.0, pen = 0.0;
  for (std::size_t i = 0; i < n; ++i) f += softplus(eta[i]) - y[i] * eta[i];
  for (std::size_t k = 0; k < p; ++k) {
    if (sd[k] > 0) out.betas[k] = x[k + 1] / sd[k];
    out.tau -= out.betas[k] * mean[k];
    pen += std::abs(x[k + 1]);
  }
  out.objective = f / nn + rho * pen;
  return out;
}

// Transitive closure by repeated boolean squaring of (I + adjacency).
inline std::size_t closure_components(std::size_t m, const std::vector<double>& w) {
  std::vector<std::uint8_t> reach(m * m, 0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < m; ++k) reach[j * m + k] = (j == k) || w[j * m + k] != 0.0;
  for (std::size_t len = 1; len < m; len *= 2) {
    std::vector<std::uint8_t> next(m * m, 0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k)
        if (reach[i * m + k])
          for (std::size_t j = 0; j < m; ++j) next[i * m + j] |= reach[k * m + j];
    reach = next;
  }
  // Count distinct rows of the closure: each component is one equivalence class.
  std::size_t components = 0;
  std::vector<bool> seen(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (seen[i]) continue;
    ++components;
    for (std::size_t j = 0; j < m; ++j)
      if (reach[i * m + j]) seen[j] = true;
  }
  return components;
}

// Largest violation of the optimality conditions in the penalized
// (sd-scaled) coordinates, computed from the independent oracle gradient.
inline double kkt_violation(const iaip::io::AttributeMatrix& a, std::size_t j, double rho,
                            const iaip::elasso::Coefficients& c) {
  const auto g = loss_gradient(a, j, c.tau, c.betas);
  const auto sd = predictor_sd(a, j);
  double worst = std::abs(g[0]);
  for (std::size_t k = 0; k < c.betas.size(); ++k) {
    if (sd[k] == 0.0) continue;
    const double gs = g[k + 1] / sd[k];
    if (c.betas[k] == 0.0) worst = std::max(worst, std::abs(gs) - rho);
    else worst = std::max(worst, std::abs(gs + rho * (c.betas[k] > 0 ? 1.0 : -1.0)));
  }
  return worst;
}

// Brute-force edge set at gamma from cached paths: naive EBIC scan per node,
// then the AND rule.
inline std::set<std::pair<std::size_t, std::size_t>> oracle_edges(
    const iaip::io::AttributeMatrix& a, const std::vector<iaip::elasso::RegularizationPath>& paths, double gamma) {
  const std::size_t m = a.cols();
  const double n = static_cast<double>(a.rows());
  std::vector<std::vector<double>> chosen(m);
  for (std::size_t j = 0; j < m; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& pt : paths[j].points) {
      std::size_t k = 0;
      for (double b : pt.coef.betas) k += b != 0.0;
      const double ll = naive_loglik(a, j, pt.coef.tau, pt.coef.betas);
      const double score = -2.0 * ll + static_cast<double>(k) * std::log(n) +
                           2.0 * gamma * static_cast<double>(k) * std::log(static_cast<double>(m - 1));
      if (chosen[j].empty() || score < best - 1e-9 * std::abs(best)) {
        best = score;
        chosen[j] = pt.coef.betas;
      }
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k)
      if (chosen[j][k - 1] != 0.0 && chosen[k][j] != 0.0) edges.insert({j, k});
  return edges;
}

inline std::size_t components_of(std::size_t m, const std::set<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<double> w(m * m, 0.0);
  for (auto [j, k] : edges) w[j * m + k] = w[k * m + j] = 1.0;
  return closure_components(m, w);
}

// Two-sided Student-t tail 2 * int_{|t|}^inf f(s) ds by exp-sinh quadrature.
inline double t_two_sided_quadrature(double t, double df) {
  const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI);
  auto density = [&](double s) { return std::exp(logc - (df + 1) / 2 * std::log1p(s * s / df)); };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double at = std::abs(t);
  auto shifted = [&](double u) { return density(at + u); };
  return 2.0 * integrator.integrate(shifted, 0.0, std::numeric_limits<double>::infinity());
}

inline double pearson_via_sums(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

}  // namespace oracle
