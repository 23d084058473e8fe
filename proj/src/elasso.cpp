#include "iaip/elasso.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "iaip/error.hpp"
#include "parallel.hpp"

namespace iaip::elasso {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

// log(1 + exp(x)) without overflow.
double log1pexp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double soft_threshold(double u, double rho) {
  if (u > rho) return u - rho;
  if (u < -rho) return u + rho;
  return 0.0;
}

// Floor on IRLS weights; keeps the working response bounded when fitted
// probabilities saturate. The fixed point does not depend on it.
constexpr double kMinWeight = 1e-5;

void check_node(const io::AttributeMatrix& a, std::size_t node) {
  if (node >= a.cols())
    fail(ErrorCode::InvalidArgument, "node index " + std::to_string(node) + " out of range for " +
                                         std::to_string(a.cols()) + " attributes");
}

// Distinct attribute rows with multiplicities, sorted lexicographically. Every
// nodewise likelihood is a sum over rows, so fitting on the compressed rows is
// exact and much cheaper for binary data.
struct CompressedRows {
  std::size_t m = 0;
  std::vector<std::uint8_t> rows;  // unique x m
  std::vector<double> counts;
  double total = 0.0;

  std::size_t size() const { return counts.size(); }
  std::uint8_t at(std::size_t r, std::size_t c) const { return rows[r * m + c]; }
};

CompressedRows compress(const io::AttributeMatrix& a) {
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::uint8_t* base = a.data().data();
  auto less = [&](std::size_t x, std::size_t y) {
    return std::memcmp(base + x * m, base + y * m, m) < 0;
  };
  std::stable_sort(order.begin(), order.end(), less);

  CompressedRows out;
  out.m = m;
  out.total = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* r = base + order[i] * m;
    if (!out.counts.empty() && std::memcmp(r, out.rows.data() + out.rows.size() - m, m) == 0) {
      out.counts.back() += 1.0;
    } else {
      out.rows.insert(out.rows.end(), r, r + m);
      out.counts.push_back(1.0);
    }
  }
  return out;
}

// Nodewise regression problem on standardized predictors.
struct Design {
  std::size_t node = 0;
  std::size_t n = 0;        // distinct rows
  std::size_t p = 0;        // predictors (M - 1)
  double total = 0.0;       // N
  std::vector<double> c;    // row multiplicities
  std::vector<double> y;
  std::vector<double> x;    // raw predictors, column-major n x p
  std::vector<double> xs;   // standardized, column-major n x p
  std::vector<double> mean, sd;
  double ybar = 0.0;

  const double* col(std::size_t k) const { return xs.data() + k * n; }
  const double* raw(std::size_t k) const { return x.data() + k * n; }
};

Design make_design(const CompressedRows& rows, std::size_t node, const std::string& name) {
  Design d;
  d.node = node;
  d.n = rows.size();
  d.p = rows.m - 1;
  d.total = rows.total;
  d.c = rows.counts;
  d.y.resize(d.n);
  double ones = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) {
    d.y[i] = rows.at(i, node);
    ones += d.c[i] * d.y[i];
  }
  if (ones == 0.0 || ones == d.total)
    fail(ErrorCode::ConstantColumn,
         "attribute '" + name + "' is constant; its logistic regression has no finite fit");
  d.ybar = ones / d.total;

  d.x.resize(d.n * d.p);
  d.xs.resize(d.n * d.p);
  d.mean.resize(d.p);
  d.sd.resize(d.p);
  for (std::size_t k = 0; k < d.p; ++k) {
    const std::size_t attr = predictor_attr(node, k);
    double* xr = d.x.data() + k * d.n;
    double s = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
      xr[i] = rows.at(i, attr);
      s += d.c[i] * xr[i];
    }
    const double mu = s / d.total;
    double ss = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) ss += d.c[i] * (xr[i] - mu) * (xr[i] - mu);
    const double sd = std::sqrt(ss / d.total);
    d.mean[k] = mu;
    d.sd[k] = sd;
    double* xc = d.xs.data() + k * d.n;
    for (std::size_t i = 0; i < d.n; ++i) xc[i] = sd > 0.0 ? (xr[i] - mu) / sd : 0.0;
  }
  return d;
}

double design_max_penalty(const Design& d) {
  double best = 0.0;
  for (std::size_t k = 0; k < d.p; ++k) {
    const double* xc = d.col(k);
    double g = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) g += d.c[i] * xc[i] * (d.y[i] - d.ybar);
    best = std::max(best, std::abs(g / d.total));
  }
  return best;
}

// Coefficients on the standardized scale.
struct State {
  double b0 = 0.0;
  std::vector<double> b;
};

State null_state(const Design& d) {
  return State{std::log(d.ybar / (1.0 - d.ybar)), std::vector<double>(d.p, 0.0)};
}

State to_standardized(const Design& d, const Coefficients& c) {
  if (c.betas.size() != d.p)
    fail(ErrorCode::Shape, "warm start has " + std::to_string(c.betas.size()) + " slopes, expected " +
                               std::to_string(d.p));
  State s;
  s.b0 = c.tau;
  s.b.resize(d.p);
  for (std::size_t k = 0; k < d.p; ++k) {
    if (!std::isfinite(c.betas[k])) fail(ErrorCode::NonFinite, "warm start slope is not finite");
    s.b[k] = d.sd[k] > 0.0 ? c.betas[k] * d.sd[k] : 0.0;
    s.b0 += (d.sd[k] > 0.0 ? c.betas[k] : 0.0) * d.mean[k];
  }
  if (!std::isfinite(s.b0)) fail(ErrorCode::NonFinite, "warm start intercept is not finite");
  return s;
}

Coefficients to_original(const Design& d, const State& s) {
  Coefficients c;
  c.tau = s.b0;
  c.betas.assign(d.p, 0.0);
  for (std::size_t k = 0; k < d.p; ++k) {
    if (s.b[k] == 0.0) continue;
    c.betas[k] = s.b[k] / d.sd[k];
    c.tau -= c.betas[k] * d.mean[k];
  }
  return c;
}

void linear_predictor(const Design& d, const State& s, std::vector<double>& eta) {
  eta.assign(d.n, s.b0);
  for (std::size_t k = 0; k < d.p; ++k) {
    if (s.b[k] == 0.0) continue;
    const double* xc = d.col(k);
    for (std::size_t i = 0; i < d.n; ++i) eta[i] += s.b[k] * xc[i];
  }
}

double objective(const Design& d, const State& s, const std::vector<double>& eta, double rho) {
  double ll = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) ll += d.c[i] * (d.y[i] * eta[i] - log1pexp(eta[i]));
  double pen = 0.0;
  for (double v : s.b) pen += std::abs(v);
  return -ll / d.total + rho * pen;
}

// Largest violation of the l1 optimality conditions at `s` (standardized).
double kkt_residual(const Design& d, const State& s, const std::vector<double>& eta, double rho) {
  std::vector<double> resid(d.n);
  double g0 = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) {
    resid[i] = d.c[i] * (sigmoid(eta[i]) - d.y[i]);
    g0 += resid[i];
  }
  double worst = std::abs(g0 / d.total);
  for (std::size_t k = 0; k < d.p; ++k) {
    if (d.sd[k] == 0.0) continue;
    const double* xc = d.col(k);
    double g = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) g += resid[i] * xc[i];
    g /= d.total;
    const double v = s.b[k] == 0.0 ? std::max(0.0, std::abs(g) - rho)
                                   : std::abs(g + rho * (s.b[k] > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

// Penalized weighted least squares on the IRLS surrogate, solved in place by
// cyclic coordinate descent with an active-set inner loop.
void solve_surrogate(const Design& d, const std::vector<double>& w, std::vector<double>& r, State& s,
                     double rho, double tol) {
  std::vector<double> xv(d.p, 0.0);
  double sw = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) sw += w[i];
  for (std::size_t k = 0; k < d.p; ++k) {
    const double* xc = d.col(k);
    double v = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) v += w[i] * xc[i] * xc[i];
    xv[k] = v / d.total;
  }

  auto update = [&](std::size_t k) -> double {
    if (xv[k] <= 0.0) return 0.0;
    const double* xc = d.col(k);
    double g = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) g += w[i] * xc[i] * r[i];
    const double u = g / d.total + xv[k] * s.b[k];
    const double nb = soft_threshold(u, rho) / xv[k];
    const double delta = nb - s.b[k];
    if (delta != 0.0) {
      for (std::size_t i = 0; i < d.n; ++i) r[i] -= delta * xc[i];
      s.b[k] = nb;
    }
    return std::abs(delta);
  };
  auto update_intercept = [&]() -> double {
    double g = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) g += w[i] * r[i];
    const double delta = g / sw;
    if (delta != 0.0) {
      for (std::size_t i = 0; i < d.n; ++i) r[i] -= delta;
      s.b0 += delta;
    }
    return std::abs(delta);
  };

  constexpr int kMaxSweeps = 100000;
  std::vector<std::size_t> active;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double change = update_intercept();
    for (std::size_t k = 0; k < d.p; ++k) change = std::max(change, update(k));
    if (change < tol) return;

    active.clear();
    for (std::size_t k = 0; k < d.p; ++k)
      if (s.b[k] != 0.0) active.push_back(k);
    for (; sweep < kMaxSweeps; ++sweep) {
      double inner = update_intercept();
      for (std::size_t k : active) inner = std::max(inner, update(k));
      if (inner < tol) break;
    }
  }
}

struct SolveResult {
  State state;
  bool converged = false;
  std::size_t iterations = 0;
};

SolveResult solve(const Design& d, double rho, State s, const FitConfig& cfg) {
  if (rho >= design_max_penalty(d)) return {null_state(d), true, 0};

  std::vector<double> eta, w(d.n), r(d.n), cand_eta;
  linear_predictor(d, s, eta);
  double f = objective(d, s, eta, rho);

  for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
    for (std::size_t i = 0; i < d.n; ++i) {
      const double pr = sigmoid(eta[i]);
      const double wi = std::max(pr * (1.0 - pr), kMinWeight);
      w[i] = d.c[i] * wi;
      r[i] = (d.y[i] - pr) / wi;
    }
    State next = s;
    solve_surrogate(d, w, r, next, rho, cfg.tol * 0.1);

    double step = std::abs(next.b0 - s.b0);
    for (std::size_t k = 0; k < d.p; ++k) step = std::max(step, std::abs(next.b[k] - s.b[k]));
    if (step < cfg.tol) {
      linear_predictor(d, next, eta);
      if (objective(d, next, eta, rho) <= f) s = std::move(next);
      return {std::move(s), true, iter};
    }

    // Backtrack along the proximal Newton direction until the objective
    // does not increase.
    double t = 1.0;
    State cand;
    double fc = 0.0;
    for (int halvings = 0;; ++halvings) {
      cand.b0 = s.b0 + t * (next.b0 - s.b0);
      cand.b.resize(d.p);
      for (std::size_t k = 0; k < d.p; ++k)
        cand.b[k] = t == 1.0 ? next.b[k] : s.b[k] + t * (next.b[k] - s.b[k]);
      linear_predictor(d, cand, cand_eta);
      fc = objective(d, cand, cand_eta, rho);
      if (fc <= f + 1e-13 * std::max(1.0, std::abs(f)) || halvings >= 40) break;
      t *= 0.5;
    }
    s = std::move(cand);
    eta.swap(cand_eta);
    f = fc;
  }
  return {std::move(s), false, cfg.max_iter};
}

void check_penalty(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    fail(ErrorCode::InvalidArgument, "penalty must be positive and finite, got " + std::to_string(rho));
}

std::vector<double> penalty_grid(double rho_max, const FitConfig& cfg) {
  std::vector<double> path(cfg.n_penalties);
  const double last = static_cast<double>(cfg.n_penalties - 1);
  for (std::size_t l = 0; l < cfg.n_penalties; ++l)
    path[l] = rho_max * std::pow(cfg.min_ratio, static_cast<double>(l) / last);
  return path;
}

// When no predictor covaries with the target at all, every penalty gives the
// null model; a tiny positive top keeps the path well formed.
constexpr double kDegenerateMaxPenalty = 1e-10;

// Eq.-3 log-likelihood evaluated over the compressed rows.
double design_loglik(const Design& d, const Coefficients& c) {
  double ll = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) {
    double eta = c.tau;
    for (std::size_t k = 0; k < d.p; ++k)
      if (c.betas[k] != 0.0) eta += c.betas[k] * d.raw(k)[i];
    ll += d.c[i] * (d.y[i] * eta - log1pexp(eta));
  }
  return ll;
}

RegularizationPath fit_path_on(const Design& d, std::size_t m, const FitConfig& cfg) {
  double rho_max = design_max_penalty(d);
  if (rho_max <= 0.0) rho_max = kDegenerateMaxPenalty;
  const auto penalties = penalty_grid(rho_max, cfg);

  RegularizationPath path;
  path.node = d.node;
  path.n_rows = static_cast<std::size_t>(d.total);
  path.n_attrs = m;
  path.points.reserve(penalties.size());

  State s = null_state(d);
  for (std::size_t l = 0; l < penalties.size(); ++l) {
    auto res = solve(d, penalties[l], s, cfg);
    if (!res.converged) {
      std::vector<double> eta;
      linear_predictor(d, res.state, eta);
      auto best = to_original(d, res.state);
      throw ConvergenceError("node " + std::to_string(d.node) + ": no convergence at penalty index " +
                                 std::to_string(l) + " (rho=" + std::to_string(penalties[l]) + ") after " +
                                 std::to_string(cfg.max_iter) + " iterations",
                             best.tau, std::move(best.betas), kkt_residual(d, res.state, eta, penalties[l]),
                             l);
    }
    s = res.state;

    PathPoint pt;
    pt.penalty = penalties[l];
    pt.coef = to_original(d, s);
    pt.loglik = design_loglik(d, pt.coef);
    pt.n_nei = static_cast<std::size_t>(
        std::count_if(pt.coef.betas.begin(), pt.coef.betas.end(), [](double b) { return b != 0.0; }));
    pt.ebic = ebic(pt.loglik, pt.n_nei, path.n_rows, m, cfg.gamma);
    path.points.push_back(std::move(pt));
  }
  return path;
}

}  // namespace

void FitConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    fail(ErrorCode::InvalidArgument, "gamma must be finite and >= 0");
  if (n_penalties < 2) fail(ErrorCode::InvalidArgument, "path needs at least 2 penalties");
  if (!(min_ratio > 0.0 && min_ratio < 1.0))
    fail(ErrorCode::InvalidArgument, "min_ratio must lie in (0, 1)");
  if (!(tol > 0.0) || !std::isfinite(tol)) fail(ErrorCode::InvalidArgument, "tol must be positive");
  if (max_iter < 1) fail(ErrorCode::InvalidArgument, "max_iter must be at least 1");
}

double pseudo_loglik(const io::AttributeMatrix& a, std::size_t node, double tau,
                     std::span<const double> betas) {
  check_node(a, node);
  if (betas.size() != a.cols() - 1)
    fail(ErrorCode::Shape, "expected " + std::to_string(a.cols() - 1) + " slopes, got " +
                               std::to_string(betas.size()));
  if (!std::isfinite(tau)) fail(ErrorCode::NonFinite, "threshold is not finite");
  for (double b : betas)
    if (!std::isfinite(b)) fail(ErrorCode::NonFinite, "slope is not finite");

  double ll = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    double eta = tau;
    for (std::size_t k = 0; k < betas.size(); ++k) eta += betas[k] * row[predictor_attr(node, k)];
    ll += row[node] * eta - log1pexp(eta);
  }
  return ll;
}

std::vector<double> pseudo_loglik_gradient(const io::AttributeMatrix& a, std::size_t node, double tau,
                                           std::span<const double> betas) {
  pseudo_loglik(a, node, tau, betas);  // validates arguments
  std::vector<double> grad(betas.size() + 1, 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    double eta = tau;
    for (std::size_t k = 0; k < betas.size(); ++k) eta += betas[k] * row[predictor_attr(node, k)];
    const double resid = row[node] - sigmoid(eta);
    grad[0] += resid;
    for (std::size_t k = 0; k < betas.size(); ++k) grad[k + 1] += resid * row[predictor_attr(node, k)];
  }
  return grad;
}

double conditional_prob(double tau, std::span<const double> betas, std::span<const double> a_rest) {
  return conditional_prob(tau, betas, a_rest, 1);
}

double conditional_prob(double tau, std::span<const double> betas, std::span<const double> a_rest,
                        int value) {
  if (betas.size() != a_rest.size())
    fail(ErrorCode::Shape, "slopes and neighbour values differ in length");
  if (value != 0 && value != 1) fail(ErrorCode::InvalidArgument, "attribute value must be 0 or 1");
  double eta = tau;
  for (std::size_t k = 0; k < betas.size(); ++k) eta += betas[k] * a_rest[k];
  if (!std::isfinite(eta)) fail(ErrorCode::NonFinite, "conditional_prob input is not finite");
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(sigmoid(value == 1 ? eta : -eta), lo, hi);
}

double ebic(double loglik, std::size_t n_nei, std::size_t n_rows, std::size_t n_attrs, double gamma) {
  const double k = static_cast<double>(n_nei);
  return -2.0 * loglik + k * std::log(static_cast<double>(n_rows)) +
         2.0 * gamma * k * std::log(static_cast<double>(n_attrs - 1));
}

double max_penalty(const io::AttributeMatrix& a, std::size_t node) {
  check_node(a, node);
  return design_max_penalty(make_design(compress(a), node, a.names()[node]));
}

std::vector<double> make_penalty_path(const io::AttributeMatrix& a, std::size_t node,
                                      const FitConfig& cfg) {
  cfg.validate();
  double rho_max = max_penalty(a, node);
  if (rho_max <= 0.0) rho_max = kDegenerateMaxPenalty;
  return penalty_grid(rho_max, cfg);
}

Coefficients fit_l1_logistic(const io::AttributeMatrix& a, std::size_t node, double rho,
                             const std::optional<Coefficients>& warm, const FitConfig& cfg) {
  check_node(a, node);
  check_penalty(rho);
  cfg.validate();
  const Design d = make_design(compress(a), node, a.names()[node]);
  State start = warm ? to_standardized(d, *warm) : null_state(d);
  auto res = solve(d, rho, std::move(start), cfg);
  if (!res.converged) {
    std::vector<double> eta;
    linear_predictor(d, res.state, eta);
    auto best = to_original(d, res.state);
    throw ConvergenceError("node " + std::to_string(node) + ": no convergence after " +
                               std::to_string(cfg.max_iter) + " iterations",
                           best.tau, std::move(best.betas), kkt_residual(d, res.state, eta, rho));
  }
  return to_original(d, res.state);
}

RegularizationPath fit_node_path(const io::AttributeMatrix& a, std::size_t node, const FitConfig& cfg) {
  check_node(a, node);
  cfg.validate();
  return fit_path_on(make_design(compress(a), node, a.names()[node]), a.cols(), cfg);
}

NodewiseFit select_fit(const RegularizationPath& path, double gamma) {
  if (path.points.empty()) fail(ErrorCode::InvalidArgument, "empty regularization path");
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < path.points.size(); ++l) {
    const auto& pt = path.points[l];
    const double score = ebic(pt.loglik, pt.n_nei, path.n_rows, path.n_attrs, gamma);
    // Strict comparison keeps the earliest (largest-penalty) point on ties.
    if (score < best_score) {
      best_score = score;
      best = l;
    }
  }
  const auto& pt = path.points[best];
  NodewiseFit fit;
  fit.node = path.node;
  fit.threshold = pt.coef.tau;
  fit.betas = pt.coef.betas;
  fit.penalty = pt.penalty;
  fit.ebic = best_score;
  fit.loglik = pt.loglik;
  fit.n_nei = pt.n_nei;
  fit.path_index = best;
  return fit;
}

std::vector<RegularizationPath> fit_all_paths(const io::AttributeMatrix& a, const FitConfig& cfg,
                                              std::size_t threads) {
  cfg.validate();
  const CompressedRows rows = compress(a);
  std::vector<RegularizationPath> paths(a.cols());
  detail::parallel_for(a.cols(), threads, [&](std::size_t j) {
    paths[j] = fit_path_on(make_design(rows, j, a.names()[j]), a.cols(), cfg);
  });
  return paths;
}

}  // namespace iaip::elasso
