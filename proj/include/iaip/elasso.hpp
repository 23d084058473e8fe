#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "iaip/attr_io.hpp"

namespace iaip::elasso {

struct FitConfig {
  double gamma = 0.25;        // EBIC prior strength
  std::size_t n_penalties = 100;
  double min_ratio = 1e-4;    // smallest / largest penalty on the path
  double tol = 1e-7;          // max absolute coefficient change at convergence
  std::size_t max_iter = 1000;

  // Throws Error(InvalidArgument) when any field is out of range.
  void validate() const;
};

// Intercept and slopes on the original {0,1} scale. `betas` runs over the
// other M-1 attributes in ascending index order (node j itself is skipped).
struct Coefficients {
  double tau = 0.0;
  std::vector<double> betas;
};

struct PathPoint {
  double penalty = 0.0;
  Coefficients coef;
  double loglik = 0.0;  // nodewise pseudo-log-likelihood of `coef`
  std::size_t n_nei = 0;
  double ebic = 0.0;    // at the path's fitting gamma
};

struct RegularizationPath {
  std::size_t node = 0;
  std::size_t n_rows = 0;
  std::size_t n_attrs = 0;
  std::vector<PathPoint> points;  // penalties strictly decreasing
};

struct NodewiseFit {
  std::size_t node = 0;
  double threshold = 0.0;
  std::vector<double> betas;  // length M-1
  double penalty = 0.0;
  double ebic = 0.0;
  double loglik = 0.0;
  std::size_t n_nei = 0;
  std::size_t path_index = 0;
};

// Maps between the M-1 slot layout of `betas` and attribute indices.
inline std::size_t predictor_attr(std::size_t node, std::size_t slot) noexcept {
  return slot < node ? slot : slot + 1;
}
inline std::size_t predictor_slot(std::size_t node, std::size_t attr) noexcept {
  return attr < node ? attr : attr - 1;
}

// sum_i [ tau*A_ij + sum_k b_jk A_ij A_ik - log(1 + exp(tau + sum_k b_jk A_ik)) ]
double pseudo_loglik(const io::AttributeMatrix& a, std::size_t node, double tau,
                     std::span<const double> betas);

// Gradient of pseudo_loglik: element 0 is d/dtau, then d/dbeta per slot.
std::vector<double> pseudo_loglik_gradient(const io::AttributeMatrix& a, std::size_t node, double tau,
                                           std::span<const double> betas);

// p(a_j = 1 | a_rest). Strictly inside (0, 1).
double conditional_prob(double tau, std::span<const double> betas, std::span<const double> a_rest);
// p(a_j = value | a_rest) for value in {0, 1}.
double conditional_prob(double tau, std::span<const double> betas, std::span<const double> a_rest,
                        int value);

// -2 loglik + n_nei log N + 2 gamma n_nei log(M - 1)
double ebic(double loglik, std::size_t n_nei, std::size_t n_rows, std::size_t n_attrs, double gamma);

// Largest useful penalty for node j: max_k |mean_i xs_ik (A_ij - mean_j)| over
// standardized predictors xs. Any penalty at or above it gives all-zero betas.
double max_penalty(const io::AttributeMatrix& a, std::size_t node);

// n_penalties log-spaced values from max_penalty down to max_penalty*min_ratio.
std::vector<double> make_penalty_path(const io::AttributeMatrix& a, std::size_t node,
                                      const FitConfig& cfg);

// Minimizes -loglik/N + rho * sum_k sd_k |beta_k| (an l1 penalty on the
// standardized slopes; tau is unpenalized) by IRLS with cyclic coordinate
// descent. Throws ConvergenceError after cfg.max_iter outer iterations.
Coefficients fit_l1_logistic(const io::AttributeMatrix& a, std::size_t node, double rho,
                             const std::optional<Coefficients>& warm, const FitConfig& cfg);

RegularizationPath fit_node_path(const io::AttributeMatrix& a, std::size_t node, const FitConfig& cfg);

// EBIC minimizer at `gamma`; ties go to the larger penalty.
NodewiseFit select_fit(const RegularizationPath& path, double gamma);

// One path per attribute, fitted on up to `threads` workers. Result order is
// by node and independent of the thread count.
std::vector<RegularizationPath> fit_all_paths(const io::AttributeMatrix& a, const FitConfig& cfg,
                                              std::size_t threads = 1);

}  // namespace iaip::elasso
