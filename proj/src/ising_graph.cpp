#include "iaip/ising_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "iaip/error.hpp"
#include "text_util.hpp"

namespace iaip::graph {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

}  // namespace

IsingGraph::IsingGraph(std::vector<std::string> names, std::vector<double> thresholds,
                       std::vector<double> weights, double gamma, std::vector<double> lambdas)
    : names_(std::move(names)),
      thresholds_(std::move(thresholds)),
      weights_(std::move(weights)),
      gamma_(gamma),
      lambdas_(std::move(lambdas)) {
  const std::size_t m = names_.size();
  if (m == 0) fail(ErrorCode::Shape, "graph has no nodes");
  if (thresholds_.size() != m || lambdas_.size() != m || weights_.size() != m * m)
    fail(ErrorCode::Shape, "graph arrays do not match " + std::to_string(m) + " nodes");
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) fail(ErrorCode::InvalidArgument, "empty node name");
    if (!seen.insert(n).second) fail(ErrorCode::InvalidArgument, "duplicate node name '" + n + "'");
  }
  if (!std::isfinite(gamma_)) fail(ErrorCode::NonFinite, "graph gamma is not finite");
  for (std::size_t j = 0; j < m; ++j) {
    if (!std::isfinite(thresholds_[j]) || !std::isfinite(lambdas_[j]))
      fail(ErrorCode::NonFinite, "node '" + names_[j] + "' has a non-finite parameter");
    if (weight(j, j) != 0.0) fail(ErrorCode::InvalidArgument, "self-loop on node '" + names_[j] + "'");
    for (std::size_t k = j + 1; k < m; ++k) {
      if (!std::isfinite(weight(j, k))) fail(ErrorCode::NonFinite, "non-finite edge weight");
      if (weight(j, k) != weight(k, j))
        fail(ErrorCode::InvalidArgument,
             "weight matrix is not symmetric at (" + names_[j] + ", " + names_[k] + ")");
    }
  }
}

std::vector<std::size_t> IsingGraph::neighbours(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k)
    if (k != j && weight(j, k) != 0.0) out.push_back(k);
  return out;
}

std::size_t IsingGraph::edge_count() const noexcept {
  std::size_t e = 0;
  for (std::size_t j = 0; j < size(); ++j)
    for (std::size_t k = j + 1; k < size(); ++k) e += weight(j, k) != 0.0;
  return e;
}

std::vector<double> IsingGraph::node_betas(std::size_t j) const {
  std::vector<double> out;
  out.reserve(size() - 1);
  for (std::size_t k = 0; k < size(); ++k)
    if (k != j) out.push_back(weight(j, k));
  return out;
}

IsingGraph symmetrize(std::span<const elasso::NodewiseFit> fits, std::vector<std::string> names,
                      double gamma) {
  const std::size_t m = names.size();
  if (fits.size() != m)
    fail(ErrorCode::Shape, "got " + std::to_string(fits.size()) + " nodewise fits for " +
                               std::to_string(m) + " attributes");
  for (std::size_t j = 0; j < m; ++j) {
    if (fits[j].node != j) fail(ErrorCode::Shape, "nodewise fits are not in node order");
    if (fits[j].betas.size() + 1 != m)
      fail(ErrorCode::Shape, "fit for node " + std::to_string(j) + " has " +
                                 std::to_string(fits[j].betas.size()) + " slopes, expected " +
                                 std::to_string(m - 1));
  }

  std::vector<double> w(m * m, 0.0), tau(m), lambdas(m);
  for (std::size_t j = 0; j < m; ++j) {
    tau[j] = fits[j].threshold;
    lambdas[j] = fits[j].penalty;
    for (std::size_t k = j + 1; k < m; ++k) {
      const double bjk = fits[j].betas[elasso::predictor_slot(j, k)];
      const double bkj = fits[k].betas[elasso::predictor_slot(k, j)];
      if (bjk != 0.0 && bkj != 0.0) {
        const double v = (bjk + bkj) / 2.0;
        w[j * m + k] = v;
        w[k * m + j] = v;
      }
    }
  }
  return IsingGraph(std::move(names), std::move(tau), std::move(w), gamma, std::move(lambdas));
}

Connectivity connected(const IsingGraph& g) {
  const std::size_t m = g.size();
  DisjointSets sets(m);
  std::vector<bool> touched(m, false);
  std::size_t components = m;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k)
      if (g.weight(j, k) != 0.0) {
        touched[j] = touched[k] = true;
        if (sets.unite(j, k)) --components;
      }
  return {components, static_cast<std::size_t>(std::count(touched.begin(), touched.end(), false))};
}

FittedGraph graph_from_paths(std::span<const elasso::RegularizationPath> paths,
                             std::vector<std::string> names, double gamma) {
  std::vector<elasso::NodewiseFit> fits;
  fits.reserve(paths.size());
  for (const auto& p : paths) fits.push_back(elasso::select_fit(p, gamma));
  auto g = symmetrize(fits, std::move(names), gamma);
  return {std::move(g), std::move(fits)};
}

FittedGraph fit_graph(const io::AttributeMatrix& a, const elasso::FitConfig& cfg, std::size_t threads) {
  const auto paths = elasso::fit_all_paths(a, cfg, threads);
  return graph_from_paths(paths, a.names(), cfg.gamma);
}

std::vector<double> parse_gamma_grid(std::string_view spec) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    std::size_t colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon == std::string_view::npos ? spec.npos : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 3)
    fail(ErrorCode::InvalidArgument, "gamma grid must look like start:stop:step, got '" + std::string(spec) + "'");
  auto lo = detail::parse_double(parts[0]);
  auto hi = detail::parse_double(parts[1]);
  auto step = detail::parse_double(parts[2]);
  if (!lo || !hi || !step || !std::isfinite(*lo) || !std::isfinite(*hi) || !std::isfinite(*step))
    fail(ErrorCode::InvalidArgument, "gamma grid '" + std::string(spec) + "' has a non-numeric field");
  if (*lo < 0.0) fail(ErrorCode::InvalidArgument, "gamma grid start must be >= 0");
  if (!(*lo < *hi)) fail(ErrorCode::InvalidArgument, "gamma grid needs start < stop");
  if (!(*step > 0.0)) fail(ErrorCode::InvalidArgument, "gamma grid step must be positive");

  const double span = (*hi - *lo) / *step;
  if (span > 1e6) fail(ErrorCode::InvalidArgument, "gamma grid has more than a million points");
  const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = *lo + static_cast<double>(i) * *step;
  return grid;
}

GammaSweepReport sweep_gamma(std::span<const elasso::RegularizationPath> paths,
                             const std::vector<std::string>& names, std::span<const double> grid) {
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "empty gamma grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i]))
      fail(ErrorCode::InvalidArgument, "gamma grid values must be finite and >= 0");
    if (i && !(grid[i] > grid[i - 1]))
      fail(ErrorCode::InvalidArgument, "gamma grid must be strictly increasing");
  }
  GammaSweepReport report;
  for (double gamma : grid) {
    const auto fitted = graph_from_paths(paths, names, gamma);
    const auto conn = connected(fitted.graph);
    report.rows.push_back({gamma, fitted.graph.edge_count(), conn.isolated, conn.components});
    if (conn.connected()) report.selected = gamma;
  }
  return report;
}

GammaSweepReport select_gamma(const io::AttributeMatrix& a, std::span<const double> grid,
                              const elasso::FitConfig& cfg, std::size_t threads) {
  const auto paths = elasso::fit_all_paths(a, cfg, threads);
  return sweep_gamma(paths, a.names(), grid);
}

std::string write_sweep_report(const GammaSweepReport& r) {
  std::string out = "gamma,edges,isolated,components,connected\n";
  for (const auto& row : r.rows) {
    detail::append_double(out, row.gamma);
    out += ',' + std::to_string(row.edges) + ',' + std::to_string(row.isolated) + ',' +
           std::to_string(row.components) + ',' + (row.components == 1 ? "1" : "0") + '\n';
  }
  out += "# selected=";
  out += r.selected ? detail::format_double(*r.selected) : std::string("none");
  out += '\n';
  return out;
}

double joint_log_unnorm(const IsingGraph& g, std::span<const double> a) {
  const std::size_t m = g.size();
  if (a.size() != m)
    fail(ErrorCode::Shape, "state has " + std::to_string(a.size()) + " entries, graph has " +
                               std::to_string(m) + " nodes");
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (a[j] == 0.0) continue;
    s += g.thresholds()[j] * a[j];
    for (std::size_t k = j + 1; k < m; ++k) s += g.weight(j, k) * a[j] * a[k];
  }
  return s;
}

io::AttributeMatrix sample_ising_exact(const IsingGraph& g, std::size_t n, std::uint64_t seed) {
  const std::size_t m = g.size();
  if (m > kMaxExactNodes)
    fail(ErrorCode::InvalidArgument, "exact sampling enumerates 2^M states; M=" + std::to_string(m) +
                                         " exceeds " + std::to_string(kMaxExactNodes));
  if (m < 2) fail(ErrorCode::Shape, "sampling needs at least 2 nodes");
  if (n == 0) fail(ErrorCode::InvalidArgument, "sample count must be at least 1");

  const std::size_t states = std::size_t{1} << m;
  std::vector<double> logw(states);
  std::vector<double> a(m);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t j = 0; j < m; ++j) a[j] = static_cast<double>((s >> j) & 1u);
    logw[s] = joint_log_unnorm(g, a);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> cdf(states);
  double acc = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    acc += std::exp(logw[s] - top);
    cdf[s] = acc;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> data;
  data.reserve(n * m);
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // 53 random bits; std::uniform_real_distribution is not portable across libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t s = it == cdf.end() ? states - 1 : static_cast<std::size_t>(it - cdf.begin());
    for (std::size_t j = 0; j < m; ++j) data.push_back(static_cast<std::uint8_t>((s >> j) & 1u));
    ids.push_back("s" + std::to_string(i));
  }
  return io::AttributeMatrix(g.names(), std::move(ids), std::move(data));
}

}  // namespace iaip::graph
