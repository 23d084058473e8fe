#include "iaip/debias.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <unordered_set>

#include "iaip/error.hpp"
#include "text_util.hpp"

namespace iaip::debias {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

void check_aligned(const ManipulationVectors& v, const graph::IsingGraph& g) {
  if (v.size() != g.size())
    fail(ErrorCode::Shape, "vectors cover " + std::to_string(v.size()) + " attributes, graph has " +
                               std::to_string(g.size()) + " nodes");
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v.names()[i] != g.names()[i])
      fail(ErrorCode::InvalidArgument, "attribute " + std::to_string(i) + " is '" + v.names()[i] +
                                           "' in the vectors but '" + g.names()[i] + "' in the graph");
}

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

constexpr std::string_view kManifestMagic = "iaip-vectors 1";

}  // namespace

ManipulationVectors::ManipulationVectors(std::vector<std::string> names, std::size_t dim,
                                         std::vector<double> vectors,
                                         std::optional<std::vector<double>> corrected,
                                         std::optional<double> mu)
    : names_(std::move(names)),
      dim_(dim),
      vectors_(std::move(vectors)),
      corrected_(std::move(corrected)),
      mu_(mu) {
  if (names_.empty() || dim_ == 0) fail(ErrorCode::Shape, "manipulation vectors must be non-empty");
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) fail(ErrorCode::InvalidArgument, "empty attribute name");
    if (!seen.insert(n).second) fail(ErrorCode::InvalidArgument, "duplicate attribute name '" + n + "'");
  }
  if (vectors_.size() != names_.size() * dim_)
    fail(ErrorCode::Shape, "manipulation vectors have " + std::to_string(vectors_.size()) +
                               " values, expected " + std::to_string(names_.size() * dim_));
  if (corrected_ && corrected_->size() != vectors_.size())
    fail(ErrorCode::Shape, "corrected vectors differ in shape from the base vectors");
  if (corrected_.has_value() != mu_.has_value())
    fail(ErrorCode::InvalidArgument, "corrected vectors and mu must be given together");
  if (mu_ && !std::isfinite(*mu_)) fail(ErrorCode::NonFinite, "mu is not finite");
  auto finite = [](const std::vector<double>& xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(vectors_) || (corrected_ && !finite(*corrected_)))
    fail(ErrorCode::NonFinite, "manipulation vectors contain a non-finite value");
}

std::size_t ManipulationVectors::find(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return npos;
}

ManipulationVectors compute_manip_vectors(const io::LatentMatrix& latents, const io::AttributeMatrix& a) {
  if (latents.rows() != a.rows())
    fail(ErrorCode::Shape, "latents have " + std::to_string(latents.rows()) + " rows, attributes have " +
                               std::to_string(a.rows()));
  const std::size_t n = a.rows(), m = a.cols(), d = latents.cols();
  std::vector<double> out(m * d);
  std::vector<double> sum1(d), sum0(d);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(sum1.begin(), sum1.end(), 0.0);
    std::fill(sum0.begin(), sum0.end(), 0.0);
    std::size_t n1 = 0;
    for (std::size_t t = 0; t < n; ++t) {
      auto row = latents.row(t);
      auto& acc = a(t, i) ? sum1 : sum0;
      n1 += a(t, i);
      for (std::size_t c = 0; c < d; ++c) acc[c] += row[c];
    }
    const std::size_t n0 = n - n1;
    if (n1 == 0 || n0 == 0)
      fail(ErrorCode::ConstantColumn, "attribute '" + a.names()[i] + "' is " + (n1 ? "always" : "never") +
                                          " present; its manipulation vector is undefined");
    for (std::size_t c = 0; c < d; ++c)
      out[i * d + c] = sum1[c] / static_cast<double>(n1) - sum0[c] / static_cast<double>(n0);
  }
  return ManipulationVectors(a.names(), d, std::move(out));
}

ManipulationVectors mb_correct(const ManipulationVectors& v, const graph::IsingGraph& g, double mu) {
  check_aligned(v, g);
  if (!std::isfinite(mu)) fail(ErrorCode::NonFinite, "mu is not finite");
  const std::size_t m = v.size(), d = v.dim();
  std::vector<double> corrected(v.vectors());
  for (std::size_t i = 0; i < m; ++i) {
    double* out = corrected.data() + i * d;
    for (std::size_t k : g.neighbours(i)) {
      const double c = mu * g.weight(i, k);
      auto zk = v.vector(k);
      for (std::size_t e = 0; e < d; ++e) out[e] -= c * zk[e];
    }
  }
  return ManipulationVectors(v.names(), d, v.vectors(), std::move(corrected), mu);
}

std::vector<double> apply_manipulation(const ManipulationRequest& req, const ManipulationVectors& v,
                                       const graph::IsingGraph* g, double mu) {
  const std::size_t d = v.dim();
  if (req.latent.size() != d)
    fail(ErrorCode::Shape, "latent has dimension " + std::to_string(req.latent.size()) +
                               ", manipulation vectors have " + std::to_string(d));
  for (double x : req.latent)
    if (!std::isfinite(x)) fail(ErrorCode::NonFinite, "latent contains a non-finite value");

  std::vector<Edit> edits = req.edits;
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.attr < b.attr; });
  for (std::size_t e = 0; e < edits.size(); ++e) {
    if (edits[e].attr >= v.size())
      fail(ErrorCode::InvalidArgument, "unknown attribute index " + std::to_string(edits[e].attr));
    if (e && edits[e].attr == edits[e - 1].attr)
      fail(ErrorCode::InvalidArgument, "attribute '" + v.names()[edits[e].attr] + "' edited twice");
    if (!std::isfinite(edits[e].alpha))
      fail(ErrorCode::NonFinite, "edit weight for '" + v.names()[edits[e].attr] + "' is not finite");
  }
  if (req.mode == Mode::MarkovBlanket) {
    if (!g) fail(ErrorCode::InvalidArgument, "Markov-blanket mode needs a graph");
    check_aligned(v, *g);
    if (!std::isfinite(mu)) fail(ErrorCode::NonFinite, "mu is not finite");
  }

  std::vector<double> z = req.latent;
  for (const auto& edit : edits) {
    auto zi = v.vector(edit.attr);
    for (std::size_t e = 0; e < d; ++e) z[e] += edit.alpha * zi[e];
    if (req.mode != Mode::MarkovBlanket) continue;
    for (std::size_t k : g->neighbours(edit.attr)) {
      const double c = -edit.alpha * mu * g->weight(edit.attr, k);
      auto zk = v.vector(k);
      for (std::size_t e = 0; e < d; ++e) z[e] += c * zk[e];
    }
  }
  return z;
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::Shape, "cosine distance of vectors of different length");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::InvalidArgument, "cosine distance of a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return 1.0 - dot / (na * nb);
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::Shape, "correlation of sequences of different length");
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCode::InvalidArgument, "correlation needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::InvalidArgument, "correlation of a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) fail(ErrorCode::InvalidArgument, "p-value needs at least 3 points");
  if (!(std::abs(r) <= 1.0)) fail(ErrorCode::InvalidArgument, "correlation outside [-1, 1]");
  if (std::abs(r) == 1.0) return 0.0;
  // With t^2 = r^2 (n-2) / (1-r^2), the two-sided tail P(|T| > |t|) equals
  // I_x(df/2, 1/2) at x = df / (df + t^2) = 1 - r^2.
  const double df = static_cast<double>(n - 2);
  const double x = (1.0 - r) * (1.0 + r);
  return std::clamp(boost::math::ibeta(df / 2.0, 0.5, x), 0.0, 1.0);
}

CorrelationReport weight_distance_correlation(const ManipulationVectors& v, const graph::IsingGraph& g) {
  check_aligned(v, g);
  CorrelationReport report;
  std::vector<double> ws, ds;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t k = i + 1; k < g.size(); ++k) {
      if (g.weight(i, k) == 0.0) continue;
      if (norm(v.vector(i)) == 0.0 || norm(v.vector(k)) == 0.0)
        fail(ErrorCode::InvalidArgument, "manipulation vector of '" +
                                             (norm(v.vector(i)) == 0.0 ? v.names()[i] : v.names()[k]) +
                                             "' has zero norm");
      EdgeDistance e{i, k, g.weight(i, k), cosine_distance(v.vector(i), v.vector(k))};
      ws.push_back(e.weight);
      ds.push_back(e.cosine_distance);
      report.pairs.push_back(e);
    }
  if (report.pairs.size() < 3)
    fail(ErrorCode::InvalidArgument, "correlation needs at least 3 edges, graph has " +
                                         std::to_string(report.pairs.size()));
  report.pearson_r = pearson_r(ws, ds);
  report.p_value = pearson_p_value(report.pearson_r, ws.size());
  return report;
}

std::string write_correlation_csv(const CorrelationReport& r, const std::vector<std::string>& names) {
  std::string out = "i,k,weight,cosine_distance\n";
  for (const auto& p : r.pairs) {
    if (p.i >= names.size() || p.k >= names.size())
      fail(ErrorCode::Shape, "correlation pair refers to an unknown attribute");
    out += names[p.i] + ',' + names[p.k] + ',';
    detail::append_double(out, p.weight);
    out += ',';
    detail::append_double(out, p.cosine_distance);
    out += '\n';
  }
  out += "# pearson_r=" + detail::format_double(r.pearson_r) + " p_value=" + detail::format_double(r.p_value) +
         " n=" + std::to_string(r.pairs.size()) + '\n';
  return out;
}

std::string write_vector_manifest(const VectorManifest& m) {
  std::string out(kManifestMagic);
  out += "\nkind ";
  out += m.kind == VectorManifest::Kind::Base ? "base" : "corrected";
  out += "\ncount " + std::to_string(m.names.size());
  out += "\ndim " + std::to_string(m.dim);
  out += "\nmu " + (m.mu ? detail::format_double(*m.mu) : std::string("none"));
  out += "\ngraph " + m.graph_digest.value_or("none") + '\n';
  for (const auto& n : m.names) {
    for (char c : n)
      if (detail::is_space(c) || c == '\n')
        fail(ErrorCode::InvalidArgument, "attribute name '" + n + "' contains whitespace");
    out += "name " + n + '\n';
  }
  return out;
}

VectorManifest read_vector_manifest(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != kManifestMagic)
    fail(ErrorCode::Parse, "vector manifest: missing 'iaip-vectors 1' header");
  std::size_t li = 1;
  auto field = [&](std::string_view key) -> std::string_view {
    if (li >= lines.size()) fail(ErrorCode::Parse, "vector manifest: missing '" + std::string(key) + "'");
    auto toks = detail::split_ws(lines[li++]);
    if (toks.size() != 2 || toks[0] != key)
      fail(ErrorCode::Parse, "vector manifest line " + std::to_string(li) + ": expected '" + std::string(key) + " <value>'");
    return toks[1];
  };

  VectorManifest m;
  auto kind = field("kind");
  if (kind == "base") m.kind = VectorManifest::Kind::Base;
  else if (kind == "corrected") m.kind = VectorManifest::Kind::Corrected;
  else fail(ErrorCode::Parse, "vector manifest: unknown kind '" + std::string(kind) + "'");
  auto count = detail::parse_int<std::size_t>(field("count"));
  auto dim = detail::parse_int<std::size_t>(field("dim"));
  if (!count || !dim || *count == 0 || *dim == 0)
    fail(ErrorCode::Parse, "vector manifest: bad count or dim");
  m.dim = *dim;
  auto mu = field("mu");
  if (mu != "none") {
    auto v = detail::parse_double(mu);
    if (!v || !std::isfinite(*v)) fail(ErrorCode::Parse, "vector manifest: bad mu");
    m.mu = *v;
  }
  auto digest = field("graph");
  if (digest != "none") m.graph_digest = std::string(digest);
  for (std::size_t i = 0; i < *count; ++i) m.names.emplace_back(field("name"));
  for (; li < lines.size(); ++li)
    if (!lines[li].empty()) fail(ErrorCode::Parse, "vector manifest: trailing content");
  if ((m.kind == VectorManifest::Kind::Corrected) != m.mu.has_value())
    fail(ErrorCode::Parse, "vector manifest: corrected vectors need mu, base vectors must not have one");
  return m;
}

StoredVectors store_vectors(const ManipulationVectors& v, const std::optional<std::string>& graph_digest) {
  VectorManifest m;
  m.names = v.names();
  m.dim = v.dim();
  if (v.corrected()) {
    m.kind = VectorManifest::Kind::Corrected;
    m.mu = v.mu();
    m.graph_digest = graph_digest;
    return {std::move(m), io::LatentMatrix(v.size(), v.dim(), *v.corrected())};
  }
  return {std::move(m), io::LatentMatrix(v.size(), v.dim(), v.vectors())};
}

ManipulationVectors load_vectors(const StoredVectors& s) {
  if (s.matrix.rows() != s.manifest.names.size() || s.matrix.cols() != s.manifest.dim)
    fail(ErrorCode::Shape, "vector file is " + std::to_string(s.matrix.rows()) + "x" +
                               std::to_string(s.matrix.cols()) + " but its manifest says " +
                               std::to_string(s.manifest.names.size()) + "x" + std::to_string(s.manifest.dim));
  return ManipulationVectors(s.manifest.names, s.manifest.dim, s.matrix.data());
}

}  // namespace iaip::debias
