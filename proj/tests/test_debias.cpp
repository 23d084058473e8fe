#include <cmath>
#include <random>

#include "doctest.h"
#include "iaip/debias.hpp"
#include "iaip/error.hpp"
#include "oracles.hpp"

using namespace iaip;
using namespace iaip::debias;
using graph::IsingGraph;

namespace {

std::vector<std::string> attr_names(std::size_t m) {
  std::vector<std::string> n;
  for (std::size_t j = 0; j < m; ++j) n.push_back("a" + std::to_string(j));
  return n;
}

ManipulationVectors random_vectors(std::mt19937_64& rng, std::size_t m, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(m * d);
  for (auto& x : v) x = normal(rng);
  return ManipulationVectors(attr_names(m), d, v);
}

IsingGraph random_graph(std::mt19937_64& rng, std::size_t m, double density) {
  std::uniform_real_distribution<double> u(-2.0, 2.0), p(0.0, 1.0);
  std::vector<double> w(m * m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k)
      if (p(rng) < density) w[j * m + k] = w[k * m + j] = u(rng);
  return IsingGraph(attr_names(m), std::vector<double>(m, 0.0), w, 0.0, std::vector<double>(m, 0.0));
}

std::vector<double> random_latent(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> z(d);
  for (auto& x : z) x = normal(rng);
  return z;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("manipulation vectors: singleton means") {
  io::LatentMatrix z(2, 1, {4, 2});
  auto a = io::AttributeMatrix({"A", "B"}, {"x", "y"}, {1, 0, 0, 1});
  auto v = compute_manip_vectors(z, a);
  CHECK(v.vector(0)[0] == 2.0);
  CHECK(v.vector(1)[0] == -2.0);
  CHECK(v.names() == a.names());
  CHECK_FALSE(v.corrected().has_value());
}

TEST_CASE("manipulation vectors: two-pass group mean oracle") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> normal(0.0, 3.0);
  auto a = oracle::random_binary(rng, 100, 8);
  std::vector<double> lat(100 * 6);
  for (auto& x : lat) x = normal(rng);
  io::LatentMatrix z(100, 6, lat);
  auto v = compute_manip_vectors(z, a);
  for (std::size_t i = 0; i < 8; ++i) {
    // First pass counts, second pass accumulates pre-divided contributions.
    std::size_t n1 = 0;
    for (std::size_t t = 0; t < 100; ++t) n1 += a(t, i);
    const std::size_t n0 = 100 - n1;
    for (std::size_t c = 0; c < 6; ++c) {
      long double m1 = 0, m0 = 0;
      for (std::size_t t = 0; t < 100; ++t) {
        if (a(t, i)) m1 += static_cast<long double>(lat[t * 6 + c]) / n1;
        else m0 += static_cast<long double>(lat[t * 6 + c]) / n0;
      }
      CHECK(std::abs(v.vector(i)[c] - static_cast<double>(m1 - m0)) <= 1e-12);
    }
  }
}

TEST_CASE("manipulation vectors: translation equivariance and independence") {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto a = oracle::random_binary(rng, 200, 4);
  std::vector<double> lat(200 * 5), shifted(200 * 5);
  const std::vector<double> c{100.0, -3.0, 0.25, 7.0, -50.0};
  for (std::size_t i = 0; i < lat.size(); ++i) {
    lat[i] = normal(rng);
    shifted[i] = lat[i] + c[i % 5];
  }
  auto v = compute_manip_vectors(io::LatentMatrix(200, 5, lat), a);
  auto w = compute_manip_vectors(io::LatentMatrix(200, 5, shifted), a);
  CHECK(max_abs_diff(v.vectors(), w.vectors()) <= 1e-12);

  // Labels independent of large latents: difference of means is small
  // relative to the latent scale.
  std::vector<double> big(20000 * 3);
  for (auto& x : big) x = 10.0 * normal(rng);
  std::vector<std::uint8_t> labels(20000 * 2);
  for (auto& l : labels) l = rng() & 1;
  auto ind = compute_manip_vectors(io::LatentMatrix(20000, 3, big), oracle::make_matrix(20000, 2, labels));
  for (double x : ind.vectors()) CHECK(std::abs(x) < 1.0);
}

TEST_CASE("manipulation vectors: errors") {
  auto a = io::AttributeMatrix({"A", "B"}, {"x", "y"}, {1, 0, 1, 1});
  CHECK_THROWS_AS(compute_manip_vectors(io::LatentMatrix(2, 1, {1, 2}), a), Error);
  try {
    compute_manip_vectors(io::LatentMatrix(2, 1, {1, 2}), a);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantColumn);
    CHECK(std::string(e.what()).find("'A'") != std::string::npos);
  }
  auto ok = io::AttributeMatrix({"A", "B"}, {"x", "y"}, {1, 0, 0, 1});
  CHECK_THROWS_AS(compute_manip_vectors(io::LatentMatrix(3, 1, {1, 2, 3}), ok), Error);

  CHECK_THROWS_AS(ManipulationVectors({}, 1, {}), Error);
  CHECK_THROWS_AS(ManipulationVectors({"a"}, 2, {1.0}), Error);
  CHECK_THROWS_AS(ManipulationVectors({"a", "a"}, 1, {1.0, 2.0}), Error);
  CHECK_THROWS_AS(ManipulationVectors({"a"}, 1, {NAN}), Error);
  CHECK_THROWS_AS(ManipulationVectors({"a"}, 1, {1.0}, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(ManipulationVectors({"a"}, 1, {1.0}, std::vector<double>{1.0, 2.0}, 0.1), Error);
}

TEST_CASE("mb_correct examples") {
  auto g = IsingGraph({"A", "B"}, {0, 0}, {0, 0.5, 0.5, 0}, 0.0, {0, 0});
  ManipulationVectors v({"A", "B"}, 2, {1, 2, 3, -4});
  auto c = mb_correct(v, g, 0.2);
  REQUIRE(c.corrected().has_value());
  CHECK(c.mu() == 0.2);
  CHECK(c.vectors() == v.vectors());
  CHECK(std::abs(c.corrected_vector(0)[0] - 0.7) <= 1e-15);
  CHECK(std::abs(c.corrected_vector(0)[1] - 2.4) <= 1e-15);
  CHECK(std::abs(c.corrected_vector(1)[0] - 2.9) <= 1e-15);
  CHECK(std::abs(c.corrected_vector(1)[1] - -4.2) <= 1e-15);

  std::mt19937_64 rng(53);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + rng() % 8, d = 1 + rng() % 6;
    auto vv = random_vectors(rng, m, d);
    auto gg = random_graph(rng, m, 0.4);
    auto zero = mb_correct(vv, gg, 0.0);
    CHECK(*zero.corrected() == vv.vectors());
    auto some = mb_correct(vv, gg, 0.15);
    for (std::size_t i = 0; i < m; ++i)
      if (gg.neighbours(i).empty())
        for (std::size_t e = 0; e < d; ++e) CHECK(some.corrected_vector(i)[e] == vv.vector(i)[e]);
  }
}

TEST_CASE("mb_correct is linear in the vectors") {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + rng() % 8, d = 1 + rng() % 6;
    auto z1 = random_vectors(rng, m, d), z2 = random_vectors(rng, m, d);
    auto g = random_graph(rng, m, 0.5);
    const double a = coef(rng), b = coef(rng), mu = 0.1 + 0.1 * (rng() % 2);
    std::vector<double> mix(m * d);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * z1.vectors()[i] + b * z2.vectors()[i];
    auto lhs = mb_correct(ManipulationVectors(attr_names(m), d, mix), g, mu);
    auto c1 = mb_correct(z1, g, mu), c2 = mb_correct(z2, g, mu);
    std::vector<double> rhs(m * d);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = a * (*c1.corrected())[i] + b * (*c2.corrected())[i];
    worst = std::max(worst, max_abs_diff(*lhs.corrected(), rhs));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("mb_correct rejects misaligned graphs") {
  std::mt19937_64 rng(55);
  auto v = random_vectors(rng, 3, 2);
  auto g = random_graph(rng, 4, 0.5);
  CHECK_THROWS_AS(mb_correct(v, g, 0.1), Error);
  auto renamed = IsingGraph({"a0", "zz", "a2"}, {0, 0, 0}, std::vector<double>(9, 0.0), 0.0, {0, 0, 0});
  try {
    mb_correct(v, renamed, 0.1);
    FAIL("expected misalignment error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("'zz'") != std::string::npos);
  }
  auto ok = random_graph(rng, 3, 0.5);
  CHECK_THROWS_AS(mb_correct(v, ok, NAN), Error);
}

TEST_CASE("apply_manipulation identities") {
  std::mt19937_64 rng(56);
  std::uniform_real_distribution<double> alpha(-3.0, 3.0);
  double single = 0.0, additive = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + rng() % 8, d = 1 + rng() % 6;
    auto v = random_vectors(rng, m, d);
    auto g = random_graph(rng, m, 0.4);
    const auto z = random_latent(rng, d);
    const double mu = 0.15;

    // No edits, or all-zero weights, return the latent unchanged.
    CHECK(apply_manipulation({z, {}, Mode::MarkovBlanket}, v, &g, mu) == z);
    std::vector<Edit> zeros;
    for (std::size_t i = 0; i < m; ++i) zeros.push_back({i, 0.0});
    CHECK(max_abs_diff(apply_manipulation({z, zeros, Mode::MarkovBlanket}, v, &g, mu), z) == 0.0);

    // One edit in MB mode moves along the corrected vector.
    const std::size_t i = rng() % m;
    const double a = alpha(rng);
    auto c = mb_correct(v, g, mu);
    auto got = apply_manipulation({z, {{i, a}}, Mode::MarkovBlanket}, v, &g, mu);
    std::vector<double> want(z);
    for (std::size_t e = 0; e < d; ++e) want[e] += a * c.corrected_vector(i)[e];
    single = std::max(single, max_abs_diff(got, want));

    // Several edits add up to the sum of single-edit deltas.
    std::vector<Edit> edits;
    for (std::size_t k = 0; k < m; ++k)
      if (rng() % 2) edits.push_back({k, alpha(rng)});
    for (Mode mode : {Mode::Naive, Mode::MarkovBlanket}) {
      auto multi = apply_manipulation({z, edits, mode}, v, &g, mu);
      std::vector<double> sum(z);
      for (const auto& e : edits) {
        auto one = apply_manipulation({z, {e}, mode}, v, &g, mu);
        for (std::size_t q = 0; q < d; ++q) sum[q] += one[q] - z[q];
      }
      additive = std::max(additive, max_abs_diff(multi, sum));
    }

    // Naive equals MB with mu = 0, and the naive result needs no graph.
    CHECK(apply_manipulation({z, edits, Mode::Naive}, v, nullptr, 0.0) ==
          apply_manipulation({z, edits, Mode::MarkovBlanket}, v, &g, 0.0));

    // Listing order of edits does not matter, bit for bit.
    auto shuffled = edits;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(apply_manipulation({z, shuffled, Mode::MarkovBlanket}, v, &g, mu) ==
          apply_manipulation({z, edits, Mode::MarkovBlanket}, v, &g, mu));
  }
  CHECK(single <= 1e-12);
  CHECK(additive <= 1e-12);
}

TEST_CASE("apply_manipulation errors") {
  std::mt19937_64 rng(57);
  auto v = random_vectors(rng, 3, 2);
  auto g = random_graph(rng, 3, 0.5);
  const std::vector<double> z{0.0, 1.0};
  CHECK_THROWS_AS(apply_manipulation({{1.0}, {}, Mode::Naive}, v, nullptr, 0.0), Error);
  CHECK_THROWS_AS(apply_manipulation({z, {{3, 1.0}}, Mode::Naive}, v, nullptr, 0.0), Error);
  CHECK_THROWS_AS(apply_manipulation({z, {{1, 1.0}, {1, 2.0}}, Mode::Naive}, v, nullptr, 0.0), Error);
  CHECK_THROWS_AS(apply_manipulation({z, {{1, NAN}}, Mode::Naive}, v, nullptr, 0.0), Error);
  CHECK_THROWS_AS(apply_manipulation({z, {{1, 1.0}}, Mode::MarkovBlanket}, v, nullptr, 0.1), Error);
  CHECK_THROWS_AS(apply_manipulation({{0.0, INFINITY}, {}, Mode::Naive}, v, nullptr, 0.0), Error);
  auto wrong = random_graph(rng, 4, 0.5);
  CHECK_THROWS_AS(apply_manipulation({z, {{1, 1.0}}, Mode::MarkovBlanket}, v, &wrong, 0.1), Error);
}

TEST_CASE("cosine distance") {
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 2}) == 1.0);
  CHECK(cosine_distance(std::vector<double>{1, 1}, std::vector<double>{2, 2}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{-3, 0}) == 2.0);
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0}), Error);
  CHECK_THROWS_AS(cosine_distance(std::vector<double>{1}, std::vector<double>{1, 0}), Error);
}

TEST_CASE("pearson r against the sums formula") {
  std::mt19937_64 rng(58);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng() % 100;
    std::vector<double> x(n), y(n);
    const double rho = normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = normal(rng);
      y[i] = rho * x[i] + normal(rng);
    }
    const double r = pearson_r(x, y);
    worst = std::max(worst, std::abs(r - oracle::pearson_via_sums(x, y)));
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(pearson_r(y, x) == doctest::Approx(r).epsilon(1e-14));
    std::vector<double> neg(y);
    for (auto& q : neg) q = -q;
    CHECK(pearson_r(x, neg) == doctest::Approx(-r).epsilon(1e-14));
  }
  CHECK(worst <= 1e-12);

  std::vector<double> x{0.1, 0.7, 1.3, 2.0, 5.5}, y;
  for (double q : x) y.push_back(3.0 - 2.0 * q);
  CHECK(std::abs(pearson_r(x, y) - -1.0) <= 1e-12);
  CHECK(pearson_p_value(-1.0, 5) == 0.0);
  CHECK_THROWS_AS(pearson_r(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(pearson_r(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("p-value against quadrature of the t density") {
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<double> ur(-0.99, 0.99);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng() % 200;
    const double r = ur(rng);
    const double df = static_cast<double>(n - 2);
    const double tstat = r * std::sqrt(df / (1.0 - r * r));
    worst = std::max(worst, std::abs(pearson_p_value(r, n) - oracle::t_two_sided_quadrature(tstat, df)));
  }
  CHECK(worst <= 1e-8);
  CHECK(pearson_p_value(0.0, 10) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(pearson_p_value(0.5, 2), Error);
  CHECK_THROWS_AS(pearson_p_value(1.5, 10), Error);
}

TEST_CASE("weight-distance correlation on a random 50-edge graph") {
  std::mt19937_64 rng(60);
  const std::size_t m = 12, d = 8;
  auto v = random_vectors(rng, m, d);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k) pairs.push_back({j, k});
  std::shuffle(pairs.begin(), pairs.end(), rng);
  pairs.resize(50);
  std::vector<double> w(m * m, 0.0);
  for (auto [j, k] : pairs) w[j * m + k] = w[k * m + j] = u(rng);
  IsingGraph g(attr_names(m), std::vector<double>(m, 0.0), w, 0.0, std::vector<double>(m, 0.0));

  auto rep = weight_distance_correlation(v, g);
  REQUIRE(rep.pairs.size() == 50);
  std::vector<double> ws, ds;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k) {
      if (w[j * m + k] == 0.0) continue;
      long double dot = 0, nj = 0, nk = 0;
      for (std::size_t e = 0; e < d; ++e) {
        dot += static_cast<long double>(v.vector(j)[e]) * v.vector(k)[e];
        nj += static_cast<long double>(v.vector(j)[e]) * v.vector(j)[e];
        nk += static_cast<long double>(v.vector(k)[e]) * v.vector(k)[e];
      }
      ws.push_back(w[j * m + k]);
      ds.push_back(static_cast<double>(1.0L - dot / std::sqrt(nj * nk)));
    }
  for (std::size_t p = 0; p < 50; ++p) {
    CHECK(rep.pairs[p].weight == ws[p]);
    CHECK(std::abs(rep.pairs[p].cosine_distance - ds[p]) <= 1e-14);
  }
  CHECK(std::abs(rep.pearson_r - oracle::pearson_via_sums(ws, ds)) <= 1e-12);
  const double tstat = rep.pearson_r * std::sqrt(48.0 / (1.0 - rep.pearson_r * rep.pearson_r));
  CHECK(std::abs(rep.p_value - oracle::t_two_sided_quadrature(tstat, 48.0)) <= 1e-8);
}

TEST_CASE("weight-distance correlation: perfect anticorrelation") {
  // Star around node 0 in the plane: d_0k = 1 - cos(theta_k), and the
  // weights are an exact decreasing affine function of that distance.
  const std::vector<double> theta{0.0, 0.3, 0.9, 1.4, 2.0, 2.7};
  const std::size_t m = theta.size();
  std::vector<double> vec;
  for (double th : theta) {
    vec.push_back(std::cos(th));
    vec.push_back(std::sin(th));
  }
  ManipulationVectors v(attr_names(m), 2, vec);
  std::vector<double> w(m * m, 0.0);
  for (std::size_t k = 1; k < m; ++k) {
    const double dist = cosine_distance(v.vector(0), v.vector(k));
    w[k] = w[k * m] = 5.0 - 2.0 * dist;
  }
  IsingGraph g(attr_names(m), std::vector<double>(m, 0.0), w, 0.0, std::vector<double>(m, 0.0));
  auto rep = weight_distance_correlation(v, g);
  CHECK(std::abs(rep.pearson_r - -1.0) <= 1e-12);
  CHECK(rep.p_value <= 1e-6);
}

TEST_CASE("weight-distance correlation: errors and csv") {
  std::mt19937_64 rng(61);
  auto v = random_vectors(rng, 3, 2);
  auto two_edges = IsingGraph(attr_names(3), {0, 0, 0}, {0, 1, 1, 1, 0, 0, 1, 0, 0}, 0.0, {0, 0, 0});
  CHECK_THROWS_AS(weight_distance_correlation(v, two_edges), Error);
  std::vector<double> zv{1, 0, 0, 0, 0, 1, 1, 1};
  ManipulationVectors zero(attr_names(4), 2, zv);
  std::vector<double> full(16, 1.0);
  for (std::size_t j = 0; j < 4; ++j) full[j * 5] = 0.0;
  IsingGraph k4(attr_names(4), std::vector<double>(4, 0.0), full, 0.0, std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(weight_distance_correlation(zero, k4), Error);

  CorrelationReport r;
  r.pairs = {{0, 1, 0.5, 0.25}, {1, 2, -1.0, 1.5}};
  r.pearson_r = -1.0;
  r.p_value = 0.0;
  CHECK(write_correlation_csv(r, {"A", "B", "C"}) ==
        "i,k,weight,cosine_distance\nA,B,0.5,0.25\nB,C,-1,1.5\n# pearson_r=-1 p_value=0 n=2\n");
  CHECK_THROWS_AS(write_correlation_csv(r, {"A", "B"}), Error);
}

TEST_CASE("vector manifest and storage") {
  VectorManifest m;
  m.kind = VectorManifest::Kind::Corrected;
  m.names = {"Male", "Young"};
  m.dim = 3;
  m.mu = 0.15;
  m.graph_digest = "0123456789abcdef";
  const auto text = write_vector_manifest(m);
  CHECK(text ==
        "iaip-vectors 1\nkind corrected\ncount 2\ndim 3\nmu 0.15\ngraph 0123456789abcdef\nname Male\nname Young\n");
  CHECK(read_vector_manifest(text) == m);

  VectorManifest base;
  base.names = {"A", "B"};
  base.dim = 1;
  CHECK(read_vector_manifest(write_vector_manifest(base)) == base);

  CHECK_THROWS_AS(read_vector_manifest("iaip-vectors 2\n"), Error);
  CHECK_THROWS_AS(read_vector_manifest(text + "name Extra\n"), Error);
  CHECK_THROWS_AS(read_vector_manifest(text.substr(0, text.size() - 11)), Error);
  CHECK_THROWS_AS(read_vector_manifest("iaip-vectors 1\nkind base\ncount 1\ndim 1\nmu 0.1\ngraph none\nname A\n"),
                  Error);
  CHECK_THROWS_AS(read_vector_manifest("iaip-vectors 1\nkind odd\ncount 1\ndim 1\nmu none\ngraph none\nname A\n"),
                  Error);
  CHECK_THROWS_AS(read_vector_manifest("iaip-vectors 1\nkind base\ncount 0\ndim 1\nmu none\ngraph none\n"), Error);
  base.names = {"has space", "B"};
  CHECK_THROWS_AS(write_vector_manifest(base), Error);

  std::mt19937_64 rng(62);
  auto v = random_vectors(rng, 4, 3);
  auto g = random_graph(rng, 4, 0.6);
  auto plain = store_vectors(v, std::nullopt);
  CHECK(plain.manifest.kind == VectorManifest::Kind::Base);
  CHECK(plain.matrix.data() == v.vectors());
  CHECK(load_vectors(plain) == v);

  auto c = mb_correct(v, g, 0.15);
  auto stored = store_vectors(c, graph::graph_digest(g));
  CHECK(stored.manifest.kind == VectorManifest::Kind::Corrected);
  CHECK(stored.manifest.mu == 0.15);
  CHECK(stored.manifest.graph_digest == graph::graph_digest(g));
  CHECK(stored.matrix.data() == *c.corrected());
  CHECK(load_vectors(stored).vectors() == *c.corrected());

  StoredVectors bad{plain.manifest, io::LatentMatrix(3, 3, std::vector<double>(9, 0.0))};
  CHECK_THROWS_AS(load_vectors(bad), Error);
}
