#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iaip/attr_io.hpp"
#include "iaip/ising_graph.hpp"

namespace iaip::debias {

// One latent-space direction per attribute (M x D, row-major), optionally
// with the Markov-blanket corrected counterparts and the strength used.
class ManipulationVectors {
 public:
  ManipulationVectors(std::vector<std::string> names, std::size_t dim, std::vector<double> vectors,
                      std::optional<std::vector<double>> corrected = std::nullopt,
                      std::optional<double> mu = std::nullopt);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& vectors() const noexcept { return vectors_; }
  const std::optional<std::vector<double>>& corrected() const noexcept { return corrected_; }
  std::optional<double> mu() const noexcept { return mu_; }

  std::span<const double> vector(std::size_t i) const noexcept {
    return {vectors_.data() + i * dim_, dim_};
  }
  std::span<const double> corrected_vector(std::size_t i) const noexcept {
    return {corrected_->data() + i * dim_, dim_};
  }

  std::size_t find(std::string_view name) const noexcept;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  friend bool operator==(const ManipulationVectors&, const ManipulationVectors&) = default;

 private:
  std::vector<std::string> names_;
  std::size_t dim_;
  std::vector<double> vectors_;
  std::optional<std::vector<double>> corrected_;
  std::optional<double> mu_;
};

// vectors[i] = mean(latents | A_i = 1) - mean(latents | A_i = 0)
ManipulationVectors compute_manip_vectors(const io::LatentMatrix& latents, const io::AttributeMatrix& a);

// corrected[i] = vectors[i] - mu * sum_{k in blanket(i)} w_ik vectors[k]
ManipulationVectors mb_correct(const ManipulationVectors& v, const graph::IsingGraph& g, double mu);

enum class Mode { Naive, MarkovBlanket };

struct Edit {
  std::size_t attr = 0;
  double alpha = 0.0;
};

struct ManipulationRequest {
  std::vector<double> latent;
  std::vector<Edit> edits;
  Mode mode = Mode::Naive;
};

// Moves `latent` along the requested attribute directions. Edits are applied
// in ascending attribute order and, in Markov-blanket mode, each edit's
// neighbour terms in ascending neighbour order, so the result is independent
// of the order edits were listed in. `g` may be null in naive mode.
std::vector<double> apply_manipulation(const ManipulationRequest& req, const ManipulationVectors& v,
                                       const graph::IsingGraph* g, double mu);

struct EdgeDistance {
  std::size_t i = 0;
  std::size_t k = 0;
  double weight = 0.0;
  double cosine_distance = 0.0;
};

struct CorrelationReport {
  std::vector<EdgeDistance> pairs;
  double pearson_r = 0.0;
  double p_value = 1.0;
};

double cosine_distance(std::span<const double> a, std::span<const double> b);
double pearson_r(std::span<const double> x, std::span<const double> y);
// Two-sided p-value of H0: rho = 0 via the t statistic with n - 2 degrees of freedom.
double pearson_p_value(double r, std::size_t n);

CorrelationReport weight_distance_correlation(const ManipulationVectors& v, const graph::IsingGraph& g);

// i,k,weight,cosine_distance rows (attribute names) and a trailing
// "# pearson_r=<r> p_value=<p> n=<n>" line.
std::string write_correlation_csv(const CorrelationReport& r, const std::vector<std::string>& names);

// Sidecar metadata stored next to a vector matrix file.
struct VectorManifest {
  enum class Kind { Base, Corrected };
  Kind kind = Kind::Base;
  std::vector<std::string> names;
  std::size_t dim = 0;
  std::optional<double> mu;
  std::optional<std::string> graph_digest;

  friend bool operator==(const VectorManifest&, const VectorManifest&) = default;
};

std::string write_vector_manifest(const VectorManifest& m);
VectorManifest read_vector_manifest(std::string_view text);

struct StoredVectors {
  VectorManifest manifest;
  io::LatentMatrix matrix;  // rows follow manifest.names
};

// Base vectors, or the corrected ones when present (kind Corrected, with mu
// and the digest of the correcting graph).
StoredVectors store_vectors(const ManipulationVectors& v, const std::optional<std::string>& graph_digest);
// Loads the stored matrix as base vectors of a fresh ManipulationVectors.
ManipulationVectors load_vectors(const StoredVectors& s);

}  // namespace iaip::debias
