#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchoralign/dataset.hpp"
#include "anchoralign/embedding.hpp"
#include "anchoralign/matrix.hpp"
#include "anchoralign/model.hpp"

namespace anchoralign {

struct EffectiveMap {
  Matrix weight;              // d_out x d_in
  std::vector<double> bias;   // d_out
};

// Folds the affine stack into y = W_eff x + b_eff. A residual layer
// contributes (I + W).
EffectiveMap effective_map(const ProjectionModel& model);

struct WeightReport {
  std::vector<double> singular_values;  // descending
  double tau = 0.01;
  std::size_t eff_rank_threshold = 0;   // #{ s_i >= tau * s_1 }
  double eff_rank_entropy = 0.0;        // exp(H(s / sum s)), natural log
  double orth_deviation = 0.0;          // |W^T W - I|_F
  double bias_norm = 0.0;               // |b_eff|_2
  std::string method;                   // "svd" or "gram"

  nlohmann::json to_json() const;
};

// Square maps go through the Jacobi SVD directly; rectangular maps use the
// square roots of the singular values of the (PSD) Gram matrix W^T W.
WeightReport spectrum_report(const Matrix& w_eff, const std::vector<double>& b_eff, double tau = 0.01);

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Linear-interpolation quantile (position p * (n - 1) in the sorted sample).
double quantile(std::vector<double> sorted_values, double p);
FiveNumber five_number_summary(std::vector<double> values);

struct ClusterStats {
  std::string family;
  std::size_t cluster;
  std::string label;
  std::size_t pairs;
  FiveNumber summary;
};

struct ClusterDistanceReport {
  std::vector<ClusterStats> entries;
  nlohmann::json to_json() const;
};

// Pairwise cosine distance (1 - cos) over the strict upper triangle of each
// cluster, rows L2-normalized first. Cluster labels come from the set's lang
// field when present.
ClusterDistanceReport cosine_cluster_stats(const std::map<std::string, std::vector<EmbeddingSet>>& families);

// Splits a set into clusters by the id prefix before `sep` ("dog/3" -> "dog"),
// clusters ordered by first appearance; the label is stored in lang.
std::vector<EmbeddingSet> split_clusters_by_id(const EmbeddingSet& set, char sep = '/');

struct VizPrepOptions {
  std::size_t k = 100;
  std::size_t top_n = 50;
  std::size_t select = 17;
  std::size_t per_cluster = 10;
  std::size_t min_cluster_size = 3;
  std::uint64_t seed = 0;
  std::size_t kmeans_max_iter = 300;
};

struct VizPoint {
  std::string id;
  std::string family;
  std::size_t cluster;
  std::optional<double> x, y;
};

struct VizPrepOutput {
  std::vector<std::size_t> selected_clusters;  // kmeans cluster ids, selection order
  std::vector<std::string> sampled_ids;        // gallery ids
  std::vector<std::size_t> sampled_clusters;   // parallel to sampled_ids
  std::vector<VizPoint> points;                // text family rows joined on id

  std::string to_csv() const;
};

// KMeans on the gallery, keep the top_n largest clusters of size >=
// min_cluster_size, pick `select` by farthest-cluster traversal, sample up to
// per_cluster members of each, and emit every text-family row that belongs to a
// sampled gallery item: its id equals the gallery id, or, when `relevance` is
// given and lists the row, its first relevant gallery id does.
VizPrepOutput vizprep(const EmbeddingSet& gallery, const std::map<std::string, EmbeddingSet>& text_families,
                      const VizPrepOptions& opts, const Relevance* relevance = nullptr);

}  // namespace anchoralign
