#include "anchoralign/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "anchoralign/cluster.hpp"
#include "anchoralign/error.hpp"
#include "anchoralign/rng.hpp"
#include "anchoralign/svd.hpp"

namespace anchoralign {

using nlohmann::json;

EffectiveMap effective_map(const ProjectionModel& model) {
  if (model.layers.empty()) throw Error(ErrorCode::kInvalidArgument, "model has no layers");
  EffectiveMap eff{Matrix::identity(model.layers.front().in()),
                   std::vector<double>(model.layers.front().in(), 0.0)};
  for (const auto& layer : model.layers) {
    Matrix a = layer.weight;
    if (layer.residual) a = add(a, Matrix::identity(a.rows()));
    eff.weight = matmul(a, eff.weight);
    std::vector<double> b(layer.bias);
    for (std::size_t r = 0; r < a.rows(); ++r) b[r] += dot(a.row(r), eff.bias);
    eff.bias = std::move(b);
  }
  return eff;
}

json WeightReport::to_json() const {
  return {{"singular_values", singular_values},
          {"tau", tau},
          {"eff_rank_threshold", eff_rank_threshold},
          {"eff_rank_entropy", eff_rank_entropy},
          {"orth_deviation", orth_deviation},
          {"bias_norm", bias_norm},
          {"method", method}};
}

WeightReport spectrum_report(const Matrix& w, const std::vector<double>& b, double tau) {
  if (!all_finite(w)) throw Error(ErrorCode::kNonFinite, "effective map has non-finite entries");
  if (b.size() != w.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "bias of length " + std::to_string(b.size()) + " for map " + w.shape());
  }
  WeightReport r;
  r.tau = tau;
  const Matrix gram = matmul_at(w, w);
  if (w.rows() == w.cols()) {
    r.method = "svd";
    r.singular_values = svd(w).s;
  } else {
    r.method = "gram";
    const auto eig = svd(gram).s;
    const std::size_t keep = std::min(w.rows(), w.cols());
    for (std::size_t i = 0; i < keep; ++i) r.singular_values.push_back(std::sqrt(eig[i]));
  }
  const auto& s = r.singular_values;
  if (!s.empty() && s.front() > 0.0) {
    for (double v : s) r.eff_rank_threshold += v >= tau * s.front() ? 1 : 0;
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    double h = 0.0;
    for (double v : s) {
      if (v <= 0.0) continue;
      const double p = v / total;
      h -= p * std::log(p);
    }
    r.eff_rank_entropy = std::exp(h);
  }
  r.orth_deviation = frobenius_norm(subtract(gram, Matrix::identity(gram.rows())));
  r.bias_norm = norm2(b);
  return r;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * double(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - double(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

FiveNumber five_number_summary(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "summary of an empty sample");
  std::sort(values.begin(), values.end());
  return {values.front(), quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75), values.back()};
}

json ClusterDistanceReport::to_json() const {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"family", e.family},
                   {"cluster", e.cluster},
                   {"label", e.label},
                   {"pairs", e.pairs},
                   {"min", e.summary.min},
                   {"q1", e.summary.q1},
                   {"median", e.summary.median},
                   {"q3", e.summary.q3},
                   {"max", e.summary.max}});
  }
  return {{"distance", "1 - cosine"}, {"quantiles", "linear interpolation"}, {"clusters", arr}};
}

ClusterDistanceReport cosine_cluster_stats(const std::map<std::string, std::vector<EmbeddingSet>>& families) {
  ClusterDistanceReport report;
  for (const auto& [family, clusters] : families) {
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const EmbeddingSet& set = clusters[c];
      if (set.n < 2) {
        throw Error(ErrorCode::kSingletonGroup, "family '" + family + "' cluster " + std::to_string(c) + " (" +
                                                    set.lang + ") has fewer than 2 rows");
      }
      const Matrix m = l2_normalize_rows(set.matrix());
      std::vector<double> d;
      d.reserve(set.n * (set.n - 1) / 2);
      for (std::size_t i = 0; i < set.n; ++i)
        for (std::size_t j = i + 1; j < set.n; ++j) d.push_back(std::clamp(1.0 - dot(m.row(i), m.row(j)), 0.0, 2.0));
      report.entries.push_back({family, c, set.lang, d.size(), five_number_summary(std::move(d))});
    }
  }
  return report;
}

std::vector<EmbeddingSet> split_clusters_by_id(const EmbeddingSet& set, char sep) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < set.n; ++i) {
    const auto pos = set.ids[i].find(sep);
    const std::string label = pos == std::string::npos ? set.ids[i] : set.ids[i].substr(0, pos);
    auto [it, fresh] = rows.try_emplace(label);
    if (fresh) order.push_back(label);
    it->second.push_back(i);
  }
  std::vector<EmbeddingSet> out;
  for (const auto& label : order) {
    EmbeddingSet c = set.select(rows[label]);
    c.lang = label;
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string VizPrepOutput::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "id,family,cluster,x,y\n";
  for (const auto& p : points) {
    os << csv_field(p.id) << ',' << csv_field(p.family) << ',' << p.cluster << ',';
    if (p.x) os << *p.x;
    os << ',';
    if (p.y) os << *p.y;
    os << '\n';
  }
  return os.str();
}

VizPrepOutput vizprep(const EmbeddingSet& gallery, const std::map<std::string, EmbeddingSet>& text_families,
                      const VizPrepOptions& o, const Relevance* relevance) {
  if (o.k > gallery.n) {
    throw Error(ErrorCode::kInvalidArgument,
                "k=" + std::to_string(o.k) + " exceeds gallery size " + std::to_string(gallery.n));
  }
  if (o.select > o.top_n) {
    throw Error(ErrorCode::kInvalidArgument,
                "select=" + std::to_string(o.select) + " exceeds top_n=" + std::to_string(o.top_n));
  }
  const KMeansResult km = kmeans(gallery.matrix(), o.k, o.seed, o.kmeans_max_iter);

  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < o.k; ++c)
    if (km.sizes[c] >= o.min_cluster_size) eligible.push_back(c);
  std::stable_sort(eligible.begin(), eligible.end(),
                   [&](std::size_t a, std::size_t b) { return km.sizes[a] > km.sizes[b]; });
  if (eligible.size() > o.top_n) eligible.resize(o.top_n);
  if (eligible.size() < o.select) {
    throw Error(ErrorCode::kInsufficientClusters,
                std::to_string(eligible.size()) + " eligible clusters (size >= " + std::to_string(o.min_cluster_size) +
                    ") but select=" + std::to_string(o.select));
  }

  VizPrepOutput out;
  out.selected_clusters = farthest_cluster_selection(km.centroids, eligible, km.sizes, o.select);

  Rng rng(o.seed, 1);
  for (std::size_t c : out.selected_clusters) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < gallery.n; ++i)
      if (km.assignments[i] == c) members.push_back(i);
    const std::size_t take = std::min(o.per_cluster, members.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(members[i], members[i + rng.uniform_index(members.size() - i)]);
      out.sampled_ids.push_back(gallery.ids[members[i]]);
      out.sampled_clusters.push_back(c);
    }
  }

  for (const auto& [family, set] : text_families) {
    std::unordered_map<std::string_view, std::vector<std::size_t>> rows_of;
    for (std::size_t i = 0; i < set.n; ++i) {
      std::string_view instance = set.ids[i];
      if (relevance) {
        auto it = relevance->find(set.ids[i]);
        if (it != relevance->end() && !it->second.empty()) instance = it->second.front();
      }
      rows_of[instance].push_back(i);
    }
    for (std::size_t s = 0; s < out.sampled_ids.size(); ++s) {
      auto it = rows_of.find(out.sampled_ids[s]);
      if (it == rows_of.end()) continue;
      for (std::size_t i : it->second)
        out.points.push_back({set.ids[i], family, out.sampled_clusters[s], std::nullopt, std::nullopt});
    }
  }
  return out;
}

}  // namespace anchoralign
