#include "anchoralign/retrieval.hpp"

#include <algorithm>
#include <unordered_map>

#include "anchoralign/error.hpp"
#include "anchoralign/parallel.hpp"

namespace anchoralign {

namespace {

void check_ks(std::span<const std::size_t> ks, std::size_t candidates) {
  if (ks.empty()) throw Error(ErrorCode::kInvalidArgument, "no K values given");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
    if (i > 0 && ks[i] <= ks[i - 1]) throw Error(ErrorCode::kInvalidArgument, "K list must be strictly ascending");
    if (ks[i] > candidates) {
      throw Error(ErrorCode::kInvalidArgument, "K=" + std::to_string(ks[i]) + " exceeds the " +
                                                   std::to_string(candidates) + " ranked candidates");
    }
  }
}

}  // namespace

std::vector<double> recall_at_k(const Matrix& queries, const Matrix& gallery,
                                const std::vector<std::vector<std::size_t>>& relevant,
                                std::span<const std::size_t> ks, bool exclude_self, unsigned threads) {
  if (queries.cols() != gallery.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "queries " + queries.shape() + " vs gallery " + gallery.shape());
  }
  if (relevant.size() != queries.rows()) {
    throw Error(ErrorCode::kIdCountMismatch, std::to_string(relevant.size()) + " relevance lists for " +
                                                 std::to_string(queries.rows()) + " queries");
  }
  if (exclude_self && queries.rows() != gallery.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "self-exclusion needs queries and gallery to be the same rows");
  }
  if (queries.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "no queries");
  check_ks(ks, gallery.rows() - (exclude_self ? 1 : 0));
  for (std::size_t q = 0; q < relevant.size(); ++q) {
    if (relevant[q].empty()) throw Error(ErrorCode::kEmptyRelevance, "query row " + std::to_string(q));
    for (std::size_t r : relevant[q]) {
      if (r >= gallery.rows() || (exclude_self && r == q)) {
        throw Error(ErrorCode::kInvalidArgument, "query row " + std::to_string(q) + " lists invalid relevant row " +
                                                     std::to_string(r));
      }
    }
  }

  const Matrix qn = l2_normalize_rows(queries);
  const Matrix gn = l2_normalize_rows(gallery);
  // best_rank[q]: 0-based rank of the best-placed relevant row.
  std::vector<std::size_t> best_rank(qn.rows());
  parallel_for(qn.rows(), threads, [&](std::size_t q) {
    std::vector<double> sims(gn.rows());
    for (std::size_t j = 0; j < gn.rows(); ++j) sims[j] = dot(qn.row(q), gn.row(j));
    std::size_t best = gn.rows();
    for (std::size_t r : relevant[q]) {
      std::size_t rank = 0;
      for (std::size_t j = 0; j < gn.rows(); ++j) {
        if (j == r || (exclude_self && j == q)) continue;
        if (sims[j] > sims[r] || (sims[j] == sims[r] && j < r)) ++rank;
      }
      best = std::min(best, rank);
    }
    best_rank[q] = best;
  });

  std::vector<double> out;
  out.reserve(ks.size());
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : best_rank) hits += r < k ? 1 : 0;
    out.push_back(100.0 * double(hits) / double(best_rank.size()));
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> relevant_rows(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                                                    const Relevance& relevance) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < gallery.n; ++i) row_of.emplace(gallery.ids[i], i);
  std::vector<std::vector<std::size_t>> rel(queries.n);
  for (std::size_t q = 0; q < queries.n; ++q) {
    auto it = relevance.find(queries.ids[q]);
    if (it == relevance.end() || it->second.empty()) {
      throw Error(ErrorCode::kEmptyRelevance, "query '" + queries.ids[q] + "'");
    }
    for (const auto& gid : it->second) {
      auto g = row_of.find(gid);
      if (g == row_of.end()) {
        throw Error(ErrorCode::kMalformed, "query '" + queries.ids[q] + "' lists unknown gallery id '" + gid + "'");
      }
      rel[q].push_back(g->second);
    }
  }
  return rel;
}

std::map<std::size_t, double> keyed(std::span<const std::size_t> ks, const std::vector<double>& v) {
  std::map<std::size_t, double> out;
  for (std::size_t i = 0; i < ks.size(); ++i) out[ks[i]] = v[i];
  return out;
}

std::vector<std::vector<std::size_t>> sibling_rows(std::span<const std::string> instance_ids) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instance_ids.size(); ++i) groups[instance_ids[i]].push_back(i);
  for (const auto& [inst, rows] : groups) {
    if (rows.size() < 2) throw Error(ErrorCode::kSingletonGroup, "instance '" + inst + "' has one caption");
  }
  std::vector<std::vector<std::size_t>> rel(instance_ids.size());
  for (std::size_t i = 0; i < instance_ids.size(); ++i) {
    for (std::size_t j : groups[instance_ids[i]])
      if (j != i) rel[i].push_back(j);
  }
  return rel;
}

}  // namespace

std::map<std::size_t, double> recall_at_k(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                                          const Relevance& relevance, std::span<const std::size_t> ks) {
  return keyed(ks, recall_at_k(queries.matrix(), gallery.matrix(), relevant_rows(queries, gallery, relevance), ks));
}

std::map<std::size_t, double> t2t_recall(const EmbeddingSet& captions, std::span<const std::string> instance_ids,
                                         std::span<const std::size_t> ks) {
  if (instance_ids.size() != captions.n) {
    throw Error(ErrorCode::kIdCountMismatch, std::to_string(instance_ids.size()) + " instance ids for " +
                                                 std::to_string(captions.n) + " captions");
  }
  const Matrix m = captions.matrix();
  return keyed(ks, recall_at_k(m, m, sibling_rows(instance_ids), ks, true));
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::kQueryToGallery: return "query_to_gallery";
    case Direction::kGalleryToQuery: return "gallery_to_query";
    case Direction::kTextToText: return "text_to_text";
  }
  return "query_to_gallery";
}

Direction parse_direction(const std::string& s) {
  if (s == "query_to_gallery" || s == "q2g" || s == "t2i" || s == "t2a") return Direction::kQueryToGallery;
  if (s == "gallery_to_query" || s == "g2q" || s == "i2t" || s == "a2t") return Direction::kGalleryToQuery;
  if (s == "text_to_text" || s == "t2t") return Direction::kTextToText;
  throw Error(ErrorCode::kInvalidArgument, "unknown direction '" + s + "'");
}

nlohmann::json RecallReport::to_json() const {
  using nlohmann::json;
  json results_j = json::array();
  for (const auto& e : results) {
    results_j.push_back({{"lang", e.lang}, {"direction", to_string(e.direction)}, {"k", e.k}, {"recall", e.recall}});
  }
  json avg = json::object();
  for (const auto& a : averages) {
    avg[a.scope][to_string(a.direction)][std::to_string(a.k)] = a.recall;
  }
  if (!subset.empty()) avg["subset_langs"] = subset;
  json j = {{"corpus", corpus},
            {"ks", ks},
            {"results", results_j},
            {"averages", avg},
            {"gallery_size", gallery_size},
            {"query_sizes", query_sizes}};
  j["model"] = model ? json(*model) : json(nullptr);
  return j;
}

std::optional<double> RecallReport::find(const std::string& lang, Direction d, std::size_t k) const {
  for (const auto& e : results)
    if (e.lang == lang && e.direction == d && e.k == k) return e.recall;
  return std::nullopt;
}

std::optional<double> RecallReport::average(const std::string& scope, Direction d, std::size_t k) const {
  for (const auto& a : averages)
    if (a.scope == scope && a.direction == d && a.k == k) return a.recall;
  return std::nullopt;
}

RecallReport evaluate_corpus(const ProjectionModel* model, const RetrievalCorpus& corpus, const EvalOptions& opts) {
  if (corpus.query_sets.empty()) throw Error(ErrorCode::kInvalidArgument, "corpus has no query sets");
  if (opts.directions.empty()) throw Error(ErrorCode::kInvalidArgument, "no retrieval directions requested");
  if (opts.lang_subset) {
    if (opts.lang_subset->empty()) throw Error(ErrorCode::kInvalidArgument, "empty language subset");
    for (const auto& lang : *opts.lang_subset) {
      if (!corpus.query_sets.contains(lang)) throw Error(ErrorCode::kUnknownLanguage, "'" + lang + "'");
    }
  }

  RecallReport report;
  report.corpus = corpus.name;
  report.ks = opts.ks;
  report.gallery_size = corpus.gallery.n;
  if (opts.lang_subset) report.subset = *opts.lang_subset;

  const Matrix gallery = corpus.gallery.matrix();
  std::unordered_map<std::string_view, std::size_t> gallery_row;
  for (std::size_t i = 0; i < corpus.gallery.n; ++i) gallery_row.emplace(corpus.gallery.ids[i], i);

  for (const auto& [lang, set] : corpus.query_sets) {
    report.query_sizes[lang] = set.n;
    const Matrix queries = model ? project(*model, set.matrix()) : set.matrix();
    const auto q2g = relevant_rows(set, corpus.gallery, corpus.relevance);
    for (Direction dir : opts.directions) {
      std::vector<double> scores;
      if (dir == Direction::kQueryToGallery) {
        scores = recall_at_k(queries, gallery, q2g, opts.ks, false, opts.threads);
      } else if (dir == Direction::kGalleryToQuery) {
        std::vector<std::vector<std::size_t>> inverted(corpus.gallery.n);
        for (std::size_t q = 0; q < q2g.size(); ++q)
          for (std::size_t g : q2g[q]) inverted[g].push_back(q);
        std::vector<std::size_t> rows;
        std::vector<std::vector<std::size_t>> rel;
        for (std::size_t g = 0; g < inverted.size(); ++g) {
          if (inverted[g].empty()) continue;
          rows.push_back(g);
          rel.push_back(std::move(inverted[g]));
        }
        Matrix gq(rows.size(), gallery.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
          std::copy(gallery.row(rows[i]).begin(), gallery.row(rows[i]).end(), gq.row(i).begin());
        scores = recall_at_k(gq, queries, rel, opts.ks, false, opts.threads);
      } else {
        std::vector<std::string> instance(set.n);
        for (std::size_t q = 0; q < set.n; ++q) instance[q] = corpus.relevance.at(set.ids[q]).front();
        scores = recall_at_k(queries, queries, sibling_rows(instance), opts.ks, true, opts.threads);
      }
      for (std::size_t i = 0; i < opts.ks.size(); ++i) {
        report.results.push_back({lang, dir, opts.ks[i], scores[i]});
      }
    }
  }

  auto add_averages = [&](const std::string& scope, const std::vector<std::string>& langs) {
    for (Direction dir : opts.directions) {
      for (std::size_t k : opts.ks) {
        double sum = 0.0;
        for (const auto& lang : langs) sum += *report.find(lang, dir, k);
        report.averages.push_back({scope, dir, k, sum / double(langs.size())});
      }
    }
  };
  std::vector<std::string> all_langs;
  for (const auto& [lang, set] : corpus.query_sets) all_langs.push_back(lang);
  add_averages("all", all_langs);
  if (opts.lang_subset) add_averages("subset", *opts.lang_subset);
  return report;
}

}  // namespace anchoralign
