#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchoralign/dataset.hpp"
#include "anchoralign/matrix.hpp"
#include "anchoralign/model.hpp"

namespace anchoralign {

// Recall@K (percent) for each k in ks. Gallery rows are ranked by cosine
// similarity to each query, descending, ties to the lower gallery row. A query
// hits at K when any of its relevant rows ranks inside the top K. When
// `exclude_self` is set, query i is compared against every gallery row except
// row i (queries and gallery are then the same rows).
std::vector<double> recall_at_k(const Matrix& queries, const Matrix& gallery,
                                const std::vector<std::vector<std::size_t>>& relevant,
                                std::span<const std::size_t> ks, bool exclude_self = false,
                                unsigned threads = 1);

std::map<std::size_t, double> recall_at_k(const EmbeddingSet& queries, const EmbeddingSet& gallery,
                                          const Relevance& relevance, std::span<const std::size_t> ks);

// Each caption queries all the other captions; its siblings (same instance id)
// are relevant. Every instance needs >= 2 captions.
std::map<std::size_t, double> t2t_recall(const EmbeddingSet& captions,
                                         std::span<const std::string> instance_ids,
                                         std::span<const std::size_t> ks);

enum class Direction { kQueryToGallery, kGalleryToQuery, kTextToText };

std::string to_string(Direction d);
Direction parse_direction(const std::string& s);

struct RecallEntry {
  std::string lang;
  Direction direction;
  std::size_t k;
  double recall;
};

struct RecallAverage {
  std::string scope;  // "all" or "subset"
  Direction direction;
  std::size_t k;
  double recall;
};

struct RecallReport {
  std::string corpus;
  std::vector<std::size_t> ks;
  std::vector<RecallEntry> results;
  std::vector<RecallAverage> averages;
  std::vector<std::string> subset;  // empty when no subset requested
  std::size_t gallery_size = 0;
  std::map<std::string, std::size_t> query_sizes;
  std::optional<std::string> model;

  nlohmann::json to_json() const;
  std::optional<double> find(const std::string& lang, Direction d, std::size_t k) const;
  std::optional<double> average(const std::string& scope, Direction d, std::size_t k) const;
};

struct EvalOptions {
  std::vector<Direction> directions = {Direction::kQueryToGallery, Direction::kGalleryToQuery};
  std::vector<std::size_t> ks = {1, 5, 10};
  std::optional<std::vector<std::string>> lang_subset;
  unsigned threads = 1;
};

// Projects every query set through `model` when given (the gallery is never
// touched), then scores each language and direction. Gallery-to-query treats
// each gallery item with at least one relevant query in that language as a
// query over that language's (projected) captions. Text-to-text groups a
// language's captions by their first relevant gallery id.
RecallReport evaluate_corpus(const ProjectionModel* model, const RetrievalCorpus& corpus,
                             const EvalOptions& opts);

}  // namespace anchoralign
