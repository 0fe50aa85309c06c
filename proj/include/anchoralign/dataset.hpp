#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anchoralign/embedding.hpp"

namespace anchoralign {

// Row i of zm and ze embed the same English sentence.
struct PairedDataset {
  EmbeddingSet zm;  // multilingual encoder side, d_m
  EmbeddingSet ze;  // multimodal text side, d_e

  std::size_t size() const noexcept { return zm.n; }
};

// query id -> relevant gallery ids
using Relevance = std::map<std::string, std::vector<std::string>>;

struct RetrievalCorpus {
  std::string name;
  EmbeddingSet gallery;
  std::map<std::string, EmbeddingSet> query_sets;  // keyed by language
  Relevance relevance;

  // Every query has >= 1 relevant id and every relevant id is in the gallery.
  void validate() const;
};

// Inner join on id, ordered by id so the result does not depend on file
// row order; rows whose trimmed text repeats an earlier row's are dropped. Optional expected widths come from the pair manifest.
PairedDataset build_pairs(const EmbeddingSet& zm, const EmbeddingSet& ze,
                          std::optional<std::size_t> expect_dm = std::nullopt,
                          std::optional<std::size_t> expect_de = std::nullopt);

// Partial Fisher-Yates draw of n rows; output is in draw order.
PairedDataset sample_split(const PairedDataset& pairs, std::size_t n, std::uint64_t seed);

// Row-wise concatenation; ids must stay unique across the inputs.
EmbeddingSet concat(const std::vector<EmbeddingSet>& sets);

std::string trim(std::string_view s);

// --- manifests -------------------------------------------------------------

struct PairManifest {
  std::filesystem::path zm;
  std::filesystem::path ze;
  std::optional<std::size_t> d_m;
  std::optional<std::size_t> d_e;
};

PairManifest read_pair_manifest(const std::filesystem::path& path);
void write_pair_manifest(const PairManifest& m, const std::filesystem::path& path);

// Loads every manifest, concatenates their sides and then joins/dedups once.
PairedDataset load_pairs(const std::vector<std::filesystem::path>& manifests);

// {"gallery": path, "queries": [{"lang", "file"}], "relevance": jsonl path};
// relative paths resolve against the manifest's directory.
RetrievalCorpus read_corpus(const std::filesystem::path& manifest);

// Writes gallery/query EMB1 files, relevance JSONL and the manifest under dir.
std::filesystem::path write_corpus(const RetrievalCorpus& corpus, const std::filesystem::path& dir,
                                   const std::string& stem);

Relevance read_relevance_jsonl(const std::filesystem::path& path);
void write_relevance_jsonl(const Relevance& rel, const std::filesystem::path& path);

}  // namespace anchoralign
