#include "anchoralign/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "anchoralign/error.hpp"
#include "anchoralign/rng.hpp"

namespace anchoralign {

namespace fs = std::filesystem;
using nlohmann::json;

void RetrievalCorpus::validate() const {
  gallery.validate();
  std::unordered_set<std::string_view> gallery_ids(gallery.ids.begin(), gallery.ids.end());
  for (const auto& [qid, rel] : relevance) {
    if (rel.empty()) throw Error(ErrorCode::kEmptyRelevance, "query '" + qid + "'");
    for (const auto& gid : rel) {
      if (!gallery_ids.contains(gid)) {
        throw Error(ErrorCode::kMalformed,
                    "query '" + qid + "' lists gallery id '" + gid + "' missing from gallery");
      }
    }
  }
  for (const auto& [lang, set] : query_sets) {
    set.validate();
    for (const auto& qid : set.ids) {
      if (!relevance.contains(qid)) {
        throw Error(ErrorCode::kEmptyRelevance, "query '" + qid + "' (" + lang + ") has no relevance entry");
      }
    }
  }
}

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

PairedDataset build_pairs(const EmbeddingSet& zm, const EmbeddingSet& ze,
                          std::optional<std::size_t> expect_dm,
                          std::optional<std::size_t> expect_de) {
  if (!zm.texts || !ze.texts) {
    throw Error(ErrorCode::kInvalidArgument, "pair construction needs texts on both sides");
  }
  if (expect_dm && *expect_dm != zm.d) {
    throw Error(ErrorCode::kDimensionMismatch, "zm width " + std::to_string(zm.d) +
                                                   " but manifest declares " + std::to_string(*expect_dm));
  }
  if (expect_de && *expect_de != ze.d) {
    throw Error(ErrorCode::kDimensionMismatch, "ze width " + std::to_string(ze.d) +
                                                   " but manifest declares " + std::to_string(*expect_de));
  }
  std::unordered_map<std::string_view, std::size_t> ze_row;
  ze_row.reserve(ze.n);
  for (std::size_t i = 0; i < ze.n; ++i) ze_row.emplace(ze.ids[i], i);

  std::vector<std::pair<std::size_t, std::size_t>> matched;
  for (std::size_t i = 0; i < zm.n; ++i) {
    auto it = ze_row.find(zm.ids[i]);
    if (it != ze_row.end()) matched.emplace_back(i, it->second);
  }
  const bool any_match = !matched.empty();
  std::sort(matched.begin(), matched.end(),
            [&](const auto& a, const auto& b) { return zm.ids[a.first] < zm.ids[b.first]; });
  std::vector<std::size_t> keep_m, keep_e;
  std::unordered_set<std::string> seen_text;
  for (const auto& [i, j] : matched) {
    if (!seen_text.insert(trim((*zm.texts)[i])).second) continue;
    keep_m.push_back(i);
    keep_e.push_back(j);
  }
  if (!any_match) throw Error(ErrorCode::kEmptyIntersection, "zm and ze share no ids");
  return {zm.select(keep_m), ze.select(keep_e)};
}

PairedDataset sample_split(const PairedDataset& pairs, std::size_t n, std::uint64_t seed) {
  const std::size_t total = pairs.size();
  if (n > total) {
    throw Error(ErrorCode::kInvalidArgument, "split of " + std::to_string(n) + " from " +
                                                 std::to_string(total) + " pairs");
  }
  Rng rng(seed);
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_index(total - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return {pairs.zm.select(idx), pairs.ze.select(idx)};
}

EmbeddingSet concat(const std::vector<EmbeddingSet>& sets) {
  if (sets.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to concatenate");
  EmbeddingSet out;
  out.d = sets.front().d;
  out.lang = sets.front().lang;
  const bool with_texts = std::all_of(sets.begin(), sets.end(), [](const auto& s) { return s.texts.has_value(); });
  if (with_texts) out.texts.emplace();
  for (const auto& s : sets) {
    if (s.d != out.d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "cannot concatenate widths " + std::to_string(out.d) + " and " + std::to_string(s.d));
    }
    out.n += s.n;
    out.values.insert(out.values.end(), s.values.begin(), s.values.end());
    out.ids.insert(out.ids.end(), s.ids.begin(), s.ids.end());
    if (with_texts) out.texts->insert(out.texts->end(), s.texts->begin(), s.texts->end());
  }
  out.validate();
  return out;
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
}

fs::path resolve(const fs::path& base_file, const std::string& p) {
  fs::path candidate(p);
  return candidate.is_absolute() ? candidate : base_file.parent_path() / candidate;
}

}  // namespace

PairManifest read_pair_manifest(const fs::path& path) {
  const json j = read_json(path);
  PairManifest m;
  try {
    m.zm = resolve(path, j.at("zm").get<std::string>());
    m.ze = resolve(path, j.at("ze").get<std::string>());
    if (j.contains("d_m")) m.d_m = j["d_m"].get<std::size_t>();
    if (j.contains("d_e")) m.d_e = j["d_e"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
  return m;
}

void write_pair_manifest(const PairManifest& m, const fs::path& path) {
  json j = {{"zm", m.zm.string()}, {"ze", m.ze.string()}};
  if (m.d_m) j["d_m"] = *m.d_m;
  if (m.d_e) j["d_e"] = *m.d_e;
  write_json(j, path);
}

PairedDataset load_pairs(const std::vector<fs::path>& manifests) {
  if (manifests.empty()) throw Error(ErrorCode::kInvalidArgument, "no pair manifests given");
  std::vector<EmbeddingSet> zms, zes;
  std::optional<std::size_t> dm, de;
  for (const auto& path : manifests) {
    const auto m = read_pair_manifest(path);
    zms.push_back(read_emb1(m.zm));
    zes.push_back(read_emb1(m.ze));
    if (m.d_m) {
      if (zms.back().d != *m.d_m) {
        throw Error(ErrorCode::kDimensionMismatch, path.string() + ": zm width " +
                                                       std::to_string(zms.back().d) + " != declared " +
                                                       std::to_string(*m.d_m));
      }
      dm = m.d_m;
    }
    if (m.d_e) {
      if (zes.back().d != *m.d_e) {
        throw Error(ErrorCode::kDimensionMismatch, path.string() + ": ze width " +
                                                       std::to_string(zes.back().d) + " != declared " +
                                                       std::to_string(*m.d_e));
      }
      de = m.d_e;
    }
  }
  return build_pairs(concat(zms), concat(zes), dm, de);
}

Relevance read_relevance_jsonl(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  Relevance rel;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      auto& ids = rel[j.at("query_id").get<std::string>()];
      for (const auto& g : j.at("gallery_ids")) ids.push_back(g.get<std::string>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformed, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rel;
}

void write_relevance_jsonl(const Relevance& rel, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  for (const auto& [qid, ids] : rel) {
    f << json({{"query_id", qid}, {"gallery_ids", ids}}).dump() << '\n';
  }
}

RetrievalCorpus read_corpus(const fs::path& manifest) {
  const json j = read_json(manifest);
  RetrievalCorpus c;
  try {
    c.name = j.value("name", manifest.stem().string());
    c.gallery = read_emb1(resolve(manifest, j.at("gallery").get<std::string>()));
    for (const auto& q : j.at("queries")) {
      const auto lang = q.at("lang").get<std::string>();
      auto set = read_emb1(resolve(manifest, q.at("file").get<std::string>()));
      if (!c.query_sets.emplace(lang, std::move(set)).second) {
        throw Error(ErrorCode::kMalformed, manifest.string() + ": language '" + lang + "' listed twice");
      }
    }
    c.relevance = read_relevance_jsonl(resolve(manifest, j.at("relevance").get<std::string>()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, manifest.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

fs::path write_corpus(const RetrievalCorpus& corpus, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  const std::string gallery_file = stem + ".gallery.emb1";
  const std::string rel_file = stem + ".relevance.jsonl";
  write_emb1(corpus.gallery, dir / gallery_file);
  write_relevance_jsonl(corpus.relevance, dir / rel_file);
  json queries = json::array();
  for (const auto& [lang, set] : corpus.query_sets) {
    const std::string file = stem + ".queries." + lang + ".emb1";
    write_emb1(set, dir / file);
    queries.push_back({{"lang", lang}, {"file", file}});
  }
  const json j = {{"name", corpus.name.empty() ? stem : corpus.name},
                  {"gallery", gallery_file},
                  {"queries", queries},
                  {"relevance", rel_file}};
  const fs::path path = dir / (stem + ".corpus.json");
  write_json(j, path);
  return path;
}

}  // namespace anchoralign
