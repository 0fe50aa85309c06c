#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anchoralign/matrix.hpp"

namespace anchoralign {

// n x d float32 embeddings with row ids, a language tag and optional texts.
struct EmbeddingSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> values;  // row-major, n * d
  std::vector<std::string> ids;
  std::string lang;
  std::optional<std::vector<std::string>> texts;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * d, d}; }

  // Widened to 64-bit for compute.
  Matrix matrix() const;

  // Rounds to float32 storage.
  static EmbeddingSet from_matrix(const Matrix& m, std::vector<std::string> ids, std::string lang,
                                  std::optional<std::vector<std::string>> texts = std::nullopt);

  // Throws on violated invariants (sizes, unique ids, d > 0, finite values).
  void validate() const;

  // Rows in the given order (indices may repeat only if ids stay unique).
  EmbeddingSet select(std::span<const std::size_t> rows) const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

// EMB1 binary layout, little-endian:
//   "M2E1" | u32 version=1 | u32 dtype=1 (float32) | u64 n | u64 d |
//   n*d float32 row-major | u64 metadata length | UTF-8 JSON
//   {"lang": str, "ids": [str], "texts": [str] | null}
inline constexpr char kEmb1Magic[4] = {'M', '2', 'E', '1'};
inline constexpr std::uint32_t kEmb1Version = 1;
inline constexpr std::uint32_t kEmb1DtypeFloat32 = 1;

std::vector<std::uint8_t> encode_emb1(const EmbeddingSet& set);
EmbeddingSet decode_emb1(std::span<const std::uint8_t> bytes);

void write_emb1(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_emb1(const std::filesystem::path& path);

}  // namespace anchoralign
