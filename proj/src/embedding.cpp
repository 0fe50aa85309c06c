#include "anchoralign/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <json.hpp>

#include "anchoralign/error.hpp"

namespace anchoralign {

using nlohmann::json;

Matrix EmbeddingSet::matrix() const {
  std::vector<double> wide(values.begin(), values.end());
  return Matrix(n, d, std::move(wide));
}

EmbeddingSet EmbeddingSet::from_matrix(const Matrix& m, std::vector<std::string> ids,
                                       std::string lang,
                                       std::optional<std::vector<std::string>> texts) {
  EmbeddingSet s;
  s.n = m.rows();
  s.d = m.cols();
  s.values.reserve(m.size());
  for (double v : m.data()) s.values.push_back(static_cast<float>(v));
  s.ids = std::move(ids);
  s.lang = std::move(lang);
  s.texts = std::move(texts);
  s.validate();
  return s;
}

void EmbeddingSet::validate() const {
  if (d == 0) throw Error(ErrorCode::kInvalidArgument, "embedding width d must be > 0");
  if (values.size() != n * d) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(values.size()) + " values for " + std::to_string(n) + "x" +
                    std::to_string(d) + " set");
  }
  if (ids.size() != n) {
    throw Error(ErrorCode::kIdCountMismatch,
                std::to_string(ids.size()) + " ids for " + std::to_string(n) + " rows");
  }
  if (texts && texts->size() != n) {
    throw Error(ErrorCode::kIdCountMismatch,
                std::to_string(texts->size()) + " texts for " + std::to_string(n) + " rows");
  }
  std::unordered_set<std::string_view> seen;
  seen.reserve(n);
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateId, "id '" + id + "'");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFinite, "row " + std::to_string(i / d));
    }
  }
}

EmbeddingSet EmbeddingSet::select(std::span<const std::size_t> rows) const {
  EmbeddingSet s;
  s.n = rows.size();
  s.d = d;
  s.lang = lang;
  s.values.reserve(rows.size() * d);
  s.ids.reserve(rows.size());
  if (texts) s.texts.emplace().reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= n) throw Error(ErrorCode::kInvalidArgument, "row " + std::to_string(r) + " out of range");
    auto src = row(r);
    s.values.insert(s.values.end(), src.begin(), src.end());
    s.ids.push_back(ids[r]);
    if (texts) s.texts->push_back((*texts)[r]);
  }
  return s;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(std::uint8_t(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t count, const char* what) {
    need(count, what);
    auto s = bytes_.subspan(pos_, count);
    pos_ += count;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t count, const char* what) {
    if (count > remaining()) {
      throw Error(ErrorCode::kTruncated, std::string("while reading ") + what + ": need " +
                                             std::to_string(count) + " bytes, have " +
                                             std::to_string(remaining()));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_emb1(const EmbeddingSet& set) {
  set.validate();
  std::vector<std::uint8_t> out;
  out.reserve(32 + set.values.size() * 4);
  out.insert(out.end(), std::begin(kEmb1Magic), std::end(kEmb1Magic));
  put_le<std::uint32_t>(out, kEmb1Version);
  put_le<std::uint32_t>(out, kEmb1DtypeFloat32);
  put_le<std::uint64_t>(out, set.n);
  put_le<std::uint64_t>(out, set.d);
  for (float v : set.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));

  json meta = {{"lang", set.lang}, {"ids", set.ids}};
  meta["texts"] = set.texts ? json(*set.texts) : json(nullptr);
  const std::string text = meta.dump();
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

EmbeddingSet decode_emb1(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kEmb1Magic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic,
                "expected 'M2E1', got '" + std::string(magic.begin(), magic.end()) + "'");
  }
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kEmb1Version) {
    throw Error(ErrorCode::kVersionMismatch, "file version " + std::to_string(version));
  }
  const auto dtype = in.get_le<std::uint32_t>("dtype");
  if (dtype != kEmb1DtypeFloat32) {
    throw Error(ErrorCode::kUnsupportedDtype, "dtype " + std::to_string(dtype));
  }
  EmbeddingSet s;
  s.n = in.get_le<std::uint64_t>("n");
  s.d = in.get_le<std::uint64_t>("d");
  if (s.d != 0 && s.n > in.remaining() / 4 / s.d) {
    throw Error(ErrorCode::kTruncated, "payload shorter than " + std::to_string(s.n) + "x" +
                                           std::to_string(s.d) + " float32 values");
  }
  auto payload = in.take(s.n * s.d * 4, "vectors");
  s.values.resize(s.n * s.d);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) bits |= std::uint32_t(payload[i * 4 + b]) << (8 * b);
    s.values[i] = std::bit_cast<float>(bits);
  }
  const auto meta_len = in.get_le<std::uint64_t>("metadata length");
  auto meta_bytes = in.take(meta_len, "metadata");
  json meta;
  try {
    meta = json::parse(meta_bytes.begin(), meta_bytes.end());
    s.lang = meta.at("lang").get<std::string>();
    s.ids = meta.at("ids").get<std::vector<std::string>>();
    if (meta.contains("texts") && !meta["texts"].is_null()) {
      s.texts = meta["texts"].get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("metadata block: ") + e.what());
  }
  s.validate();
  return s;
}

void write_emb1(const EmbeddingSet& set, const std::filesystem::path& path) {
  const auto bytes = encode_emb1(set);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

EmbeddingSet read_emb1(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_emb1(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

}  // namespace anchoralign
