#pragma once

// Essay JSONL, TGEB embedding binaries, and the ingest scores CSV.
//
// TGEB layout (little-endian):
//   "TGEB" | version u32 | essay count u64 | dim u32
//   per essay: id length u16, id bytes (UTF-8), dim x f32 essay vector,
//              token count u32, token count x dim x f32 token matrix

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "transgat/data.hpp"

namespace transgat::io {

inline constexpr char kEmbeddingMagic[4] = {'T', 'G', 'E', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

inline constexpr const char* kEssaysFile = "essays.jsonl";
inline constexpr const char* kEmbeddingsFile = "embeddings.tgeb";

// ---------------------------------------------------------------------------
// Little-endian primitives

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  template <typename U>
  void uint(U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    bytes(buf, sizeof(U));
  }

  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw InputError(what_ + ": unexpected end of file");
  }

  template <typename U>
  U uint() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
  std::string what_;
};

// ---------------------------------------------------------------------------
// Essay JSONL

inline nlohmann::ordered_json record_to_json(const EssayRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["tokens"] = r.tokens;
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : r.sentence_spans) spans.push_back({s.start, s.end});
  j["sentences"] = std::move(spans);
  auto deps = nlohmann::ordered_json::array();
  for (const auto& d : r.deps) deps.push_back({d.head, d.dependent});
  j["deps"] = std::move(deps);
  if (r.gold) {
    nlohmann::ordered_json scores;
    for (std::size_t k = 0; k < kTraitCount; ++k) scores[std::string(kTraitNames[k])] = (*r.gold)[k];
    j["scores"] = std::move(scores);
  }
  return j;
}

inline EssayRecord record_from_json(const nlohmann::json& j) {
  EssayRecord r;
  r.id = j.at("id").get<std::string>();
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& s : j.at("sentences")) {
    if (!s.is_array() || s.size() != 2) throw InputError("sentence span must be a [start, end] pair");
    r.sentence_spans.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
  }
  for (const auto& d : j.at("deps")) {
    if (!d.is_array() || d.size() != 2) throw InputError("dependency must be a [head, dependent] pair");
    r.deps.push_back({d[0].get<long>(), d[1].get<long>()});
  }
  if (j.contains("scores") && !j["scores"].is_null()) {
    TraitScores s;
    const auto& js = j["scores"];
    for (std::size_t k = 0; k < kTraitCount; ++k) {
      const std::string key(kTraitNames[k]);
      if (!js.contains(key)) throw InputError("scores object missing '" + key + "'");
      s[k] = js[key].get<double>();
    }
    r.gold = s;
  }
  return r;
}

inline void write_essays(std::ostream& os, const std::vector<EssayRecord>& records) {
  for (const auto& r : records) os << record_to_json(r).dump() << '\n';
}

inline std::vector<EssayRecord> read_essays(std::istream& is, const std::string& source = "essays") {
  std::vector<EssayRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(source + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(source + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// TGEB

inline void write_embeddings(std::ostream& os, const std::vector<EmbeddingBundle>& bundles, std::size_t dim) {
  BinaryWriter w(os);
  w.bytes(kEmbeddingMagic, 4);
  w.uint<std::uint32_t>(kEmbeddingVersion);
  w.uint<std::uint64_t>(bundles.size());
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(dim));
  for (const auto& b : bundles) {
    if (b.dim != dim || b.essay_vec.size() != dim || b.token_matrix.size() % dim != 0)
      throw std::invalid_argument("write_embeddings: bundle '" + b.essay_id + "' does not match dim " +
                                  std::to_string(dim));
    if (b.essay_id.size() > 0xFFFF) throw std::invalid_argument("write_embeddings: essay id too long");
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(b.essay_id.size()));
    w.bytes(b.essay_id.data(), b.essay_id.size());
    for (float v : b.essay_vec) w.f32(v);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(b.num_tokens()));
    for (float v : b.token_matrix) w.f32(v);
  }
}

inline std::vector<EmbeddingBundle> read_embeddings(std::istream& is, const std::string& source = "embeddings") {
  BinaryReader r(is, source);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kEmbeddingMagic, 4) != 0) throw InputError(source + ": bad embedding magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kEmbeddingVersion) throw InputError(source + ": unsupported embedding version " + std::to_string(version));
  const auto count = r.uint<std::uint64_t>();
  const auto dim = r.uint<std::uint32_t>();
  if (dim == 0) throw InputError(source + ": embedding dimension is zero");
  std::vector<EmbeddingBundle> out;
  for (std::uint64_t e = 0; e < count; ++e) {
    EmbeddingBundle b;
    b.dim = dim;
    const auto id_len = r.uint<std::uint16_t>();
    b.essay_id.resize(id_len);
    r.bytes(b.essay_id.data(), id_len);
    b.essay_vec.resize(dim);
    for (auto& v : b.essay_vec) v = r.f32();
    const auto n = r.uint<std::uint32_t>();
    b.token_matrix.resize(static_cast<std::size_t>(n) * dim);
    for (auto& v : b.token_matrix) v = r.f32();
    out.push_back(std::move(b));
  }
  if (!r.at_eof()) throw InputError(source + ": trailing bytes after " + std::to_string(count) + " essays");
  return out;
}

// ---------------------------------------------------------------------------
// Scores CSV: id,cohesion,syntax,vocabulary,phraseology,grammar,conventions

inline std::string scores_csv_header() {
  std::string h = "id";
  for (auto n : kTraitNames) h += "," + std::string(n);
  return h;
}

inline std::map<std::string, TraitScores> read_scores_csv(std::istream& is, const std::string& source = "scores") {
  std::map<std::string, TraitScores> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != scores_csv_header())
        throw InputError(source + " line " + std::to_string(lineno) + ": expected header '" + scores_csv_header() + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != kTraitCount + 1)
      throw InputError(source + " line " + std::to_string(lineno) + ": expected " + std::to_string(kTraitCount + 1) +
                       " fields, found " + std::to_string(cells.size()));
    TraitScores s;
    for (std::size_t k = 0; k < kTraitCount; ++k) {
      try {
        std::size_t used = 0;
        s[k] = std::stod(cells[k + 1], &used);
        if (used != cells[k + 1].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw InputError(source + " line " + std::to_string(lineno) + ": unparsable score '" + cells[k + 1] + "'");
      }
    }
    if (!out.emplace(cells[0], s).second)
      throw InputError(source + " line " + std::to_string(lineno) + ": duplicate id '" + cells[0] + "'");
  }
  if (!header_seen) throw InputError(source + ": empty scores file");
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directories hold essays.jsonl and embeddings.tgeb.

inline std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(p, mode);
  if (!f) throw InputError("cannot open " + p.string());
  return f;
}

inline std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(p, mode | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

inline DatasetSplit load_split(const std::filesystem::path& dir, SplitRole role) {
  DatasetSplit split;
  split.role = role;
  {
    auto f = open_in(dir / kEssaysFile);
    split.records = read_essays(f, (dir / kEssaysFile).string());
  }
  {
    auto f = open_in(dir / kEmbeddingsFile, std::ios::in | std::ios::binary);
    for (auto& b : read_embeddings(f, (dir / kEmbeddingsFile).string())) {
      const std::string id = b.essay_id;
      if (!split.bundles.emplace(id, std::move(b)).second)
        throw InputError((dir / kEmbeddingsFile).string() + ": duplicate essay id '" + id + "'");
    }
  }
  check_split(split);
  return split;
}

inline void save_split(const std::filesystem::path& dir, const std::vector<EssayRecord>& records,
                       const std::vector<EmbeddingBundle>& bundles, std::size_t dim) {
  std::filesystem::create_directories(dir);
  {
    auto f = open_out(dir / kEssaysFile, std::ios::out | std::ios::binary);
    write_essays(f, records);
  }
  {
    auto f = open_out(dir / kEmbeddingsFile, std::ios::out | std::ios::binary);
    write_embeddings(f, bundles, dim);
  }
}

}  // namespace transgat::io
