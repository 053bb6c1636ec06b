#pragma once

// Essay records, embedding bundles, and the rubric score scale.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace transgat {

// Raised for malformed or inconsistent input data (as opposed to API misuse).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kTraitCount = 6;

inline constexpr std::array<std::string_view, kTraitCount> kTraitNames = {
    "cohesion", "syntax", "vocabulary", "phraseology", "grammar", "conventions"};

inline constexpr std::array<std::string_view, kTraitCount> kTraitTitles = {
    "Cohesion", "Syntax", "Vocabulary", "Phraseology", "Grammar", "Conventions"};

inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 5.0;
inline constexpr double kScoreStep = 0.5;
// Distinct score levels on the 1.0..5.0 half-point scale.
inline constexpr std::size_t kScoreLevels = 9;

// Per-trait scores, in kTraitNames order.
struct TraitScores {
  std::array<double, kTraitCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double cohesion() const { return values[0]; }
  double syntax() const { return values[1]; }
  double vocabulary() const { return values[2]; }
  double phraseology() const { return values[3]; }
  double grammar() const { return values[4]; }
  double conventions() const { return values[5]; }

  bool operator==(const TraitScores&) const = default;
};

struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const SentenceSpan&) const = default;
};

// head == -1 marks a sentence root. Indices are 0-based word positions.
struct Dependency {
  long head = -1;
  long dependent = 0;
  bool operator==(const Dependency&) const = default;
};

struct EssayRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<SentenceSpan> sentence_spans;
  std::vector<Dependency> deps;
  std::optional<TraitScores> gold;

  bool operator==(const EssayRecord&) const = default;
};

// Precomputed transformer outputs for one essay. Stored at file precision.
struct EmbeddingBundle {
  std::string essay_id;
  std::size_t dim = 0;
  std::vector<float> essay_vec;     // dim
  std::vector<float> token_matrix;  // num_tokens x dim, row-major

  std::size_t num_tokens() const { return dim == 0 ? 0 : token_matrix.size() / dim; }
  bool operator==(const EmbeddingBundle&) const = default;
};

enum class SplitRole { train, validation, test };

struct DatasetSplit {
  SplitRole role = SplitRole::train;
  std::vector<EssayRecord> records;
  std::map<std::string, EmbeddingBundle> bundles;

  const EmbeddingBundle& bundle_for(const EssayRecord& r) const {
    auto it = bundles.find(r.id);
    if (it == bundles.end()) throw InputError("no embeddings for essay '" + r.id + "'");
    return it->second;
  }
};

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

// Checks that do not need embeddings: spans, dependency indices, the
// per-sentence tree property, and gold score range.
inline ValidationResult validate_structure(const EssayRecord& r) {
  ValidationResult res;
  auto bad = [&](std::string msg) { res.violations.push_back(std::move(msg)); };
  const long n = static_cast<long>(r.tokens.size());

  // Spans must tile [0, n) in order.
  std::vector<long> sentence_of(r.tokens.size(), -1);
  bool spans_ok = true;
  std::size_t expect = 0;
  for (std::size_t s = 0; s < r.sentence_spans.size(); ++s) {
    const auto& sp = r.sentence_spans[s];
    if (sp.start != expect || sp.end <= sp.start || sp.end > r.tokens.size()) {
      bad(detail::cat("malformed sentence span ", s, " [", sp.start, ", ", sp.end, ")"));
      spans_ok = false;
      break;
    }
    for (std::size_t t = sp.start; t < sp.end; ++t) sentence_of[t] = static_cast<long>(s);
    expect = sp.end;
  }
  if (spans_ok && expect != r.tokens.size()) {
    bad(detail::cat("sentence spans cover ", expect, " of ", n, " tokens"));
    spans_ok = false;
  }

  std::vector<long> head_of(r.tokens.size(), -2);
  std::vector<int> times_dependent(r.tokens.size(), 0);
  bool indices_ok = true;
  for (const auto& d : r.deps) {
    if (d.head < -1 || d.head >= n) {
      bad(detail::cat("head index ", d.head, " out of range"));
      indices_ok = false;
      continue;
    }
    if (d.dependent < 0 || d.dependent >= n) {
      bad(detail::cat("dependent index ", d.dependent, " out of range"));
      indices_ok = false;
      continue;
    }
    if (d.head == d.dependent) {
      bad(detail::cat("token ", d.dependent, " is its own head"));
      indices_ok = false;
      continue;
    }
    ++times_dependent[d.dependent];
    head_of[d.dependent] = d.head;
    if (spans_ok && d.head >= 0 && sentence_of[d.head] != sentence_of[d.dependent])
      bad(detail::cat("dependency (", d.head, ", ", d.dependent, ") crosses a sentence boundary"));
  }
  for (long t = 0; t < n; ++t) {
    if (times_dependent[t] != 1) {
      bad(detail::cat("token ", t, " appears ", times_dependent[t], " times as a dependent"));
      indices_ok = false;
    }
  }
  if (indices_ok) {
    // Following heads from any token must reach a root without revisiting.
    for (long t = 0; t < n; ++t) {
      long cur = t;
      long steps = 0;
      while (cur >= 0 && steps <= n) {
        cur = head_of[cur];
        ++steps;
      }
      if (steps > n) {
        bad(detail::cat("dependency cycle through token ", t));
        break;
      }
    }
  }

  if (r.gold) {
    for (std::size_t k = 0; k < kTraitCount; ++k) {
      const double v = (*r.gold)[k];
      if (!std::isfinite(v) || v < kMinScore || v > kMaxScore)
        bad(detail::cat(kTraitNames[k], " score ", v, " outside [1, 5]"));
      else if (std::abs(v * 2.0 - std::round(v * 2.0)) > 1e-9)
        bad(detail::cat(kTraitNames[k], " score ", v, " is not a multiple of 0.5"));
    }
  }
  return res;
}

inline ValidationResult validate_record(const EssayRecord& r, const EmbeddingBundle& b) {
  ValidationResult res = validate_structure(r);
  auto bad = [&](std::string msg) { res.violations.push_back(std::move(msg)); };
  if (b.essay_id != r.id) bad("embedding id '" + b.essay_id + "' does not match essay id '" + r.id + "'");
  if (b.dim == 0) {
    bad("embedding dimension is zero");
    return res;
  }
  if (b.essay_vec.size() != b.dim) bad(detail::cat("essay vector length ", b.essay_vec.size(), " ≠ dim ", b.dim));
  if (b.token_matrix.size() % b.dim != 0)
    bad(detail::cat("token matrix size ", b.token_matrix.size(), " is not a multiple of dim ", b.dim));
  else if (b.num_tokens() != r.tokens.size())
    bad(detail::cat("row count ", b.num_tokens(), " ≠ token count ", r.tokens.size()));
  for (float v : b.essay_vec)
    if (!std::isfinite(v)) {
      bad("non-finite value in essay vector");
      break;
    }
  for (float v : b.token_matrix)
    if (!std::isfinite(v)) {
      bad("non-finite value in token matrix");
      break;
    }
  return res;
}

// Nearest half point, clamped to [1, 5]; exact midpoints round up.
inline double discretize_score(double x) {
  if (!std::isfinite(x)) throw std::domain_error("discretize_score: non-finite input");
  const double clamped = std::min(kMaxScore, std::max(kMinScore, x));
  return std::floor(clamped / kScoreStep + 0.5) * kScoreStep;
}

inline bool is_rubric_score(double x) {
  if (!std::isfinite(x) || x < kMinScore - 1e-9 || x > kMaxScore + 1e-9) return false;
  const double steps = (x - kMinScore) / kScoreStep;
  return std::abs(steps - std::round(steps)) <= 1e-9;
}

inline int score_to_category(double x) {
  if (!is_rubric_score(x)) throw std::domain_error(detail::cat("score_to_category: ", x, " is not on the rubric scale"));
  return static_cast<int>(std::lround((x - kMinScore) / kScoreStep));
}

inline double category_to_score(int c) {
  if (c < 0 || c >= static_cast<int>(kScoreLevels))
    throw std::domain_error(detail::cat("category_to_score: category ", c, " out of range"));
  return kMinScore + kScoreStep * c;
}

// Every record has exactly one bundle and every record passes validation.
inline void check_split(const DatasetSplit& split) {
  if (split.records.empty()) throw InputError("dataset split has no essays");
  std::map<std::string, int> seen;
  std::size_t dim = 0;
  for (const auto& [id, b] : split.bundles) {
    if (dim == 0) dim = b.dim;
    if (b.dim != dim) throw InputError("embedding dimensions differ within split");
  }
  for (const auto& r : split.records) {
    if (++seen[r.id] > 1) throw InputError("duplicate essay id '" + r.id + "'");
    auto it = split.bundles.find(r.id);
    if (it == split.bundles.end()) throw InputError("no embeddings for essay '" + r.id + "'");
    auto v = validate_record(r, it->second);
    if (!v.ok()) throw InputError("essay '" + r.id + "': " + v.violations.front());
  }
}

}  // namespace transgat
