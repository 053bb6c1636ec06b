#pragma once

// Seeded synthetic essays for desk-scale training and tests.
//
// Each essay has a latent vector z in R^6. Gold scores follow
//   s = discretize(intercept + B z)
// with B lower-triangular and a positive diagonal; z is then re-solved from
// s so that scores are an exact affine function of the stored latent. Token
// embeddings scatter around P z (P is a fixed d x 6 projection), and the
// essay vector is their mean plus a little noise. Dependency trees come from
// uniform random recursive attachment within each sentence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "transgat/data.hpp"
#include "transgat/io.hpp"

namespace transgat {

struct SynthConfig {
  std::size_t num_essays = 64;
  std::size_t min_tokens = 10;
  std::size_t max_tokens = 30;
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  std::size_t min_sentence = 3;
  std::size_t max_sentence = 12;
  double latent_scale = 0.8;
  double token_noise = 0.3;
  double vector_noise = 0.02;
  std::size_t vocabulary = 500;

  void validate() const {
    if (dim < 4) throw std::invalid_argument("synthetic embedding dimension must be >= 4");
    if (min_tokens < 2 || max_tokens < min_tokens) throw std::invalid_argument("synthetic essays need >= 2 tokens");
    if (min_sentence < 1 || max_sentence < min_sentence) throw std::invalid_argument("bad sentence length range");
    if (num_essays == 0) throw std::invalid_argument("synthetic dataset needs at least one essay");
  }
};

// The planted affine rule from latents to (pre-discretization) scores.
struct ScoreRule {
  std::array<double, kTraitCount> intercept{};
  std::array<std::array<double, kTraitCount>, kTraitCount> coef{};  // lower-triangular

  TraitScores apply(const std::array<double, kTraitCount>& z) const {
    TraitScores s;
    for (std::size_t k = 0; k < kTraitCount; ++k) {
      double v = intercept[k];
      for (std::size_t j = 0; j < kTraitCount; ++j) v += coef[k][j] * z[j];
      s[k] = v;
    }
    return s;
  }
};

struct SynthDataset {
  std::vector<EssayRecord> records;
  std::vector<EmbeddingBundle> bundles;
  std::vector<std::array<double, kTraitCount>> latents;
  ScoreRule rule;
  std::size_t dim = 0;
};

namespace detail {

// Random recursive tree over sentence positions [start, start+len): a random
// root, then each remaining token attaches to a uniformly chosen placed token.
inline void random_tree(std::size_t start, std::size_t len, std::mt19937_64& rng, std::vector<Dependency>& deps) {
  std::vector<std::size_t> order(len);
  for (std::size_t i = 0; i < len; ++i) order[i] = start + i;
  for (std::size_t i = len; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<long> head(len, -1);
  for (std::size_t i = 1; i < len; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    head[order[i] - start] = static_cast<long>(order[pick(rng)]);
  }
  for (std::size_t i = 0; i < len; ++i) deps.push_back({head[i], static_cast<long>(start + i)});
}

}  // namespace detail

inline SynthDataset gen_synthetic(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthDataset ds;
  ds.dim = config.dim;
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    ds.rule.intercept[k] = 3.0;
    for (std::size_t j = 0; j < k; ++j) ds.rule.coef[k][j] = -0.2 + 0.4 * unit(rng);
    ds.rule.coef[k][k] = 0.6 + 0.4 * unit(rng);
  }
  std::vector<double> projection(config.dim * kTraitCount);
  for (auto& v : projection) v = normal(rng) / std::sqrt(static_cast<double>(kTraitCount));

  std::uniform_int_distribution<std::size_t> token_count(config.min_tokens, config.max_tokens);
  std::uniform_int_distribution<std::size_t> sentence_len(config.min_sentence, config.max_sentence);
  std::uniform_int_distribution<std::size_t> word(0, config.vocabulary - 1);

  for (std::size_t e = 0; e < config.num_essays; ++e) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04zu", e);

    EssayRecord rec;
    rec.id = id;
    const std::size_t n = token_count(rng);
    for (std::size_t t = 0; t < n; ++t) rec.tokens.push_back("w" + std::to_string(word(rng)));
    for (std::size_t start = 0; start < n;) {
      const std::size_t len = std::min(sentence_len(rng), n - start);
      rec.sentence_spans.push_back({start, start + len});
      detail::random_tree(start, len, rng, rec.deps);
      start += len;
    }

    // Latent -> rubric scores -> latent consistent with those scores.
    std::array<double, kTraitCount> z{};
    for (auto& v : z) v = config.latent_scale * normal(rng);
    const TraitScores raw = ds.rule.apply(z);
    TraitScores gold;
    for (std::size_t k = 0; k < kTraitCount; ++k) gold[k] = discretize_score(raw[k]);
    for (std::size_t k = 0; k < kTraitCount; ++k) {
      double rhs = gold[k] - ds.rule.intercept[k];
      for (std::size_t j = 0; j < k; ++j) rhs -= ds.rule.coef[k][j] * z[j];
      z[k] = rhs / ds.rule.coef[k][k];
    }
    rec.gold = gold;

    EmbeddingBundle b;
    b.essay_id = rec.id;
    b.dim = config.dim;
    std::vector<double> center(config.dim, 0.0);
    for (std::size_t i = 0; i < config.dim; ++i)
      for (std::size_t j = 0; j < kTraitCount; ++j) center[i] += projection[i * kTraitCount + j] * z[j];
    std::vector<double> mean(config.dim, 0.0);
    b.token_matrix.resize(n * config.dim);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t i = 0; i < config.dim; ++i) {
        const auto v = static_cast<float>(center[i] + config.token_noise * normal(rng));
        b.token_matrix[t * config.dim + i] = v;
        mean[i] += v;
      }
    b.essay_vec.resize(config.dim);
    for (std::size_t i = 0; i < config.dim; ++i)
      b.essay_vec[i] = static_cast<float>(mean[i] / static_cast<double>(n) + config.vector_noise * normal(rng));

    ds.records.push_back(std::move(rec));
    ds.bundles.push_back(std::move(b));
    ds.latents.push_back(z);
  }
  return ds;
}

inline DatasetSplit to_split(const SynthDataset& ds, SplitRole role = SplitRole::train) {
  DatasetSplit split;
  split.role = role;
  split.records = ds.records;
  for (const auto& b : ds.bundles) split.bundles.emplace(b.essay_id, b);
  return split;
}

// Writes essays.jsonl, embeddings.tgeb, and synth_meta.json into `dir`.
inline void write_synthetic(const std::filesystem::path& dir, const SynthDataset& ds, const SynthConfig& config) {
  io::save_split(dir, ds.records, ds.bundles, ds.dim);
  nlohmann::ordered_json meta;
  meta["seed"] = config.seed;
  meta["num_essays"] = config.num_essays;
  meta["dim"] = config.dim;
  meta["tokens"] = {config.min_tokens, config.max_tokens};
  meta["intercept"] = ds.rule.intercept;
  meta["coefficients"] = ds.rule.coef;
  meta["traits"] = kTraitNames;
  auto f = io::open_out(dir / "synth_meta.json", std::ios::out | std::ios::binary);
  f << meta.dump(2) << '\n';
}

}  // namespace transgat
