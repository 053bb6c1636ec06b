#pragma once

// Quadratic weighted kappa over integer score categories, kappa bands, and
// the per-trait agreement report.

#include <array>
#include <cstddef>
#include <iomanip>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "transgat/data.hpp"

namespace transgat {

using Matrix2 = std::vector<std::vector<double>>;

// w[i][j] = (i - j)^2 / (N - 1)^2
inline Matrix2 weight_matrix(std::size_t n) {
  if (n < 2) throw std::invalid_argument("weight_matrix: need at least 2 categories");
  const double denom = static_cast<double>((n - 1) * (n - 1));
  Matrix2 w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      w[i][j] = d * d / denom;
    }
  return w;
}

struct ConfusionMatrix {
  std::size_t n = 0;
  std::vector<std::vector<long>> counts;  // counts[true][pred]
  std::vector<long> row_marginals;        // by true category
  std::vector<long> col_marginals;        // by predicted category
  long total = 0;

  static ConfusionMatrix from(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n) {
    if (y_true.size() != y_pred.size())
      throw std::invalid_argument("confusion matrix: " + std::to_string(y_true.size()) + " true vs " +
                                  std::to_string(y_pred.size()) + " predicted labels");
    ConfusionMatrix m;
    m.n = n;
    m.counts.assign(n, std::vector<long>(n, 0));
    m.row_marginals.assign(n, 0);
    m.col_marginals.assign(n, 0);
    for (std::size_t k = 0; k < y_true.size(); ++k) {
      const int t = y_true[k], p = y_pred[k];
      if (t < 0 || p < 0 || t >= static_cast<int>(n) || p >= static_cast<int>(n))
        throw std::out_of_range("confusion matrix: category outside [0, " + std::to_string(n) + ")");
      ++m.counts[t][p];
      ++m.row_marginals[t];
      ++m.col_marginals[p];
      ++m.total;
    }
    return m;
  }
};

// Chance agreement: outer product of the marginals, scaled to the same total.
inline Matrix2 expected_matrix(const ConfusionMatrix& o) {
  if (o.total <= 0) throw std::invalid_argument("expected_matrix: empty confusion matrix");
  Matrix2 e(o.n, std::vector<double>(o.n, 0.0));
  const double total = static_cast<double>(o.total);
  for (std::size_t i = 0; i < o.n; ++i)
    for (std::size_t j = 0; j < o.n; ++j)
      e[i][j] = static_cast<double>(o.row_marginals[i]) * static_cast<double>(o.col_marginals[j]) / total;
  return e;
}

// 1 - sum(w*O) / sum(w*E). Returns 1 when sum(w*E) is zero, which happens
// only if both lists hold one identical category throughout.
inline double qwk(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n) {
  if (y_true.empty()) throw std::invalid_argument("qwk: no items");
  const auto o = ConfusionMatrix::from(y_true, y_pred, n);
  const auto w = weight_matrix(n);
  const auto e = expected_matrix(o);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      num += w[i][j] * static_cast<double>(o.counts[i][j]);
      den += w[i][j] * e[i][j];
    }
  if (den == 0.0) return 1.0;
  return 1.0 - num / den;
}

enum class KappaBand { none, slight, fair, moderate, substantial, almost_perfect };

inline std::string_view band_name(KappaBand b) {
  switch (b) {
    case KappaBand::none: return "No agreement";
    case KappaBand::slight: return "Slight agreement";
    case KappaBand::fair: return "Fair agreement";
    case KappaBand::moderate: return "Moderate agreement";
    case KappaBand::substantial: return "Substantial agreement";
    case KappaBand::almost_perfect: return "Almost perfect agreement";
  }
  return "";
}

// Upper-inclusive bands at 0.20/0.40/0.60/0.80; [0, 0.01) counts as slight.
inline KappaBand interpret_kappa(double kappa) {
  if (!(kappa >= -1.0 && kappa <= 1.0)) throw std::domain_error("interpret_kappa: kappa outside [-1, 1]");
  if (kappa < 0.0) return KappaBand::none;
  if (kappa <= 0.20) return KappaBand::slight;
  if (kappa <= 0.40) return KappaBand::fair;
  if (kappa <= 0.60) return KappaBand::moderate;
  if (kappa <= 0.80) return KappaBand::substantial;
  return KappaBand::almost_perfect;
}

struct QwkReport {
  std::array<double, kTraitCount> kappa{};
  double average = 0.0;

  KappaBand band(std::size_t trait) const { return interpret_kappa(kappa[trait]); }
  KappaBand average_band() const { return interpret_kappa(average); }

  // Aligned table: Avg. QWK, then one column per trait.
  std::string table() const {
    std::ostringstream os;
    constexpr int kWidth = 16;
    os << std::left << std::setw(kWidth) << "" << std::setw(kWidth) << "Avg. QWK";
    for (auto t : kTraitTitles) os << std::setw(kWidth) << t;
    os << "\n" << std::setw(kWidth) << "QWK" << std::fixed << std::setprecision(3) << std::setw(kWidth) << average;
    for (double k : kappa) os << std::setw(kWidth) << k;
    os << "\n" << std::setw(kWidth) << "Band" << std::setw(kWidth) << short_band(average_band());
    for (std::size_t t = 0; t < kTraitCount; ++t) os << std::setw(kWidth) << short_band(band(t));
    os << "\n";
    return os.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["avg_qwk"] = average;
    for (std::size_t t = 0; t < kTraitCount; ++t) j[std::string(kTraitNames[t])] = kappa[t];
    return j;
  }

 private:
  static std::string short_band(KappaBand b) {
    std::string s(band_name(b));
    return s.substr(0, s.find(" agreement"));
  }
};

// Per-trait QWK over rubric scores. Predictions are snapped to the rubric
// grid first; gold scores must already be on it.
inline QwkReport score_report(const std::vector<TraitScores>& gold, const std::vector<TraitScores>& predicted) {
  if (gold.size() != predicted.size()) throw std::invalid_argument("score_report: gold/prediction count mismatch");
  if (gold.empty()) throw std::invalid_argument("score_report: no essays");
  QwkReport rep;
  std::vector<int> t(gold.size()), p(gold.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    for (std::size_t i = 0; i < gold.size(); ++i) {
      t[i] = score_to_category(gold[i][k]);
      p[i] = score_to_category(discretize_score(predicted[i][k]));
    }
    rep.kappa[k] = qwk(t, p, kScoreLevels);
    sum += rep.kappa[k];
  }
  rep.average = sum / static_cast<double>(kTraitCount);
  return rep;
}

}  // namespace transgat
