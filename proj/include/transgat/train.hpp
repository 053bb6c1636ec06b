#pragma once

// Joint training of both streams against the six-trait MSE, with AdamW and a
// per-step cosine learning-rate schedule. The checkpoint with the best
// validation mean QWK is kept.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "transgat/data.hpp"
#include "transgat/model.hpp"
#include "transgat/ops.hpp"
#include "transgat/qwk.hpp"

namespace transgat {

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t epochs = 6;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool freeze_essay_head = false;
  bool shuffle = true;

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (epochs == 0) throw std::invalid_argument("epoch count must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
    if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  }
};

struct LossReport {
  std::array<double, kTraitCount> squared_error{};
  double mse = 0.0;
};

// Squared error per trait and its mean over the six traits.
inline LossReport trait_loss(const TraitScores& predicted, const TraitScores& gold) {
  LossReport r;
  double sum = 0.0;
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    const double d = predicted[k] - gold[k];
    r.squared_error[k] = d * d;
    sum += d * d;
  }
  r.mse = sum / static_cast<double>(kTraitCount);
  return r;
}

// lr_max * (1 + cos(pi * step / total)) / 2, no warmup.
inline double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max) {
  if (total_steps == 0) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step > total_steps) throw std::invalid_argument("cosine_lr: step beyond schedule");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

template <typename T>
struct OptimizerState {
  struct Moments {
    std::vector<T> m;
    std::vector<T> v;
  };
  std::vector<Moments> moments;  // parallel to the parameter list
  std::size_t step = 0;
};

// Decoupled-weight-decay Adam with bias correction:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
template <typename T>
void adamw_step(std::vector<NamedParam<T>>& params, OptimizerState<T>& state, double lr, const TrainConfig& config) {
  if (state.moments.empty()) {
    for (auto& p : params) state.moments.push_back({std::vector<T>(p.tensor.size(), T(0)), std::vector<T>(p.tensor.size(), T(0))});
  }
  if (state.moments.size() != params.size()) throw std::invalid_argument("adamw_step: optimizer state mismatch");
  ++state.step;
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  const T bc1 = T(1) - static_cast<T>(std::pow(config.beta1, static_cast<double>(state.step)));
  const T bc2 = T(1) - static_cast<T>(std::pow(config.beta2, static_cast<double>(state.step)));
  const T lr_t = static_cast<T>(lr), wd = static_cast<T>(config.weight_decay), eps = static_cast<T>(config.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].tensor;
    auto& mo = state.moments[i];
    if (mo.m.size() != p.size()) throw std::invalid_argument("adamw_step: moment shape mismatch");
    auto g = p.grad();
    auto w = p.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      mo.m[j] = b1 * mo.m[j] + (T(1) - b1) * g[j];
      mo.v[j] = b2 * mo.v[j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = mo.m[j] / bc1;
      const T v_hat = mo.v[j] / bc2;
      w[j] -= lr_t * (m_hat / (std::sqrt(v_hat) + eps) + wd * w[j]);
    }
  }
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  QwkReport val;
};

template <typename T>
struct FitResult {
  TransGatModel<T> best;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

// Fused predictions for every essay, in split order.
template <typename T>
std::vector<TraitScores> predict(const PreparedSplit<T>& split, const TransGatModel<T>& model,
                                 std::size_t chunk = 64) {
  std::vector<TraitScores> out;
  out.reserve(split.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(split.size(), start + chunk); ++i) idx.push_back(i);
    Tape<T> tape(false);
    auto fwd = model.forward(tape, split.batch(idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      TraitScores s;
      for (std::size_t k = 0; k < kTraitCount; ++k) s[k] = static_cast<double>(fwd.y_hat(b, k));
      out.push_back(s);
    }
  }
  return out;
}

template <typename T>
QwkReport evaluate_split(const PreparedSplit<T>& split, const TransGatModel<T>& model) {
  if (split.size() == 0) throw std::invalid_argument("evaluate_split: empty split");
  std::vector<TraitScores> gold;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (!split.gold[i]) throw InputError("essay '" + split.ids[i] + "' has no gold scores");
    gold.push_back(*split.gold[i]);
  }
  return score_report(gold, predict(split, model));
}

// Mean six-trait MSE of the fused prediction over a split.
template <typename T>
double mean_loss(const PreparedSplit<T>& split, const TransGatModel<T>& model) {
  const auto preds = predict(split, model);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!split.gold[i]) throw InputError("essay '" + split.ids[i] + "' has no gold scores");
    sum += trait_loss(preds[i], *split.gold[i]).mse;
  }
  return sum / static_cast<double>(preds.size());
}

// Seeded Fisher-Yates.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
}

using EpochCallback = std::function<void(const EpochRecord&)>;

template <typename T>
FitResult<T> fit(const PreparedSplit<T>& train, const PreparedSplit<T>& val, TransGatModel<T> model,
                 const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train.size() == 0) throw std::invalid_argument("fit: empty training split");
  if (val.size() == 0) throw std::invalid_argument("fit: empty validation split");
  if (!train.all_gold()) throw InputError("training essays must all have gold scores");
  if (train.dim != model.d_in || val.dim != model.d_in)
    throw InputError("embedding dimension does not match the model input dimension");

  model = model.clone();  // fit works on its own copy
  auto trainable = config.freeze_essay_head ? model.gat_parameters() : model.parameters();
  auto everything = model.parameters();
  OptimizerState<T> opt;

  const std::size_t per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = per_epoch * config.epochs;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  FitResult<T> result;
  double best_qwk = -std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle_indices(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      auto input = train.batch(idx);
      for (auto& p : everything) p.tensor.zero_grad();
      Tape<T> tape;
      auto fwd = model.forward(tape, input);
      auto loss = ops::mse(tape, fwd.y_hat, input.targets);
      tape.backward(loss);
      loss_sum += static_cast<double>(loss[0]) * static_cast<double>(idx.size());
      adamw_step(trainable, opt, cosine_lr(step, total_steps, config.lr), config);
      ++step;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val = evaluate_split(val, model);
    // Ties go to the later epoch.
    if (rec.val.average >= best_qwk) {
      best_qwk = rec.val.average;
      result.best = model.clone();
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
    result.history.push_back(rec);
  }
  return result;
}

inline std::string history_csv_header() {
  std::string h = "epoch,train_loss,val_avg_qwk";
  for (auto n : kTraitNames) h += "," + std::string(n);
  return h;
}

inline void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << history_csv_header() << '\n';
  std::ostringstream line;
  line << std::setprecision(10);
  for (const auto& r : history) {
    line.str("");
    line << r.epoch << ',' << r.train_loss << ',' << r.val.average;
    for (double k : r.val.kappa) line << ',' << k;
    os << line.str() << '\n';
  }
}

}  // namespace transgat
