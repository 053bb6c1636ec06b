#pragma once

// End-to-end finite-difference check of the full two-stream model: tape
// gradients in double precision for a 2-layer, 4-head GAT (d = 8,
// d_head = 4) plus both prediction heads, on one random 6-token essay with
// random rubric targets. The central differences are taken on a long double
// copy of the model; in double their roundoff (~1e-16 * loss / eps) exceeds
// the 1e-8 floor for the smallest gradient coordinates.

#include <cstdint>
#include <functional>
#include <random>

#include "transgat/gradcheck.hpp"
#include "transgat/model.hpp"
#include "transgat/ops.hpp"
#include "transgat/synth.hpp"

namespace transgat {

struct ModelGradcheckConfig {
  std::uint64_t seed = 0;
  std::size_t num_tokens = 6;
  std::size_t dim = 8;
  GatConfig gat{2, 4, 4, 0.2, 0.01};
  double eps = 1e-5;
};

inline GradcheckReport model_gradcheck(const ModelGradcheckConfig& cfg) {
  SynthConfig sc;
  sc.num_essays = 1;
  sc.min_tokens = sc.max_tokens = cfg.num_tokens;
  sc.min_sentence = sc.max_sentence = cfg.num_tokens;
  sc.dim = cfg.dim;
  sc.seed = cfg.seed;
  sc.token_noise = 1.0;
  const auto split = to_split(gen_synthetic(sc));
  const auto input = PreparedSplit<double>::from(split).all();
  const auto ref_input = PreparedSplit<long double>::from(split).all();

  auto model = TransGatModel<double>::init(cfg.gat, cfg.dim, cfg.seed + 1);
  // Nonzero biases so no output sits on the LeakyReLU kink by construction.
  std::mt19937_64 rng(cfg.seed + 2);
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (auto& v : model.gat.head.b2.vec()) v = bias(rng);
  for (auto& v : model.essay.b.vec()) v = bias(rng);
  const auto ref_model = model.cast<long double>();

  std::uniform_real_distribution<double> target(1.0, 5.0);
  std::vector<double> y(kTraitCount);
  for (auto& v : y) v = target(rng);
  const auto targets = Tensor<double>::from({1, kTraitCount}, y);
  const auto ref_targets = targets.cast<long double>();

  std::function<Tensor<double>(Tape<double>&)> loss_fn = [&](Tape<double>& tape) {
    return ops::mse(tape, model.forward(tape, input).y_hat, targets);
  };
  std::function<Tensor<long double>(Tape<long double>&)> ref_loss_fn = [&](Tape<long double>& tape) {
    return ops::mse(tape, ref_model.forward(tape, ref_input).y_hat, ref_targets);
  };
  return finite_diff_check<double, long double>(loss_fn, model.parameters(), ref_loss_fn, ref_model.parameters(),
                                                static_cast<long double>(cfg.eps));
}

}  // namespace transgat
