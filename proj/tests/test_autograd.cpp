#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace transgat;
using T = double;
using Fn = std::function<Tensor<T>(Tape<T>&)>;

namespace {

Tensor<T> rand_tensor(Shape s, std::mt19937_64& rng, bool rg = true, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> d(Tensor<T>::numel(s));
  for (auto& v : d) v = u(rng);
  return Tensor<T>::from(std::move(s), std::move(d), rg);
}

// Contract an op's output with fixed random weights so every output
// coordinate contributes to the scalar loss.
Tensor<T> weigh(Tape<T>& tape, const Tensor<T>& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto w = rand_tensor(y.shape(), rng, false);
  return ops::sum(tape, ops::mul(tape, y, w));
}

constexpr double kOpTol = 1e-6;

}  // namespace

TEST(Matmul, Examples) {
  Tape<T> tape(false);
  auto eye = Tensor<T>::from({2, 2}, {1, 0, 0, 1});
  auto col = Tensor<T>::from({2, 1}, {3, 4});
  EXPECT_EQ(ops::matmul(tape, eye, col).vec(), (std::vector<T>{3, 4}));
  auto row = Tensor<T>::from({1, 2}, {1, 2});
  EXPECT_EQ(ops::matmul(tape, row, col).vec(), (std::vector<T>{11}));
  EXPECT_THROW(ops::matmul(tape, row, row), std::invalid_argument);
}

TEST(Matmul, SumGradcheck3x3) {
  std::mt19937_64 rng(1);
  auto a = rand_tensor({3, 3}, rng), b = rand_tensor({3, 3}, rng);
  Fn f = [&](Tape<T>& t) { return ops::sum(t, ops::matmul(t, a, b)); };
  EXPECT_LE(finite_diff_check<T>(f, {{"a", a}, {"b", b}}).max_rel_err, kOpTol);
}

TEST(LeakyRelu, Examples) {
  Tape<T> tape(false);
  auto y = ops::leaky_relu(tape, Tensor<T>::from({2}, {-1, 2}), 0.01);
  EXPECT_DOUBLE_EQ(y[0], -0.01);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
  EXPECT_EQ(ops::leaky_relu(tape, Tensor<T>::from({1}, {0.0}), 0.2)[0], 0.0);
}

TEST(LeakyRelu, DerivativeAtZeroIsSlope) {
  Tape<T> tape;
  auto x = Tensor<T>::from({1}, {0.0}, true);
  auto loss = ops::sum(tape, ops::leaky_relu(tape, x, 0.2));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.2);
}

TEST(LeakyRelu, GradcheckAwayFromZero) {
  std::mt19937_64 rng(2);
  auto x = rand_tensor({20}, rng);
  for (auto& v : x.vec()) v += v > 0 ? 0.1 : -0.1;
  Fn f = [&](Tape<T>& t) { return weigh(t, ops::leaky_relu(t, x, 0.01), 7); };
  EXPECT_LE(finite_diff_check<T>(f, {{"x", x}}).max_rel_err, kOpTol);
}

TEST(SegmentSoftmax, Examples) {
  Tape<T> tape(false);
  auto y = ops::segment_softmax(tape, Tensor<T>::from({2}, {0, 0}), {0, 0}, 1);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
  EXPECT_DOUBLE_EQ(ops::segment_softmax(tape, Tensor<T>::from({1}, {7.3}), {0}, 1)[0], 1.0);
  auto z = ops::segment_softmax(tape, Tensor<T>::from({2}, {std::log(1.0), std::log(3.0)}), {0, 0}, 1);
  EXPECT_NEAR(z[0], 0.25, 1e-15);
  EXPECT_NEAR(z[1], 0.75, 1e-15);
  EXPECT_THROW(ops::segment_softmax(tape, Tensor<T>::from({1}, {1.0}), {0}, 2), std::invalid_argument);
}

TEST(SegmentSoftmax, LargeLogitsStayFinite) {
  Tape<T> tape(false);
  auto y = ops::segment_softmax(tape, Tensor<T>::from({2}, {1000.0, 1000.0}), {0, 0}, 1);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(SegmentSoftmax, NormalizesEverySegmentAndColumn) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t s = 1 + rng() % 10, h = 1 + rng() % 4;
    std::vector<std::size_t> seg;
    for (std::size_t k = 0; k < s; ++k) seg.insert(seg.end(), 1 + rng() % 5, k);
    std::shuffle(seg.begin(), seg.end(), rng);
    auto logits = rand_tensor({seg.size(), h}, rng, false, -20, 20);
    Tape<T> tape(false);
    auto y = ops::segment_softmax(tape, logits, seg, s);
    for (std::size_t c = 0; c < h; ++c) {
      std::vector<double> tot(s, 0.0);
      for (std::size_t i = 0; i < seg.size(); ++i) {
        EXPECT_GT(y(i, c), 0.0);
        EXPECT_LE(y(i, c), 1.0);
        tot[seg[i]] += y(i, c);
      }
      for (double v : tot) EXPECT_NEAR(v, 1.0, 1e-6);
    }
  }
}

TEST(SegmentSoftmax, Gradcheck) {
  std::mt19937_64 rng(4);
  auto x = rand_tensor({7, 3}, rng);
  const std::vector<std::size_t> seg{0, 1, 0, 2, 1, 0, 2};
  Fn f = [&](Tape<T>& t) { return weigh(t, ops::segment_softmax(t, x, seg, 3), 9); };
  EXPECT_LE(finite_diff_check<T>(f, {{"x", x}}).max_rel_err, kOpTol);
}

TEST(SegmentMean, Examples) {
  Tape<T> tape(false);
  auto y = ops::segment_mean(tape, Tensor<T>::from({2, 2}, {1, 3, 3, 1}), {0, 0}, 1);
  EXPECT_EQ(y.vec(), (std::vector<T>{2, 2}));
  auto x = Tensor<T>::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(ops::segment_mean(tape, x, {0, 1}, 2).vec(), x.vec());
}

TEST(SegmentMean, RowsReceiveGradOverSegmentSize) {
  std::mt19937_64 rng(5);
  auto x = rand_tensor({5, 2}, rng);
  const std::vector<std::size_t> seg{0, 0, 0, 1, 1};
  Tape<T> tape;
  auto loss = ops::sum(tape, ops::segment_mean(tape, x, seg, 2));
  tape.backward(loss);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(x.grad()[i * 2 + c], seg[i] == 0 ? 1.0 / 3 : 0.5);
  Fn f = [&](Tape<T>& t) { return weigh(t, ops::segment_mean(t, x, seg, 2), 3); };
  EXPECT_LE(finite_diff_check<T>(f, {{"x", x}}).max_rel_err, kOpTol);
}

TEST(Ops, GradcheckEveryRemainingOp) {
  std::mt19937_64 rng(6);
  auto a = rand_tensor({4, 3}, rng), b = rand_tensor({4, 3}, rng), bias = rand_tensor({3}, rng);
  auto s = rand_tensor({4}, rng), c = rand_tensor({4, 2}, rng);
  const std::vector<std::size_t> idx{3, 0, 0, 2, 1};
  const std::vector<std::pair<std::string, Fn>> cases{
      {"add", [&](Tape<T>& t) { return weigh(t, ops::add(t, a, b), 1); }},
      {"sub", [&](Tape<T>& t) { return weigh(t, ops::sub(t, a, b), 2); }},
      {"scale", [&](Tape<T>& t) { return weigh(t, ops::scale(t, a, T(-1.7)), 3); }},
      {"mul", [&](Tape<T>& t) { return weigh(t, ops::mul(t, a, b), 4); }},
      {"transpose", [&](Tape<T>& t) { return weigh(t, ops::transpose(t, a), 5); }},
      {"add_bias", [&](Tape<T>& t) { return weigh(t, ops::add_bias(t, a, bias), 6); }},
      {"scale_rows", [&](Tape<T>& t) { return weigh(t, ops::scale_rows(t, a, s), 7); }},
      {"concat_cols", [&](Tape<T>& t) { return weigh(t, ops::concat_cols(t, {a, c, b}), 8); }},
      {"gather_rows", [&](Tape<T>& t) { return weigh(t, ops::gather_rows(t, a, idx), 9); }},
      {"scatter_add_rows", [&](Tape<T>& t) { return weigh(t, ops::scatter_add_rows(t, a, {1, 1, 0, 2}, 3), 10); }},
      {"mse", [&](Tape<T>& t) { return ops::mse(t, a, b); }},
      {"matmul", [&](Tape<T>& t) { return weigh(t, ops::matmul(t, a, ops::transpose(t, b)), 11); }},
  };
  for (const auto& [name, f] : cases) {
    const auto r = finite_diff_check<T>(f, {{"a", a}, {"b", b}, {"bias", bias}, {"s", s}, {"c", c}});
    EXPECT_LE(r.max_rel_err, kOpTol) << name;
  }
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(7);
  auto x = rand_tensor({3, 4}, rng);
  Tape<T> tape;
  auto loss = ops::sum(tape, x);
  tape.backward(loss);
  for (T g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, MseOfSelfGivesZero) {
  std::mt19937_64 rng(8);
  auto x = rand_tensor({2, 5}, rng);
  Tape<T> tape;
  auto loss = ops::mse(tape, x, x);
  tape.backward(loss);
  EXPECT_EQ(loss[0], 0.0);
  for (T g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, SharedTensorsAccumulate) {
  auto x = Tensor<T>::from({2}, {1.5, -2.0}, true);
  Tape<T> tape;
  auto loss = ops::sum(tape, ops::add(tape, ops::mul(tape, x, x), x));  // x^2 + x
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 * 1.5 + 1);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2 * -2.0 + 1);
}

TEST(Backward, Contracts) {
  auto x = Tensor<T>::from({2}, {1, 2}, true);
  Tape<T> tape;
  auto y = ops::scale(tape, x, T(2));
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
  Tape<T> off(false);
  auto l = ops::sum(off, x);
  EXPECT_EQ(off.size(), 0u);
  EXPECT_THROW(off.backward(l), std::logic_error);
}

TEST(Backward, ConstantsGetNoTapeEntries) {
  auto x = Tensor<T>::from({2}, {1, 2});
  Tape<T> tape;
  ops::sum(tape, ops::scale(tape, x, T(3)));
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Gradcheck, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  auto x = Tensor<T>::from({3}, {0.5, -1.0, 2.0}, true);
  Fn f = [&](Tape<T>& t) {
    auto out = Tensor<T>::zeros({1}, true);
    for (T v : x.vec()) out[0] += v * v;
    t.record([x, out]() mutable {
      for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += 3 * x[i] * out.grad()[0];
    });
    return out;
  };
  EXPECT_GT(finite_diff_check<T>(f, {{"x", x}}).max_rel_err, 0.4);
}

TEST(Gradcheck, WideReferenceEvaluation) {
  std::mt19937_64 rng(9);
  auto x = rand_tensor({3, 3}, rng);
  auto w = rand_tensor({3, 3}, rng, false);
  auto xl = x.cast<long double>();
  auto wl = w.cast<long double>();
  Fn f = [&](Tape<T>& t) { return ops::sum(t, ops::mul(t, ops::matmul(t, x, x), w)); };
  std::function<Tensor<long double>(Tape<long double>&)> fl = [&](Tape<long double>& t) {
    return ops::sum(t, ops::mul(t, ops::matmul(t, xl, xl), wl));
  };
  const auto r = finite_diff_check<T, long double>(f, {{"x", x}}, fl, {{"x", xl}});
  EXPECT_LE(r.max_rel_err, kOpTol);
  EXPECT_EQ(r.per_param.at(0).coords, 9u);
}

TEST(ModelGradcheck, PassesAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    ModelGradcheckConfig cfg;
    cfg.seed = seed;
    const auto r = model_gradcheck(cfg);
    EXPECT_LE(r.max_rel_err, 1e-4) << "seed " << seed;
    EXPECT_EQ(r.per_param.size(), 2 * 4 * 2 + 2 + 2u);
  }
}
