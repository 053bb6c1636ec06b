// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace transgat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gradcheck() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelGradcheckConfig cfg;  // 2 layers, 4 heads, d = 8, d_head = 4, 6 nodes
  const auto r = model_gradcheck(cfg);
  const double secs = seconds_since(t0);
  std::size_t coords = 0;
  for (const auto& e : r.per_param) coords += e.coords;
  return {r.max_rel_err <= 1e-4 && secs < 60.0,
          fmt("max rel err %.3e over %zu coords in %zu tensors, %.2f s", r.max_rel_err, coords, r.per_param.size(), secs)};
}

Outcome qwk_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int degenerate = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 2 + static_cast<int>(rng() % 8);
    const std::size_t len = 1 + rng() % 200;
    std::uniform_int_distribution<int> cat(0, n - 1);
    std::vector<int> t(len), p(len);
    const int mode = i % 10;  // 0: both constant and equal, 1: one side constant
    const int k = cat(rng);
    for (std::size_t j = 0; j < len; ++j) {
      t[j] = mode <= 1 ? k : cat(rng);
      p[j] = mode == 0 ? k : cat(rng);
    }
    degenerate += mode <= 1;
    worst = std::max(worst, std::abs(qwk(t, p, n) - tsupport::brute_qwk(t, p, n)));
  }
  return {worst <= 1e-12, fmt("1000 cases (%d degenerate), max |diff| %.3e", degenerate, worst)};
}

Outcome hand_value() {
  const double k = qwk(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}, 2);
  return {k == 0.5, fmt("qwk = %.17g", k)};
}

Outcome synthetic_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;  // 64 essays, d = 16, 10-30 tokens
  const auto split = to_split(gen_synthetic(sc));
  const auto data = PreparedSplit<double>::from(split);
  GatConfig gc;
  gc.d_head = 16;
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = data.size();
  tc.lr = 3e-2;
  const auto r = fit(data, data, TransGatModel<double>::init(gc, sc.dim, 1), tc);
  const double mse = mean_loss(data, r.best);
  const auto rep = evaluate_split(data, r.best);
  const double worst = *std::min_element(rep.kappa.begin(), rep.kappa.end());
  const double secs = seconds_since(t0);
  return {mse <= 0.01 && worst >= 0.95 && secs < 300.0,
          fmt("%zu essays, train MSE %.5f, min trait QWK %.4f, best epoch %zu, %.1f s", data.size(), mse, worst,
              r.best_epoch, secs)};
}

template <typename T>
double permutation_gap(int graphs, std::uint64_t seed) {
  GatConfig gc;
  gc.d_head = 8;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0.0;
  for (int i = 0; i < graphs; ++i) {
    auto p = init_gat_params<T>(gc, 16, seed + i);
    for (auto& v : p.head.b2.vec()) v = static_cast<T>(u(rng));
    const auto g = tsupport::random_graph<T>(2 + rng() % 29, 16, rng);
    const auto h = tsupport::permute_graph(g, tsupport::random_permutation(g.num_nodes, rng));
    Tape<T> tape(false);
    const auto a = gat_forward(tape, batch_graphs(std::vector{g}), p.layers, p.head, gc).s2;
    const auto b = gat_forward(tape, batch_graphs(std::vector{h}), p.layers, p.head, gc).s2;
    for (std::size_t k = 0; k < kTraitCount; ++k)
      worst = std::max(worst, std::abs(static_cast<double>(a[k]) - static_cast<double>(b[k])));
  }
  return worst;
}

Outcome permutation_invariance() {
  const double d = permutation_gap<double>(100, 7);
  const double f = permutation_gap<float>(100, 7);
  return {d <= 1e-10 && f <= 1e-5, fmt("100 graphs, max |ds2| double %.3e, float %.3e", d, f)};
}

Outcome attention_normalization() {
  GatConfig gc;
  gc.d_head = 8;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  std::size_t heads_checked = 0;
  for (int i = 0; i < 100; ++i) {
    const auto p = init_gat_params<double>(gc, 16, 100 + i);
    std::vector<TokenGraph<double>> gs;
    const std::size_t k = 1 + rng() % 8;
    for (std::size_t j = 0; j < k; ++j) gs.push_back(tsupport::random_graph<double>(1 + rng() % 30, 16, rng));
    const auto b = batch_graphs(gs);
    Tape<double> tape(false);
    const auto out = gat_forward(tape, b, p.layers, p.head, gc);
    if (out.trace.layers.size() != 2) return {false, "trace does not hold two layers"};
    for (const auto& layer : out.trace.layers) {
      if (layer.heads.size() != 4) return {false, "trace does not hold four heads"};
      for (const auto& h : layer.heads) {
        std::vector<double> tot(b.graph.num_nodes, 0.0);
        for (std::size_t e = 0; e < b.graph.edges.size(); ++e) tot[b.graph.edges[e].dst] += h.alpha[e];
        for (double v : tot) worst = std::max(worst, std::abs(v - 1.0));
        ++heads_checked;
      }
    }
  }
  return {worst <= 1e-6, fmt("100 batches, %zu layer-heads, max |sum - 1| %.3e", heads_checked, worst)};
}

Outcome graph_construction() {
  const auto text = tsupport::read_file(fs::path(TRANSGAT_TEST_DATA) / "three_sentences.conllu");
  const auto recs = conllu::to_records(text, "fixture");
  if (recs.size() != 1) return {false, "fixture should hold one document"};
  const auto& r = recs[0];
  // The cat sat . | Dogs bark loudly . | We did n't stop .
  const std::vector<std::pair<std::size_t, std::size_t>> undirected{
      {0, 1}, {1, 2}, {3, 2}, {4, 5}, {6, 5}, {7, 5}, {8, 11}, {9, 11}, {10, 11}, {12, 11}};
  std::set<std::pair<std::size_t, std::size_t>> want;
  for (std::size_t i = 0; i < 13; ++i) want.insert({i, i});
  for (auto [a, b] : undirected) {
    want.insert({a, b});
    want.insert({b, a});
  }
  std::set<std::pair<std::size_t, std::size_t>> got;
  for (const auto& e : dependency_edges(r)) got.insert({e.src, e.dst});
  std::stringstream ss;
  io::write_essays(ss, recs);
  const auto back = io::read_essays(ss);
  std::stringstream ss2;
  io::write_essays(ss2, back);
  const bool lossless = back == recs && ss2.str() == ss.str();
  const bool edges_ok = got == want && dependency_edges(r).size() == want.size();
  return {edges_ok && lossless && r.sentence_spans.size() == 3,
          fmt("%zu tokens, %zu sentences, %zu/%zu edges match, JSONL round trip %s", r.tokens.size(),
              r.sentence_spans.size(), got == want ? want.size() : std::size_t{0}, want.size(),
              lossless ? "lossless" : "LOSSY")};
}

int run(const std::string& args) {
  const std::string cmd = "\"" TRANSGAT_CLI "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto d = tsupport::fresh_dir("acceptance_determinism");
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  if (run("gen-synth --n 24 --dim 8 --seed 1 --out " + q(d / "train")) != 0 ||
      run("gen-synth --n 8 --dim 8 --seed 2 --out " + q(d / "val")) != 0)
    return {false, "gen-synth failed"};
  const std::string common = "train --data " + q(d / "train") + " --val " + q(d / "val") +
                             " --epochs 4 --batch-size 4 --d-head 8 --lr 0.01 --seed 3 --precision double";
  if (run(common + " --out " + q(d / "a.ckpt")) != 0 || run(common + " --out " + q(d / "b.ckpt")) != 0)
    return {false, "train failed"};
  const auto ca = tsupport::read_file(d / "a.ckpt"), cb = tsupport::read_file(d / "b.ckpt");
  const auto ha = tsupport::read_file(d / "a.ckpt.history.csv"), hb = tsupport::read_file(d / "b.ckpt.history.csv");
  const bool ok = !ca.empty() && !ha.empty() && ca == cb && ha == hb;
  return {ok, fmt("checkpoints %zu bytes %s, histories %zu bytes %s", ca.size(), ca == cb ? "identical" : "DIFFER",
                  ha.size(), ha == hb ? "identical" : "DIFFER")};
}

Outcome banding() {
  const auto name = band_name(interpret_kappa(0.854));
  return {name == "Almost perfect agreement", "0.854 -> " + std::string(name)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradcheck", gradcheck},
      {"qwk-oracle", qwk_oracle},
      {"qwk-hand-value", hand_value},
      {"synthetic-overfit", synthetic_overfit},
      {"permutation-invariance", permutation_invariance},
      {"attention-normalization", attention_normalization},
      {"graph-construction", graph_construction},
      {"determinism", determinism},
      {"interpretation-banding", banding},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %-24s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
