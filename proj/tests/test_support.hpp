#pragma once

// Generators and independent reference implementations shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "transgat.hpp"

namespace tsupport {

using namespace transgat;

// Random essay: sentences of 1..max_sentence tokens, each a random tree.
inline EssayRecord random_record(std::size_t n, std::mt19937_64& rng, std::size_t max_sentence = 6,
                                 const std::string& id = "e") {
  EssayRecord r;
  r.id = id;
  for (std::size_t i = 0; i < n; ++i) r.tokens.push_back("t" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> len(1, max_sentence);
  for (std::size_t start = 0; start < n;) {
    const std::size_t l = std::min(len(rng), n - start);
    r.sentence_spans.push_back({start, start + l});
    transgat::detail::random_tree(start, l, rng, r.deps);
    start += l;
  }
  return r;
}

inline EmbeddingBundle random_bundle(const EssayRecord& r, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  EmbeddingBundle b;
  b.essay_id = r.id;
  b.dim = d;
  for (std::size_t i = 0; i < r.tokens.size() * d; ++i) b.token_matrix.push_back(static_cast<float>(g(rng)));
  for (std::size_t i = 0; i < d; ++i) b.essay_vec.push_back(static_cast<float>(g(rng)));
  return b;
}

template <typename T>
TokenGraph<T> random_graph(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  const auto r = random_record(n, rng);
  return build_graph<T>(r, random_bundle(r, d, rng));
}

// Relabels node i as perm[i].
template <typename T>
TokenGraph<T> permute_graph(const TokenGraph<T>& g, const std::vector<std::size_t>& perm) {
  TokenGraph<T> out;
  out.num_nodes = g.num_nodes;
  const std::size_t d = g.node_features.cols();
  std::vector<T> feats(g.num_nodes * d);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    for (std::size_t c = 0; c < d; ++c) feats[perm[i] * d + c] = g.node_features(i, c);
  out.node_features = Tensor<T>::from({g.num_nodes, d}, feats);
  for (const auto& e : g.edges) out.edges.push_back({perm[e.src], perm[e.dst]});
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// QWK by direct loops over item pairs: sum(w*O) pairs each item with its own
// prediction, sum(w*E) pairs every true label with every prediction / n.
inline double brute_qwk(const std::vector<int>& t, const std::vector<int>& p, int n) {
  const double nn = static_cast<double>(t.size());
  auto w = [n](int i, int j) { return static_cast<double>((i - j) * (i - j)) / static_cast<double>((n - 1) * (n - 1)); };
  double obs = 0.0, exp = 0.0;
  for (std::size_t a = 0; a < t.size(); ++a) obs += w(t[a], p[a]);
  for (std::size_t a = 0; a < t.size(); ++a)
    for (std::size_t b = 0; b < p.size(); ++b) exp += w(t[a], p[b]);
  exp /= nn;
  if (exp == 0.0) return 1.0;
  return 1.0 - obs / exp;
}

// ---------------------------------------------------------------------------
// Straight-line GAT in plain double loops, adjacency from an edge list.

using Mat = std::vector<std::vector<double>>;

inline double lrelu(double x, double s) { return x > 0 ? x : s * x; }

inline Mat to_mat(const Tensor<double>& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

struct OracleHead {
  Mat out;                                  // n x d_head, after activation
  std::vector<std::vector<double>> alpha;   // alpha[i][j], 0 where no edge
  std::vector<std::vector<double>> logits;  // e[i][j]
};

inline OracleHead oracle_head(const Mat& h, const std::vector<Edge>& edges, const AttentionHead<double>& p,
                              double att_slope, double act_slope) {
  const std::size_t n = h.size();
  const Mat wh = mat_mul(h, to_mat(p.W));
  const std::size_t dh = wh[0].size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& e : edges) adj[e.dst][e.src] = true;
  OracleHead r;
  r.alpha.assign(n, std::vector<double>(n, 0.0));
  r.logits.assign(n, std::vector<double>(n, 0.0));
  r.out.assign(n, std::vector<double>(dh, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!adj[i][j]) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += p.a[c] * wh[i][c] + p.a[dh + c] * wh[j][c];
      r.logits[i][j] = lrelu(s, att_slope);
      z += std::exp(r.logits[i][j]);
    }
    for (std::size_t j = 0; j < n; ++j)
      if (adj[i][j]) r.alpha[i][j] = std::exp(r.logits[i][j]) / z;
    for (std::size_t c = 0; c < dh; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += r.alpha[i][j] * wh[j][c];
      r.out[i][c] = lrelu(s, act_slope);
    }
  }
  return r;
}

inline Mat oracle_layer(const Mat& h, const std::vector<Edge>& edges, const GatLayerParams<double>& layer,
                        bool concat, const GatConfig& cfg) {
  std::vector<Mat> outs;
  for (const auto& head : layer.heads)
    outs.push_back(oracle_head(h, edges, head, cfg.attention_slope, cfg.activation_slope).out);
  Mat r(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (concat) {
      for (const auto& o : outs) r[i].insert(r[i].end(), o[i].begin(), o[i].end());
    } else {
      r[i].assign(outs[0][i].size(), 0.0);
      for (const auto& o : outs)
        for (std::size_t c = 0; c < o[i].size(); ++c) r[i][c] += o[i][c] / static_cast<double>(outs.size());
    }
  }
  return r;
}

// Full GAT stream for a single graph; returns s2 (length 6).
inline std::vector<double> oracle_gat(const TokenGraph<double>& g, const GatParams<double>& p, const GatConfig& cfg) {
  Mat h = to_mat(g.node_features);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    h = oracle_layer(h, g.edges, p.layers[l], cfg.combine_for(l) == HeadCombine::concat, cfg);
  std::vector<double> pooled(h[0].size(), 0.0);
  for (const auto& row : h)
    for (std::size_t c = 0; c < row.size(); ++c) pooled[c] += row[c] / static_cast<double>(h.size());
  std::vector<double> s2(kTraitCount);
  for (std::size_t k = 0; k < kTraitCount; ++k) {
    double s = p.head.b2[k];
    for (std::size_t c = 0; c < pooled.size(); ++c) s += pooled[c] * p.head.W2(c, k);
    s2[k] = lrelu(s, cfg.activation_slope);
  }
  return s2;
}

// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("transgat_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace tsupport
