#pragma once

// Token graphs built from dependency parses, and block-diagonal batching.
//
// Every dependency contributes an undirected edge, stored as both (h, d) and
// (d, h); every node gets a self-loop so its own features take part in
// attention. Edges are unique and sorted by (src, dst).

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "transgat/data.hpp"
#include "transgat/tensor.hpp"

namespace transgat {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  auto operator<=>(const Edge&) const = default;
};

template <typename T>
struct TokenGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  Tensor<T> node_features;  // num_nodes x d

  std::size_t feature_dim() const { return num_nodes == 0 ? 0 : node_features.cols(); }
};

template <typename T>
struct GraphBatch {
  TokenGraph<T> graph;
  std::vector<std::size_t> segment_ids;  // graph index of every node
  std::vector<std::size_t> offsets;      // first node of every graph
  std::vector<std::size_t> sizes;        // node count of every graph

  std::size_t num_graphs() const { return offsets.size(); }
};

// Sorts, deduplicates, and adds self-loops; returns the canonical edge list.
inline std::vector<Edge> canonical_edges(std::size_t n, std::vector<Edge> edges) {
  for (std::size_t i = 0; i < n; ++i) edges.push_back({i, i});
  for (const auto& e : edges)
    if (e.src >= n || e.dst >= n)
      throw std::out_of_range("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) + ") outside " +
                              std::to_string(n) + " nodes");
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// Undirected, self-looped edge set of one essay's dependency parse.
inline std::vector<Edge> dependency_edges(const EssayRecord& record) {
  const std::size_t n = record.tokens.size();
  std::vector<Edge> edges;
  edges.reserve(2 * record.deps.size());
  for (const auto& d : record.deps) {
    if (d.head < -1 || d.dependent < 0 || d.head >= static_cast<long>(n) || d.dependent >= static_cast<long>(n))
      throw std::out_of_range("dependency (" + std::to_string(d.head) + ", " + std::to_string(d.dependent) +
                              ") outside essay '" + record.id + "'");
    if (d.head < 0) continue;
    const auto h = static_cast<std::size_t>(d.head);
    const auto t = static_cast<std::size_t>(d.dependent);
    edges.push_back({h, t});
    edges.push_back({t, h});
  }
  return canonical_edges(n, std::move(edges));
}

template <typename T>
TokenGraph<T> build_graph(const EssayRecord& record, const EmbeddingBundle& bundle) {
  if (bundle.dim == 0 || bundle.num_tokens() != record.tokens.size() ||
      bundle.token_matrix.size() != record.tokens.size() * bundle.dim)
    throw std::invalid_argument("build_graph: embeddings for '" + bundle.essay_id + "' do not match essay '" +
                                record.id + "'");
  TokenGraph<T> g;
  g.num_nodes = record.tokens.size();
  g.edges = dependency_edges(record);
  std::vector<T> feats(bundle.token_matrix.begin(), bundle.token_matrix.end());
  g.node_features = Tensor<T>::from({g.num_nodes, bundle.dim}, std::move(feats));
  return g;
}

template <typename T>
GraphBatch<T> batch_graphs(const std::vector<TokenGraph<T>>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("batch_graphs: empty graph list");
  const std::size_t d = graphs.front().node_features.cols();
  GraphBatch<T> b;
  std::size_t total = 0;
  for (const auto& g : graphs) {
    if (g.num_nodes == 0) throw std::invalid_argument("batch_graphs: graph with no nodes");
    if (g.node_features.cols() != d || g.node_features.rows() != g.num_nodes)
      throw std::invalid_argument("batch_graphs: feature dimension mismatch");
    total += g.num_nodes;
  }
  std::vector<T> feats;
  feats.reserve(total * d);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    const std::size_t off = b.graph.num_nodes;
    b.offsets.push_back(off);
    b.sizes.push_back(g.num_nodes);
    b.segment_ids.insert(b.segment_ids.end(), g.num_nodes, gi);
    for (const auto& e : g.edges) b.graph.edges.push_back({e.src + off, e.dst + off});
    feats.insert(feats.end(), g.node_features.vec().begin(), g.node_features.vec().end());
    b.graph.num_nodes += g.num_nodes;
  }
  b.graph.node_features = Tensor<T>::from({total, d}, std::move(feats));
  return b;
}

// Inverse of batch_graphs.
template <typename T>
std::vector<TokenGraph<T>> unbatch_graphs(const GraphBatch<T>& b) {
  std::vector<TokenGraph<T>> out(b.num_graphs());
  const std::size_t d = b.graph.node_features.cols();
  for (std::size_t gi = 0; gi < out.size(); ++gi) {
    const std::size_t off = b.offsets[gi], n = b.sizes[gi];
    out[gi].num_nodes = n;
    auto first = b.graph.node_features.vec().begin() + static_cast<std::ptrdiff_t>(off * d);
    out[gi].node_features = Tensor<T>::from({n, d}, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(n * d)));
  }
  for (const auto& e : b.graph.edges) {
    const std::size_t gi = b.segment_ids[e.src];
    if (b.segment_ids[e.dst] != gi) throw std::logic_error("unbatch_graphs: edge crosses graph boundary");
    out[gi].edges.push_back({e.src - b.offsets[gi], e.dst - b.offsets[gi]});
  }
  return out;
}

}  // namespace transgat
