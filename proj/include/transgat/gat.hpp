#pragma once

// Multi-head graph attention over token graphs, followed by global mean
// pooling and a LeakyReLU prediction head.
//
// For a destination node i and neighbor j (edge j -> i, i.e. Edge{src=j, dst=i}):
//   e_ij     = LeakyReLU_att(a^T [W h_i || W h_j])
//   alpha_ij = softmax of e_ij over the neighbors of i
//   h'_i     = LeakyReLU_act(sum_j alpha_ij W h_j)
// Heads are concatenated on every layer except the last, which averages them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "transgat/data.hpp"
#include "transgat/graph.hpp"
#include "transgat/ops.hpp"
#include "transgat/tensor.hpp"

namespace transgat {

enum class HeadCombine { concat, mean };

struct GatConfig {
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t d_head = 64;
  double attention_slope = 0.2;
  double activation_slope = 0.01;

  HeadCombine combine_for(std::size_t layer) const {
    return layer + 1 == num_layers ? HeadCombine::mean : HeadCombine::concat;
  }

  std::size_t layer_input_dim(std::size_t layer, std::size_t d_in) const {
    return layer == 0 ? d_in : num_heads * d_head;
  }

  // Width of the pooled graph vector.
  std::size_t graph_dim() const { return d_head; }

  void validate() const {
    if (num_layers < 1) throw std::invalid_argument("GatConfig: num_layers must be >= 1");
    if (num_heads < 1) throw std::invalid_argument("GatConfig: num_heads must be >= 1");
    if (d_head < 1) throw std::invalid_argument("GatConfig: d_head must be >= 1");
    if (!(attention_slope > 0 && attention_slope < 1) || !(activation_slope > 0 && activation_slope < 1))
      throw std::invalid_argument("GatConfig: LeakyReLU slopes must lie in (0, 1)");
  }

  bool operator==(const GatConfig&) const = default;
};

template <typename T>
struct AttentionHead {
  Tensor<T> W;  // d_in x d_head
  Tensor<T> a;  // 2*d_head, destination half first
};

template <typename T>
struct GatLayerParams {
  std::vector<AttentionHead<T>> heads;
};

template <typename T>
struct GatHeadParams {
  Tensor<T> W2;  // d_graph x kTraitCount
  Tensor<T> b2;  // kTraitCount
};

template <typename T>
struct HeadTrace {
  std::vector<T> logits;  // per edge
  std::vector<T> alpha;   // per edge
};

template <typename T>
struct LayerTrace {
  std::vector<HeadTrace<T>> heads;
  Tensor<T> output;  // N x layer width, after head combination
};

template <typename T>
struct GatForwardTrace {
  std::vector<LayerTrace<T>> layers;
  Tensor<T> pooled;  // B x d_graph
};

template <typename T>
struct GatOutput {
  Tensor<T> s2;  // B x kTraitCount
  GatForwardTrace<T> trace;
};

// Edge endpoints split into gather/scatter index lists.
struct EdgeIndex {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;

  EdgeIndex() = default;
  EdgeIndex(std::size_t n, const std::vector<Edge>& edges) : num_nodes(n) {
    src.reserve(edges.size());
    dst.reserve(edges.size());
    for (const auto& e : edges) {
      if (e.src >= n || e.dst >= n) throw std::out_of_range("EdgeIndex: edge endpoint outside graph");
      src.push_back(e.src);
      dst.push_back(e.dst);
    }
  }
  std::size_t size() const { return src.size(); }
};

namespace detail {

template <typename T>
void check_head_shapes(const Tensor<T>& features, const AttentionHead<T>& p) {
  if (p.W.rows() != features.cols())
    throw std::invalid_argument("attention head expects " + std::to_string(p.W.rows()) + " input features, got " +
                                std::to_string(features.cols()));
  if (p.a.size() != 2 * p.W.cols())
    throw std::invalid_argument("attention vector length " + std::to_string(p.a.size()) + " != 2 * " +
                                std::to_string(p.W.cols()));
}

}  // namespace detail

// Per-edge raw attention scores; `projected` receives W h for reuse.
template <typename T>
Tensor<T> attention_logits(Tape<T>& tape, const Tensor<T>& features, const EdgeIndex& edges,
                           const AttentionHead<T>& head, T slope, Tensor<T>* projected = nullptr) {
  detail::check_head_shapes(features, head);
  if (features.rows() != edges.num_nodes) throw std::invalid_argument("attention_logits: node count mismatch");
  auto wh = ops::matmul(tape, features, head.W);
  auto wh_dst = ops::gather_rows(tape, wh, edges.dst);
  auto wh_src = ops::gather_rows(tape, wh, edges.src);
  auto pair = ops::concat_cols(tape, {wh_dst, wh_src});
  auto logits = ops::leaky_relu(tape, ops::matmul(tape, pair, head.a), slope);
  if (projected) *projected = wh;
  return logits;
}

template <typename T>
Tensor<T> gat_layer(Tape<T>& tape, const Tensor<T>& features, const EdgeIndex& edges,
                    const GatLayerParams<T>& params, HeadCombine combine, const GatConfig& config,
                    LayerTrace<T>* trace = nullptr) {
  if (params.heads.empty()) throw std::invalid_argument("gat_layer: no attention heads");
  const T att_slope = static_cast<T>(config.attention_slope);
  const T act_slope = static_cast<T>(config.activation_slope);
  std::vector<Tensor<T>> outs;
  outs.reserve(params.heads.size());
  for (const auto& head : params.heads) {
    Tensor<T> wh;
    auto logits = attention_logits(tape, features, edges, head, att_slope, &wh);
    auto alpha = ops::segment_softmax(tape, logits, edges.dst, edges.num_nodes);
    auto messages = ops::scale_rows(tape, ops::gather_rows(tape, wh, edges.src), alpha);
    auto aggregated = ops::scatter_add_rows(tape, messages, edges.dst, edges.num_nodes);
    outs.push_back(ops::leaky_relu(tape, aggregated, act_slope));
    if (trace) trace->heads.push_back({logits.vec(), alpha.vec()});
  }
  Tensor<T> out;
  if (combine == HeadCombine::concat) {
    out = outs.size() == 1 ? outs.front() : ops::concat_cols(tape, outs);
  } else {
    out = outs.front();
    for (std::size_t h = 1; h < outs.size(); ++h) out = ops::add(tape, out, outs[h]);
    if (outs.size() > 1) out = ops::scale(tape, out, T(1) / static_cast<T>(outs.size()));
  }
  if (trace) trace->output = out;
  return out;
}

template <typename T>
GatOutput<T> gat_forward(Tape<T>& tape, const GraphBatch<T>& batch, const std::vector<GatLayerParams<T>>& layers,
                         const GatHeadParams<T>& head, const GatConfig& config) {
  if (layers.size() != config.num_layers) throw std::invalid_argument("gat_forward: layer count mismatch");
  const EdgeIndex edges(batch.graph.num_nodes, batch.graph.edges);
  GatOutput<T> result;
  Tensor<T> h = batch.graph.node_features;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerTrace<T> lt;
    h = gat_layer(tape, h, edges, layers[l], config.combine_for(l), config, &lt);
    result.trace.layers.push_back(std::move(lt));
  }
  auto pooled = ops::segment_mean(tape, h, batch.segment_ids, batch.num_graphs());
  result.trace.pooled = pooled;
  auto linear = ops::add_bias(tape, ops::matmul(tape, pooled, head.W2), head.b2);
  result.s2 = ops::leaky_relu(tape, linear, static_cast<T>(config.activation_slope));
  return result;
}

// Glorot-uniform tensor drawn from `rng` in double and rounded to T.
template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> data(Tensor<T>::numel(shape));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(data), true);
}

template <typename T>
struct GatParams {
  std::vector<GatLayerParams<T>> layers;
  GatHeadParams<T> head;
};

template <typename T>
GatParams<T> init_gat_params(const GatConfig& config, std::size_t d_in, std::mt19937_64& rng) {
  config.validate();
  GatParams<T> p;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::size_t in = config.layer_input_dim(l, d_in);
    GatLayerParams<T> layer;
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      AttentionHead<T> head;
      head.W = glorot_uniform<T>({in, config.d_head}, in, config.d_head, rng);
      head.a = glorot_uniform<T>({2 * config.d_head}, 2 * config.d_head, 1, rng);
      layer.heads.push_back(std::move(head));
    }
    p.layers.push_back(std::move(layer));
  }
  p.head.W2 = glorot_uniform<T>({config.graph_dim(), kTraitCount}, config.graph_dim(), kTraitCount, rng);
  p.head.b2 = Tensor<T>::zeros({kTraitCount}, true);
  return p;
}

template <typename T>
GatParams<T> init_gat_params(const GatConfig& config, std::size_t d_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_gat_params<T>(config, d_in, rng);
}

}  // namespace transgat
