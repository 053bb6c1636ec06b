#pragma once

// The two-stream scorer (essay stream + GAT stream) and its TGMC checkpoint.
//
// TGMC layout (little-endian):
//   "TGMC" | version u32
//   config: num_layers u32, num_heads u32, d_head u32, d_in u32, trait count u32,
//           attention slope f64, activation slope f64, tensor count u32
//   per tensor: name length u32, name bytes, rank u32, dims u64 x rank,
//               f32 row-major data

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "transgat/data.hpp"
#include "transgat/essay_stream.hpp"
#include "transgat/gat.hpp"
#include "transgat/gradcheck.hpp"
#include "transgat/graph.hpp"
#include "transgat/io.hpp"
#include "transgat/ops.hpp"

namespace transgat {

inline constexpr char kCheckpointMagic[4] = {'T', 'G', 'M', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public InputError {
 public:
  using InputError::InputError;
};

template <typename T>
struct FusionOutput {
  Tensor<T> s1;     // B x kTraitCount
  Tensor<T> s2;     // B x kTraitCount
  Tensor<T> y_hat;  // s1 + s2
  GatForwardTrace<T> trace;
};

template <typename T>
Tensor<T> fuse(Tape<T>& tape, const Tensor<T>& s1, const Tensor<T>& s2) {
  if (s1.cols() != kTraitCount || s2.cols() != kTraitCount)
    throw std::invalid_argument("fuse: both streams must produce " + std::to_string(kTraitCount) + " scores");
  return ops::add(tape, s1, s2);
}

// Graphs and essay vectors for a group of essays, ready for one forward pass.
template <typename T>
struct ModelInput {
  GraphBatch<T> graphs;
  Tensor<T> essay_vecs;  // B x d
  Tensor<T> targets;     // B x kTraitCount; empty when gold is absent

  std::size_t size() const { return graphs.num_graphs(); }
};

template <typename T>
struct TransGatModel {
  GatConfig config;
  std::size_t d_in = 0;
  GatParams<T> gat;
  EssayHeadParams<T> essay;

  static TransGatModel init(const GatConfig& config, std::size_t d_in, std::uint64_t seed) {
    config.validate();
    if (d_in == 0) throw std::invalid_argument("model input dimension must be positive");
    std::mt19937_64 rng(seed);
    TransGatModel m;
    m.config = config;
    m.d_in = d_in;
    m.gat = init_gat_params<T>(config, d_in, rng);
    m.essay = init_essay_head<T>(d_in, rng);
    return m;
  }

  // Every trainable tensor, in checkpoint order. Handles alias the model.
  std::vector<NamedParam<T>> gat_parameters() const {
    std::vector<NamedParam<T>> out;
    for (std::size_t l = 0; l < gat.layers.size(); ++l)
      for (std::size_t h = 0; h < gat.layers[l].heads.size(); ++h) {
        const std::string prefix = "gat.layer" + std::to_string(l) + ".head" + std::to_string(h);
        out.push_back({prefix + ".W", gat.layers[l].heads[h].W});
        out.push_back({prefix + ".a", gat.layers[l].heads[h].a});
      }
    out.push_back({"gat.out.W2", gat.head.W2});
    out.push_back({"gat.out.b2", gat.head.b2});
    return out;
  }

  std::vector<NamedParam<T>> essay_parameters() const {
    return {{"essay.W", essay.W}, {"essay.b", essay.b}};
  }

  std::vector<NamedParam<T>> parameters() const {
    auto out = gat_parameters();
    for (auto& p : essay_parameters()) out.push_back(p);
    return out;
  }

  TransGatModel clone() const {
    TransGatModel m = *this;
    for (auto& layer : m.gat.layers)
      for (auto& h : layer.heads) {
        h.W = h.W.clone();
        h.a = h.a.clone();
      }
    m.gat.head.W2 = gat.head.W2.clone();
    m.gat.head.b2 = gat.head.b2.clone();
    m.essay.W = essay.W.clone();
    m.essay.b = essay.b.clone();
    return m;
  }

  template <typename U>
  TransGatModel<U> cast() const {
    TransGatModel<U> m;
    m.config = config;
    m.d_in = d_in;
    for (const auto& layer : gat.layers) {
      GatLayerParams<U> l;
      for (const auto& h : layer.heads) l.heads.push_back({h.W.template cast<U>(), h.a.template cast<U>()});
      m.gat.layers.push_back(std::move(l));
    }
    m.gat.head = {gat.head.W2.template cast<U>(), gat.head.b2.template cast<U>()};
    m.essay = {essay.W.template cast<U>(), essay.b.template cast<U>()};
    return m;
  }

  FusionOutput<T> forward(Tape<T>& tape, const ModelInput<T>& input) const {
    if (input.essay_vecs.cols() != d_in || input.graphs.graph.node_features.cols() != d_in)
      throw std::invalid_argument("model expects " + std::to_string(d_in) + "-dimensional embeddings");
    FusionOutput<T> out;
    out.s1 = essay_forward(tape, input.essay_vecs, essay, static_cast<T>(config.activation_slope));
    auto g = gat_forward(tape, input.graphs, gat.layers, gat.head, config);
    out.s2 = g.s2;
    out.trace = std::move(g.trace);
    out.y_hat = fuse(tape, out.s1, out.s2);
    return out;
  }
};

// A split converted once into model-precision graphs, essay vectors, and
// targets, from which mini-batches are assembled by index.
template <typename T>
struct PreparedSplit {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<TokenGraph<T>> graphs;
  std::vector<std::vector<T>> essay_vecs;
  std::vector<std::optional<TraitScores>> gold;

  static PreparedSplit from(const DatasetSplit& split) {
    PreparedSplit p;
    for (const auto& r : split.records) {
      const auto& b = split.bundle_for(r);
      if (p.dim == 0) p.dim = b.dim;
      if (b.dim != p.dim) throw InputError("embedding dimensions differ within split");
      p.ids.push_back(r.id);
      p.graphs.push_back(build_graph<T>(r, b));
      p.essay_vecs.emplace_back(b.essay_vec.begin(), b.essay_vec.end());
      p.gold.push_back(r.gold);
    }
    return p;
  }

  std::size_t size() const { return graphs.size(); }

  bool all_gold() const {
    for (const auto& g : gold)
      if (!g) return false;
    return true;
  }

  ModelInput<T> batch(std::span<const std::size_t> index) const {
    if (index.empty()) throw std::invalid_argument("PreparedSplit::batch: empty batch");
    std::vector<TokenGraph<T>> gs;
    gs.reserve(index.size());
    std::vector<T> vecs, targets;
    bool have_targets = true;
    for (auto i : index) {
      if (i >= size()) throw std::out_of_range("PreparedSplit::batch: essay index out of range");
      gs.push_back(graphs[i]);
      vecs.insert(vecs.end(), essay_vecs[i].begin(), essay_vecs[i].end());
      if (gold[i])
        for (std::size_t k = 0; k < kTraitCount; ++k) targets.push_back(static_cast<T>((*gold[i])[k]));
      else
        have_targets = false;
    }
    ModelInput<T> in;
    in.graphs = batch_graphs(gs);
    in.essay_vecs = Tensor<T>::from({index.size(), dim}, std::move(vecs));
    if (have_targets) in.targets = Tensor<T>::from({index.size(), kTraitCount}, std::move(targets));
    return in;
  }

  ModelInput<T> all() const {
    std::vector<std::size_t> idx(size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return batch(idx);
  }
};

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
void save_checkpoint(std::ostream& os, const TransGatModel<T>& model) {
  io::BinaryWriter w(os);
  w.bytes(kCheckpointMagic, 4);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.config.num_layers));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.config.num_heads));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.config.d_head));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.d_in));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(kTraitCount));
  w.f64(model.config.attention_slope);
  w.f64(model.config.activation_slope);
  const auto params = model.parameters();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto dim : p.tensor.shape()) w.uint<std::uint64_t>(dim);
    for (T v : p.tensor.vec()) w.f32(static_cast<float>(v));
  }
}

template <typename T>
TransGatModel<T> load_checkpoint(std::istream& is, const std::string& source = "checkpoint") {
  io::BinaryReader r(is, source);
  char magic[4];
  try {
    r.bytes(magic, 4);
  } catch (const InputError&) {
    throw CheckpointError("bad checkpoint magic");
  }
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  GatConfig config;
  config.num_layers = r.uint<std::uint32_t>();
  config.num_heads = r.uint<std::uint32_t>();
  config.d_head = r.uint<std::uint32_t>();
  const std::size_t d_in = r.uint<std::uint32_t>();
  const auto traits = r.uint<std::uint32_t>();
  config.attention_slope = r.f64();
  config.activation_slope = r.f64();
  if (traits != kTraitCount) throw CheckpointError("checkpoint predicts " + std::to_string(traits) + " traits");
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint config: ") + e.what());
  }
  if (d_in == 0) throw CheckpointError("checkpoint input dimension is zero");

  auto model = TransGatModel<T>::init(config, d_in, 0);
  const auto expected = model.parameters();
  const auto count = r.uint<std::uint32_t>();
  if (count != expected.size())
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                          std::to_string(expected.size()));
  for (auto p : expected) {
    const auto name_len = r.uint<std::uint32_t>();
    if (name_len > 4096) throw CheckpointError("checkpoint tensor name too long");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    if (name != p.name) throw CheckpointError("checkpoint tensor '" + name + "' where '" + p.name + "' expected");
    const auto rank = r.uint<std::uint32_t>();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(r.uint<std::uint64_t>()));
    if (shape != p.tensor.shape())
      throw CheckpointError("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                            shape_str(p.tensor.shape()));
    for (auto& v : p.tensor.vec()) v = static_cast<T>(r.f32());
  }
  if (!r.at_eof()) throw CheckpointError("trailing bytes in checkpoint");
  return model;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const TransGatModel<T>& model) {
  auto f = io::open_out(path, std::ios::out | std::ios::binary);
  save_checkpoint(f, model);
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

template <typename T>
TransGatModel<T> load_checkpoint(const std::filesystem::path& path) {
  auto f = io::open_in(path, std::ios::in | std::ios::binary);
  return load_checkpoint<T>(f, path.string());
}

}  // namespace transgat
