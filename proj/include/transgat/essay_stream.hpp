#pragma once

// Essay-level dense stream: s1 = LeakyReLU(W v + b) over the pooled essay vector.

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>

#include "transgat/data.hpp"
#include "transgat/gat.hpp"
#include "transgat/ops.hpp"
#include "transgat/tensor.hpp"

namespace transgat {

template <typename T>
struct EssayHeadParams {
  Tensor<T> W;  // kTraitCount x d
  Tensor<T> b;  // kTraitCount
};

// essay_vecs: B x d, one essay per row. Returns B x kTraitCount.
template <typename T>
Tensor<T> essay_forward(Tape<T>& tape, const Tensor<T>& essay_vecs, const EssayHeadParams<T>& params,
                        T activation_slope = T(0.01)) {
  if (params.W.cols() != essay_vecs.cols())
    throw std::invalid_argument("essay_forward: essay vector has " + std::to_string(essay_vecs.cols()) +
                                " features, head expects " + std::to_string(params.W.cols()));
  auto pre = ops::add_bias(tape, ops::matmul(tape, essay_vecs, ops::transpose(tape, params.W)), params.b);
  return ops::leaky_relu(tape, pre, activation_slope);
}

template <typename T>
EssayHeadParams<T> init_essay_head(std::size_t d, std::mt19937_64& rng) {
  EssayHeadParams<T> p;
  p.W = glorot_uniform<T>({kTraitCount, d}, d, kTraitCount, rng);
  p.b = Tensor<T>::zeros({kTraitCount}, true);
  return p;
}

}  // namespace transgat
