#pragma once

// Dense row-major tensors and a reverse-mode tape.
//
// A Tensor is a shared handle; copying it aliases the same buffer. Parameters
// live outside any tape and are reused across forward passes, while every op
// result is a fresh tensor owned by whoever holds the handle. Ops that have at
// least one grad-requiring input push a backward closure onto the tape, so the
// tape order is already topological.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace transgat {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : s_(std::make_shared<TensorStorage<T>>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    const std::size_t n = numel(shape);
    t.s_->shape = std::move(shape);
    t.s_->data.assign(n, T(0));
    t.s_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (numel(shape) != data.size())
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    Tensor t;
    t.s_->shape = std::move(shape);
    t.s_->data = std::move(data);
    t.s_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t size() const { return s_->data.size(); }

  // Rank-1 tensors behave as column vectors.
  std::size_t rows() const { return rank() == 0 ? 1 : s_->shape[0]; }
  std::size_t cols() const {
    if (rank() <= 1) return 1;
    return size() / s_->shape[0];
  }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool v) { s_->requires_grad = v; }

  std::span<T> data() { return s_->data; }
  std::span<const T> data() const { return s_->data; }
  std::vector<T>& vec() { return s_->data; }
  const std::vector<T>& vec() const { return s_->data; }

  T& operator()(std::size_t r, std::size_t c) { return s_->data[r * cols() + c]; }
  T operator()(std::size_t r, std::size_t c) const { return s_->data[r * cols() + c]; }
  T& operator[](std::size_t i) { return s_->data[i]; }
  T operator[](std::size_t i) const { return s_->data[i]; }

  bool has_grad() const { return !s_->grad.empty(); }

  // Gradient buffer, allocated zero-filled on first access.
  std::span<T> grad() {
    if (s_->grad.empty()) s_->grad.assign(size(), T(0));
    return s_->grad;
  }
  std::span<const T> grad() const {
    if (s_->grad.empty()) s_->grad.assign(size(), T(0));
    return s_->grad;
  }

  void zero_grad() { s_->grad.clear(); }

  Tensor clone() const {
    Tensor t;
    *t.s_ = *s_;
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> d(size());
    std::transform(s_->data.begin(), s_->data.end(), d.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>::from(shape(), std::move(d), requires_grad());
  }

  bool same_storage(const Tensor& o) const { return s_ == o.s_; }

  static std::size_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::shared_ptr<TensorStorage<T>> s_;
};

template <typename T>
class Tape {
 public:
  // A non-recording tape runs forward only.
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return ops_.size(); }

  void record(std::function<void()> backward) {
    if (recording_) ops_.push_back(std::move(backward));
  }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Call once per tape.
  void backward(Tensor<T>& loss) {
    if (loss.size() != 1)
      throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    if (!recording_) throw std::logic_error("backward on a non-recording tape");
    loss.grad()[0] += T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  bool recording_;
  std::vector<std::function<void()>> ops_;
};

}  // namespace transgat
