#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "transgat/tensor.hpp"

namespace transgat {

struct GradcheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords = 0;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::vector<GradcheckEntry> per_param;
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

// Compares tape gradients of `params` against central differences taken on
// `ref_params`, a parallel copy of the same values in type R. Using a wider R
// (long double) keeps difference roundoff far below the 1e-8 floor, so tiny
// gradients are judged on the backward pass and not on cancellation noise.
//
// Each loss function runs the forward pass on the given tape over the current
// parameter values and returns the scalar loss.
// `max_coords_per_param` of 0 checks every coordinate; otherwise coordinates
// are taken at an even stride.
template <typename T, typename R>
GradcheckReport finite_diff_check(const std::function<Tensor<T>(Tape<T>&)>& loss_fn, std::vector<NamedParam<T>> params,
                                  const std::function<Tensor<R>(Tape<R>&)>& ref_loss_fn,
                                  std::vector<NamedParam<R>> ref_params, R eps = R(1e-5),
                                  std::size_t max_coords_per_param = 0) {
  if (params.size() != ref_params.size()) throw std::invalid_argument("finite_diff_check: parameter lists differ");
  for (auto& p : params) p.tensor.zero_grad();
  {
    Tape<T> tape;
    auto loss = loss_fn(tape);
    tape.backward(loss);
  }

  GradcheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    auto& ref = ref_params[pi].tensor;
    if (ref.size() != p.tensor.size()) throw std::invalid_argument("finite_diff_check: size mismatch for " + p.name);
    std::vector<T> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    GradcheckEntry entry{p.name, 0.0, 0};
    const std::size_t n = p.tensor.size();
    const std::size_t stride =
        (max_coords_per_param == 0 || n <= max_coords_per_param) ? 1 : (n + max_coords_per_param - 1) / max_coords_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const R orig = ref[i];
      ref[i] = orig + eps;
      Tape<R> fwd_up(false);
      const R up = ref_loss_fn(fwd_up)[0];
      ref[i] = orig - eps;
      Tape<R> fwd_down(false);
      const R down = ref_loss_fn(fwd_down)[0];
      ref[i] = orig;
      const double numeric = static_cast<double>((up - down) / (R(2) * eps));
      const double rel = std::abs(static_cast<double>(analytic[i]) - numeric) / std::max(1e-8, std::abs(numeric));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.coords;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

// Same check with differences taken in T on the very same tensors.
template <typename T>
GradcheckReport finite_diff_check(const std::function<Tensor<T>(Tape<T>&)>& loss_fn, std::vector<NamedParam<T>> params,
                                  T eps = T(1e-5), std::size_t max_coords_per_param = 0) {
  auto same = params;
  return finite_diff_check<T, T>(loss_fn, std::move(params), loss_fn, std::move(same), eps, max_coords_per_param);
}

}  // namespace transgat
