#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "entrosim/nn/params.hpp"

namespace entrosim::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;  // steps taken so far

  static AdamState for_params(const ParamSet<T>& params) {
    AdamState s;
    for (const auto& e : params.entries()) {
      s.m.emplace_back(e.value.size(), T{0});
      s.v.emplace_back(e.value.size(), T{0});
    }
    return s;
  }
};

/// One bias-corrected Adam update; `state.t` is advanced before use, so the
/// first call runs with t = 1. Rejects non-finite gradients before touching
/// any parameter.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state sets differ in size");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& ge = grads.entries()[p];
    if (ge.name != params.entries()[p].name || ge.value.size() != params.entries()[p].value.size()) {
      throw ShapeError("adam_step: gradient '" + ge.name + "' does not line up with parameter '" +
                       params.entries()[p].name + "'");
    }
    ge.value.check_finite("adam_step: gradient " + ge.name);
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T lr_t = static_cast<T>(cfg.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params.entries()[p].value;
    const auto& g = grads.entries()[p].value;
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      // lr * mhat / (sqrt(vhat) + eps)
      w[i] -= lr_t * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace entrosim::nn
