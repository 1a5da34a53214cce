#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "iqrl/nn/tensor.hpp"

namespace iqrl::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

/// One bias-corrected Adam update from the gradients stored on `params`.
/// Parameters without a gradient buffer are treated as having zero gradient.
inline void adam_step(ParameterSet& params, AdamState& state) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, tensor] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) {
      m.assign(tensor.size(), 0.0);
      v.assign(tensor.size(), 0.0);
    }
    if (m.size() != tensor.size() || v.size() != tensor.size()) {
      throw ShapeError("adam_step: moment buffers for '" + name + "' do not match parameter shape " +
                       shape_string(tensor.shape()));
    }
    const std::vector<double>* grad = tensor.grad_if_present();
    if (grad && grad->size() != tensor.size()) {
      throw ShapeError("adam_step: gradient for '" + name + "' has the wrong length");
    }
    auto values = tensor.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad ? (*grad)[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParameterSet& params, double max_norm) {
  double total = 0.0;
  for (auto& [_, tensor] : params) {
    if (const auto* g = tensor.grad_if_present()) {
      for (double x : *g) total += x * x;
    }
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [_, tensor] : params) {
      if (tensor.has_grad()) {
        for (double& x : tensor.grad()) x *= factor;
      }
    }
  }
  return norm;
}

}  // namespace iqrl::nn
