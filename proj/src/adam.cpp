#include "g2/adam.hpp"

#include <cmath>

namespace g2 {

AdamState make_adam_state(const Tensor& param, const AdamHyper& hyper) {
  AdamState s;
  s.m = Tensor::zeros(param.shape());
  s.v = Tensor::zeros(param.shape());
  s.t = 0;
  s.hyper = hyper;
  return s;
}

void adam_step(AdamState& state, Tensor& param, const Tensor& grad) {
  if (!param.same_shape(grad) || param.numel() != state.m.numel()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  state.t += 1;
  const AdamHyper& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  const int64_t n = param.numel();
  double* p = param.data();
  double* m = state.m.data();
  double* v = state.v.data();
  const double* g = grad.data();
  for (int64_t i = 0; i < n; ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

AdamOptimizer::AdamOptimizer(std::vector<NamedParam> params, const AdamHyper& hyper)
    : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (const NamedParam& p : params_) {
    states_.push_back(make_adam_state(p.tensor, hyper));
  }
}

void AdamOptimizer::step(const Tape& tape, double clip_norm) {
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (const NamedParam& p : params_) {
    grads.push_back(tape.grad(p.tensor));
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& g : grads) {
      for (int64_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor g = grads[k];
    if (scale != 1.0) {
      g = g.clone();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] *= scale;
    }
    adam_step(states_[k], params_[k].tensor, g);
  }
}

}  // namespace g2
