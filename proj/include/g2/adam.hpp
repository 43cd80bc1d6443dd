#pragma once

#include <string>
#include <vector>

#include "g2/tape.hpp"
#include "g2/tensor.hpp"

namespace g2 {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter Adam state. m and v start at zero; t counts completed steps.
struct AdamState {
  Tensor m;
  Tensor v;
  int64_t t = 0;
  AdamHyper hyper;
};

AdamState make_adam_state(const Tensor& param, const AdamHyper& hyper);

// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, Tensor& param, const Tensor& grad);

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Owns the Adam state for a fixed set of named parameters and applies one
// update from a tape's gradients. Gradients are optionally rescaled to a
// global norm cap before stepping (clip_norm <= 0 disables).
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(std::vector<NamedParam> params, const AdamHyper& hyper);

  void step(const Tape& tape, double clip_norm = 0.0);

  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<NamedParam> params_;
  std::vector<AdamState> states_;
};

}  // namespace g2
