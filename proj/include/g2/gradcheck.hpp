#pragma once

#include <functional>
#include <string>
#include <vector>

#include "g2/tape.hpp"

namespace g2 {

// A differentiable fragment under test: given a tape, build the graph from
// the current leaf values and return the scalar loss. The checker perturbs
// the leaf tensors in place between evaluations.
using GradCheckFn = std::function<Var(Tape&)>;

struct NamedParamRef {
  std::string name;
  Tensor tensor;  // shared handle; perturbed in place
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  int64_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed(double tol) const { return max_rel_error <= tol; }
};

// Compares analytic gradients of `fn` against central finite differences for
// every coordinate of every tensor in `params` (optionally subsampled with
// `stride` > 1). Relative error per coordinate is
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// The caller is responsible for sampling inputs away from non-smooth kinks.
GradCheckReport check_gradients(const GradCheckFn& fn, std::vector<NamedParamRef> params,
                                double h = 1e-5, int64_t stride = 1);

}  // namespace g2
