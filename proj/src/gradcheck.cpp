#include "g2/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace g2 {

GradCheckReport check_gradients(const GradCheckFn& fn, std::vector<NamedParamRef> params,
                                double h, int64_t stride) {
  if (stride < 1) stride = 1;
  GradCheckReport report;

  // analytic pass
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Var loss = fn(tape);
    tape.backward(loss);
    for (const NamedParamRef& p : params) {
      analytic.push_back(tape.grad(p.tensor));
    }
  }

  auto eval = [&fn]() {
    Tape tape;
    return fn(tape).value.value();
  };

  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& t = params[k].tensor;
    GradCheckEntry entry;
    entry.name = params[k].name;
    for (int64_t i = 0; i < t.numel(); i += stride) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = eval();
      t[i] = keep - h;
      const double down = eval();
      t[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(a - numeric) / denom);
      entry.checked += 1;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace g2
