#include "g2/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gemm.hpp"

namespace g2 {

namespace {
constexpr double kLogClamp = 1e-12;

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

void Tape::check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    throw std::runtime_error(std::string("non-finite value produced by primitive '") + op +
                             "'");
  }
}

int Tape::push(const char* op, Tensor out, std::vector<int> parents,
               std::function<void(Tape&, const Node&)> backprop) {
  check_finite(out, op);
  Node n;
  n.op = op;
  n.out = std::move(out);
  n.parents = std::move(parents);
  for (int p : n.parents) {
    if (p >= 0 && nodes_[p].needs_grad) {
      n.needs_grad = true;
      break;
    }
  }
  if (n.needs_grad) {
    n.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(int node) {
  Node& n = nodes_[node];
  if (!n.grad.defined()) {
    n.grad = Tensor::zeros(n.out.shape());
  }
  return n.grad;
}

void Tape::accum(int node, const Tensor& delta) {
  if (!needs(node)) return;
  Tensor& g = grad_buf(node);
  if (g.numel() != delta.numel()) {
    throw std::logic_error("gradient accumulation size mismatch");
  }
  double* dst = g.data();
  const double* src = delta.data();
  const int64_t n = g.numel();
  for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

Var Tape::watch(const Tensor& param) {
  if (!param.defined()) throw std::invalid_argument("watch: undefined tensor");
  auto it = watched_.find(param.storage_id());
  if (it != watched_.end()) {
    return Var{nodes_[it->second].out, it->second};
  }
  Node n;
  n.op = "leaf";
  n.out = param;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  watched_[param.storage_id()] = id;
  return Var{param, id};
}

Var Tape::input(const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("input: undefined tensor");
  Node n;
  n.op = "input";
  n.out = t;
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return Var{t, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::detach(const Var& v) { return input(v.value); }

// ---- elementwise ------------------------------------------------------------

Var Tape::add(const Var& a, const Var& b) {
  if (!a.value.same_shape(b.value)) {
    throw std::invalid_argument("add: shape mismatch " + shape_to_string(a.value.shape()) +
                                " vs " + shape_to_string(b.value.shape()));
  }
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value[i] + b.value[i];
  int id = push("add", std::move(out), {a.node, b.node}, [](Tape& t, const Node& n) {
    t.accum(n.parents[0], n.grad);
    t.accum(n.parents[1], n.grad);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::sub(const Var& a, const Var& b) {
  if (!a.value.same_shape(b.value)) {
    throw std::invalid_argument("sub: shape mismatch " + shape_to_string(a.value.shape()) +
                                " vs " + shape_to_string(b.value.shape()));
  }
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value[i] - b.value[i];
  int id = push("sub", std::move(out), {a.node, b.node}, [](Tape& t, const Node& n) {
    t.accum(n.parents[0], n.grad);
    if (t.needs(n.parents[1])) {
      Tensor neg(n.grad.shape());
      for (int64_t i = 0; i < neg.numel(); ++i) neg[i] = -n.grad[i];
      t.accum(n.parents[1], neg);
    }
  });
  return Var{nodes_[id].out, id};
}

Var Tape::mul(const Var& a, const Var& b) {
  if (!a.value.same_shape(b.value)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value[i] * b.value[i];
  Tensor av = a.value, bv = b.value;
  int id = push("mul", std::move(out), {a.node, b.node}, [av, bv](Tape& t, const Node& n) {
    if (t.needs(n.parents[0])) {
      Tensor d(n.grad.shape());
      for (int64_t i = 0; i < d.numel(); ++i) d[i] = n.grad[i] * bv[i];
      t.accum(n.parents[0], d);
    }
    if (t.needs(n.parents[1])) {
      Tensor d(n.grad.shape());
      for (int64_t i = 0; i < d.numel(); ++i) d[i] = n.grad[i] * av[i];
      t.accum(n.parents[1], d);
    }
  });
  return Var{nodes_[id].out, id};
}

Var Tape::scalar_mul(const Var& a, double c) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value[i] * c;
  int id = push("scalar_mul", std::move(out), {a.node}, [c](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) d[i] = n.grad[i] * c;
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::scalar_add(const Var& a, double c) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value[i] + c;
  int id = push("scalar_add", std::move(out), {a.node}, [](Tape& t, const Node& n) {
    t.accum(n.parents[0], n.grad);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::relu(const Var& a) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value[i] > 0.0 ? a.value[i] : 0.0;
  Tensor av = a.value;
  int id = push("relu", std::move(out), {a.node}, [av](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) d[i] = av[i] > 0.0 ? n.grad[i] : 0.0;
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::leaky_relu(const Var& a, double negative_slope) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    out[i] = a.value[i] > 0.0 ? a.value[i] : negative_slope * a.value[i];
  }
  Tensor av = a.value;
  const double s = negative_slope;
  int id = push("leaky_relu", std::move(out), {a.node}, [av, s](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) d[i] = av[i] > 0.0 ? n.grad[i] : s * n.grad[i];
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::sigmoid(const Var& a) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = stable_sigmoid(a.value[i]);
  Tensor ov = out;
  int id = push("sigmoid", std::move(out), {a.node}, [ov](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) d[i] = n.grad[i] * ov[i] * (1.0 - ov[i]);
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::tanh(const Var& a) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = std::tanh(a.value[i]);
  Tensor ov = out;
  int id = push("tanh", std::move(out), {a.node}, [ov](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) d[i] = n.grad[i] * (1.0 - ov[i] * ov[i]);
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::log(const Var& a) {
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = std::log(std::max(a.value[i], kLogClamp));
  Tensor av = a.value;
  int id = push("log", std::move(out), {a.node}, [av](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) {
      d[i] = av[i] > kLogClamp ? n.grad[i] / av[i] : 0.0;
    }
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::clamp(const Var& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  Tensor out(a.value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = std::min(std::max(a.value[i], lo), hi);
  Tensor av = a.value;
  int id = push("clamp", std::move(out), {a.node}, [av, lo, hi](Tape& t, const Node& n) {
    Tensor d(n.grad.shape());
    for (int64_t i = 0; i < d.numel(); ++i) {
      d[i] = (av[i] > lo && av[i] < hi) ? n.grad[i] : 0.0;
    }
    t.accum(n.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

// ---- reductions --------------------------------------------------------------

Var Tape::mean(const Var& a) {
  const int64_t n = a.value.numel();
  if (n == 0) throw std::invalid_argument("mean: empty tensor");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += a.value[i];
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  int id = push("mean", std::move(out), {a.node}, [n](Tape& t, const Node& nd) {
    const double g = nd.grad[0] / static_cast<double>(n);
    Tensor d(t.nodes_[nd.parents[0]].out.shape(), g);
    t.accum(nd.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::abs_mean(const Var& a) {
  const int64_t n = a.value.numel();
  if (n == 0) throw std::invalid_argument("abs_mean: empty tensor");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::fabs(a.value[i]);
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  Tensor av = a.value;
  int id = push("abs_mean", std::move(out), {a.node}, [av, n](Tape& t, const Node& nd) {
    const double g = nd.grad[0] / static_cast<double>(n);
    Tensor d(av.shape());
    for (int64_t i = 0; i < n; ++i) {
      d[i] = av[i] > 0.0 ? g : (av[i] < 0.0 ? -g : 0.0);
    }
    t.accum(nd.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

Var Tape::sum(const Var& a) {
  const int64_t n = a.value.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += a.value[i];
  Tensor out = Tensor::scalar(acc);
  int id = push("sum", std::move(out), {a.node}, [](Tape& t, const Node& nd) {
    Tensor d(t.nodes_[nd.parents[0]].out.shape(), nd.grad[0]);
    t.accum(nd.parents[0], d);
  });
  return Var{nodes_[id].out, id};
}

// ---- structure ----------------------------------------------------------------

Var Tape::reshape(const Var& a, Shape shape) {
  if (shape_numel(shape) != a.value.numel()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  Tensor out(shape);
  std::memcpy(out.data(), a.value.data(), sizeof(double) * a.value.numel());
  int id = push("reshape", std::move(out), {a.node}, [](Tape& t, const Node& n) {
    t.accum(n.parents[0], n.grad);  // accum is flat; shapes differ, counts agree
  });
  return Var{nodes_[id].out, id};
}

Var Tape::channel_concat(const Var& a, const Var& b) {
  const Shape& sa = a.value.shape();
  const Shape& sb = b.value.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw std::invalid_argument("channel_concat: incompatible shapes " + shape_to_string(sa) +
                                " vs " + shape_to_string(sb));
  }
  const int64_t B = sa[0], Ca = sa[1], Cb = sb[1], HW = sa[2] * sa[3];
  Tensor out(Shape{B, Ca + Cb, sa[2], sa[3]});
  for (int64_t i = 0; i < B; ++i) {
    std::memcpy(out.data() + i * (Ca + Cb) * HW, a.value.data() + i * Ca * HW,
                sizeof(double) * Ca * HW);
    std::memcpy(out.data() + i * (Ca + Cb) * HW + Ca * HW, b.value.data() + i * Cb * HW,
                sizeof(double) * Cb * HW);
  }
  int id = push("channel_concat", std::move(out), {a.node, b.node},
                [B, Ca, Cb, HW](Tape& t, const Node& n) {
                  if (t.needs(n.parents[0])) {
                    Tensor da(t.nodes_[n.parents[0]].out.shape());
                    for (int64_t i = 0; i < B; ++i) {
                      std::memcpy(da.data() + i * Ca * HW, n.grad.data() + i * (Ca + Cb) * HW,
                                  sizeof(double) * Ca * HW);
                    }
                    t.accum(n.parents[0], da);
                  }
                  if (t.needs(n.parents[1])) {
                    Tensor db(t.nodes_[n.parents[1]].out.shape());
                    for (int64_t i = 0; i < B; ++i) {
                      std::memcpy(db.data() + i * Cb * HW,
                                  n.grad.data() + i * (Ca + Cb) * HW + Ca * HW,
                                  sizeof(double) * Cb * HW);
                    }
                    t.accum(n.parents[1], db);
                  }
                });
  return Var{nodes_[id].out, id};
}

// ---- linear algebra ------------------------------------------------------------

Var Tape::matmul(const Var& a, const Var& b) {
  const Shape& sa = a.value.shape();
  const Shape& sb = b.value.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_to_string(sa) + " x " +
                                shape_to_string(sb));
  }
  const int64_t M = sa[0], K = sa[1], N = sb[1];
  Tensor out(Shape{M, N});
  detail::gemm_ab(a.value.data(), b.value.data(), out.data(), M, K, N, false);
  Tensor av = a.value, bv = b.value;
  int id = push("matmul", std::move(out), {a.node, b.node},
                [av, bv, M, K, N](Tape& t, const Node& n) {
                  if (t.needs(n.parents[0])) {
                    Tensor da(Shape{M, K});
                    detail::gemm_abt(n.grad.data(), bv.data(), da.data(), M, N, K, false);
                    t.accum(n.parents[0], da);
                  }
                  if (t.needs(n.parents[1])) {
                    Tensor db(Shape{K, N});
                    detail::gemm_atb(av.data(), n.grad.data(), db.data(), K, M, N, false);
                    t.accum(n.parents[1], db);
                  }
                });
  return Var{nodes_[id].out, id};
}

Var Tape::linear(const Var& x, const Var& w, const Var& bias) {
  const Shape& sx = x.value.shape();
  const Shape& sw = w.value.shape();
  if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[0]) {
    throw std::invalid_argument("linear: incompatible shapes");
  }
  const int64_t M = sx[0], K = sx[1], N = sw[1];
  if (bias.defined() && (bias.value.rank() != 1 || bias.value.extent(0) != N)) {
    throw std::invalid_argument("linear: bias shape mismatch");
  }
  Tensor out(Shape{M, N});
  detail::gemm_ab(x.value.data(), w.value.data(), out.data(), M, K, N, false);
  if (bias.defined()) {
    for (int64_t i = 0; i < M; ++i) {
      double* row = out.data() + i * N;
      for (int64_t j = 0; j < N; ++j) row[j] += bias.value[j];
    }
  }
  Tensor xv = x.value, wv = w.value;
  std::vector<int> parents{x.node, w.node};
  if (bias.defined()) parents.push_back(bias.node);
  int id = push("linear", std::move(out), std::move(parents),
                [xv, wv, M, K, N](Tape& t, const Node& n) {
                  if (t.needs(n.parents[0])) {
                    Tensor dx(Shape{M, K});
                    detail::gemm_abt(n.grad.data(), wv.data(), dx.data(), M, N, K, false);
                    t.accum(n.parents[0], dx);
                  }
                  if (t.needs(n.parents[1])) {
                    Tensor dw(Shape{K, N});
                    detail::gemm_atb(xv.data(), n.grad.data(), dw.data(), K, M, N, false);
                    t.accum(n.parents[1], dw);
                  }
                  if (n.parents.size() > 2 && t.needs(n.parents[2])) {
                    Tensor db(Shape{N});
                    for (int64_t i = 0; i < M; ++i) {
                      const double* row = n.grad.data() + i * N;
                      for (int64_t j = 0; j < N; ++j) db[j] += row[j];
                    }
                    t.accum(n.parents[2], db);
                  }
                });
  return Var{nodes_[id].out, id};
}

Var Tape::softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  const Shape& s = logits.value.shape();
  if (s.size() != 2) throw std::invalid_argument("softmax_cross_entropy: logits must be [B,C]");
  const int64_t B = s[0], C = s[1];
  if (static_cast<int64_t>(labels.size()) != B) {
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= C) throw std::invalid_argument("softmax_cross_entropy: label out of range");
  }
  // softmax probabilities, saved for backward
  Tensor probs(Shape{B, C});
  double loss = 0.0;
  for (int64_t i = 0; i < B; ++i) {
    const double* row = logits.value.data() + i * C;
    double m = row[0];
    for (int64_t c = 1; c < C; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (int64_t c = 0; c < C; ++c) z += std::exp(row[c] - m);
    const double lse = m + std::log(z);
    for (int64_t c = 0; c < C; ++c) probs.data()[i * C + c] = std::exp(row[c] - lse);
    loss += lse - row[labels[i]];
  }
  Tensor out = Tensor::scalar(loss / static_cast<double>(B));
  std::vector<int> lab(labels.begin(), labels.end());
  int id = push("softmax_cross_entropy", std::move(out), {logits.node},
                [probs, lab, B, C](Tape& t, const Node& n) {
                  const double g = n.grad[0] / static_cast<double>(B);
                  Tensor d(Shape{B, C});
                  for (int64_t i = 0; i < B; ++i) {
                    for (int64_t c = 0; c < C; ++c) {
                      double p = probs[i * C + c];
                      d[i * C + c] = g * (p - (lab[i] == c ? 1.0 : 0.0));
                    }
                  }
                  t.accum(n.parents[0], d);
                });
  return Var{nodes_[id].out, id};
}

// ---- engine ---------------------------------------------------------------------

void Tape::backward(const Var& loss) {
  if (loss.node < 0 || loss.node >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("backward: loss is not on this tape");
  }
  if (nodes_[loss.node].out.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar");
  }
  if (!nodes_[loss.node].needs_grad) {
    throw std::invalid_argument("backward: loss does not depend on any watched tensor");
  }
  grad_buf(loss.node)[0] = 1.0;
  for (int i = loss.node; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.grad.defined()) continue;
    check_finite(n.grad, n.op);
    if (n.backprop) n.backprop(*this, n);
  }
  backward_done_ = true;
}

Tensor Tape::grad(const Tensor& param) const {
  auto it = watched_.find(param.storage_id());
  if (it == watched_.end()) {
    throw std::invalid_argument("grad: tensor was never watched on this tape");
  }
  const Node& n = nodes_[it->second];
  if (!n.grad.defined()) return Tensor::zeros(param.shape());
  return n.grad;
}

}  // namespace g2
