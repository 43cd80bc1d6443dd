#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "g2/tensor.hpp"

namespace g2 {

class Tape;

// A value recorded on a tape. Cheap to copy; `value` aliases the node's
// forward output. Only meaningful while the owning tape is alive.
struct Var {
  Tensor value;
  int node = -1;
  bool defined() const { return node >= 0; }
};

// Reverse-mode tape over dense double tensors.
//
// Usage: record a fresh tape per training step, call backward(loss) once,
// then query grad(param). Leaves are introduced with watch() (trainable,
// memoized per storage so re-watching the same parameter accumulates into
// one gradient) or input() (constant). A tape is single-threaded; distinct
// tapes may run on distinct threads.
//
// Every primitive validates its output for non-finite values and throws
// naming the primitive, so NaN/Inf never propagates silently.
class Tape {
 public:
  enum class ConvAlgo { kFast, kNaive };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves -------------------------------------------------------------
  Var watch(const Tensor& param);
  Var input(const Tensor& t);
  Var detach(const Var& v);

  // ---- elementwise --------------------------------------------------------
  Var add(const Var& a, const Var& b);
  Var sub(const Var& a, const Var& b);
  Var mul(const Var& a, const Var& b);
  Var scalar_mul(const Var& a, double c);
  Var scalar_add(const Var& a, double c);
  Var relu(const Var& a);
  Var leaky_relu(const Var& a, double negative_slope = 0.2);
  Var sigmoid(const Var& a);
  Var tanh(const Var& a);
  // natural log with the input clamped at >= 1e-12 (gradient 0 in the
  // clamped region); keeps adversarial losses finite
  Var log(const Var& a);
  Var clamp(const Var& a, double lo, double hi);

  // ---- reductions ---------------------------------------------------------
  Var mean(const Var& a);
  Var abs_mean(const Var& a);  // mean(|x|)
  Var sum(const Var& a);

  // ---- structure ----------------------------------------------------------
  Var reshape(const Var& a, Shape shape);
  Var channel_concat(const Var& a, const Var& b);  // [B,Ca,H,W] + [B,Cb,H,W]

  // ---- linear algebra / conv stack ---------------------------------------
  Var matmul(const Var& a, const Var& b);  // [M,K] x [K,N]
  // x[M,K] * w[K,N] + bias[N] (bias optional: pass Var{})
  Var linear(const Var& x, const Var& w, const Var& bias);
  // input [B,C,H,W], kernel [F,C,kh,kw], bias [F] optional
  Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride, int padding);
  // input [B,C,H,W], kernel [C,F,kh,kw], bias [F] optional
  Var conv_transpose2d(const Var& input, const Var& kernel, const Var& bias, int stride,
                       int padding);
  Var max_pool2d(const Var& input, int kernel, int stride);
  // Per-channel batch norm over [B,C,H,W]. Training mode normalizes with
  // batch statistics and updates the running buffers in place; eval mode
  // normalizes with the running buffers and leaves them untouched.
  Var batch_norm2d(const Var& input, const Var& gamma, const Var& beta, Tensor& running_mean,
                   Tensor& running_var, bool training, double momentum = 0.1,
                   double eps = 1e-5);
  // mean over rows of (logsumexp(row) - row[label])
  Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

  // ---- engine -------------------------------------------------------------
  void backward(const Var& loss);
  // Gradient of the watched parameter; zero tensor if it never influenced
  // the loss. Valid after backward().
  Tensor grad(const Tensor& param) const;
  bool backward_done() const { return backward_done_; }

  void set_conv_algo(ConvAlgo algo) { conv_algo_ = algo; }
  ConvAlgo conv_algo() const { return conv_algo_; }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Tensor out;
    Tensor grad;  // allocated lazily during backward
    bool needs_grad = false;
    std::vector<int> parents;
    // Reads this node's grad and accumulates into parent grads.
    std::function<void(Tape&, const Node&)> backprop;
  };

  int push(const char* op, Tensor out, std::vector<int> parents,
           std::function<void(Tape&, const Node&)> backprop);
  Tensor& grad_buf(int node);
  void accum(int node, const Tensor& delta);
  bool needs(int node) const { return node >= 0 && nodes_[node].needs_grad; }
  static void check_finite(const Tensor& t, const char* op);

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> watched_;
  ConvAlgo conv_algo_ = ConvAlgo::kFast;
  bool backward_done_ = false;
};

}  // namespace g2
