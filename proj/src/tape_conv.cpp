#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "g2/tape.hpp"
#include "gemm.hpp"

namespace g2 {

namespace {

struct ConvDims {
  int64_t B, C, H, W, F, kh, kw, OH, OW;
  int stride, pad;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  if (input.rank() != 4) throw std::invalid_argument("conv2d: input must be [B,C,H,W]");
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [F,C,kh,kw]");
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: bad stride/padding");
  ConvDims d;
  d.B = input.extent(0);
  d.C = input.extent(1);
  d.H = input.extent(2);
  d.W = input.extent(3);
  d.F = kernel.extent(0);
  d.kh = kernel.extent(2);
  d.kw = kernel.extent(3);
  d.stride = stride;
  d.pad = padding;
  if (kernel.extent(1) != d.C) {
    throw std::invalid_argument("conv2d: channel mismatch: input has " + std::to_string(d.C) +
                                ", kernel expects " + std::to_string(kernel.extent(1)));
  }
  const int64_t hnum = d.H + 2 * padding - d.kh;
  const int64_t wnum = d.W + 2 * padding - d.kw;
  if (hnum < 0 || wnum < 0 || hnum % stride != 0 || wnum % stride != 0) {
    throw std::invalid_argument("conv2d: non-integral output extent for input " +
                                shape_to_string(input.shape()));
  }
  d.OH = hnum / stride + 1;
  d.OW = wnum / stride + 1;
  return d;
}

void conv2d_forward_naive(const ConvDims& d, const double* in, const double* w,
                          const double* bias, double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < d.B; ++b) {
    for (int64_t f = 0; f < d.F; ++f) {
      for (int64_t oy = 0; oy < d.OH; ++oy) {
        for (int64_t ox = 0; ox < d.OW; ++ox) {
          double acc = bias ? bias[f] : 0.0;
          for (int64_t c = 0; c < d.C; ++c) {
            for (int64_t ky = 0; ky < d.kh; ++ky) {
              const int64_t iy = oy * d.stride - d.pad + ky;
              if (iy < 0 || iy >= d.H) continue;
              for (int64_t kx = 0; kx < d.kw; ++kx) {
                const int64_t ix = ox * d.stride - d.pad + kx;
                if (ix < 0 || ix >= d.W) continue;
                acc += in[((b * d.C + c) * d.H + iy) * d.W + ix] *
                       w[((f * d.C + c) * d.kh + ky) * d.kw + kx];
              }
            }
          }
          out[((b * d.F + f) * d.OH + oy) * d.OW + ox] = acc;
        }
      }
    }
  }
}

void conv2d_forward_fast(const ConvDims& d, const double* in, const double* w,
                         const double* bias, double* out) {
  const int64_t ckk = d.C * d.kh * d.kw;
  const int64_t ohow = d.OH * d.OW;
  std::vector<double> cols(ckk * ohow);
  for (int64_t b = 0; b < d.B; ++b) {
    detail::im2col(in + b * d.C * d.H * d.W, d.C, d.H, d.W, d.kh, d.kw, d.stride, d.pad, d.OH,
                   d.OW, cols.data());
    double* ob = out + b * d.F * ohow;
    detail::gemm_ab(w, cols.data(), ob, d.F, ckk, ohow, false);
    if (bias) {
      for (int64_t f = 0; f < d.F; ++f) {
        double* row = ob + f * ohow;
        for (int64_t i = 0; i < ohow; ++i) row[i] += bias[f];
      }
    }
  }
}

struct DeconvDims {
  int64_t B, C, H, W, F, kh, kw, OH, OW;
  int stride, pad;
};

DeconvDims deconv_dims(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  if (input.rank() != 4) throw std::invalid_argument("conv_transpose2d: input must be [B,C,H,W]");
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv_transpose2d: kernel must be [C,F,kh,kw]");
  }
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv_transpose2d: bad stride/padding");
  DeconvDims d;
  d.B = input.extent(0);
  d.C = input.extent(1);
  d.H = input.extent(2);
  d.W = input.extent(3);
  d.F = kernel.extent(1);
  d.kh = kernel.extent(2);
  d.kw = kernel.extent(3);
  d.stride = stride;
  d.pad = padding;
  if (kernel.extent(0) != d.C) {
    throw std::invalid_argument("conv_transpose2d: channel mismatch");
  }
  d.OH = (d.H - 1) * stride + d.kh - 2 * padding;
  d.OW = (d.W - 1) * stride + d.kw - 2 * padding;
  if (d.OH < 1 || d.OW < 1) throw std::invalid_argument("conv_transpose2d: empty output");
  return d;
}

void deconv_forward_naive(const DeconvDims& d, const double* in, const double* w,
                          const double* bias, double* out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < d.B; ++b) {
    for (int64_t f = 0; f < d.F; ++f) {
      for (int64_t y = 0; y < d.OH; ++y) {
        for (int64_t x = 0; x < d.OW; ++x) {
          double acc = bias ? bias[f] : 0.0;
          for (int64_t c = 0; c < d.C; ++c) {
            for (int64_t ky = 0; ky < d.kh; ++ky) {
              const int64_t ynum = y + d.pad - ky;
              if (ynum < 0 || ynum % d.stride != 0) continue;
              const int64_t iy = ynum / d.stride;
              if (iy >= d.H) continue;
              for (int64_t kx = 0; kx < d.kw; ++kx) {
                const int64_t xnum = x + d.pad - kx;
                if (xnum < 0 || xnum % d.stride != 0) continue;
                const int64_t ix = xnum / d.stride;
                if (ix >= d.W) continue;
                acc += in[((b * d.C + c) * d.H + iy) * d.W + ix] *
                       w[((c * d.F + f) * d.kh + ky) * d.kw + kx];
              }
            }
          }
          out[((b * d.F + f) * d.OH + y) * d.OW + x] = acc;
        }
      }
    }
  }
}

void deconv_forward_fast(const DeconvDims& d, const double* in, const double* w,
                         const double* bias, double* out) {
  const int64_t fkk = d.F * d.kh * d.kw;
  const int64_t hw = d.H * d.W;
  std::vector<double> cols(fkk * hw);
  for (int64_t b = 0; b < d.B; ++b) {
    // cols = W^T * x, then fold onto the (larger) output grid
    detail::gemm_atb(w, in + b * d.C * hw, cols.data(), fkk, d.C, hw, false);
    double* ob = out + b * d.F * d.OH * d.OW;
    detail::col2im(cols.data(), d.F, d.OH, d.OW, d.kh, d.kw, d.stride, d.pad, d.H, d.W, ob,
                   false);
    if (bias) {
      for (int64_t f = 0; f < d.F; ++f) {
        double* row = ob + f * d.OH * d.OW;
        for (int64_t i = 0; i < d.OH * d.OW; ++i) row[i] += bias[f];
      }
    }
  }
}

}  // namespace

Var Tape::conv2d(const Var& input, const Var& kernel, const Var& bias, int stride,
                 int padding) {
  const ConvDims d = conv_dims(input.value, kernel.value, stride, padding);
  if (bias.defined() && (bias.value.rank() != 1 || bias.value.extent(0) != d.F)) {
    throw std::invalid_argument("conv2d: bias must be [F]");
  }
  Tensor out(Shape{d.B, d.F, d.OH, d.OW});
  const double* bptr = bias.defined() ? bias.value.data() : nullptr;
  if (conv_algo_ == ConvAlgo::kFast) {
    conv2d_forward_fast(d, input.value.data(), kernel.value.data(), bptr, out.data());
  } else {
    conv2d_forward_naive(d, input.value.data(), kernel.value.data(), bptr, out.data());
  }
  Tensor in_v = input.value, w_v = kernel.value;
  std::vector<int> parents{input.node, kernel.node};
  if (bias.defined()) parents.push_back(bias.node);
  int id = push("conv2d", std::move(out), std::move(parents), [d, in_v, w_v](Tape& t,
                                                                             const Node& n) {
    const int64_t ckk = d.C * d.kh * d.kw;
    const int64_t ohow = d.OH * d.OW;
    const double* gout = n.grad.data();
    if (t.needs(n.parents[0])) {
      Tensor din(in_v.shape());
      std::vector<double> dcols(ckk * ohow);
      for (int64_t b = 0; b < d.B; ++b) {
        detail::gemm_atb(w_v.data(), gout + b * d.F * ohow, dcols.data(), ckk, d.F, ohow,
                         false);
        detail::col2im(dcols.data(), d.C, d.H, d.W, d.kh, d.kw, d.stride, d.pad, d.OH, d.OW,
                       din.data() + b * d.C * d.H * d.W, false);
      }
      t.accum(n.parents[0], din);
    }
    if (t.needs(n.parents[1])) {
      Tensor dw(w_v.shape());
      std::vector<double> cols(ckk * ohow);
      for (int64_t b = 0; b < d.B; ++b) {
        detail::im2col(in_v.data() + b * d.C * d.H * d.W, d.C, d.H, d.W, d.kh, d.kw, d.stride,
                       d.pad, d.OH, d.OW, cols.data());
        detail::gemm_abt(gout + b * d.F * ohow, cols.data(), dw.data(), d.F, ohow, ckk, b > 0);
      }
      t.accum(n.parents[1], dw);
    }
    if (n.parents.size() > 2 && t.needs(n.parents[2])) {
      Tensor db(Shape{d.F});
      for (int64_t b = 0; b < d.B; ++b) {
        for (int64_t f = 0; f < d.F; ++f) {
          const double* row = gout + (b * d.F + f) * ohow;
          double acc = 0.0;
          for (int64_t i = 0; i < ohow; ++i) acc += row[i];
          db[f] += acc;
        }
      }
      t.accum(n.parents[2], db);
    }
  });
  return Var{nodes_[id].out, id};
}

Var Tape::conv_transpose2d(const Var& input, const Var& kernel, const Var& bias, int stride,
                           int padding) {
  const DeconvDims d = deconv_dims(input.value, kernel.value, stride, padding);
  if (bias.defined() && (bias.value.rank() != 1 || bias.value.extent(0) != d.F)) {
    throw std::invalid_argument("conv_transpose2d: bias must be [F]");
  }
  Tensor out(Shape{d.B, d.F, d.OH, d.OW});
  const double* bptr = bias.defined() ? bias.value.data() : nullptr;
  if (conv_algo_ == ConvAlgo::kFast) {
    deconv_forward_fast(d, input.value.data(), kernel.value.data(), bptr, out.data());
  } else {
    deconv_forward_naive(d, input.value.data(), kernel.value.data(), bptr, out.data());
  }
  Tensor in_v = input.value, w_v = kernel.value;
  std::vector<int> parents{input.node, kernel.node};
  if (bias.defined()) parents.push_back(bias.node);
  int id = push(
      "conv_transpose2d", std::move(out), std::move(parents),
      [d, in_v, w_v](Tape& t, const Node& n) {
        const int64_t fkk = d.F * d.kh * d.kw;
        const int64_t hw = d.H * d.W;
        const int64_t out_hw = d.OH * d.OW;
        const double* gout = n.grad.data();
        const bool need_in = t.needs(n.parents[0]);
        const bool need_w = t.needs(n.parents[1]);
        if (need_in || need_w) {
          Tensor din;
          Tensor dw;
          if (need_in) din = Tensor(in_v.shape());
          if (need_w) dw = Tensor(w_v.shape());
          std::vector<double> gcols(fkk * hw);
          for (int64_t b = 0; b < d.B; ++b) {
            detail::im2col(gout + b * d.F * out_hw, d.F, d.OH, d.OW, d.kh, d.kw, d.stride,
                           d.pad, d.H, d.W, gcols.data());
            if (need_in) {
              detail::gemm_ab(w_v.data(), gcols.data(), din.data() + b * d.C * hw, d.C, fkk,
                              hw, false);
            }
            if (need_w) {
              detail::gemm_abt(in_v.data() + b * d.C * hw, gcols.data(), dw.data(), d.C, hw,
                               fkk, b > 0);
            }
          }
          if (need_in) t.accum(n.parents[0], din);
          if (need_w) t.accum(n.parents[1], dw);
        }
        if (n.parents.size() > 2 && t.needs(n.parents[2])) {
          Tensor db(Shape{d.F});
          for (int64_t b = 0; b < d.B; ++b) {
            for (int64_t f = 0; f < d.F; ++f) {
              const double* row = gout + (b * d.F + f) * out_hw;
              double acc = 0.0;
              for (int64_t i = 0; i < out_hw; ++i) acc += row[i];
              db[f] += acc;
            }
          }
          t.accum(n.parents[2], db);
        }
      });
  return Var{nodes_[id].out, id};
}

Var Tape::max_pool2d(const Var& input, int kernel, int stride) {
  if (input.value.rank() != 4) throw std::invalid_argument("max_pool2d: input must be [B,C,H,W]");
  if (kernel < 1 || stride < 1) throw std::invalid_argument("max_pool2d: bad kernel/stride");
  const int64_t B = input.value.extent(0), C = input.value.extent(1);
  const int64_t H = input.value.extent(2), W = input.value.extent(3);
  if (H < kernel || W < kernel) throw std::invalid_argument("max_pool2d: input smaller than window");
  const int64_t OH = (H - kernel) / stride + 1;
  const int64_t OW = (W - kernel) / stride + 1;
  Tensor out(Shape{B, C, OH, OW});
  auto argmax = std::make_shared<std::vector<int64_t>>(B * C * OH * OW);
  const double* in = input.value.data();
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* plane = in + bc * H * W;
    for (int64_t oy = 0; oy < OH; ++oy) {
      for (int64_t ox = 0; ox < OW; ++ox) {
        int64_t best = (oy * stride) * W + ox * stride;
        double bestv = plane[best];
        for (int64_t ky = 0; ky < kernel; ++ky) {
          for (int64_t kx = 0; kx < kernel; ++kx) {
            const int64_t idx = (oy * stride + ky) * W + ox * stride + kx;
            if (plane[idx] > bestv) {  // first max wins ties
              bestv = plane[idx];
              best = idx;
            }
          }
        }
        out[(bc * OH + oy) * OW + ox] = bestv;
        (*argmax)[(bc * OH + oy) * OW + ox] = bc * H * W + best;
      }
    }
  }
  Shape in_shape = input.value.shape();
  int id = push("max_pool2d", std::move(out), {input.node},
                [argmax, in_shape](Tape& t, const Node& n) {
                  Tensor din(in_shape);
                  for (int64_t i = 0; i < n.grad.numel(); ++i) {
                    din[(*argmax)[i]] += n.grad[i];
                  }
                  t.accum(n.parents[0], din);
                });
  return Var{nodes_[id].out, id};
}

Var Tape::batch_norm2d(const Var& input, const Var& gamma, const Var& beta,
                       Tensor& running_mean, Tensor& running_var, bool training,
                       double momentum, double eps) {
  if (input.value.rank() != 4) throw std::invalid_argument("batch_norm2d: input must be [B,C,H,W]");
  const int64_t B = input.value.extent(0), C = input.value.extent(1);
  const int64_t H = input.value.extent(2), W = input.value.extent(3);
  if (gamma.value.numel() != C || beta.value.numel() != C || running_mean.numel() != C ||
      running_var.numel() != C) {
    throw std::invalid_argument("batch_norm2d: per-channel parameter size mismatch");
  }
  const int64_t n = B * H * W;
  if (training && n < 2) {
    throw std::invalid_argument("batch_norm2d: training mode needs >1 value per channel");
  }
  Tensor xhat(input.value.shape());
  Tensor inv_std(Shape{C});
  Tensor out(input.value.shape());
  const double* x = input.value.data();
  const int64_t plane = H * W;

#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    double mu, var;
    if (training) {
      double s = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* p = x + (b * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) s += p[i];
      }
      mu = s / static_cast<double>(n);
      double v = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* p = x + (b * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          const double dd = p[i] - mu;
          v += dd * dd;
        }
      }
      var = v / static_cast<double>(n);  // biased, used for normalization
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
      const double unbiased = v / static_cast<double>(n - 1);
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[c] = istd;
    const double g = gamma.value[c], bta = beta.value[c];
    for (int64_t b = 0; b < B; ++b) {
      const double* p = x + (b * C + c) * plane;
      double* xh = xhat.data() + (b * C + c) * plane;
      double* o = out.data() + (b * C + c) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mu) * istd;
        o[i] = g * xh[i] + bta;
      }
    }
  }

  Tensor gam = gamma.value;
  int id = push(
      "batch_norm2d", std::move(out), {input.node, gamma.node, beta.node},
      [B, C, plane, n, training, xhat, inv_std, gam](Tape& t, const Node& nd) {
        const double* g = nd.grad.data();
        if (t.needs(nd.parents[1]) || t.needs(nd.parents[2])) {
          Tensor dgamma(Shape{C});
          Tensor dbeta(Shape{C});
          for (int64_t c = 0; c < C; ++c) {
            double sg = 0.0, sgx = 0.0;
            for (int64_t b = 0; b < B; ++b) {
              const double* gr = g + (b * C + c) * plane;
              const double* xh = xhat.data() + (b * C + c) * plane;
              for (int64_t i = 0; i < plane; ++i) {
                sg += gr[i];
                sgx += gr[i] * xh[i];
              }
            }
            dgamma[c] = sgx;
            dbeta[c] = sg;
          }
          t.accum(nd.parents[1], dgamma);
          t.accum(nd.parents[2], dbeta);
        }
        if (t.needs(nd.parents[0])) {
          Tensor din(xhat.shape());
#pragma omp parallel for schedule(static)
          for (int64_t c = 0; c < C; ++c) {
            const double scale = gam[c] * inv_std[c];
            if (training) {
              double sg = 0.0, sgx = 0.0;
              for (int64_t b = 0; b < B; ++b) {
                const double* gr = g + (b * C + c) * plane;
                const double* xh = xhat.data() + (b * C + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                  sg += gr[i];
                  sgx += gr[i] * xh[i];
                }
              }
              const double mg = sg / static_cast<double>(n);
              const double mgx = sgx / static_cast<double>(n);
              for (int64_t b = 0; b < B; ++b) {
                const double* gr = g + (b * C + c) * plane;
                const double* xh = xhat.data() + (b * C + c) * plane;
                double* di = din.data() + (b * C + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                  di[i] = scale * (gr[i] - mg - xh[i] * mgx);
                }
              }
            } else {
              for (int64_t b = 0; b < B; ++b) {
                const double* gr = g + (b * C + c) * plane;
                double* di = din.data() + (b * C + c) * plane;
                for (int64_t i = 0; i < plane; ++i) di[i] = scale * gr[i];
              }
            }
          }
          t.accum(nd.parents[0], din);
        }
      });
  return Var{nodes_[id].out, id};
}

}  // namespace g2
