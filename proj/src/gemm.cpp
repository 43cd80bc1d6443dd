#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace g2::detail {

namespace {
constexpr int64_t kColBlock = 512;
}

void gemm_ab(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
             bool accumulate) {
  const int64_t nblocks = (N + kColBlock - 1) / kColBlock;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t jb = 0; jb < nblocks; ++jb) {
      const int64_t j0 = jb * kColBlock;
      const int64_t j1 = std::min(N, j0 + kColBlock);
      double* Ci = C + i * N;
      if (!accumulate) {
        std::fill(Ci + j0, Ci + j1, 0.0);
      }
      const double* Ai = A + i * K;
      for (int64_t k = 0; k < K; ++k) {
        const double a = Ai[k];
        if (a == 0.0) continue;
        const double* Bk = B + k * N;
        for (int64_t j = j0; j < j1; ++j) {
          Ci[j] += a * Bk[j];
        }
      }
    }
  }
}

void gemm_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate) {
  const int64_t nblocks = (N + kColBlock - 1) / kColBlock;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t jb = 0; jb < nblocks; ++jb) {
      const int64_t j0 = jb * kColBlock;
      const int64_t j1 = std::min(N, j0 + kColBlock);
      double* Ci = C + i * N;
      if (!accumulate) {
        std::fill(Ci + j0, Ci + j1, 0.0);
      }
      for (int64_t k = 0; k < K; ++k) {
        const double a = A[k * M + i];
        if (a == 0.0) continue;
        const double* Bk = B + k * N;
        for (int64_t j = j0; j < j1; ++j) {
          Ci[j] += a * Bk[j];
        }
      }
    }
  }
}

void gemm_abt(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    for (int64_t j = 0; j < N; ++j) {
      const double* Ai = A + i * K;
      const double* Bj = B + j * K;
      double acc = 0.0;
      for (int64_t k = 0; k < K; ++k) {
        acc += Ai[k] * Bj[k];
      }
      if (accumulate) {
        C[i * N + j] += acc;
      } else {
        C[i * N + j] = acc;
      }
    }
  }
}

void im2col(const double* img, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, double* cols) {
  const int64_t rows = C * kh * kw;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t c = r / (kh * kw);
    const int64_t ky = (r / kw) % kh;
    const int64_t kx = r % kw;
    double* dst = cols + r * (OH * OW);
    const double* src = img + c * H * W;
    for (int64_t oy = 0; oy < OH; ++oy) {
      const int64_t iy = oy * stride - pad + ky;
      if (iy < 0 || iy >= H) {
        std::fill(dst, dst + OW, 0.0);
        dst += OW;
        continue;
      }
      const double* row = src + iy * W;
      for (int64_t ox = 0; ox < OW; ++ox) {
        const int64_t ix = ox * stride - pad + kx;
        *dst++ = (ix >= 0 && ix < W) ? row[ix] : 0.0;
      }
    }
  }
}

void col2im(const double* cols, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, double* img,
            bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    double* dst = img + c * H * W;
    for (int64_t iy = 0; iy < H; ++iy) {
      for (int64_t ix = 0; ix < W; ++ix) {
        double acc = 0.0;
        for (int64_t ky = 0; ky < kh; ++ky) {
          const int64_t y = iy + pad - ky;
          if (y < 0 || y % stride != 0) continue;
          const int64_t oy = y / stride;
          if (oy >= OH) continue;
          for (int64_t kx = 0; kx < kw; ++kx) {
            const int64_t x = ix + pad - kx;
            if (x < 0 || x % stride != 0) continue;
            const int64_t ox = x / stride;
            if (ox >= OW) continue;
            const int64_t r = (c * kh + ky) * kw + kx;
            acc += cols[r * (OH * OW) + oy * OW + ox];
          }
        }
        double& out = dst[iy * W + ix];
        out = accumulate ? out + acc : acc;
      }
    }
  }
}

}  // namespace g2::detail
