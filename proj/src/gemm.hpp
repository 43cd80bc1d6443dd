#pragma once

#include <cstdint>

// Internal dense kernels behind the conv/matmul primitives.
//
// Determinism contract: every output element is produced by exactly one
// thread, accumulating its k-terms in ascending order. Results are therefore
// bitwise independent of the OpenMP thread count.
namespace g2::detail {

// C[M,N] = A[M,K] * B[K,N]   (+= when accumulate)
void gemm_ab(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
             bool accumulate);

// C[M,N] = A^T * B where A is [K,M], B is [K,N]
void gemm_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate);

// C[M,N] = A * B^T where A is [M,K], B is [N,K]
void gemm_abt(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate);

// Unfold one [C,H,W] image into columns [C*kh*kw, OH*OW] for a correlation
// with the given stride/padding. Out-of-bounds taps contribute zero.
void im2col(const double* img, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, double* cols);

// Adjoint of im2col: fold columns back onto a [C,H,W] image (accumulating).
// Implemented as a gather per output pixel, taps visited in fixed order.
void col2im(const double* cols, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t OH, int64_t OW, double* img,
            bool accumulate);

}  // namespace g2::detail
