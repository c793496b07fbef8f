#pragma once

#include <cstddef>

// Dense double-precision array kernels. Every parallel kernel computes each
// output element with a fixed serial accumulation order, so results are
// bit-identical to the kernels::serial reference for any OMP thread count.

namespace usted::kernels {

// Work thresholds below which the parallel kernels stay on one thread.
inline constexpr long kMatmulParallelFlops = 1L << 17;
inline constexpr long kElemwiseParallelLen = 1L << 15;

// y = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* y, int m, int k, int n);
// y += a[m x k] * b[k x n]
void matmul_acc(const double* a, const double* b, double* y, int m, int k, int n);
// y = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_nt_acc(const double* a, const double* b, double* y, int m, int k, int n);
// y = a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_tn_acc(const double* a, const double* b, double* y, int m, int k, int n);

void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void scale(const double* a, double c, double* y, std::size_t n);
// y += c * a
void axpy(double c, const double* a, double* y, std::size_t n);

void tanh_v(const double* a, double* y, std::size_t n);
void sigmoid_v(const double* a, double* y, std::size_t n);
void exp_v(const double* a, double* y, std::size_t n);
void log_v(const double* a, double* y, std::size_t n);

// Row-wise softmax of x[m x n] with max subtraction.
void softmax_rows(const double* x, double* y, int m, int n);

namespace serial {

// Reference implementations, plain loops, no OMP. Kept for tests and the
// kernel benchmark; identical accumulation order to the parallel versions.
void matmul(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n);
void add(const double* a, const double* b, double* y, std::size_t n);
void sub(const double* a, const double* b, double* y, std::size_t n);
void mul(const double* a, const double* b, double* y, std::size_t n);
void tanh_v(const double* a, double* y, std::size_t n);
void sigmoid_v(const double* a, double* y, std::size_t n);
void softmax_rows(const double* x, double* y, int m, int n);

}  // namespace serial

}  // namespace usted::kernels
