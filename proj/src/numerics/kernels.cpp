#include "usted/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace usted::kernels {

namespace {

// Shared inner routine: one output row of y (+)= a_row * b.
// k-outer / j-inner keeps the per-element accumulation order independent of
// how rows are distributed over threads.
inline void matmul_row(const double* a_row, const double* b, double* y_row,
                       int k, int n) {
  for (int kk = 0; kk < k; ++kk) {
    const double av = a_row[kk];
    const double* b_row = b + static_cast<std::size_t>(kk) * n;
    for (int j = 0; j < n; ++j) y_row[j] += av * b_row[j];
  }
}

inline void matmul_nt_row(const double* a_row, const double* b, double* y_row,
                          int k, int n) {
  for (int j = 0; j < n; ++j) {
    const double* b_row = b + static_cast<std::size_t>(j) * k;
    double acc = 0.0;
    for (int kk = 0; kk < k; ++kk) acc += a_row[kk] * b_row[kk];
    y_row[j] += acc;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* y_row,
                          int i, int m, int k, int n) {
  for (int kk = 0; kk < k; ++kk) {
    const double av = a[static_cast<std::size_t>(kk) * m + i];
    const double* b_row = b + static_cast<std::size_t>(kk) * n;
    for (int j = 0; j < n; ++j) y_row[j] += av * b_row[j];
  }
}

inline bool matmul_parallel(int m, int k, int n) {
  return static_cast<long>(m) * k * n >= kMatmulParallelFlops && m > 1;
}

inline void softmax_row(const double* x, double* y, int n) {
  double mx = x[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < n; ++j) y[j] *= inv;
}

}  // namespace

void matmul(const double* a, const double* b, double* y, int m, int k, int n) {
  std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  matmul_acc(a, b, y, m, k, n);
}

void matmul_acc(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (matmul_parallel(m, k, n))
  for (int i = 0; i < m; ++i) {
    matmul_row(a + static_cast<std::size_t>(i) * k, b,
               y + static_cast<std::size_t>(i) * n, k, n);
  }
}

void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n) {
  std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  matmul_nt_acc(a, b, y, m, k, n);
}

void matmul_nt_acc(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (matmul_parallel(m, k, n))
  for (int i = 0; i < m; ++i) {
    matmul_nt_row(a + static_cast<std::size_t>(i) * k, b,
                  y + static_cast<std::size_t>(i) * n, k, n);
  }
}

void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n) {
  std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  matmul_tn_acc(a, b, y, m, k, n);
}

void matmul_tn_acc(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (matmul_parallel(m, k, n))
  for (int i = 0; i < m; ++i) {
    matmul_tn_row(a, b, y + static_cast<std::size_t>(i) * n, i, m, k, n);
  }
}

#define USTED_ELEMWISE_LOOP(expr)                                             \
  _Pragma("omp parallel for schedule(static) if (n >= (std::size_t)kElemwiseParallelLen)") \
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {       \
    y[i] = (expr);                                                            \
  }

void add(const double* a, const double* b, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(a[i] + b[i])
}

void sub(const double* a, const double* b, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(a[i] - b[i])
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(a[i] * b[i])
}

void scale(const double* a, double c, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(c * a[i])
}

void axpy(double c, const double* a, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(y[i] + c * a[i])
}

void tanh_v(const double* a, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(std::tanh(a[i]))
}

void sigmoid_v(const double* a, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(1.0 / (1.0 + std::exp(-a[i])))
}

void exp_v(const double* a, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(std::exp(a[i]))
}

void log_v(const double* a, double* y, std::size_t n) {
  USTED_ELEMWISE_LOOP(std::log(a[i]))
}

#undef USTED_ELEMWISE_LOOP

void softmax_rows(const double* x, double* y, int m, int n) {
#pragma omp parallel for schedule(static) if (static_cast<long>(m) * n >= kElemwiseParallelLen && m > 1)
  for (int i = 0; i < m; ++i) {
    softmax_row(x + static_cast<std::size_t>(i) * n,
                y + static_cast<std::size_t>(i) * n, n);
  }
}

namespace serial {

void matmul(const double* a, const double* b, double* y, int m, int k, int n) {
  std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    matmul_row(a + static_cast<std::size_t>(i) * k, b,
               y + static_cast<std::size_t>(i) * n, k, n);
  }
}

void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n) {
  std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    matmul_nt_row(a + static_cast<std::size_t>(i) * k, b,
                  y + static_cast<std::size_t>(i) * n, k, n);
  }
}

void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n) {
  std::memset(y, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    matmul_tn_row(a, b, y + static_cast<std::size_t>(i) * n, i, m, k, n);
  }
}

void add(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void tanh_v(const double* a, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(a[i]);
}

void sigmoid_v(const double* a, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-a[i]));
}

void softmax_rows(const double* x, double* y, int m, int n) {
  for (int i = 0; i < m; ++i) {
    softmax_row(x + static_cast<std::size_t>(i) * n,
                y + static_cast<std::size_t>(i) * n, n);
  }
}

}  // namespace serial

}  // namespace usted::kernels
