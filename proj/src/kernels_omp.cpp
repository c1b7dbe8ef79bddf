#include <cmath>
#include <cstring>

#include "dvi/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dvi::kern {

namespace {
// below these sizes the fork/join overhead dominates
constexpr std::size_t kEltwiseCutoff = 1 << 14;
constexpr std::size_t kMatmulCutoff = 1 << 15;  // m*p*n flops
}  // namespace

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t p, std::size_t n) {
#ifdef _OPENMP
  if (m * p * n >= kMatmulCutoff) {
    const long mm = static_cast<long>(m);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < mm; ++i) {
      double* ci = c + i * n;
      std::memset(ci, 0, n * sizeof(double));
      for (std::size_t k = 0; k < p; ++k) {
        const double aik = a[i * p + k];
        const double* bk = b + k * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
      }
    }
    return;
  }
#endif
  serial::matmul(a, b, c, m, p, n);
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t p, std::size_t n) {
#ifdef _OPENMP
  if (m * p * n >= kMatmulCutoff) {
    const long mm = static_cast<long>(m);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < mm; ++i) {
      const double* ai = a + i * p;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * p;
        double acc = 0.0;
        for (std::size_t k = 0; k < p; ++k) acc += ai[k] * bj[k];
        c[i * n + j] = acc;
      }
    }
    return;
  }
#endif
  serial::matmul_nt(a, b, c, m, p, n);
}

#ifdef _OPENMP
#define DVI_EW_LOOP(expr)                                \
  if (n >= kEltwiseCutoff) {                             \
    const long nn = static_cast<long>(n);                \
    _Pragma("omp parallel for schedule(static)")         \
    for (long i = 0; i < nn; ++i) expr;                  \
    return;                                              \
  }
#else
#define DVI_EW_LOOP(expr)
#endif

void add(const double* a, const double* b, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = a[i] + b[i])
  serial::add(a, b, c, n);
}

void sub(const double* a, const double* b, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = a[i] - b[i])
  serial::sub(a, b, c, n);
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = a[i] * b[i])
  serial::mul(a, b, c, n);
}

void scale(const double* a, double s, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = s * a[i])
  serial::scale(a, s, c, n);
}

void relu(const double* a, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = a[i] > 0.0 ? a[i] : 0.0)
  serial::relu(a, c, n);
}

void relu_backward(const double* x, const double* grad_out, double* grad_in,
                   std::size_t n) {
  DVI_EW_LOOP(grad_in[i] = x[i] > 0.0 ? grad_out[i] : 0.0)
  serial::relu_backward(x, grad_out, grad_in, n);
}

void exp(const double* a, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = std::exp(a[i]))
  serial::exp(a, c, n);
}

void log(const double* a, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = std::log(a[i]))
  serial::log(a, c, n);
}

void square(const double* a, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = a[i] * a[i])
  serial::square(a, c, n);
}

void neg(const double* a, double* c, std::size_t n) {
  DVI_EW_LOOP(c[i] = -a[i])
  serial::neg(a, c, n);
}

#undef DVI_EW_LOOP

void add_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols) {
#ifdef _OPENMP
  if (rows * cols >= kEltwiseCutoff) {
    const long rr = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rr; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        c[i * cols + j] = a[i * cols + j] + b[j];
    return;
  }
#endif
  serial::add_rowvec(a, b, c, rows, cols);
}

void sub_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols) {
#ifdef _OPENMP
  if (rows * cols >= kEltwiseCutoff) {
    const long rr = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rr; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        c[i * cols + j] = a[i * cols + j] - b[j];
    return;
  }
#endif
  serial::sub_rowvec(a, b, c, rows, cols);
}

void mul_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols) {
#ifdef _OPENMP
  if (rows * cols >= kEltwiseCutoff) {
    const long rr = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rr; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        c[i * cols + j] = a[i * cols + j] * b[j];
    return;
  }
#endif
  serial::mul_rowvec(a, b, c, rows, cols);
}

void transpose(const double* a, double* c, std::size_t rows, std::size_t cols) {
#ifdef _OPENMP
  if (rows * cols >= kEltwiseCutoff) {
    const long rr = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rr; ++i)
      for (std::size_t j = 0; j < cols; ++j) c[j * rows + i] = a[i * cols + j];
    return;
  }
#endif
  serial::transpose(a, c, rows, cols);
}

// Reductions stay serial: they are cheap relative to the producing ops and a
// fixed summation order keeps results bit-reproducible across thread counts.
double sum(const double* a, std::size_t n) { return serial::sum(a, n); }

void row_sum(const double* a, double* c, std::size_t rows, std::size_t cols) {
#ifdef _OPENMP
  if (rows * cols >= kEltwiseCutoff) {
    const long rr = static_cast<long>(rows);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rr; ++i) {
      double acc = 0.0;
      const double* ai = a + i * cols;
      for (std::size_t j = 0; j < cols; ++j) acc += ai[j];
      c[i] = acc;
    }
    return;
  }
#endif
  serial::row_sum(a, c, rows, cols);
}

}  // namespace dvi::kern
