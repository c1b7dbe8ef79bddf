#include <cmath>
#include <cstring>

#include "dvi/kernels.hpp"

namespace dvi::kern::serial {

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::memset(ci, 0, n * sizeof(double));
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = a[i * p + k];
      const double* bk = b + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * p;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * p;
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += ai[k] * bj[k];
      c[i * n + j] = acc;
    }
  }
}

void add(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void add_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      c[i * cols + j] = a[i * cols + j] + b[j];
}

void sub_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      c[i * cols + j] = a[i * cols + j] - b[j];
}

void mul_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      c[i * cols + j] = a[i * cols + j] * b[j];
}

void scale(const double* a, double s, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = s * a[i];
}

void relu(const double* a, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward(const double* x, const double* grad_out, double* grad_in,
                   std::size_t n) {
  // subgradient at 0 is 0
  for (std::size_t i = 0; i < n; ++i)
    grad_in[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
}

void exp(const double* a, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = std::exp(a[i]);
}

void log(const double* a, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = std::log(a[i]);
}

void square(const double* a, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * a[i];
}

void neg(const double* a, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = -a[i];
}

void transpose(const double* a, double* c, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c[j * rows + i] = a[i * cols + j];
}

double sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void row_sum(const double* a, double* c, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* ai = a + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += ai[j];
    c[i] = acc;
  }
}

}  // namespace dvi::kern::serial
