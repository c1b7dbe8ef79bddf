#pragma once

#include <cstddef>

#include "dvi/tensor.hpp"

// Tensor kernels. The default entry points in dvi::kern dispatch to
// OpenMP-parallel loops for large inputs; dvi::kern::serial holds the
// plain reference loops used for testing and as the small-input path.
// All parallel kernels assign disjoint output ranges per thread with a
// sequential inner loop, so results are bitwise identical to the serial
// path regardless of thread count.

namespace dvi::kern {

namespace serial {

// C[m x n] = A[m x p] * B[p x n]
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t p, std::size_t n);

// C[m x n] = A[m x p] * B[n x p]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t p, std::size_t n);

void add(const double* a, const double* b, double* c, std::size_t n);
void sub(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);

// row-broadcast forms: b has length `cols`, applied to each of `rows` rows
void add_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols);
void sub_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols);
void mul_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols);

void scale(const double* a, double s, double* c, std::size_t n);
void relu(const double* a, double* c, std::size_t n);
void relu_backward(const double* x, const double* grad_out, double* grad_in,
                   std::size_t n);
void exp(const double* a, double* c, std::size_t n);
void log(const double* a, double* c, std::size_t n);
void square(const double* a, double* c, std::size_t n);
void neg(const double* a, double* c, std::size_t n);
void transpose(const double* a, double* c, std::size_t rows, std::size_t cols);

double sum(const double* a, std::size_t n);
// per-row sums of an [rows x cols] matrix
void row_sum(const double* a, double* c, std::size_t rows, std::size_t cols);

}  // namespace serial

// dispatching entry points (same contracts as serial::)
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t p, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t p, std::size_t n);
void add(const double* a, const double* b, double* c, std::size_t n);
void sub(const double* a, const double* b, double* c, std::size_t n);
void mul(const double* a, const double* b, double* c, std::size_t n);
void add_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols);
void sub_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols);
void mul_rowvec(const double* a, const double* b, double* c, std::size_t rows,
                std::size_t cols);
void scale(const double* a, double s, double* c, std::size_t n);
void relu(const double* a, double* c, std::size_t n);
void relu_backward(const double* x, const double* grad_out, double* grad_in,
                   std::size_t n);
void exp(const double* a, double* c, std::size_t n);
void log(const double* a, double* c, std::size_t n);
void square(const double* a, double* c, std::size_t n);
void neg(const double* a, double* c, std::size_t n);
void transpose(const double* a, double* c, std::size_t rows, std::size_t cols);
double sum(const double* a, std::size_t n);
void row_sum(const double* a, double* c, std::size_t rows, std::size_t cols);

}  // namespace dvi::kern
