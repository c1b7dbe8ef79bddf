#pragma once

#include <vector>

#include "dvi/tensor.hpp"

// Small dense symmetric linear algebra used by the conjugate updates.
// Matrices are square row-major Tensors.

namespace dvi::linalg {

// Lower Cholesky factor of a symmetric positive definite matrix.
// Throws Error on failure.
Tensor cholesky(const Tensor& a);

// Inverse of an SPD matrix via Cholesky. On failure retries once with
// jitter*I added, then throws.
Tensor spd_inverse(const Tensor& a, double jitter = 1e-8);

// log determinant of an SPD matrix
double spd_logdet(const Tensor& a);

bool is_spd(const Tensor& a);

// Solve a x = b for SPD a, b a vector.
std::vector<double> spd_solve(const Tensor& a, const std::vector<double>& b);

Tensor identity(std::size_t n);

}  // namespace dvi::linalg
