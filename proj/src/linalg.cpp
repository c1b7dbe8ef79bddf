#include "dvi/linalg.hpp"

#include <cmath>

namespace dvi::linalg {

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor cholesky(const Tensor& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("cholesky: matrix not square");
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s))
          throw Error("cholesky: matrix not positive definite");
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

bool is_spd(const Tensor& a) {
  try {
    cholesky(a);
    return true;
  } catch (const Error&) {
    return false;
  }
}

namespace {

// inverse from the lower Cholesky factor
Tensor inverse_from_cholesky(const Tensor& l) {
  const std::size_t n = l.rows();
  // invert L by forward substitution
  Tensor li({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    li.at(i, i) = 1.0 / l.at(i, i);
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s += l.at(i, k) * li.at(k, j);
      li.at(i, j) = -s / l.at(i, i);
    }
  }
  // A^-1 = L^-T L^-1
  Tensor inv({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = i; k < n; ++k) s += li.at(k, i) * li.at(k, j);
      inv.at(i, j) = s;
      inv.at(j, i) = s;
    }
  return inv;
}

}  // namespace

Tensor spd_inverse(const Tensor& a, double jitter) {
  try {
    return inverse_from_cholesky(cholesky(a));
  } catch (const Error&) {
    Tensor aj = a;
    for (std::size_t i = 0; i < a.rows(); ++i) aj.at(i, i) += jitter;
    return inverse_from_cholesky(cholesky(aj));
  }
}

double spd_logdet(const Tensor& a) {
  Tensor l = cholesky(a);
  double ld = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) ld += std::log(l.at(i, i));
  return 2.0 * ld;
}

std::vector<double> spd_solve(const Tensor& a, const std::vector<double>& b) {
  const std::size_t n = a.rows();
  if (b.size() != n) throw ShapeError("spd_solve: dimension mismatch");
  Tensor l = cholesky(a);
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
    y[i] = s / l.at(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * x[k];
    x[ii] = s / l.at(ii, ii);
  }
  return x;
}

}  // namespace dvi::linalg
