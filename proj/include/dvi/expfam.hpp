#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dvi/rng.hpp"
#include "dvi/tensor.hpp"

namespace dvi {

// An exponential-family density in (h, t, eta, a) form:
//   log p(x) = log h(x) + eta^T t(x) - a(eta)
struct ExpFamSpec {
  std::string family;
  std::size_t dim;
  std::function<double(const std::vector<double>&)> log_base_measure;
  std::function<std::vector<double>(const std::vector<double>&)>
      sufficient_statistics;
  std::function<double(const std::vector<double>&)> log_normalizer;
  std::vector<double> natural_params;

  double log_prob(const std::vector<double>& x) const;
};

// Diagonal Normal with unconstrained scale parameterization sigma = exp(log_std).
class DiagNormal {
 public:
  DiagNormal(std::vector<double> mean, std::vector<double> log_std);

  static DiagNormal standard(std::size_t dim);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& log_std() const { return log_std_; }
  std::vector<double> std_dev() const;

  double log_prob(const std::vector<double>& x) const;

  // componentwise natural parameters (eta1, eta2) = (mu/sigma^2, -1/(2 sigma^2))
  std::pair<std::vector<double>, std::vector<double>> natural_params() const;

  // inverse map, for round-trip checks
  static DiagNormal from_natural(const std::vector<double>& eta1,
                                 const std::vector<double>& eta2);

  // componentwise sufficient statistics (x, x^2)
  static std::pair<std::vector<double>, std::vector<double>>
  sufficient_statistics(const std::vector<double>& x);

  // the (h, t, eta, a) view of this distribution
  ExpFamSpec as_expfam() const;

  // r = mu + sigma .* eps, one row per sample
  Tensor reparam_sample(const Tensor& eps) const;

  Tensor sample(RngState& rng, std::size_t n) const;

 private:
  std::vector<double> mean_;
  std::vector<double> log_std_;
};

double kl_diag_normal(const DiagNormal& q, const DiagNormal& p);

}  // namespace dvi
