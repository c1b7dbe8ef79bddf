#include "dvi/expfam.hpp"

#include <cmath>
#include <numbers>

#include "dvi/rng.hpp"

namespace dvi {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)
}

double RngState::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double ExpFamSpec::log_prob(const std::vector<double>& x) const {
  if (x.size() != dim) throw Error("expfam log_prob: dimension mismatch");
  const auto t = sufficient_statistics(x);
  double dot = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) dot += natural_params[i] * t[i];
  return log_base_measure(x) + dot - log_normalizer(natural_params);
}

DiagNormal::DiagNormal(std::vector<double> mean, std::vector<double> log_std)
    : mean_(std::move(mean)), log_std_(std::move(log_std)) {
  if (mean_.size() != log_std_.size())
    throw Error("DiagNormal: mean/log_std dimension mismatch");
}

DiagNormal DiagNormal::standard(std::size_t dim) {
  return DiagNormal(std::vector<double>(dim, 0.0),
                    std::vector<double>(dim, 0.0));
}

std::vector<double> DiagNormal::std_dev() const {
  std::vector<double> s(log_std_.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_std_[i]);
  return s;
}

double DiagNormal::log_prob(const std::vector<double>& x) const {
  if (x.size() != dim()) throw Error("DiagNormal log_prob: dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double sd = std::exp(log_std_[i]);
    const double z = (x[i] - mean_[i]) / sd;
    lp += -0.5 * kLog2Pi - log_std_[i] - 0.5 * z * z;
  }
  return lp;
}

std::pair<std::vector<double>, std::vector<double>> DiagNormal::natural_params()
    const {
  std::vector<double> eta1(dim()), eta2(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    const double var = std::exp(2.0 * log_std_[i]);
    eta1[i] = mean_[i] / var;
    eta2[i] = -0.5 / var;
  }
  return {eta1, eta2};
}

DiagNormal DiagNormal::from_natural(const std::vector<double>& eta1,
                                    const std::vector<double>& eta2) {
  if (eta1.size() != eta2.size())
    throw Error("from_natural: dimension mismatch");
  std::vector<double> mean(eta1.size()), log_std(eta1.size());
  for (std::size_t i = 0; i < eta1.size(); ++i) {
    if (eta2[i] >= 0.0) throw Error("from_natural: eta2 must be negative");
    const double var = -0.5 / eta2[i];
    mean[i] = eta1[i] * var;
    log_std[i] = 0.5 * std::log(var);
  }
  return DiagNormal(std::move(mean), std::move(log_std));
}

std::pair<std::vector<double>, std::vector<double>>
DiagNormal::sufficient_statistics(const std::vector<double>& x) {
  std::vector<double> t1 = x, t2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t2[i] = x[i] * x[i];
  return {t1, t2};
}

ExpFamSpec DiagNormal::as_expfam() const {
  ExpFamSpec spec;
  spec.family = "diag_normal";
  spec.dim = dim();
  const std::size_t d = dim();
  spec.log_base_measure = [d](const std::vector<double>&) {
    return -0.5 * static_cast<double>(d) * kLog2Pi;
  };
  spec.sufficient_statistics = [](const std::vector<double>& x) {
    auto [t1, t2] = sufficient_statistics(x);
    t1.insert(t1.end(), t2.begin(), t2.end());
    return t1;
  };
  // a(eta) = sum_i [ -eta1_i^2 / (4 eta2_i) - 0.5 ln(-2 eta2_i) ]
  spec.log_normalizer = [d](const std::vector<double>& eta) {
    double a = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e1 = eta[i];
      const double e2 = eta[d + i];
      if (e2 >= 0.0) throw Error("diag_normal log_normalizer: eta2 >= 0");
      a += -e1 * e1 / (4.0 * e2) - 0.5 * std::log(-2.0 * e2);
    }
    return a;
  };
  auto [eta1, eta2] = natural_params();
  spec.natural_params = eta1;
  spec.natural_params.insert(spec.natural_params.end(), eta2.begin(),
                             eta2.end());
  return spec;
}

Tensor DiagNormal::reparam_sample(const Tensor& eps) const {
  if (eps.cols() != dim())
    throw ShapeError("reparam_sample: eps shape " + shape_str(eps.shape()) +
                     " does not match dimension " + std::to_string(dim()));
  Tensor out(eps.shape());
  const auto sd = std_dev();
  for (std::size_t r = 0; r < eps.rows(); ++r)
    for (std::size_t c = 0; c < dim(); ++c)
      out.data()[r * dim() + c] = mean_[c] + sd[c] * eps.at(r, c);
  return out;
}

Tensor DiagNormal::sample(RngState& rng, std::size_t n) const {
  Tensor eps({n, dim()});
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return reparam_sample(eps);
}

double kl_diag_normal(const DiagNormal& q, const DiagNormal& p) {
  if (q.dim() != p.dim()) throw Error("kl_diag_normal: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double lsq = q.log_std()[i];
    const double lsp = p.log_std()[i];
    const double vq = std::exp(2.0 * lsq);
    const double vp = std::exp(2.0 * lsp);
    const double dm = q.mean()[i] - p.mean()[i];
    kl += lsp - lsq + (vq + dm * dm) / (2.0 * vp) - 0.5;
  }
  return kl;
}

}  // namespace dvi
