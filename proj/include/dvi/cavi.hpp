#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dvi/rng.hpp"
#include "dvi/tensor.hpp"

namespace dvi {

// Probabilistic PCA with centered data X [N x d], latent dimension k, fixed
// observation noise sigma_x2 and a per-column ARD-style prior precision on
// the loading matrix.
struct PpcaModel {
  Tensor x;  // [N x d], centered
  std::size_t latent_dim;
  double sigma_x2 = 0.1;

  std::size_t n() const { return x.rows(); }
  std::size_t d() const { return x.cols(); }
};

// Mean-field posterior: one Gaussian per loading row (shared k x k
// covariance) and one Gaussian per sample (shared k x k covariance, as the
// covariance update does not depend on the sample).
struct VariationalState {
  Tensor mu_beta;     // [d x k]
  Tensor sigma_beta;  // [k x k]
  Tensor mu_z;        // [N x k]
  Tensor sigma_z;     // [k x k]
  std::vector<double> prior_prec;  // k entries, diagonal of A
};

// Robbins-Monro step sizes rho_t = (tau + t)^(-kappa). Construction rejects
// kappa outside (0.5, 1], which would violate the Robbins-Monro conditions.
struct RmSchedule {
  double tau;
  double kappa;
  RmSchedule(double tau_, double kappa_);
  double rate(std::size_t t) const;
};

VariationalState init_state(const PpcaModel& model, RngState& rng);

// local coordinate update: returns and stores (sigma_z, mu_z)
void update_local(const PpcaModel& model, VariationalState& state);

// global coordinate update: refreshes the prior precisions and stores
// (sigma_beta, mu_beta)
void update_global(const PpcaModel& model, VariationalState& state);

double elbo(const PpcaModel& model, const VariationalState& state);

struct FitResult {
  VariationalState state;
  std::vector<double> elbo_trace;
};

FitResult cavi_fit(const PpcaModel& model, VariationalState init,
                   std::size_t max_sweeps, double rel_tol);

// Natural-parameter target estimated from a minibatch: precision matrix and
// precision-weighted means. With the full data set this equals the
// coordinate-ascent optimum.
struct NaturalTarget {
  Tensor precision;     // [k x k]
  Tensor linear;        // [d x k], row j = precision * mu_beta[j] at the target
};

NaturalTarget svi_natural_target(const PpcaModel& model,
                                 const VariationalState& state,
                                 const std::vector<std::size_t>& minibatch);

void svi_step(const PpcaModel& model, VariationalState& state,
              const std::vector<std::size_t>& minibatch, double rho);

FitResult svi_fit(const PpcaModel& model, VariationalState init,
                  const RmSchedule& schedule, std::size_t minibatch_size,
                  std::size_t steps, RngState& rng);

// Tractable fixed-loadings variant, used as an independent lower-bound
// oracle: the ELBO over q(z) alone never exceeds the closed-form evidence.
double elbo_fixed_loadings(const PpcaModel& model, const Tensor& loadings,
                           const VariationalState& state);
double log_evidence_fixed_loadings(const PpcaModel& model,
                                   const Tensor& loadings);

// Subtract the column means in place; returns the centering vector.
std::vector<double> center_columns(Tensor& x);

}  // namespace dvi
