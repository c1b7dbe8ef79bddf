#include "dvi/cavi.hpp"

#include <cmath>
#include <limits>

#include "dvi/kernels.hpp"
#include "dvi/linalg.hpp"

namespace dvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kArdGuard = 1e-12;

Tensor mat_mul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("mat_mul: inner dim mismatch");
  Tensor c({a.rows(), b.cols()});
  kern::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

// A^T B
Tensor mat_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw ShapeError("mat_tn: dim mismatch");
  Tensor at({a.cols(), a.rows()});
  kern::transpose(a.data(), at.data(), a.rows(), a.cols());
  return mat_mul(at, b);
}

// loadings gram with posterior spread: B = mu_beta^T mu_beta + d * sigma_beta
Tensor loading_second_moment(const VariationalState& s, std::size_t d) {
  Tensor b = mat_tn(s.mu_beta, s.mu_beta);
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i] += static_cast<double>(d) * s.sigma_beta[i];
  return b;
}

std::vector<double> ard_precisions(const VariationalState& s, std::size_t d) {
  const std::size_t k = s.sigma_beta.rows();
  std::vector<double> a(k);
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t r = 0; r < s.mu_beta.rows(); ++r) {
      const double v = s.mu_beta.at(r, j);
      col += v * v;
    }
    col += static_cast<double>(d) * s.sigma_beta.at(j, j);
    a[j] = static_cast<double>(d) / std::max(col, kArdGuard);
  }
  return a;
}

double frobenius_sq(const Tensor& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
  return s;
}

double trace_product(const Tensor& a, const Tensor& b) {
  // tr(A B) for symmetric same-size square matrices
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

RmSchedule::RmSchedule(double tau_, double kappa_) : tau(tau_), kappa(kappa_) {
  if (tau < 0.0) throw Error("RmSchedule: tau must be >= 0");
  if (kappa <= 0.5 || kappa > 1.0)
    throw Error("RmSchedule: kappa must lie in (0.5, 1]");
}

double RmSchedule::rate(std::size_t t) const {
  return std::pow(tau + static_cast<double>(t), -kappa);
}

std::vector<double> center_columns(Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) -= mean[j];
  return mean;
}

VariationalState init_state(const PpcaModel& model, RngState& rng) {
  const std::size_t d = model.d(), k = model.latent_dim, n = model.n();
  if (n < 1 || k < 1 || k > d || model.sigma_x2 <= 0.0)
    throw Error("PpcaModel: requires N >= 1, 1 <= k <= d, sigma_x2 > 0");
  VariationalState s;
  s.mu_beta = Tensor({d, k});
  for (std::size_t i = 0; i < s.mu_beta.size(); ++i)
    s.mu_beta[i] = 0.1 * rng.normal();  // N(0, 0.01), breaks symmetry
  s.sigma_beta = linalg::identity(k);
  s.mu_z = Tensor({n, k});
  s.sigma_z = linalg::identity(k);
  s.prior_prec = ard_precisions(s, d);
  return s;
}

void update_local(const PpcaModel& model, VariationalState& state) {
  const std::size_t k = model.latent_dim, d = model.d();
  const double inv_s2 = 1.0 / model.sigma_x2;
  Tensor prec = loading_second_moment(state, d);
  for (std::size_t i = 0; i < prec.size(); ++i) prec[i] *= inv_s2;
  for (std::size_t j = 0; j < k; ++j) prec.at(j, j) += 1.0;
  state.sigma_z = linalg::spd_inverse(prec);
  // mu_z rows: sigma_z * mu_beta^T x_i / sigma_x2, all rows in one pass
  Tensor proj = mat_mul(model.x, state.mu_beta);  // [N x k]
  state.mu_z = mat_mul(proj, state.sigma_z);
  for (std::size_t i = 0; i < state.mu_z.size(); ++i)
    state.mu_z[i] *= inv_s2;
}

void update_global(const PpcaModel& model, VariationalState& state) {
  const std::size_t k = model.latent_dim, n = model.n(), d = model.d();
  const double inv_s2 = 1.0 / model.sigma_x2;
  state.prior_prec = ard_precisions(state, d);
  // S = sum_i E[Z_i Z_i^T] = N sigma_z + mu_z^T mu_z
  Tensor s_zz = mat_tn(state.mu_z, state.mu_z);
  for (std::size_t i = 0; i < s_zz.size(); ++i)
    s_zz[i] = s_zz[i] * inv_s2 + static_cast<double>(n) * state.sigma_z[i] * inv_s2;
  for (std::size_t j = 0; j < k; ++j) s_zz.at(j, j) += state.prior_prec[j];
  state.sigma_beta = linalg::spd_inverse(s_zz);
  // mu_beta rows: sigma_beta * (sum_i x_ij E[Z_i]) / sigma_x2
  Tensor xz = mat_tn(model.x, state.mu_z);  // [d x k]
  state.mu_beta = mat_mul(xz, state.sigma_beta);
  for (std::size_t i = 0; i < state.mu_beta.size(); ++i)
    state.mu_beta[i] *= inv_s2;
}

double elbo(const PpcaModel& model, const VariationalState& state) {
  const std::size_t n = model.n(), d = model.d(), k = model.latent_dim;
  const double nn = static_cast<double>(n), dd = static_cast<double>(d),
               kk = static_cast<double>(k);
  const double s2 = model.sigma_x2;

  Tensor b = loading_second_moment(state, d);
  Tensor s_zz = mat_tn(state.mu_z, state.mu_z);
  for (std::size_t i = 0; i < s_zz.size(); ++i)
    s_zz[i] += nn * state.sigma_z[i];

  // E[ln p(x | z, beta)]
  Tensor proj = mat_mul(model.x, state.mu_beta);  // [N x k]
  double cross = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) cross += proj[i] * state.mu_z[i];
  const double quad = frobenius_sq(model.x) - 2.0 * cross + trace_product(b, s_zz);
  double value = -0.5 * nn * dd * (kLog2Pi + std::log(s2)) - 0.5 * quad / s2;

  // E[ln p(z)]
  value += -0.5 * nn * kk * kLog2Pi -
           0.5 * (nn * trace_product(state.sigma_z, linalg::identity(k)) +
                  frobenius_sq(state.mu_z));

  // E[ln p(beta | A)]
  double prior = -0.5 * dd * kk * kLog2Pi;
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      const double v = state.mu_beta.at(r, j);
      col += v * v;
    }
    col += dd * state.sigma_beta.at(j, j);
    prior += 0.5 * dd * std::log(state.prior_prec[j]) -
             0.5 * state.prior_prec[j] * col;
  }
  value += prior;

  // entropies
  value += 0.5 * dd * (kk * (kLog2Pi + 1.0) + linalg::spd_logdet(state.sigma_beta));
  value += 0.5 * nn * (kk * (kLog2Pi + 1.0) + linalg::spd_logdet(state.sigma_z));
  return value;
}

FitResult cavi_fit(const PpcaModel& model, VariationalState init,
                   std::size_t max_sweeps, double rel_tol) {
  if (max_sweeps < 1) throw Error("cavi_fit: max_sweeps must be >= 1");
  FitResult result{std::move(init), {}};
  double prev = elbo(model, result.state);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    update_local(model, result.state);
    update_global(model, result.state);
    const double value = elbo(model, result.state);
    result.elbo_trace.push_back(value);
    if (std::fabs(value - prev) < rel_tol * std::fabs(prev)) break;
    prev = value;
  }
  return result;
}

NaturalTarget svi_natural_target(const PpcaModel& model,
                                 const VariationalState& state,
                                 const std::vector<std::size_t>& minibatch) {
  if (minibatch.empty()) throw Error("svi: empty minibatch");
  const std::size_t k = model.latent_dim, d = model.d();
  const double inv_s2 = 1.0 / model.sigma_x2;
  const double scale = static_cast<double>(model.n()) /
                       static_cast<double>(minibatch.size());

  // minibatch local optimum given the current global parameters
  Tensor prec = loading_second_moment(state, d);
  for (std::size_t i = 0; i < prec.size(); ++i) prec[i] *= inv_s2;
  for (std::size_t j = 0; j < k; ++j) prec.at(j, j) += 1.0;
  Tensor sigma_z = linalg::spd_inverse(prec);

  NaturalTarget t;
  t.precision = Tensor({k, k});
  t.linear = Tensor({d, k});
  Tensor zz_sum({k, k});
  for (std::size_t m : minibatch) {
    if (m >= model.n()) throw Error("svi: minibatch index out of range");
    // mu_z = sigma_z mu_beta^T x_m / sigma_x2
    std::vector<double> proj(k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t r = 0; r < d; ++r)
        proj[j] += state.mu_beta.at(r, j) * model.x.at(m, r);
    std::vector<double> mu_z(k, 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t j = 0; j < k; ++j)
        mu_z[a] += sigma_z.at(a, j) * proj[j] * inv_s2;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t c = 0; c < k; ++c)
        zz_sum.at(a, c) += sigma_z.at(a, c) + mu_z[a] * mu_z[c];
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t a = 0; a < k; ++a)
        t.linear.at(r, a) += model.x.at(m, r) * mu_z[a] * scale * inv_s2;
  }
  for (std::size_t i = 0; i < zz_sum.size(); ++i)
    t.precision[i] = zz_sum[i] * scale * inv_s2;
  for (std::size_t j = 0; j < k; ++j)
    t.precision.at(j, j) += state.prior_prec[j];
  return t;
}

void svi_step(const PpcaModel& model, VariationalState& state,
              const std::vector<std::size_t>& minibatch, double rho) {
  if (minibatch.empty()) throw Error("svi_step: empty minibatch");
  if (!(rho > 0.0 && rho <= 1.0))
    throw Error("svi_step: rho must lie in (0, 1]");
  state.prior_prec = ard_precisions(state, model.d());
  NaturalTarget target = svi_natural_target(model, state, minibatch);

  Tensor p_cur = linalg::spd_inverse(state.sigma_beta);
  Tensor l_cur = mat_mul(state.mu_beta, p_cur);  // rows: P mu_beta[j]

  for (std::size_t i = 0; i < p_cur.size(); ++i)
    p_cur[i] = (1.0 - rho) * p_cur[i] + rho * target.precision[i];
  for (std::size_t i = 0; i < l_cur.size(); ++i)
    l_cur[i] = (1.0 - rho) * l_cur[i] + rho * target.linear[i];

  state.sigma_beta = linalg::spd_inverse(p_cur);
  state.mu_beta = mat_mul(l_cur, state.sigma_beta);
}

FitResult svi_fit(const PpcaModel& model, VariationalState init,
                  const RmSchedule& schedule, std::size_t minibatch_size,
                  std::size_t steps, RngState& rng) {
  if (steps < 1) throw Error("svi_fit: steps must be >= 1");
  if (minibatch_size < 1 || minibatch_size > model.n())
    throw Error("svi_fit: minibatch size must lie in [1, N]");
  FitResult result{std::move(init), {}};
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::size_t> minibatch(minibatch_size);
    for (auto& m : minibatch)
      m = static_cast<std::size_t>(rng.below(model.n()));
    svi_step(model, result.state, minibatch, schedule.rate(t));
    update_local(model, result.state);
    result.elbo_trace.push_back(elbo(model, result.state));
  }
  return result;
}

double elbo_fixed_loadings(const PpcaModel& model, const Tensor& loadings,
                           const VariationalState& state) {
  const std::size_t n = model.n(), d = model.d(), k = model.latent_dim;
  const double nn = static_cast<double>(n), dd = static_cast<double>(d),
               kk = static_cast<double>(k);
  const double s2 = model.sigma_x2;

  Tensor b = mat_tn(loadings, loadings);
  Tensor s_zz = mat_tn(state.mu_z, state.mu_z);
  for (std::size_t i = 0; i < s_zz.size(); ++i)
    s_zz[i] += nn * state.sigma_z[i];
  Tensor proj = mat_mul(model.x, loadings);
  double cross = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) cross += proj[i] * state.mu_z[i];
  const double quad = frobenius_sq(model.x) - 2.0 * cross + trace_product(b, s_zz);

  double value = -0.5 * nn * dd * (kLog2Pi + std::log(s2)) - 0.5 * quad / s2;
  double tr_sz = 0.0;
  for (std::size_t j = 0; j < k; ++j) tr_sz += state.sigma_z.at(j, j);
  value += -0.5 * nn * kk * kLog2Pi -
           0.5 * (nn * tr_sz + frobenius_sq(state.mu_z));
  value += 0.5 * nn * (kk * (kLog2Pi + 1.0) + linalg::spd_logdet(state.sigma_z));
  return value;
}

double log_evidence_fixed_loadings(const PpcaModel& model,
                                   const Tensor& loadings) {
  const std::size_t n = model.n(), d = model.d();
  // x_i ~ N(0, loadings loadings^T + sigma_x2 I)
  Tensor cov({d, d});
  kern::matmul_nt(loadings.data(), loadings.data(), cov.data(), d,
                  loadings.cols(), d);
  for (std::size_t j = 0; j < d; ++j) cov.at(j, j) += model.sigma_x2;
  const double logdet = linalg::spd_logdet(cov);
  double value = -0.5 * static_cast<double>(n) *
                 (static_cast<double>(d) * kLog2Pi + logdet);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> xi(d);
    for (std::size_t j = 0; j < d; ++j) xi[j] = model.x.at(i, j);
    const auto sol = linalg::spd_solve(cov, xi);
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) q += xi[j] * sol[j];
    value -= 0.5 * q;
  }
  return value;
}

}  // namespace dvi
