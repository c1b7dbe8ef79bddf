#include "dvi/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dvi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Tensor normal_tensor(RngState& rng, const std::vector<std::size_t>& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

void require_mode(const StochasticObjective& obj, EstimatorMode mode) {
  for (const auto& sn : obj.stochastic)
    if (sn.mode != mode) {
      if (mode == EstimatorMode::Pathwise)
        throw Error(
            "pathwise_grad: stochastic node in score mode; use score_grad "
            "or rebuild the objective without mixed modes");
      throw Error(
          "score_grad: stochastic node in pathwise mode; use pathwise_grad "
          "or rebuild the objective without mixed modes");
    }
}

void check_objective(const StochasticObjective& obj) {
  if (obj.graph == nullptr) throw Error("stochastic objective: null graph");
  if (!obj.objective.valid())
    throw Error("stochastic objective: missing objective node");
}

// Draw r = mean + exp(log_std) .* eps from the numeric values of the mean
// and log_std nodes; mean/log_std may broadcast over the sample shape.
Tensor draw_sample(Graph& g, const StochasticNode& sn, RngState& rng) {
  const Tensor mean = g.eval(sn.mean);
  const Tensor log_std = g.eval(sn.log_std);
  Tensor r(sn.shape);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double m = mean[i % mean.size()];
    const double s = std::exp(log_std[i % log_std.size()]);
    r[i] = m + s * rng.normal();
  }
  return r;
}

struct Accumulator {
  std::vector<Tensor> sum;
  std::vector<Tensor> sum_sq;
  double value_sum = 0.0;
  double value_sum_sq = 0.0;
  std::size_t n = 0;

  void init(const std::vector<Tensor>& grads) {
    for (const auto& t : grads) {
      sum.emplace_back(t.shape());
      sum_sq.emplace_back(t.shape());
    }
  }

  void add(double value, const std::vector<Tensor>& grads) {
    if (sum.empty()) init(grads);
    for (std::size_t p = 0; p < grads.size(); ++p)
      for (std::size_t i = 0; i < grads[p].size(); ++i) {
        sum[p][i] += grads[p][i];
        sum_sq[p][i] += grads[p][i] * grads[p][i];
      }
    value_sum += value;
    value_sum_sq += value * value;
    ++n;
  }

  GradientEstimate finish() const {
    GradientEstimate e;
    e.samples = n;
    const double nn = static_cast<double>(n);
    for (std::size_t p = 0; p < sum.size(); ++p) {
      Tensor m(sum[p].shape());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = sum[p][i] / nn;
      e.mean.push_back(std::move(m));
    }
    if (n > 1) {
      for (std::size_t p = 0; p < sum.size(); ++p) {
        Tensor se(sum[p].shape());
        for (std::size_t i = 0; i < se.size(); ++i) {
          const double var = (sum_sq[p][i] - sum[p][i] * sum[p][i] / nn) /
                             (nn - 1.0);
          se[i] = std::sqrt(std::max(var, 0.0) / nn);
        }
        e.std_error.push_back(std::move(se));
      }
    }
    e.value_mean = value_sum / nn;
    e.value_std_error =
        n > 1 ? std::sqrt(std::max((value_sum_sq - value_sum * value_sum / nn) /
                                       (nn - 1.0),
                                   0.0) /
                          nn)
              : std::numeric_limits<double>::quiet_NaN();
    return e;
  }
};

}  // namespace

StochasticNode add_gaussian_stochastic(Graph& g, NodeId mean, NodeId log_std,
                                       std::vector<std::size_t> shape,
                                       EstimatorMode mode) {
  StochasticNode sn;
  sn.mean = mean;
  sn.log_std = log_std;
  sn.shape = shape;
  sn.mode = mode;
  if (mode == EstimatorMode::Pathwise) {
    sn.noise = g.add_input(shape);
    NodeId sigma = g.apply(OpTag::Exp, {log_std});
    NodeId scaled = g.apply(OpTag::Mul, {sn.noise, sigma});
    sn.value = g.apply(OpTag::Add, {scaled, mean});
  } else {
    sn.value = g.add_placeholder(shape);
  }
  return sn;
}

NodeId add_diag_normal_logpdf(Graph& g, NodeId x, NodeId mean, NodeId log_std,
                              std::size_t x_count, double log_std_factor) {
  NodeId diff = g.apply(OpTag::Sub, {x, mean});
  NodeId sq = g.apply(OpTag::Square, {diff});
  NodeId inv_var = g.apply(OpTag::Exp, {g.scalar_mul(log_std, -2.0)});
  NodeId quad = g.reduce(OpTag::Sum, g.apply(OpTag::Mul, {sq, inv_var}),
                         Axis::All);
  NodeId term = g.scalar_mul(quad, -0.5);
  NodeId logdet = g.scalar_mul(g.reduce(OpTag::Sum, log_std, Axis::All),
                               -log_std_factor);
  NodeId c = g.add_constant(
      Tensor::scalar(-0.5 * static_cast<double>(x_count) * kLog2Pi));
  return g.apply(OpTag::Add, {g.apply(OpTag::Add, {term, logdet}), c});
}

NodeId add_diag_normal_logpdf_scale(Graph& g, NodeId x, NodeId mean,
                                    NodeId scale, std::size_t x_count) {
  NodeId log_scale = g.apply(OpTag::Log, {scale});
  NodeId diff = g.apply(OpTag::Sub, {x, mean});
  NodeId sq = g.apply(OpTag::Square, {diff});
  NodeId inv_var = g.apply(OpTag::Exp, {g.scalar_mul(log_scale, -2.0)});
  NodeId quad = g.reduce(OpTag::Sum, g.apply(OpTag::Mul, {sq, inv_var}),
                         Axis::All);
  NodeId term = g.scalar_mul(quad, -0.5);
  NodeId logdet = g.scalar_mul(g.reduce(OpTag::Sum, log_scale, Axis::All),
                               -1.0);
  NodeId c = g.add_constant(
      Tensor::scalar(-0.5 * static_cast<double>(x_count) * kLog2Pi));
  return g.apply(OpTag::Add, {g.apply(OpTag::Add, {term, logdet}), c});
}

NodeId add_std_normal_logpdf(Graph& g, NodeId x, std::size_t x_count) {
  NodeId quad = g.reduce(OpTag::Sum, g.apply(OpTag::Square, {x}), Axis::All);
  NodeId term = g.scalar_mul(quad, -0.5);
  NodeId c = g.add_constant(
      Tensor::scalar(-0.5 * static_cast<double>(x_count) * kLog2Pi));
  return g.apply(OpTag::Add, {term, c});
}

NodeId add_softplus(Graph& g, NodeId h) {
  // ln(1 + e^h) = relu(h) + ln(e^{-relu(h)} + e^{-relu(-h)}), every
  // exponent nonpositive
  NodeId rp = g.apply(OpTag::Relu, {h});
  NodeId rn = g.apply(OpTag::Relu, {g.apply(OpTag::Neg, {h})});
  NodeId ep = g.apply(OpTag::Exp, {g.apply(OpTag::Neg, {rp})});
  NodeId en = g.apply(OpTag::Exp, {g.apply(OpTag::Neg, {rn})});
  NodeId lg = g.apply(OpTag::Log, {g.apply(OpTag::Add, {ep, en})});
  return g.apply(OpTag::Add, {rp, lg});
}

std::pair<double, double> elbo_mc(StochasticObjective& obj, RngState& rng,
                                  std::size_t k) {
  check_objective(obj);
  if (k < 1) throw Error("elbo_mc: K must be >= 1");
  Graph& g = *obj.graph;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    try {
      for (const auto& sn : obj.stochastic) {
        if (sn.mode == EstimatorMode::Pathwise)
          g.bind(sn.noise, normal_tensor(rng, sn.shape));
        else
          g.bind(sn.value, draw_sample(g, sn, rng));
      }
      const double v = g.eval(obj.objective).value();
      sum += v;
      sum_sq += v * v;
    } catch (const Error& e) {
      throw Error("elbo_mc: sample " + std::to_string(i) + ": " + e.what());
    }
  }
  const double kk = static_cast<double>(k);
  const double mean = sum / kk;
  const double se =
      k > 1 ? std::sqrt(std::max((sum_sq - sum * sum / kk) / (kk - 1.0), 0.0) /
                        kk)
            : std::numeric_limits<double>::quiet_NaN();
  return {mean, se};
}

double pathwise_eval(StochasticObjective& obj, const std::vector<Tensor>& eps,
                     std::vector<Tensor>& grads) {
  check_objective(obj);
  require_mode(obj, EstimatorMode::Pathwise);
  if (eps.size() != obj.stochastic.size())
    throw Error("pathwise_eval: one noise tensor per stochastic node required");
  Graph& g = *obj.graph;
  for (std::size_t s = 0; s < eps.size(); ++s)
    g.bind(obj.stochastic[s].noise, eps[s]);
  const double value = g.eval(obj.objective).value();
  auto adjoints = g.backward(obj.objective);
  grads.clear();
  for (NodeId p : obj.params) grads.push_back(adjoints.at(p));
  return value;
}

double score_eval(StochasticObjective& obj, const std::vector<Tensor>& draws,
                  std::vector<Tensor>& grads) {
  check_objective(obj);
  require_mode(obj, EstimatorMode::Score);
  if (!obj.logq.valid())
    throw Error("score_eval: objective has no log q subexpression");
  if (draws.size() != obj.stochastic.size())
    throw Error("score_eval: one sample tensor per stochastic node required");
  Graph& g = *obj.graph;
  for (std::size_t s = 0; s < draws.size(); ++s)
    g.bind(obj.stochastic[s].value, draws[s]);
  const double value = g.eval(obj.objective).value();
  g.eval(obj.logq);
  auto adjoints = g.backward(obj.logq);
  grads.clear();
  for (NodeId p : obj.params) {
    Tensor t = adjoints.at(p);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= value;
    grads.push_back(std::move(t));
  }
  return value;
}

GradientEstimate pathwise_grad(StochasticObjective& obj, RngState& rng,
                               std::size_t k) {
  if (k < 1) throw Error("pathwise_grad: K must be >= 1");
  require_mode(obj, EstimatorMode::Pathwise);
  Accumulator acc;
  std::vector<Tensor> eps(obj.stochastic.size());
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t s = 0; s < eps.size(); ++s)
      eps[s] = normal_tensor(rng, obj.stochastic[s].shape);
    try {
      acc.add(pathwise_eval(obj, eps, grads), grads);
    } catch (const Error& e) {
      throw Error("pathwise_grad: sample " + std::to_string(i) + ": " +
                  e.what());
    }
  }
  return acc.finish();
}

GradientEstimate score_grad(StochasticObjective& obj, RngState& rng,
                            std::size_t k) {
  if (k < 1) throw Error("score_grad: K must be >= 1");
  require_mode(obj, EstimatorMode::Score);
  Accumulator acc;
  std::vector<Tensor> draws(obj.stochastic.size());
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t s = 0; s < draws.size(); ++s)
      draws[s] = draw_sample(*obj.graph, obj.stochastic[s], rng);
    try {
      acc.add(score_eval(obj, draws, grads), grads);
    } catch (const Error& e) {
      throw Error("score_grad: sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return acc.finish();
}

AscentResult maximize(StochasticObjective& obj, EstimatorMode mode,
                      const std::function<double(std::size_t)>& rate,
                      std::size_t steps, std::size_t k, RngState& rng,
                      std::size_t trace_interval) {
  check_objective(obj);
  if (steps < 1) throw Error("maximize: steps must be >= 1");
  if (trace_interval < 1) throw Error("maximize: trace interval must be >= 1");
  Graph& g = *obj.graph;
  AscentResult result;
  for (std::size_t t = 0; t < steps; ++t) {
    GradientEstimate est = mode == EstimatorMode::Pathwise
                               ? pathwise_grad(obj, rng, k)
                               : score_grad(obj, rng, k);
    if (std::fabs(est.value_mean) > 1e12)
      throw Error("maximize: diverged at step " + std::to_string(t) +
                  " (|ELBO| > 1e12)");
    const double rho = rate(t);
    for (std::size_t p = 0; p < obj.params.size(); ++p) {
      Tensor v = g.value(obj.params[p]);
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] += rho * est.mean[p][i];
      g.set_parameter(obj.params[p], std::move(v));
    }
    if (t % trace_interval == 0 || t + 1 == steps) {
      std::vector<Tensor> snapshot;
      for (NodeId p : obj.params) snapshot.push_back(g.value(p));
      result.nu_trace.push_back(std::move(snapshot));
      result.elbo_trace.push_back(est.value_mean);
    }
  }
  return result;
}

}  // namespace dvi
