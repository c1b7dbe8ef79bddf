#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "dvi/graph.hpp"
#include "dvi/rng.hpp"
#include "dvi/tensor.hpp"

namespace dvi {

enum class EstimatorMode { Pathwise, Score };

// One Gaussian sample site inside a stochastic objective graph.
//
// Pathwise mode: `noise` is an input node bound to eps and `value` is the
// graph expression mean + exp(log_std) .* eps, so adjoints flow through the
// sample into (mean, log_std).
//
// Score mode: `value` is a placeholder bound to a freshly drawn sample; it
// is a leaf, so no adjoint can flow through the sampled value.
struct StochasticNode {
  NodeId noise;    // pathwise only, otherwise invalid
  NodeId value;    // node carrying the sample r
  NodeId mean;     // mean expression
  NodeId log_std;  // log standard deviation expression
  std::vector<std::size_t> shape;
  EstimatorMode mode = EstimatorMode::Pathwise;
};

// g(r, nu) = ln p(x, r) - ln q(r | nu) as a graph, together with the sample
// sites r and the variational parameter nodes nu.
struct StochasticObjective {
  Graph* graph = nullptr;
  NodeId objective;  // scalar
  NodeId logq;       // scalar ln q(r | nu); required by the score estimator
  std::vector<NodeId> params;
  std::vector<StochasticNode> stochastic;
};

struct GradientEstimate {
  std::vector<Tensor> mean;       // one tensor per parameter in params order
  std::vector<Tensor> std_error;  // empty when samples == 1 (not available)
  double value_mean = 0.0;        // MC mean of the objective over the draws
  double value_std_error = 0.0;
  std::size_t samples = 0;
};

StochasticNode add_gaussian_stochastic(Graph& g, NodeId mean, NodeId log_std,
                                       std::vector<std::size_t> shape,
                                       EstimatorMode mode);

// Scalar node for sum_j ln N(x_j | mean_j, exp(log_std_j)^2). `x_count` is
// the element count of x; `log_std_factor` is the broadcast multiplicity of
// log_std over x (x_count / count(log_std) when log_std broadcasts, 1
// otherwise).
NodeId add_diag_normal_logpdf(Graph& g, NodeId x, NodeId mean, NodeId log_std,
                              std::size_t x_count, double log_std_factor);

// Same density with the scale sigma given directly as a (positive) node.
NodeId add_diag_normal_logpdf_scale(Graph& g, NodeId x, NodeId mean,
                                    NodeId scale, std::size_t x_count);

// sum_j ln N(x_j | 0, 1)
NodeId add_std_normal_logpdf(Graph& g, NodeId x, std::size_t x_count);

// Numerically stable softplus ln(1 + e^h) composed from primitive ops.
NodeId add_softplus(Graph& g, NodeId h);

// Monte Carlo ELBO estimate over K independent draws; returns (mean,
// standard error). The standard error is NaN when K == 1.
std::pair<double, double> elbo_mc(StochasticObjective& obj, RngState& rng,
                                  std::size_t k);

// Single-draw evaluations with caller-supplied randomness (one tensor per
// stochastic node, in order). Return the objective value; `grads` receives
// the per-parameter gradient contribution of this draw.
double pathwise_eval(StochasticObjective& obj, const std::vector<Tensor>& eps,
                     std::vector<Tensor>& grads);
double score_eval(StochasticObjective& obj, const std::vector<Tensor>& draws,
                  std::vector<Tensor>& grads);

GradientEstimate pathwise_grad(StochasticObjective& obj, RngState& rng,
                               std::size_t k);
GradientEstimate score_grad(StochasticObjective& obj, RngState& rng,
                            std::size_t k);

struct AscentResult {
  std::vector<std::vector<Tensor>> nu_trace;  // params at each traced step
  std::vector<double> elbo_trace;
};

// Stochastic gradient ascent on nu with the chosen estimator. `rate(t)` is
// the step size at step t. Aborts if |ELBO estimate| exceeds 1e12.
AscentResult maximize(StochasticObjective& obj, EstimatorMode mode,
                      const std::function<double(std::size_t)>& rate,
                      std::size_t steps, std::size_t k, RngState& rng,
                      std::size_t trace_interval = 1);

}  // namespace dvi
