#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dvi/tensor.hpp"

namespace dvi {

enum class NodeKind { Input, Parameter, Constant, Operation, Placeholder };

enum class OpTag {
  MatMul,
  Add,
  Sub,
  Mul,
  ScalarMul,
  Relu,
  Exp,
  Log,
  Square,
  Sum,
  Mean,
  Transpose,
  Affine,
  Neg
};

const char* op_name(OpTag tag);

struct NodeId {
  std::size_t index = SIZE_MAX;
  bool operator==(const NodeId&) const = default;
  auto operator<=>(const NodeId&) const = default;
  bool valid() const { return index != SIZE_MAX; }
};

// Reduction axis for Sum/Mean: All collapses to a scalar, Rows produces one
// value per row ([R x C] -> [R x 1]).
enum class Axis { All, Rows };

struct GradCheckEntry {
  std::size_t flat_index;
  double analytic;
  double numeric;
  double rel_err;
  bool skipped;  // finite-difference step straddled a relu kink
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = true;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::vector<GradCheckEntry> entries;
};

// Directed acyclic computational graph over tensors with reverse-mode
// automatic differentiation. Nodes are appended in topological order;
// parents always precede children.
//
// A Graph instance is single-threaded during forward/backward. Batch
// parallelism happens inside the tensor kernels, not here.
class Graph {
 public:
  NodeId add_input(std::vector<std::size_t> shape);
  NodeId add_parameter(std::vector<std::size_t> shape, Tensor init);
  NodeId add_constant(Tensor value);
  // stochastic placeholder: bound to sampled values before forward, never
  // receives gradient
  NodeId add_placeholder(std::vector<std::size_t> shape);

  NodeId apply(OpTag tag, const std::vector<NodeId>& parents);
  NodeId scalar_mul(NodeId x, double s);
  NodeId reduce(OpTag tag, NodeId x, Axis axis);  // Sum or Mean

  std::size_t node_count() const { return nodes_.size(); }
  NodeKind kind(NodeId id) const { return node(id).kind; }

  // Bind a value to an input or placeholder node.
  void bind(NodeId id, Tensor value);
  void set_parameter(NodeId id, Tensor value);

  // Evaluate every node reachable as an ancestor of `id` (parents first) and
  // return its value. Deterministic for fixed bindings and parameters.
  const Tensor& eval(NodeId id);

  // Evaluate the whole graph after binding the given inputs; returns values
  // of all nodes, indexed by node.
  std::map<NodeId, Tensor> forward(const std::map<NodeId, Tensor>& bindings);

  const Tensor& value(NodeId id) const;

  // Reverse-mode sweep from a scalar output. Requires eval/forward first.
  // Returns the adjoint of every parameter node (zero if unused).
  std::map<NodeId, Tensor> backward(NodeId output);

  const Tensor& adjoint(NodeId id) const;

  std::vector<NodeId> parameters() const;

  GradCheckReport grad_check(NodeId output, NodeId node, double step,
                             double tol);

 private:
  struct Node {
    NodeKind kind;
    OpTag op = OpTag::Add;
    Axis axis = Axis::All;
    double scalar = 0.0;  // ScalarMul factor
    std::vector<NodeId> parents;
    std::vector<std::size_t> declared_shape;
    Tensor value;
    Tensor adjoint;
    bool has_value = false;
    bool has_adjoint = false;
  };

  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  NodeId push(Node n);
  void compute(std::size_t i);
  void invalidate_ops();
  void check_finite(std::size_t i) const;

  std::vector<Node> nodes_;
};

}  // namespace dvi
