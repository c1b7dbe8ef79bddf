#include "dvi/graph.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "dvi/kernels.hpp"

namespace dvi {

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? " x " : "") << shape[i];
  os << "]";
  return os.str();
}

const char* op_name(OpTag tag) {
  switch (tag) {
    case OpTag::MatMul: return "matmul";
    case OpTag::Add: return "add";
    case OpTag::Sub: return "sub";
    case OpTag::Mul: return "mul";
    case OpTag::ScalarMul: return "scalar_mul";
    case OpTag::Relu: return "relu";
    case OpTag::Exp: return "exp";
    case OpTag::Log: return "log";
    case OpTag::Square: return "square";
    case OpTag::Sum: return "sum";
    case OpTag::Mean: return "mean";
    case OpTag::Transpose: return "transpose";
    case OpTag::Affine: return "affine";
    case OpTag::Neg: return "neg";
  }
  return "?";
}

namespace {

std::size_t op_arity(OpTag tag) {
  switch (tag) {
    case OpTag::MatMul:
    case OpTag::Add:
    case OpTag::Sub:
    case OpTag::Mul:
      return 2;
    case OpTag::Affine:
      return 3;
    default:
      return 1;
  }
}

[[noreturn]] void shape_fail(OpTag tag, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string("shape mismatch in ") + op_name(tag) + ": " +
                   shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

enum class BcastMode { Eltwise, ScalarRight, ScalarLeft, RowVecRight };

BcastMode bcast_mode(OpTag tag, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return BcastMode::Eltwise;
  if (b.size() == 1) return BcastMode::ScalarRight;
  if (a.size() == 1) return BcastMode::ScalarLeft;
  if (a.rank() == 2 && b.rows() == 1 && b.cols() == a.cols())
    return BcastMode::RowVecRight;
  shape_fail(tag, a, b);
}

}  // namespace

Graph::Node& Graph::node(NodeId id) {
  if (!id.valid() || id.index >= nodes_.size())
    throw Error("invalid node id");
  return nodes_[id.index];
}

const Graph::Node& Graph::node(NodeId id) const {
  if (!id.valid() || id.index >= nodes_.size())
    throw Error("invalid node id");
  return nodes_[id.index];
}

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::add_input(std::vector<std::size_t> shape) {
  for (auto s : shape)
    if (s == 0) throw ShapeError("add_input: zero extent");
  Node n;
  n.kind = NodeKind::Input;
  n.declared_shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::add_parameter(std::vector<std::size_t> shape, Tensor init) {
  for (auto s : shape)
    if (s == 0) throw ShapeError("add_parameter: zero extent");
  if (init.shape() != shape)
    throw ShapeError("add_parameter: init shape " + shape_str(init.shape()) +
                     " does not match " + shape_str(shape));
  Node n;
  n.kind = NodeKind::Parameter;
  n.declared_shape = std::move(shape);
  n.value = std::move(init);
  n.has_value = true;
  return push(std::move(n));
}

NodeId Graph::add_constant(Tensor value) {
  Node n;
  n.kind = NodeKind::Constant;
  n.declared_shape = value.shape();
  n.value = std::move(value);
  n.has_value = true;
  return push(std::move(n));
}

NodeId Graph::add_placeholder(std::vector<std::size_t> shape) {
  Node n;
  n.kind = NodeKind::Placeholder;
  n.declared_shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::apply(OpTag tag, const std::vector<NodeId>& parents) {
  if (parents.size() != op_arity(tag))
    throw Error(std::string(op_name(tag)) + ": expected " +
                std::to_string(op_arity(tag)) + " parents, got " +
                std::to_string(parents.size()));
  for (auto p : parents) node(p);  // validates
  Node n;
  n.kind = NodeKind::Operation;
  n.op = tag;
  n.parents = parents;
  return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId x, double s) {
  NodeId id = apply(OpTag::ScalarMul, {x});
  nodes_[id.index].scalar = s;
  return id;
}

NodeId Graph::reduce(OpTag tag, NodeId x, Axis axis) {
  if (tag != OpTag::Sum && tag != OpTag::Mean)
    throw Error("reduce: tag must be sum or mean");
  NodeId id = apply(tag, {x});
  nodes_[id.index].axis = axis;
  return id;
}

void Graph::invalidate_ops() {
  for (auto& n : nodes_)
    if (n.kind == NodeKind::Operation) n.has_value = false;
}

void Graph::bind(NodeId id, Tensor value) {
  Node& n = node(id);
  if (n.kind != NodeKind::Input && n.kind != NodeKind::Placeholder)
    throw Error("bind: node is not an input or placeholder");
  n.value = std::move(value);
  n.has_value = true;
  invalidate_ops();
}

void Graph::set_parameter(NodeId id, Tensor value) {
  Node& n = node(id);
  if (n.kind != NodeKind::Parameter)
    throw Error("set_parameter: node is not a parameter");
  if (value.shape() != n.declared_shape)
    throw ShapeError("set_parameter: shape mismatch");
  n.value = std::move(value);
  invalidate_ops();
}

void Graph::check_finite(std::size_t i) const {
  const Tensor& v = nodes_[i].value;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (!std::isfinite(v[j]))
      throw Error("non-finite value at node " + std::to_string(i) + " (" +
                  (nodes_[i].kind == NodeKind::Operation
                       ? op_name(nodes_[i].op)
                       : "leaf") +
                  ")");
  }
}

void Graph::compute(std::size_t i) {
  Node& n = nodes_[i];
  if (n.kind != NodeKind::Operation) {
    if (!n.has_value)
      throw Error("unbound input at node " + std::to_string(i));
    return;
  }
  auto pv = [&](std::size_t j) -> const Tensor& {
    return nodes_[n.parents[j].index].value;
  };

  switch (n.op) {
    case OpTag::MatMul: {
      const Tensor& a = pv(0);
      const Tensor& b = pv(1);
      if (a.cols() != b.rows()) shape_fail(n.op, a, b);
      n.value = Tensor({a.rows(), b.cols()});
      kern::matmul(a.data(), b.data(), n.value.data(), a.rows(), a.cols(),
                   b.cols());
      break;
    }
    case OpTag::Add:
    case OpTag::Sub:
    case OpTag::Mul: {
      const Tensor& a = pv(0);
      const Tensor& b = pv(1);
      switch (bcast_mode(n.op, a, b)) {
        case BcastMode::Eltwise:
          n.value = Tensor(a.shape());
          if (n.op == OpTag::Add)
            kern::add(a.data(), b.data(), n.value.data(), a.size());
          else if (n.op == OpTag::Sub)
            kern::sub(a.data(), b.data(), n.value.data(), a.size());
          else
            kern::mul(a.data(), b.data(), n.value.data(), a.size());
          break;
        case BcastMode::ScalarRight: {
          n.value = Tensor(a.shape());
          const double s = b[0];
          for (std::size_t j = 0; j < a.size(); ++j)
            n.value[j] = n.op == OpTag::Add   ? a[j] + s
                         : n.op == OpTag::Sub ? a[j] - s
                                              : a[j] * s;
          break;
        }
        case BcastMode::ScalarLeft: {
          n.value = Tensor(b.shape());
          const double s = a[0];
          for (std::size_t j = 0; j < b.size(); ++j)
            n.value[j] = n.op == OpTag::Add   ? s + b[j]
                         : n.op == OpTag::Sub ? s - b[j]
                                              : s * b[j];
          break;
        }
        case BcastMode::RowVecRight:
          n.value = Tensor(a.shape());
          if (n.op == OpTag::Add)
            kern::add_rowvec(a.data(), b.data(), n.value.data(), a.rows(),
                             a.cols());
          else if (n.op == OpTag::Sub)
            kern::sub_rowvec(a.data(), b.data(), n.value.data(), a.rows(),
                             a.cols());
          else
            kern::mul_rowvec(a.data(), b.data(), n.value.data(), a.rows(),
                             a.cols());
          break;
      }
      break;
    }
    case OpTag::ScalarMul: {
      const Tensor& a = pv(0);
      n.value = Tensor(a.shape());
      kern::scale(a.data(), n.scalar, n.value.data(), a.size());
      break;
    }
    case OpTag::Relu: {
      const Tensor& a = pv(0);
      n.value = Tensor(a.shape());
      kern::relu(a.data(), n.value.data(), a.size());
      break;
    }
    case OpTag::Exp: {
      const Tensor& a = pv(0);
      n.value = Tensor(a.shape());
      kern::exp(a.data(), n.value.data(), a.size());
      break;
    }
    case OpTag::Log: {
      const Tensor& a = pv(0);
      n.value = Tensor(a.shape());
      kern::log(a.data(), n.value.data(), a.size());
      break;
    }
    case OpTag::Square: {
      const Tensor& a = pv(0);
      n.value = Tensor(a.shape());
      kern::square(a.data(), n.value.data(), a.size());
      break;
    }
    case OpTag::Neg: {
      const Tensor& a = pv(0);
      n.value = Tensor(a.shape());
      kern::neg(a.data(), n.value.data(), a.size());
      break;
    }
    case OpTag::Sum:
    case OpTag::Mean: {
      const Tensor& a = pv(0);
      if (n.axis == Axis::All) {
        double s = kern::sum(a.data(), a.size());
        if (n.op == OpTag::Mean) s /= static_cast<double>(a.size());
        n.value = Tensor::scalar(s);
      } else {
        n.value = Tensor({a.rows(), 1});
        kern::row_sum(a.data(), n.value.data(), a.rows(), a.cols());
        if (n.op == OpTag::Mean) {
          const double inv = 1.0 / static_cast<double>(a.cols());
          for (std::size_t j = 0; j < n.value.size(); ++j) n.value[j] *= inv;
        }
      }
      break;
    }
    case OpTag::Transpose: {
      const Tensor& a = pv(0);
      n.value = Tensor({a.cols(), a.rows()});
      kern::transpose(a.data(), n.value.data(), a.rows(), a.cols());
      break;
    }
    case OpTag::Affine: {
      // y = x W^T + b, x [m x p], W [q x p], b [q]
      const Tensor& x = pv(0);
      const Tensor& w = pv(1);
      const Tensor& b = pv(2);
      if (x.cols() != w.cols()) shape_fail(n.op, x, w);
      if (b.size() != w.rows()) shape_fail(n.op, w, b);
      n.value = Tensor({x.rows(), w.rows()});
      kern::matmul_nt(x.data(), w.data(), n.value.data(), x.rows(), x.cols(),
                      w.rows());
      kern::add_rowvec(n.value.data(), b.data(), n.value.data(), x.rows(),
                       w.rows());
      break;
    }
  }
  n.has_value = true;
  check_finite(i);
}

const Tensor& Graph::eval(NodeId id) {
  node(id);
  // collect ancestors
  std::vector<bool> needed(nodes_.size(), false);
  std::vector<std::size_t> stack{id.index};
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    if (needed[i]) continue;
    needed[i] = true;
    for (auto p : nodes_[i].parents)
      if (!needed[p.index]) stack.push_back(p.index);
  }
  for (std::size_t i = 0; i <= id.index; ++i) {
    if (!needed[i]) continue;
    if (nodes_[i].kind == NodeKind::Operation && nodes_[i].has_value) continue;
    compute(i);
  }
  return nodes_[id.index].value;
}

std::map<NodeId, Tensor> Graph::forward(
    const std::map<NodeId, Tensor>& bindings) {
  for (const auto& [id, t] : bindings) bind(id, t);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == NodeKind::Operation && nodes_[i].has_value) continue;
    compute(i);
  }
  std::map<NodeId, Tensor> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    out[NodeId{i}] = nodes_[i].value;
  return out;
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = node(id);
  if (!n.has_value) throw Error("value: node not computed");
  return n.value;
}

namespace {

void accumulate(Tensor& dst, bool& has, const Tensor& shape_like,
                const double* src, double factor = 1.0) {
  if (!has) {
    dst = Tensor(shape_like.shape());
    has = true;
  }
  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += factor * src[j];
}

}  // namespace

std::map<NodeId, Tensor> Graph::backward(NodeId output) {
  const Node& out = node(output);
  if (!out.has_value)
    throw Error("backward: forward has not been run for the output node");
  if (out.value.size() != 1)
    throw Error("backward: output must be scalar, got shape " +
                shape_str(out.value.shape()));

  for (auto& n : nodes_) {
    n.has_adjoint = false;
    n.adjoint = Tensor();
  }
  Node& o = nodes_[output.index];
  o.adjoint = Tensor(o.value.shape());
  o.adjoint[0] = 1.0;
  o.has_adjoint = true;

  for (std::size_t ii = output.index + 1; ii-- > 0;) {
    Node& n = nodes_[ii];
    if (!n.has_adjoint || n.kind != NodeKind::Operation) continue;
    const Tensor& g = n.adjoint;
    auto parent = [&](std::size_t j) -> Node& {
      return nodes_[n.parents[j].index];
    };
    auto acc = [&](std::size_t j, const Tensor& contrib) {
      Node& p = parent(j);
      accumulate(p.adjoint, p.has_adjoint, p.value, contrib.data());
    };

    switch (n.op) {
      case OpTag::MatMul: {
        const Tensor& a = parent(0).value;
        const Tensor& b = parent(1).value;
        Tensor da({a.rows(), a.cols()});
        kern::matmul_nt(g.data(), b.data(), da.data(), g.rows(), g.cols(),
                        b.rows());
        // dB = A^T G
        Tensor at({a.cols(), a.rows()});
        kern::transpose(a.data(), at.data(), a.rows(), a.cols());
        Tensor db({b.rows(), b.cols()});
        kern::matmul(at.data(), g.data(), db.data(), a.cols(), a.rows(),
                     g.cols());
        Node& pa = parent(0);
        accumulate(pa.adjoint, pa.has_adjoint, pa.value, da.data());
        Node& pb = parent(1);
        accumulate(pb.adjoint, pb.has_adjoint, pb.value, db.data());
        break;
      }
      case OpTag::Add:
      case OpTag::Sub:
      case OpTag::Mul: {
        const Tensor& a = parent(0).value;
        const Tensor& b = parent(1).value;
        const double sgn = n.op == OpTag::Sub ? -1.0 : 1.0;
        const BcastMode mode = bcast_mode(n.op, a, b);
        // left operand
        {
          Tensor da(a.shape());
          if (mode == BcastMode::ScalarLeft) {
            double s = 0.0;
            if (n.op == OpTag::Mul)
              for (std::size_t j = 0; j < g.size(); ++j) s += g[j] * b[j];
            else
              s = kern::sum(g.data(), g.size());
            da[0] = s;
          } else if (n.op == OpTag::Mul) {
            if (mode == BcastMode::Eltwise)
              kern::mul(g.data(), b.data(), da.data(), g.size());
            else if (mode == BcastMode::ScalarRight)
              kern::scale(g.data(), b[0], da.data(), g.size());
            else
              kern::mul_rowvec(g.data(), b.data(), da.data(), g.rows(),
                               g.cols());
          } else {
            std::memcpy(da.data(), g.data(), g.size() * sizeof(double));
          }
          acc(0, da);
        }
        // right operand
        {
          Tensor db(b.shape());
          if (mode == BcastMode::ScalarRight) {
            double s = 0.0;
            if (n.op == OpTag::Mul)
              for (std::size_t j = 0; j < g.size(); ++j) s += g[j] * a[j];
            else
              s = kern::sum(g.data(), g.size());
            db[0] = sgn * s;
          } else if (mode == BcastMode::RowVecRight) {
            for (std::size_t j = 0; j < db.size(); ++j) db[j] = 0.0;
            for (std::size_t r = 0; r < g.rows(); ++r)
              for (std::size_t c = 0; c < g.cols(); ++c) {
                const double gv = g.at(r, c);
                db[c] += sgn * (n.op == OpTag::Mul
                                    ? gv * a.at(r, c)
                                    : gv);
              }
          } else if (n.op == OpTag::Mul) {
            kern::mul(g.data(), a.data(), db.data(), g.size());
          } else {
            kern::scale(g.data(), sgn, db.data(), g.size());
          }
          acc(1, db);
        }
        break;
      }
      case OpTag::ScalarMul: {
        Tensor da(g.shape());
        kern::scale(g.data(), n.scalar, da.data(), g.size());
        acc(0, da);
        break;
      }
      case OpTag::Relu: {
        const Tensor& x = parent(0).value;
        Tensor da(x.shape());
        kern::relu_backward(x.data(), g.data(), da.data(), x.size());
        acc(0, da);
        break;
      }
      case OpTag::Exp: {
        Tensor da(g.shape());
        kern::mul(g.data(), n.value.data(), da.data(), g.size());
        acc(0, da);
        break;
      }
      case OpTag::Log: {
        const Tensor& x = parent(0).value;
        Tensor da(x.shape());
        for (std::size_t j = 0; j < x.size(); ++j) da[j] = g[j] / x[j];
        acc(0, da);
        break;
      }
      case OpTag::Square: {
        const Tensor& x = parent(0).value;
        Tensor da(x.shape());
        for (std::size_t j = 0; j < x.size(); ++j) da[j] = 2.0 * g[j] * x[j];
        acc(0, da);
        break;
      }
      case OpTag::Neg: {
        Tensor da(g.shape());
        kern::neg(g.data(), da.data(), g.size());
        acc(0, da);
        break;
      }
      case OpTag::Sum:
      case OpTag::Mean: {
        const Tensor& x = parent(0).value;
        Tensor da(x.shape());
        if (n.axis == Axis::All) {
          double gv = g[0];
          if (n.op == OpTag::Mean) gv /= static_cast<double>(x.size());
          for (std::size_t j = 0; j < x.size(); ++j) da[j] = gv;
        } else {
          const double inv =
              n.op == OpTag::Mean ? 1.0 / static_cast<double>(x.cols()) : 1.0;
          for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
              da.data()[r * x.cols() + c] = g[r] * inv;
        }
        acc(0, da);
        break;
      }
      case OpTag::Transpose: {
        const Tensor& x = parent(0).value;
        Tensor da({x.rows(), x.cols()});
        kern::transpose(g.data(), da.data(), g.rows(), g.cols());
        acc(0, da);
        break;
      }
      case OpTag::Affine: {
        const Tensor& x = parent(0).value;
        const Tensor& w = parent(1).value;
        // dX = G W
        Tensor dx({x.rows(), x.cols()});
        kern::matmul(g.data(), w.data(), dx.data(), g.rows(), g.cols(),
                     w.cols());
        // dW = G^T X
        Tensor gt({g.cols(), g.rows()});
        kern::transpose(g.data(), gt.data(), g.rows(), g.cols());
        Tensor dw({w.rows(), w.cols()});
        kern::matmul(gt.data(), x.data(), dw.data(), g.cols(), g.rows(),
                     x.cols());
        // db = column sums of G
        const Tensor& b = parent(2).value;
        Tensor db(b.shape());
        for (std::size_t c = 0; c < g.cols(); ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < g.rows(); ++r) s += g.at(r, c);
          db[c] = s;
        }
        Node& px = parent(0);
        accumulate(px.adjoint, px.has_adjoint, px.value, dx.data());
        Node& pw = parent(1);
        accumulate(pw.adjoint, pw.has_adjoint, pw.value, dw.data());
        Node& pb = parent(2);
        accumulate(pb.adjoint, pb.has_adjoint, pb.value, db.data());
        break;
      }
    }
  }

  std::map<NodeId, Tensor> grads;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != NodeKind::Parameter) continue;
    if (nodes_[i].has_adjoint)
      grads[NodeId{i}] = nodes_[i].adjoint;
    else
      grads[NodeId{i}] = Tensor(nodes_[i].value.shape());
  }
  return grads;
}

const Tensor& Graph::adjoint(NodeId id) const {
  const Node& n = node(id);
  if (!n.has_adjoint) throw Error("adjoint: not computed for this node");
  return n.adjoint;
}

std::vector<NodeId> Graph::parameters() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == NodeKind::Parameter) out.push_back(NodeId{i});
  return out;
}

GradCheckReport Graph::grad_check(NodeId output, NodeId target, double step,
                                  double tol) {
  if (node(target).kind != NodeKind::Parameter)
    throw Error("grad_check: target must be a parameter node");

  eval(output);
  backward(output);
  Tensor analytic = node(target).has_adjoint
                        ? node(target).adjoint
                        : Tensor(node(target).value.shape());

  auto relu_masks = [&]() {
    std::vector<bool> masks;
    for (const auto& n : nodes_) {
      if (n.kind != NodeKind::Operation || n.op != OpTag::Relu || !n.has_value)
        continue;
      const Tensor& x = nodes_[n.parents[0].index].value;
      for (std::size_t j = 0; j < x.size(); ++j) masks.push_back(x[j] > 0.0);
    }
    return masks;
  };

  GradCheckReport report;
  const Tensor base = node(target).value;
  for (std::size_t j = 0; j < base.size(); ++j) {
    Tensor plus = base;
    plus[j] += step;
    set_parameter(target, plus);
    const double fp = eval(output).value();
    auto mp = relu_masks();

    Tensor minus = base;
    minus[j] -= step;
    set_parameter(target, minus);
    const double fm = eval(output).value();
    auto mm = relu_masks();

    GradCheckEntry e;
    e.flat_index = j;
    e.analytic = analytic[j];
    e.numeric = (fp - fm) / (2.0 * step);
    e.skipped = (mp != mm);  // crossed a relu kink
    if (e.skipped) {
      e.rel_err = 0.0;
      ++report.skipped;
    } else {
      const double scale =
          std::max({std::fabs(e.analytic), std::fabs(e.numeric), 1e-2});
      e.rel_err = std::fabs(e.analytic - e.numeric) / scale;
      ++report.checked;
      report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    }
    report.entries.push_back(e);
  }
  set_parameter(target, base);
  eval(output);
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace dvi
