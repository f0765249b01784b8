#include "hornet/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace hornet::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

Tensor make(const char* op, Shape shape, std::vector<double> value,
            std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  node->requires_grad = rg;
  if (rg) {
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class Broadcast { none, scalar_left, scalar_right };

Broadcast check_elementwise(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.size() == 1) return Broadcast::scalar_right;
  if (a.size() == 1) return Broadcast::scalar_left;
  shape_fail(op, a.shape(), b.shape());
}

template <typename F>
Tensor unary(const char* op, const Tensor& a, F&& forward,
             std::function<void(Node&)> bw) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return make(op, a.shape(), std::move(out), {a.node_ptr()}, std::move(bw));
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape.empty()) throw ShapeError("tensor: empty shape");
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape));
  if (shape_size(shape) != values.size())
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->ensure_grad();
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_size(shape);
  return requires_grad ? parameter(std::move(shape), std::vector<double>(n, 0.0))
                       : constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return requires_grad ? parameter({1}, {value}) : constant({1}, {value});
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return requires_grad ? parameter(std::move(shape), std::move(values))
                       : constant(std::move(shape), std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

// ---- graph ----------------------------------------------------------------

Graph Graph::trace(const Tensor& root) {
  Graph g;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS: parents land before children.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  g.keep_alive_.push_back(root.node_ptr());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    g.order_.push_back(node);
    stack.pop_back();
  }
  return g;
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  const Graph g = Graph::trace(loss);
  for (Node* n : g.order())
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  Node* root = loss.node();
  root->ensure_grad();
  root->grad[0] += 1.0;
  const auto& order = g.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.shape()[1] != b.shape()[0])
    shape_fail("matmul", a.shape(), b.shape());
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t n = b.rank() == 2 ? b.shape()[1] : 1;
  std::vector<double> out(m * n);
  ConstMatMap A(a.data().data(), m, k);
  ConstMatMap B(b.data().data(), k, n);
  MatMap(out.data(), m, n).noalias() = A * B;
  Shape shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
  return make("matmul", std::move(shape), std::move(out), {a.node_ptr(), b.node_ptr()},
              [m, k, n](Node& self) {
                Node& pa = *self.parents[0];
                Node& pb = *self.parents[1];
                ConstMatMap G(self.grad.data(), m, n);
                if (pa.requires_grad) {
                  pa.ensure_grad();
                  MatMap(pa.grad.data(), m, k).noalias() +=
                      G * ConstMatMap(pb.value.data(), k, n).transpose();
                }
                if (pb.requires_grad) {
                  pb.ensure_grad();
                  MatMap(pb.grad.data(), k, n).noalias() +=
                      ConstMatMap(pa.value.data(), m, k).transpose() * G;
                }
              });
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  if (w.rank() != 2 || x.rank() != 1 || w.shape()[1] != x.shape()[0])
    shape_fail("affine", w.shape(), x.shape());
  if (b.rank() != 1 || b.shape()[0] != w.shape()[0]) shape_fail("affine", w.shape(), b.shape());
  const std::size_t m = w.shape()[0], k = w.shape()[1];
  std::vector<double> out(b.data().begin(), b.data().end());
  VecMap(out.data(), m).noalias() +=
      ConstMatMap(w.data().data(), m, k) * ConstVecMap(x.data().data(), k);
  return make("affine", {m}, std::move(out), {w.node_ptr(), x.node_ptr(), b.node_ptr()},
              [m, k](Node& self) {
                Node& pw = *self.parents[0];
                Node& px = *self.parents[1];
                Node& pb = *self.parents[2];
                ConstVecMap g(self.grad.data(), m);
                if (pw.requires_grad) {
                  pw.ensure_grad();
                  MatMap(pw.grad.data(), m, k).noalias() +=
                      g * ConstVecMap(px.value.data(), k).transpose();
                }
                if (px.requires_grad) {
                  px.ensure_grad();
                  VecMap(px.grad.data(), k).noalias() +=
                      ConstMatMap(pw.value.data(), m, k).transpose() * g;
                }
                if (pb.requires_grad) {
                  pb.ensure_grad();
                  VecMap(pb.grad.data(), m) += g;
                }
              });
}

namespace {

// Shared implementation for add / sub: out = a + sign * b.
Tensor add_signed(const char* op, const Tensor& a, const Tensor& b, double sign) {
  const Broadcast bc = check_elementwise(op, a, b);
  const Tensor& big = bc == Broadcast::scalar_left ? b : a;
  std::vector<double> out(big.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = bc == Broadcast::scalar_left ? av[0] : av[i];
    const double y = bc == Broadcast::scalar_right ? bv[0] : bv[i];
    out[i] = x + sign * y;
  }
  return make(op, big.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
              [bc, sign](Node& self) {
                Node& pa = *self.parents[0];
                Node& pb = *self.parents[1];
                const auto& g = self.grad;
                if (pa.requires_grad) {
                  pa.ensure_grad();
                  if (bc == Broadcast::scalar_left)
                    for (double gi : g) pa.grad[0] += gi;
                  else
                    for (std::size_t i = 0; i < g.size(); ++i) pa.grad[i] += g[i];
                }
                if (pb.requires_grad) {
                  pb.ensure_grad();
                  if (bc == Broadcast::scalar_right)
                    for (double gi : g) pb.grad[0] += sign * gi;
                  else
                    for (std::size_t i = 0; i < g.size(); ++i) pb.grad[i] += sign * g[i];
                }
              });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_signed("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_signed("sub", a, b, -1.0); }

Tensor hadamard(const Tensor& a, const Tensor& b) {
  const Broadcast bc = check_elementwise("hadamard", a, b);
  const Tensor& big = bc == Broadcast::scalar_left ? b : a;
  std::vector<double> out(big.size());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = bc == Broadcast::scalar_left ? av[0] : av[i];
    const double y = bc == Broadcast::scalar_right ? bv[0] : bv[i];
    out[i] = x * y;
  }
  return make("hadamard", big.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
              [bc](Node& self) {
                Node& pa = *self.parents[0];
                Node& pb = *self.parents[1];
                const auto& g = self.grad;
                for (std::size_t i = 0; i < g.size(); ++i) {
                  const std::size_t ia = bc == Broadcast::scalar_left ? 0 : i;
                  const std::size_t ib = bc == Broadcast::scalar_right ? 0 : i;
                  if (pa.requires_grad) {
                    pa.ensure_grad();
                    pa.grad[ia] += g[i] * pb.value[ib];
                  }
                  if (pb.requires_grad) {
                    pb.ensure_grad();
                    pb.grad[ib] += g[i] * pa.value[ia];
                  }
                }
              });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; }, [factor](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += factor * self.grad[i];
  });
}

Tensor add_constant(const Tensor& a, double c) {
  return unary("add_constant", a, [c](double x) { return x + c; }, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<double> out;
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rank() != 1) shape_fail("concat", parts.front().shape(), p.shape());
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    parents.push_back(p.node_ptr());
  }
  const std::size_t n = out.size();
  return make("concat", {n}, std::move(out), std::move(parents),
              [offsets = std::move(offsets)](Node& self) {
                for (std::size_t j = 0; j < self.parents.size(); ++j) {
                  Node& p = *self.parents[j];
                  if (!p.requires_grad) continue;
                  p.ensure_grad();
                  for (std::size_t i = 0; i < p.value.size(); ++i)
                    p.grad[i] += self.grad[offsets[j] + i];
                }
              });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(parts);
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      p.grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double t = self.value[i];
      p.grad[i] += self.grad[i] * (1.0 - t * t);
    }
  });
}

Tensor log(const Tensor& a) {
  for (double x : a.data())
    if (!(x > 0.0)) throw DomainError("log: non-positive operand " + std::to_string(x));
  return unary("log", a, [](double x) { return std::log(x); }, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] / p.value[i];
  });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * self.value[i];
  });
}

Tensor max_with_zero(const Tensor& a) {
  // Subgradient at 0 is taken as 0.
  return unary("max_with_zero", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make("sum", {1}, {s}, {a.node_ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (double& g : p.grad) g += self.grad[0];
  });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw ShapeError("add_n: no operands");
  const Shape& shape = terms.front().shape();
  std::vector<double> out(terms.front().size(), 0.0);
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& t : terms) {
    if (t.shape() != shape) shape_fail("add_n", shape, t.shape());
    const auto v = t.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    parents.push_back(t.node_ptr());
  }
  return make("add_n", shape, std::move(out), std::move(parents), [](Node& self) {
    for (auto& pp : self.parents) {
      if (!pp->requires_grad) continue;
      pp->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pp->grad[i] += self.grad[i];
    }
  });
}

Tensor row(const Tensor& matrix, std::size_t index) {
  if (matrix.rank() != 2) throw ShapeError("row: expected rank-2 tensor, got " + shape_str(matrix.shape()));
  const std::size_t rows = matrix.shape()[0], cols = matrix.shape()[1];
  if (index >= rows)
    throw std::out_of_range("row: index " + std::to_string(index) + " out of range for " +
                            shape_str(matrix.shape()));
  const auto v = matrix.data();
  std::vector<double> out(v.begin() + index * cols, v.begin() + (index + 1) * cols);
  return make("row", {cols}, std::move(out), {matrix.node_ptr()}, [index, cols](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t j = 0; j < cols; ++j) p.grad[index * cols + j] += self.grad[j];
  });
}

Tensor squared_euclidean(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("squared_euclidean", a.shape(), b.shape());
  const auto av = a.data(), bv = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return make("squared_euclidean", {1}, {s}, {a.node_ptr(), b.node_ptr()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double g = self.grad[0];
    for (std::size_t i = 0; i < pa.value.size(); ++i) {
      const double d = 2.0 * g * (pa.value[i] - pb.value[i]);
      if (pa.requires_grad) {
        pa.ensure_grad();
        pa.grad[i] += d;
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        pb.grad[i] -= d;
      }
    }
  });
}

Tensor l2_normalize(const Tensor& a) {
  double sq = 0.0;
  for (double x : a.data()) sq += x * x;
  if (!(sq > 0.0)) throw DomainError("l2_normalize: zero vector");
  const double norm = std::sqrt(sq);
  return unary("l2_normalize", a, [norm](double x) { return x / norm; }, [norm](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.value[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += (self.grad[i] - self.value[i] * dot) / norm;
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1)
    throw ShapeError("softmax_cross_entropy: logits must be rank-1, got " + shape_str(logits.shape()));
  const auto z = logits.data();
  if (label >= z.size())
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(z.size()) + " classes");
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> prob(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    prob[i] = std::exp(z[i] - m);
    total += prob[i];
  }
  for (double& p : prob) p /= total;
  const double loss = m + std::log(total) - z[label];
  return make("softmax_cross_entropy", {1}, {loss}, {logits.node_ptr()},
              [label, prob = std::move(prob)](Node& self) {
                Node& p = *self.parents[0];
                p.ensure_grad();
                const double g = self.grad[0];
                for (std::size_t i = 0; i < prob.size(); ++i)
                  p.grad[i] += g * (prob[i] - (i == label ? 1.0 : 0.0));
              });
}

Tensor straight_through_step(const Tensor& a, double threshold) {
  return unary("straight_through_step", a,
               [threshold](double x) { return x >= threshold ? 1.0 : 0.0; }, [](Node& self) {
                 Node& p = *self.parents[0];
                 p.ensure_grad();
                 for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
               });
}

// ---- gradient checking ----------------------------------------------------

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& fn, std::vector<NamedTensor> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.tensor.zero_grad();
  backward(fn());
  if (options.after_backward) options.after_backward(params);

  GradCheckReport report;
  for (auto& p : params) {
    GradCheckEntry entry{p.name};
    std::vector<double> analytic(p.tensor.size(), 0.0);
    const auto g = p.tensor.grad();
    std::copy(g.begin(), g.end(), analytic.begin());
    auto values = p.tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.epsilon;
      const double up = fn().item();
      values[i] = saved - options.epsilon;
      const double down = fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double err = relative_error(analytic[i], numeric, options.denominator_floor);
      if (!(err <= entry.max_rel_error)) {
        entry.max_rel_error = err;
        entry.worst_index = i;
      }
    }
    entry.pass = entry.max_rel_error < options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace hornet::ad
