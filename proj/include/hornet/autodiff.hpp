#pragma once

// Minimal reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a node holding a dense float64 array. Ops
// record their parents and a backward closure; backward() orders the graph
// reachable from a scalar loss topologically and accumulates gradients into
// every node that requires them. Gradients accumulate (+=) until zero_grad().
//
// Only scalar-vs-tensor broadcasting is supported. Everything else must
// agree in shape exactly.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hornet::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Node {
  const char* op = "leaf";
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad();

  // Fresh leaf sharing no graph history.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Topologically ordered view of the graph reachable from a root.
class Graph {
 public:
  static Graph trace(const Tensor& root);
  const std::vector<Node*>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<Node*> order_;
  std::vector<std::shared_ptr<Node>> keep_alive_;
};

// Seeds d(loss)/d(loss) = 1 and propagates. loss must hold a single value.
void backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

// (m,k)x(k,n) -> (m,n); (m,k)x(k) -> (m)
Tensor matmul(const Tensor& a, const Tensor& b);
// W x + b with W (m,k), x (k), b (m)
Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_constant(const Tensor& a, double c);
Tensor concat(std::span<const Tensor> parts);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor max_with_zero(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor add_n(std::span<const Tensor> terms);
// Row `index` of a rank-2 tensor; gradient is row-sparse.
Tensor row(const Tensor& matrix, std::size_t index);
// Scalar ||a - b||^2
Tensor squared_euclidean(const Tensor& a, const Tensor& b);
// a / ||a||
Tensor l2_normalize(const Tensor& a);
// -log softmax(logits)[label], max-subtracted.
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);
// Forward 1{a >= threshold}; backward passes the incoming gradient unchanged.
Tensor straight_through_step(const Tensor& a, double threshold);

// ---- gradient checking ----------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double epsilon = 1e-6;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-3;
  // Optional hook to tamper with analytic gradients (negative controls).
  std::function<void(std::vector<NamedTensor>&)> after_backward;
};

double relative_error(double analytic, double numeric, double floor);

// `fn` must rebuild its graph from the current parameter values on every
// call and return a scalar.
GradCheckReport grad_check(const std::function<Tensor()>& fn,
                           std::vector<NamedTensor> params,
                           const GradCheckOptions& options = {});

}  // namespace hornet::ad
