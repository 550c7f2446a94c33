#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace dpf {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

// Handle into the active tape.
struct Tensor {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over a dynamically recorded graph. Values are 64-bit
// floats, row-major. Recording order is topological order; backward walks it
// in strict reverse and accumulates gradients additively across fan-out.
class Tape {
 public:
  static constexpr double kSqrtEpsilon = 1e-12;

  Tensor parameter(Shape shape, std::vector<double> values);
  Tensor constant(Shape shape, std::vector<double> values);
  Tensor scalar_constant(double v) { return constant({}, {v}); }

  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);
  Tensor smul(Tensor a, double s);
  Tensor matmul(Tensor a, Tensor b);
  Tensor bias_add(Tensor a, Tensor bias);
  Tensor sine(Tensor a);
  Tensor sum(Tensor a);
  Tensor mean(Tensor a);
  Tensor abs(Tensor a);
  Tensor square(Tensor a);
  // sqrt(x + 1e-12): the floor keeps gradients finite at zero.
  Tensor sqrt_eps(Tensor a);
  Tensor gather_rows(Tensor a, std::vector<std::uint32_t> rows);
  // Per-row squared Euclidean distance between two [n, m] tensors -> [n].
  Tensor squared_row_distance(Tensor a, Tensor b);
  // Per-row dot product between two [n, m] tensors -> [n].
  Tensor dot_rows(Tensor a, Tensor b);

  // Seeds the scalar output with gradient 1 and propagates in reverse
  // recording order. Output must have exactly one element.
  void backward(Tensor output);

  const Shape& shape(Tensor t) const { return node(t).shape; }
  const std::vector<double>& value(Tensor t) const { return node(t).value; }
  double scalar_value(Tensor t) const;
  // Gradient of the last backward() with respect to t (must require grad).
  const std::vector<double>& grad(Tensor t) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Smul,
    Matmul,
    BiasAdd,
    Sine,
    Sum,
    Mean,
    Abs,
    Square,
    SqrtEps,
    GatherRows,
    SqDistRows,
    DotRows,
  };

  struct Node {
    Op op = Op::Leaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::uint32_t> rows;  // GatherRows only
    double aux = 0.0;
    bool requires_grad = false;
  };

  Node& node(Tensor t) {
    require(t.valid() && static_cast<std::size_t>(t.id) < nodes_.size(),
            ErrorCode::InvalidArgument, "invalid tensor handle");
    return nodes_[t.id];
  }
  const Node& node(Tensor t) const {
    require(t.valid() && static_cast<std::size_t>(t.id) < nodes_.size(),
            ErrorCode::InvalidArgument, "invalid tensor handle");
    return nodes_[t.id];
  }

  Tensor push(Node&& n);
  Tensor elementwise(Op op, Tensor a, Tensor b);
  Tensor unary(Op op, Tensor a);
  Tensor rowwise(Op op, Tensor a, Tensor b);
  std::vector<double>& grad_buffer(std::int32_t id);
  void backward_node(std::int32_t id);

  std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - central_difference| / max(1, |cd|) for a
// scalar-valued builder evaluated at the given parameter values. The builder
// receives a fresh tape plus parameter leaves and returns the scalar output.
double grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& build,
    const std::vector<Shape>& shapes, const std::vector<std::vector<double>>& values, double h);

}  // namespace dpf
