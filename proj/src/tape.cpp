#include "tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace dpf {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace

Tensor Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Tensor{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor Tape::parameter(Shape shape, std::vector<double> values) {
  require(values.size() == numel(shape), ErrorCode::ShapeMismatch,
          "parameter data does not match shape " + shape_str(shape));
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  n.requires_grad = true;
  return push(std::move(n));
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
  require(values.size() == numel(shape), ErrorCode::ShapeMismatch,
          "constant data does not match shape " + shape_str(shape));
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  return push(std::move(n));
}

Tensor Tape::elementwise(Op op, Tensor a, Tensor b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require(na.shape == nb.shape, ErrorCode::ShapeMismatch,
          "elementwise operands differ: " + shape_str(na.shape) + " vs " + shape_str(nb.shape));
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.shape = na.shape;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value.resize(na.value.size());
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    switch (op) {
      case Op::Add: n.value[i] = na.value[i] + nb.value[i]; break;
      case Op::Sub: n.value[i] = na.value[i] - nb.value[i]; break;
      case Op::Mul: n.value[i] = na.value[i] * nb.value[i]; break;
      default: fail(ErrorCode::InvalidArgument, "bad elementwise op");
    }
  }
  return push(std::move(n));
}

Tensor Tape::add(Tensor a, Tensor b) { return elementwise(Op::Add, a, b); }
Tensor Tape::sub(Tensor a, Tensor b) { return elementwise(Op::Sub, a, b); }
Tensor Tape::mul(Tensor a, Tensor b) { return elementwise(Op::Mul, a, b); }

Tensor Tape::smul(Tensor a, double s) {
  const Node& na = node(a);
  Node n;
  n.op = Op::Smul;
  n.a = a.id;
  n.aux = s;
  n.shape = na.shape;
  n.requires_grad = na.requires_grad;
  n.value.resize(na.value.size());
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] * s;
  return push(std::move(n));
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require(na.shape.size() == 2 && nb.shape.size() == 2, ErrorCode::ShapeMismatch,
          "matmul needs rank-2 operands");
  require(na.shape[1] == nb.shape[0], ErrorCode::ShapeMismatch,
          "matmul inner dimensions differ: " + shape_str(na.shape) + " vs " + shape_str(nb.shape));
  const std::size_t rows = na.shape[0];
  const std::size_t inner = na.shape[1];
  const std::size_t cols = nb.shape[1];
  Node n;
  n.op = Op::Matmul;
  n.a = a.id;
  n.b = b.id;
  n.shape = {rows, cols};
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value.resize(rows * cols);
  ConstMatMap ma(na.value.data(), rows, inner);
  ConstMatMap mb(nb.value.data(), inner, cols);
  MatMap mc(n.value.data(), rows, cols);
  mc.noalias() = ma * mb;
  return push(std::move(n));
}

Tensor Tape::bias_add(Tensor a, Tensor bias) {
  const Node& na = node(a);
  const Node& nb = node(bias);
  require(na.shape.size() == 2 && nb.shape.size() == 1, ErrorCode::ShapeMismatch,
          "bias_add expects [n,m] plus [m]");
  require(na.shape[1] == nb.shape[0], ErrorCode::ShapeMismatch,
          "bias length " + std::to_string(nb.shape[0]) + " does not match columns " +
              std::to_string(na.shape[1]));
  const std::size_t rows = na.shape[0];
  const std::size_t cols = na.shape[1];
  Node n;
  n.op = Op::BiasAdd;
  n.a = a.id;
  n.b = bias.id;
  n.shape = na.shape;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value.resize(na.value.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      n.value[r * cols + c] = na.value[r * cols + c] + nb.value[c];
    }
  }
  return push(std::move(n));
}

Tensor Tape::unary(Op op, Tensor a) {
  const Node& na = node(a);
  Node n;
  n.op = op;
  n.a = a.id;
  n.shape = na.shape;
  n.requires_grad = na.requires_grad;
  n.value.resize(na.value.size());
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    switch (op) {
      case Op::Sine: n.value[i] = std::sin(na.value[i]); break;
      case Op::Abs: n.value[i] = std::abs(na.value[i]); break;
      case Op::Square: n.value[i] = na.value[i] * na.value[i]; break;
      case Op::SqrtEps: n.value[i] = std::sqrt(na.value[i] + kSqrtEpsilon); break;
      default: fail(ErrorCode::InvalidArgument, "bad unary op");
    }
  }
  return push(std::move(n));
}

Tensor Tape::sine(Tensor a) { return unary(Op::Sine, a); }
Tensor Tape::abs(Tensor a) { return unary(Op::Abs, a); }
Tensor Tape::square(Tensor a) { return unary(Op::Square, a); }
Tensor Tape::sqrt_eps(Tensor a) { return unary(Op::SqrtEps, a); }

Tensor Tape::sum(Tensor a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.shape = {};
  n.requires_grad = na.requires_grad;
  double acc = 0.0;
  for (double v : na.value) acc += v;
  n.value = {acc};
  return push(std::move(n));
}

Tensor Tape::mean(Tensor a) {
  const Node& na = node(a);
  require(!na.value.empty(), ErrorCode::InvalidArgument, "mean of an empty tensor");
  Node n;
  n.op = Op::Mean;
  n.a = a.id;
  n.shape = {};
  n.requires_grad = na.requires_grad;
  double acc = 0.0;
  for (double v : na.value) acc += v;
  n.value = {acc / static_cast<double>(na.value.size())};
  return push(std::move(n));
}

Tensor Tape::gather_rows(Tensor a, std::vector<std::uint32_t> rows) {
  const Node& na = node(a);
  require(na.shape.size() == 2, ErrorCode::ShapeMismatch, "gather_rows needs a rank-2 tensor");
  const std::size_t n_rows = na.shape[0];
  const std::size_t cols = na.shape[1];
  for (std::uint32_t r : rows) {
    require(r < n_rows, ErrorCode::IndexOutOfRange,
            "gather index " + std::to_string(r) + " out of range " + std::to_string(n_rows));
  }
  Node n;
  n.op = Op::GatherRows;
  n.a = a.id;
  n.shape = {rows.size(), cols};
  n.requires_grad = na.requires_grad;
  n.value.resize(rows.size() * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = na.value.data() + static_cast<std::size_t>(rows[i]) * cols;
    std::copy(src, src + cols, n.value.data() + i * cols);
  }
  n.rows = std::move(rows);
  return push(std::move(n));
}

Tensor Tape::rowwise(Op op, Tensor a, Tensor b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  require(na.shape.size() == 2 && na.shape == nb.shape, ErrorCode::ShapeMismatch,
          "row-wise operands must be rank-2 with equal shapes");
  const std::size_t rows = na.shape[0];
  const std::size_t cols = na.shape[1];
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.shape = {rows};
  n.requires_grad = na.requires_grad || nb.requires_grad;
  n.value.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* pa = na.value.data() + r * cols;
    const double* pb = nb.value.data() + r * cols;
    if (op == Op::SqDistRows) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = pa[c] - pb[c];
        acc += d * d;
      }
    } else {
      for (std::size_t c = 0; c < cols; ++c) acc += pa[c] * pb[c];
    }
    n.value[r] = acc;
  }
  return push(std::move(n));
}

Tensor Tape::squared_row_distance(Tensor a, Tensor b) { return rowwise(Op::SqDistRows, a, b); }
Tensor Tape::dot_rows(Tensor a, Tensor b) { return rowwise(Op::DotRows, a, b); }

double Tape::scalar_value(Tensor t) const {
  const Node& n = node(t);
  require(n.value.size() == 1, ErrorCode::NonScalarOutput, "tensor is not a scalar");
  return n.value[0];
}

const std::vector<double>& Tape::grad(Tensor t) const {
  const Node& n = node(t);
  require(n.requires_grad, ErrorCode::InvalidArgument, "tensor does not require gradients");
  require(!n.grad.empty(), ErrorCode::InvalidArgument, "no gradient recorded; run backward first");
  return n.grad;
}

std::vector<double>& Tape::grad_buffer(std::int32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Tensor output) {
  Node& out = node(output);
  require(out.value.size() == 1, ErrorCode::NonScalarOutput,
          "backward requires a scalar output, got shape " + shape_str(out.shape));
  for (Node& n : nodes_) n.grad.clear();
  if (!out.requires_grad) return;
  grad_buffer(output.id)[0] = 1.0;
  for (std::int32_t id = output.id; id >= 0; --id) {
    if (!nodes_[id].grad.empty() && nodes_[id].requires_grad) backward_node(id);
  }
}

void Tape::backward_node(std::int32_t id) {
  Node& n = nodes_[id];
  const std::vector<double>& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::Add: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad) {
        auto& gb = grad_buffer(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
      return;
    }
    case Op::Sub: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad) {
        auto& gb = grad_buffer(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      return;
    }
    case Op::Mul: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value[i];
      }
      if (b.requires_grad) {
        auto& gb = grad_buffer(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value[i];
      }
      return;
    }
    case Op::Smul: {
      if (nodes_[n.a].requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux;
      }
      return;
    }
    case Op::Matmul: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      const std::size_t rows = a.shape[0];
      const std::size_t inner = a.shape[1];
      const std::size_t cols = b.shape[1];
      ConstMatMap mg(g.data(), rows, cols);
      if (a.requires_grad) {
        ConstMatMap mb(b.value.data(), inner, cols);
        MatMap mga(grad_buffer(n.a).data(), rows, inner);
        mga.noalias() += mg * mb.transpose();
      }
      if (b.requires_grad) {
        ConstMatMap ma(a.value.data(), rows, inner);
        MatMap mgb(grad_buffer(n.b).data(), inner, cols);
        mgb.noalias() += ma.transpose() * mg;
      }
      return;
    }
    case Op::BiasAdd: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      const std::size_t cols = a.shape[1];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad) {
        auto& gb = grad_buffer(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
      }
      return;
    }
    case Op::Sine: {
      Node& a = nodes_[n.a];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * std::cos(a.value[i]);
      }
      return;
    }
    case Op::Sum: {
      if (nodes_[n.a].requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (double& v : ga) v += g[0];
      }
      return;
    }
    case Op::Mean: {
      Node& a = nodes_[n.a];
      if (a.requires_grad) {
        const double scale = g[0] / static_cast<double>(a.value.size());
        auto& ga = grad_buffer(n.a);
        for (double& v : ga) v += scale;
      }
      return;
    }
    case Op::Abs: {
      Node& a = nodes_[n.a];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          // Subgradient 0 at the kink.
          const double s = a.value[i] > 0.0 ? 1.0 : (a.value[i] < 0.0 ? -1.0 : 0.0);
          ga[i] += g[i] * s;
        }
      }
      return;
    }
    case Op::Square: {
      Node& a = nodes_[n.a];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * a.value[i];
      }
      return;
    }
    case Op::SqrtEps: {
      Node& a = nodes_[n.a];
      if (a.requires_grad) {
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / n.value[i];
      }
      return;
    }
    case Op::GatherRows: {
      Node& a = nodes_[n.a];
      if (a.requires_grad) {
        const std::size_t cols = a.shape[1];
        auto& ga = grad_buffer(n.a);
        for (std::size_t i = 0; i < n.rows.size(); ++i) {
          double* dst = ga.data() + static_cast<std::size_t>(n.rows[i]) * cols;
          const double* src = g.data() + i * cols;
          for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
      }
      return;
    }
    case Op::SqDistRows: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      const std::size_t cols = a.shape[1];
      const std::size_t rows = n.value.size();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* pa = a.value.data() + r * cols;
        const double* pb = b.value.data() + r * cols;
        if (a.requires_grad) {
          double* ga = grad_buffer(n.a).data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) ga[c] += g[r] * 2.0 * (pa[c] - pb[c]);
        }
        if (b.requires_grad) {
          double* gb = grad_buffer(n.b).data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) gb[c] -= g[r] * 2.0 * (pa[c] - pb[c]);
        }
      }
      return;
    }
    case Op::DotRows: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      const std::size_t cols = a.shape[1];
      const std::size_t rows = n.value.size();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* pa = a.value.data() + r * cols;
        const double* pb = b.value.data() + r * cols;
        if (a.requires_grad) {
          double* ga = grad_buffer(n.a).data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) ga[c] += g[r] * pb[c];
        }
        if (b.requires_grad) {
          double* gb = grad_buffer(n.b).data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r] * pa[c];
        }
      }
      return;
    }
  }
}

double grad_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& build,
    const std::vector<Shape>& shapes, const std::vector<std::vector<double>>& values, double h) {
  require(h > 0.0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
  require(shapes.size() == values.size(), ErrorCode::LengthMismatch,
          "shape and value counts differ");

  auto evaluate = [&](const std::vector<std::vector<double>>& vals, Tape* keep,
                      std::vector<Tensor>* leaves) {
    Tape local;
    Tape& tape = keep ? *keep : local;
    std::vector<Tensor> params;
    params.reserve(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) params.push_back(tape.parameter(shapes[i], vals[i]));
    const Tensor out = build(tape, params);
    const double v = tape.scalar_value(out);
    require(std::isfinite(v), ErrorCode::NonFiniteValue, "forward evaluation is not finite");
    if (leaves) *leaves = params;
    if (keep) keep->backward(out);
    return v;
  };

  Tape tape;
  std::vector<Tensor> leaves;
  evaluate(values, &tape, &leaves);

  double max_rel = 0.0;
  std::vector<std::vector<double>> probe = values;
  for (std::size_t p = 0; p < values.size(); ++p) {
    const std::vector<double>* analytic = nullptr;
    // A parameter the output never touches has no recorded gradient; treat it as zero.
    static const std::vector<double> kEmpty;
    try {
      analytic = &tape.grad(leaves[p]);
    } catch (const Error&) {
      analytic = &kEmpty;
    }
    for (std::size_t i = 0; i < values[p].size(); ++i) {
      probe[p][i] = values[p][i] + h;
      const double f_plus = evaluate(probe, nullptr, nullptr);
      probe[p][i] = values[p][i] - h;
      const double f_minus = evaluate(probe, nullptr, nullptr);
      probe[p][i] = values[p][i];
      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double an = analytic->empty() ? 0.0 : (*analytic)[i];
      const double rel = std::abs(an - fd) / std::max(1.0, std::abs(fd));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace dpf
