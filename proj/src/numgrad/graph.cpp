#include "fsu/numgrad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fsu::numgrad {
namespace {

void require_same(const char* prim, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(prim, a.shape(), b.shape());
}

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor::Shape reduced_shape(const Tensor& a, Axis axis) {
  switch (axis) {
    case Axis::kAll:
      return {1, 1};
    case Axis::kPerRow:
      return {a.rows(), 1};
    case Axis::kPerCol:
      return {1, a.cols()};
  }
  return {1, 1};
}

// Output slot for input entry (r, c) under a reduction.
std::size_t reduced_slot(Axis axis, std::size_t r, std::size_t c) {
  switch (axis) {
    case Axis::kAll:
      return 0;
    case Axis::kPerRow:
      return r;
    case Axis::kPerCol:
      return c;
  }
  return 0;
}

// Softmax along rows or columns; kAll treats the tensor as one group.
template <typename Fn>
void for_each_group(const Tensor& a, Axis axis, Fn&& fn) {
  // fn(indices) with the flat indices of one group.
  std::vector<std::size_t> idx;
  if (axis == Axis::kAll) {
    idx.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) idx[i] = i;
    fn(idx);
  } else if (axis == Axis::kPerRow) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
      idx.clear();
      for (std::size_t c = 0; c < a.cols(); ++c) idx.push_back(r * a.cols() + c);
      fn(idx);
    }
  } else {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      idx.clear();
      for (std::size_t r = 0; r < a.rows(); ++r) idx.push_back(r * a.cols() + c);
      fn(idx);
    }
  }
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kDivScalar: return "div_scalar";
    case Op::kSquare: return "square";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kL2NormalizeRows: return "l2_normalize_rows";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kMax: return "max";
    case Op::kMin: return "min";
    case Op::kDepthwiseConv: return "depthwise_conv1d";
    case Op::kGatherRows: return "gather_rows";
    case Op::kElement: return "element";
    case Op::kConcatRows: return "concat_rows";
  }
  return "?";
}

Var Graph::push(Node node) {
  evaluate(node);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::param(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.is_param = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

#define FSU_UNARY(fn, code)          \
  Var Graph::fn(Var a) {             \
    Node n;                          \
    n.op = code;                     \
    n.inputs = {a.id};               \
    return push(std::move(n));       \
  }

#define FSU_BINARY(fn, code)         \
  Var Graph::fn(Var a, Var b) {      \
    Node n;                          \
    n.op = code;                     \
    n.inputs = {a.id, b.id};         \
    return push(std::move(n));       \
  }

FSU_BINARY(matmul, Op::kMatMul)
FSU_UNARY(transpose, Op::kTranspose)
FSU_BINARY(add, Op::kAdd)
FSU_BINARY(sub, Op::kSub)
FSU_BINARY(mul, Op::kMul)
FSU_BINARY(div_scalar, Op::kDivScalar)
FSU_UNARY(square, Op::kSquare)
FSU_UNARY(sigmoid, Op::kSigmoid)
FSU_UNARY(relu, Op::kRelu)
FSU_UNARY(exp, Op::kExp)
FSU_UNARY(log, Op::kLog)
FSU_UNARY(l2_normalize_rows, Op::kL2NormalizeRows)
FSU_BINARY(depthwise_conv1d, Op::kDepthwiseConv)

#undef FSU_UNARY
#undef FSU_BINARY

Var Graph::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.inputs = {a.id};
  n.scalar = s;
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double s) {
  Node n;
  n.op = Op::kAddScalar;
  n.inputs = {a.id};
  n.scalar = s;
  return push(std::move(n));
}

#define FSU_AXIS(fn, code)               \
  Var Graph::fn(Var a, Axis axis) {      \
    Node n;                              \
    n.op = code;                         \
    n.inputs = {a.id};                   \
    n.axis = axis;                       \
    return push(std::move(n));           \
  }

FSU_AXIS(softmax, Op::kSoftmax)
FSU_AXIS(log_softmax, Op::kLogSoftmax)
FSU_AXIS(sum, Op::kSum)
FSU_AXIS(mean, Op::kMean)
FSU_AXIS(max, Op::kMax)
FSU_AXIS(min, Op::kMin)

#undef FSU_AXIS

Var Graph::gather_rows(Var a, std::vector<std::size_t> rows) {
  Node n;
  n.op = Op::kGatherRows;
  n.inputs = {a.id};
  n.index = std::move(rows);
  return push(std::move(n));
}

Var Graph::element(Var a, std::size_t r, std::size_t c) {
  Node n;
  n.op = Op::kElement;
  n.inputs = {a.id};
  n.index = {r, c};
  return push(std::move(n));
}

Var Graph::concat_rows(std::span<const Var> parts) {
  Node n;
  n.op = Op::kConcatRows;
  for (Var p : parts) n.inputs.push_back(p.id);
  return push(std::move(n));
}

void Graph::set_value(Var leaf, Tensor value) {
  Node& n = nodes_.at(leaf.id);
  if (n.op != Op::kLeaf) {
    throw usage_error("set_value called on a non-leaf node");
  }
  if (n.value.shape() != value.shape()) {
    throw ShapeError("set_value", n.value.shape(), value.shape());
  }
  n.value = std::move(value);
}

const Tensor& Graph::forward(Var root) {
  for (std::size_t i = 0; i <= root.id && i < nodes_.size(); ++i) {
    if (nodes_[i].op != Op::kLeaf) evaluate(nodes_[i]);
  }
  return nodes_.at(root.id).value;
}

void Graph::evaluate(Node& node) const {
  auto in = [&](std::size_t k) -> const Tensor& {
    return nodes_.at(node.inputs.at(k)).value;
  };
  const char* name = op_name(node.op);

  switch (node.op) {
    case Op::kLeaf:
      return;

    case Op::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows()) throw ShapeError(name, a.shape(), b.shape());
      Tensor out(a.rows(), b.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
          const double av = a(i, k);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += av * b(k, j);
        }
      }
      node.value = std::move(out);
      return;
    }

    case Op::kTranspose: {
      const Tensor& a = in(0);
      Tensor out(a.cols(), a.rows());
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
      node.value = std::move(out);
      return;
    }

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same(name, a, b);
      Tensor out = a;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (node.op == Op::kAdd) out[i] += b[i];
        else if (node.op == Op::kSub) out[i] -= b[i];
        else out[i] *= b[i];
      }
      node.value = std::move(out);
      return;
    }

    case Op::kScale:
    case Op::kAddScalar: {
      Tensor out = in(0);
      for (double& v : out.data()) {
        v = node.op == Op::kScale ? v * node.scalar : v + node.scalar;
      }
      node.value = std::move(out);
      return;
    }

    case Op::kDivScalar: {
      const Tensor& s = in(1);
      if (s.size() != 1) throw ShapeError(name, in(0).shape(), s.shape());
      Tensor out = in(0);
      const double d = s[0];
      for (double& v : out.data()) v /= d;
      node.value = std::move(out);
      return;
    }

    case Op::kSquare:
    case Op::kSigmoid:
    case Op::kRelu:
    case Op::kExp:
    case Op::kLog: {
      Tensor out = in(0);
      for (double& v : out.data()) {
        switch (node.op) {
          case Op::kSquare: v = v * v; break;
          case Op::kSigmoid: v = sigmoid_of(v); break;
          case Op::kRelu: v = v > 0.0 ? v : 0.0; break;
          case Op::kExp: v = std::exp(v); break;
          default: v = std::log(std::max(v, kLogFloor)); break;
        }
      }
      node.value = std::move(out);
      return;
    }

    case Op::kL2NormalizeRows: {
      Tensor out = in(0);
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        const double denom = std::sqrt(sq) + kNormEpsilon;
        for (double& v : row) v /= denom;
      }
      node.value = std::move(out);
      return;
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      const Tensor& a = in(0);
      Tensor out(a.rows(), a.cols());
      const bool log_mode = node.op == Op::kLogSoftmax;
      for_each_group(a, node.axis, [&](const std::vector<std::size_t>& g) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i : g) m = std::max(m, a[i]);
        double z = 0.0;
        for (std::size_t i : g) z += std::exp(a[i] - m);
        const double logz = m + std::log(z);
        for (std::size_t i : g) {
          out[i] = log_mode ? a[i] - logz : std::exp(a[i] - logz);
        }
      });
      node.value = std::move(out);
      return;
    }

    case Op::kSum:
    case Op::kMean: {
      const Tensor& a = in(0);
      const auto s = reduced_shape(a, node.axis);
      Tensor out(s[0], s[1]);
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
          out[reduced_slot(node.axis, r, c)] += a(r, c);
      if (node.op == Op::kMean && a.size() > 0) {
        const double count = static_cast<double>(a.size() / out.size());
        for (double& v : out.data()) v /= count;
      }
      node.value = std::move(out);
      return;
    }

    case Op::kMax:
    case Op::kMin: {
      const Tensor& a = in(0);
      if (a.size() == 0) throw ShapeError(name, a.shape(), {1, 1});
      const auto s = reduced_shape(a, node.axis);
      Tensor out(s[0], s[1]);
      std::vector<bool> seen(out.size(), false);
      node.index.assign(out.size(), 0);
      const bool is_max = node.op == Op::kMax;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
          const std::size_t slot = reduced_slot(node.axis, r, c);
          const double v = a(r, c);
          // Strict comparison keeps the first attaining entry.
          if (!seen[slot] || (is_max ? v > out[slot] : v < out[slot])) {
            out[slot] = v;
            node.index[slot] = r * a.cols() + c;
            seen[slot] = true;
          }
        }
      }
      node.value = std::move(out);
      return;
    }

    case Op::kDepthwiseConv: {
      const Tensor& x = in(0);
      const Tensor& k = in(1);
      if (k.rows() != x.cols() || k.cols() == 0) {
        throw ShapeError(name, x.shape(), k.shape());
      }
      const std::size_t len = x.rows();
      const std::size_t width = k.cols();
      const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width - 1) / 2);
      Tensor out(len, x.cols());
      for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t j = 0; j < width; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - left;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          for (std::size_t ch = 0; ch < x.cols(); ++ch) {
            out(t, ch) += k(ch, j) * x(static_cast<std::size_t>(src), ch);
          }
        }
      }
      node.value = std::move(out);
      return;
    }

    case Op::kGatherRows: {
      const Tensor& a = in(0);
      Tensor out(node.index.size(), a.cols());
      for (std::size_t r = 0; r < node.index.size(); ++r) {
        if (node.index[r] >= a.rows()) {
          throw ShapeError(name, a.shape(), {node.index[r], a.cols()});
        }
        auto src = a.row_span(node.index[r]);
        std::copy(src.begin(), src.end(), out.row_span(r).begin());
      }
      node.value = std::move(out);
      return;
    }

    case Op::kElement: {
      const Tensor& a = in(0);
      const std::size_t r = node.index[0], c = node.index[1];
      if (r >= a.rows() || c >= a.cols()) {
        throw ShapeError(name, a.shape(), {r + 1, c + 1});
      }
      node.value = Tensor::scalar(a(r, c));
      return;
    }

    case Op::kConcatRows: {
      if (node.inputs.empty()) throw ShapeError(name, {0, 0}, {0, 0});
      const std::size_t cols = in(0).cols();
      std::size_t rows = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        if (in(k).cols() != cols) throw ShapeError(name, in(0).shape(), in(k).shape());
        rows += in(k).rows();
      }
      std::vector<double> data;
      data.reserve(rows * cols);
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        auto d = in(k).data();
        data.insert(data.end(), d.begin(), d.end());
      }
      node.value = Tensor(rows, cols, std::move(data));
      return;
    }
  }
}

Tensor& Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  Tensor& slot = grad_slot(id);
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

std::map<std::size_t, Tensor> Graph::backward(Var root) {
  const Tensor& rv = nodes_.at(root.id).value;
  if (rv.size() != 1) {
    throw ShapeError("backward (root must be scalar)", rv.shape(), {1, 1});
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(root.id)[0] = 1.0;

  for (std::size_t i = root.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.op == Op::kLeaf || n.grad.empty()) continue;
    propagate(n);
  }

  std::map<std::size_t, Tensor> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_param) continue;
    out.emplace(i, grad(Var{i}));
  }
  return out;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.shape() == n.value.shape() && !n.grad.empty()) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

void Graph::propagate(const Node& node) {
  const Tensor& g = node.grad;
  const Tensor& y = node.value;
  auto in = [&](std::size_t k) -> const Tensor& {
    return nodes_[node.inputs[k]].value;
  };
  auto slot = [&](std::size_t k) -> Tensor& {
    return grad_slot(node.inputs[k]);
  };

  switch (node.op) {
    case Op::kLeaf:
      return;

    case Op::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      {
        Tensor& da = slot(0);  // g * b^T
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < b.cols(); ++j) {
            const double gv = g(i, j);
            if (gv == 0.0) continue;
            for (std::size_t k = 0; k < a.cols(); ++k) da(i, k) += gv * b(k, j);
          }
      }
      {
        Tensor& db = slot(1);  // a^T * g
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = a(i, k);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) db(k, j) += av * g(i, j);
          }
      }
      return;
    }

    case Op::kTranspose: {
      Tensor& da = slot(0);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) da(j, i) += g(i, j);
      return;
    }

    case Op::kAdd: {
      accumulate(node.inputs[0], g);
      accumulate(node.inputs[1], g);
      return;
    }

    case Op::kSub: {
      accumulate(node.inputs[0], g);
      Tensor& db = slot(1);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      return;
    }

    case Op::kMul: {
      const Tensor a = in(0);
      const Tensor b = in(1);
      Tensor& da = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
      Tensor& db = slot(1);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
      return;
    }

    case Op::kScale: {
      Tensor& da = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * node.scalar;
      return;
    }

    case Op::kAddScalar: {
      accumulate(node.inputs[0], g);
      return;
    }

    case Op::kDivScalar: {
      const Tensor& a = in(0);
      const double s = in(1)[0];
      Tensor& da = slot(0);
      double ds = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        da[i] += g[i] / s;
        ds -= g[i] * a[i] / (s * s);
      }
      slot(1)[0] += ds;
      return;
    }

    case Op::kSquare:
    case Op::kSigmoid:
    case Op::kRelu:
    case Op::kExp:
    case Op::kLog: {
      const Tensor& a = in(0);
      Tensor& da = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = 0.0;
        switch (node.op) {
          case Op::kSquare: d = 2.0 * a[i]; break;
          case Op::kSigmoid: d = y[i] * (1.0 - y[i]); break;
          case Op::kRelu: d = a[i] > 0.0 ? 1.0 : 0.0; break;
          case Op::kExp: d = y[i]; break;
          default: d = 1.0 / std::max(a[i], kLogFloor); break;
        }
        da[i] += g[i] * d;
      }
      return;
    }

    case Op::kL2NormalizeRows: {
      const Tensor& x = in(0);
      Tensor& dx = slot(0);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto xr = x.row_span(r);
        auto gr = g.row_span(r);
        double sq = 0.0, xg = 0.0;
        for (std::size_t c = 0; c < xr.size(); ++c) {
          sq += xr[c] * xr[c];
          xg += xr[c] * gr[c];
        }
        const double n = std::sqrt(sq);
        const double denom = n + kNormEpsilon;
        // d/dx [x / (|x| + eps)] = I/denom - x x^T / (|x| denom^2)
        const double coef = n > 0.0 ? xg / (n * denom * denom) : 0.0;
        auto dr = dx.row_span(r);
        for (std::size_t c = 0; c < xr.size(); ++c) {
          dr[c] += gr[c] / denom - coef * xr[c];
        }
      }
      return;
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      const Tensor& a = in(0);
      Tensor& da = slot(0);
      const bool log_mode = node.op == Op::kLogSoftmax;
      for_each_group(a, node.axis, [&](const std::vector<std::size_t>& grp) {
        if (log_mode) {
          double gsum = 0.0;
          for (std::size_t i : grp) gsum += g[i];
          for (std::size_t i : grp) da[i] += g[i] - std::exp(y[i]) * gsum;
        } else {
          double gy = 0.0;
          for (std::size_t i : grp) gy += g[i] * y[i];
          for (std::size_t i : grp) da[i] += y[i] * (g[i] - gy);
        }
      });
      return;
    }

    case Op::kSum:
    case Op::kMean: {
      const Tensor& a = in(0);
      Tensor& da = slot(0);
      const double count =
          node.op == Op::kMean ? static_cast<double>(a.size() / y.size()) : 1.0;
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
          da(r, c) += g[reduced_slot(node.axis, r, c)] / count;
      return;
    }

    case Op::kMax:
    case Op::kMin: {
      Tensor& da = slot(0);
      for (std::size_t s = 0; s < y.size(); ++s) da[node.index[s]] += g[s];
      return;
    }

    case Op::kDepthwiseConv: {
      const Tensor& x = in(0);
      const Tensor& k = in(1);
      const std::size_t len = x.rows();
      const std::size_t width = k.cols();
      const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width - 1) / 2);
      Tensor& dx = slot(0);
      Tensor& dk = slot(1);
      for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t j = 0; j < width; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - left;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          const auto s = static_cast<std::size_t>(src);
          for (std::size_t ch = 0; ch < x.cols(); ++ch) {
            dx(s, ch) += k(ch, j) * g(t, ch);
            dk(ch, j) += x(s, ch) * g(t, ch);
          }
        }
      }
      return;
    }

    case Op::kGatherRows: {
      Tensor& da = slot(0);
      for (std::size_t r = 0; r < node.index.size(); ++r) {
        auto gr = g.row_span(r);
        auto dr = da.row_span(node.index[r]);
        for (std::size_t c = 0; c < gr.size(); ++c) dr[c] += gr[c];
      }
      return;
    }

    case Op::kElement: {
      slot(0)(node.index[0], node.index[1]) += g[0];
      return;
    }

    case Op::kConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        Tensor& dk = slot(k);
        for (std::size_t i = 0; i < dk.size(); ++i) dk[i] += g[offset + i];
        offset += dk.size();
      }
      return;
    }
  }
}

}  // namespace fsu::numgrad
