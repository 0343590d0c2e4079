#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "fsu/numgrad/tensor.hpp"

namespace fsu::numgrad {

// Handle to a node in a Graph. Only meaningful for the graph that made it.
struct Var {
  std::size_t id = 0;
};

enum class Op {
  kLeaf,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kDivScalar,
  kSquare,
  kSigmoid,
  kRelu,
  kExp,
  kLog,
  kL2NormalizeRows,
  kSoftmax,
  kLogSoftmax,
  kSum,
  kMean,
  kMax,
  kMin,
  kDepthwiseConv,
  kGatherRows,
  kElement,
  kConcatRows,
};

const char* op_name(Op op);

// Reduction / normalization direction.
//   kAll    - over every entry, result 1x1
//   kPerRow - within each row, result rows x 1 (softmax keeps the shape)
//   kPerCol - within each column, result 1 x cols
enum class Axis { kAll, kPerRow, kPerCol };

inline constexpr double kNormEpsilon = 1e-12;
inline constexpr double kLogFloor = 1e-300;

// Define-by-run tape. Nodes are evaluated eagerly as they are added, so the
// insertion order is a topological order and backward() walks it in reverse.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaves. Parameters receive gradients; inputs are constants.
  Var param(Tensor value);
  Var input(Tensor value);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  // a / s where s is a 1x1 node.
  Var div_scalar(Var a, Var s);
  Var square(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var exp(Var a);
  // log(max(a, kLogFloor)).
  Var log(Var a);
  // Each row divided by (its L2 norm + kNormEpsilon).
  Var l2_normalize_rows(Var a);
  Var softmax(Var a, Axis axis);
  Var log_softmax(Var a, Axis axis);
  Var sum(Var a, Axis axis = Axis::kAll);
  Var mean(Var a, Axis axis = Axis::kAll);
  // Subgradient goes to the first attaining entry in row-major order.
  Var max(Var a, Axis axis = Axis::kAll);
  Var min(Var a, Axis axis = Axis::kAll);
  // x: T x d sequence, kernel: d x w. Per-channel correlation along T with
  // "same" zero padding (w-1)/2 before and w/2 after.
  Var depthwise_conv1d(Var x, Var kernel);
  Var gather_rows(Var a, std::vector<std::size_t> rows);
  Var element(Var a, std::size_t r, std::size_t c);
  Var concat_rows(std::span<const Var> parts);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  Tensor::Shape shape(Var v) const { return value(v).shape(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Replaces a leaf's value. Call forward() afterwards to refresh the graph.
  void set_value(Var leaf, Tensor value);

  // Re-evaluates every non-leaf node from the current leaf values and
  // returns the value of `root`.
  const Tensor& forward(Var root);

  // Reverse-mode sweep from a 1x1 root. Returns d(root)/d(param) for every
  // parameter leaf, keyed by node id.
  std::map<std::size_t, Tensor> backward(Var root);

  // Gradient of the last backward() sweep; zero tensor if unreached.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool is_param = false;
    double scalar = 0.0;
    Axis axis = Axis::kAll;
    std::vector<std::size_t> index;  // gather rows, element (r, c), argmax
  };

  Var push(Node node);
  void evaluate(Node& node) const;
  void propagate(const Node& node);
  void accumulate(std::size_t id, const Tensor& g);
  Tensor& grad_slot(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace fsu::numgrad
