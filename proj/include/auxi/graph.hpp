#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auxi/param.hpp"
#include "auxi/tensor.hpp"

namespace auxi {

using NodeId = int32_t;

enum class Op : uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kMul,
  kMatMul,
  kSum,
  kMean,
  kSoftplus,
  kSigmoid,
  kLog,
  kExp,
  kSquare,
  kPow,
  kSoftmax,
  kSlice,
  kZeroPad,
  kReshape,
  kClipMin,
};

const char* op_name(Op op);

// Operand pairing for kAdd / kMul, inferred from shapes at build time.
enum class PairMode : uint8_t {
  kElementwise,   // identical shapes
  kScalarLeft,    // a is rank-0, broadcast over b
  kScalarRight,   // b is rank-0, broadcast over a
  kRowBroadcast,  // add only: a (n,h) + b (h), b added to every row
  kRowScale,      // mul only: a (n,h) * b (n), b[i] scales row i
};

enum class Reduce : uint8_t {
  kAll,     // full reduction to a scalar
  kPerCol,  // (n,h) -> (h), reduce over rows
  kPerRow,  // (n,h) -> (n), reduce over columns
};

struct Node {
  Op op = Op::kConstant;
  NodeId a = -1;
  NodeId b = -1;
  Tensor value;
  PairMode mode = PairMode::kElementwise;
  Reduce reduce = Reduce::kAll;
  bool trans_a = false;
  bool trans_b = false;
  double scalar = 0.0;  // kPow exponent, kClipMin floor
  std::vector<int64_t> start, extent, stride;  // kSlice / kZeroPad / kReshape geometry
  std::string param_name;
  bool smooth = true;
  bool bound = true;  // false for placeholder parameters awaiting rebind
};

// Append-only computation graph. Values are computed eagerly as nodes are
// recorded; re-evaluation after rebinding parameters goes through forward().
// The gradient pass appends its adjoint nodes to the same graph, which is
// what makes differentiating through a gradient possible.
class Graph {
 public:
  NodeId push(Node n);

  const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  Node& node_mut(NodeId id) { return nodes_[static_cast<size_t>(id)]; }
  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }

  NodeId param(std::string_view name) const;  // -1 if absent
  const std::map<std::string, NodeId, std::less<>>& params() const { return params_; }
  void rebind(std::string_view name, const Tensor& v);

  void reserve(int64_t n) { nodes_.reserve(static_cast<size_t>(n)); }

  // Allow first-order gradients (and, explicitly, second-order ones) through
  // non-smooth ops such as clip-min / relu.
  bool allow_nonsmooth_second_order = false;

 private:
  std::vector<Node> nodes_;
  std::map<std::string, NodeId, std::less<>> params_;
};

// Shape rules and value computation for a single node, from input values.
// Used by the eager path and by forward().
Tensor eval_node(const Graph& g, const Node& n);

// Recompute nodes 0..root in order (after rebinding parameters) and return
// the root value. Throws NumericError naming the first node that produces a
// non-finite value, and ConfigError on unbound parameters.
Tensor forward(Graph& g, NodeId root);

// ---- builders ---------------------------------------------------------

NodeId constant(Graph& g, Tensor v);
NodeId scalar_const(Graph& g, double v);
NodeId parameter(Graph& g, std::string name, Tensor v);
// Parameter with a declared shape but no value yet; forward() rejects the
// graph until rebind() supplies one.
NodeId placeholder(Graph& g, std::string name, std::vector<int64_t> shape);

// Creates one parameter node per entry; names must be fresh in g.
void bind(Graph& g, const ParamSet& ps);

NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId neg(Graph& g, NodeId a);
NodeId mul(Graph& g, NodeId a, NodeId b);
NodeId scale(Graph& g, NodeId a, double s);
NodeId matmul(Graph& g, NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
NodeId dot(Graph& g, NodeId a, NodeId b);  // 1-D . 1-D -> scalar
NodeId sum(Graph& g, NodeId a, Reduce r = Reduce::kAll);
NodeId mean(Graph& g, NodeId a);
NodeId softplus(Graph& g, NodeId a);
NodeId sigmoid(Graph& g, NodeId a);
NodeId log_(Graph& g, NodeId a);
NodeId exp_(Graph& g, NodeId a);
NodeId square(Graph& g, NodeId a);
NodeId pow_(Graph& g, NodeId a, double exponent);
NodeId softmax(Graph& g, NodeId a);  // 1-D
NodeId slice(Graph& g, NodeId a, std::vector<int64_t> start, std::vector<int64_t> extent,
             std::vector<int64_t> stride = {});
NodeId zero_pad(Graph& g, NodeId a, std::vector<int64_t> out_shape, std::vector<int64_t> start,
                std::vector<int64_t> stride = {});
NodeId reshape(Graph& g, NodeId a, std::vector<int64_t> shape);
NodeId clip_min(Graph& g, NodeId a, double floor);
NodeId relu(Graph& g, NodeId a);

// slice a single element and drop to rank 0
NodeId at(Graph& g, NodeId a, std::vector<int64_t> index);

}  // namespace auxi
