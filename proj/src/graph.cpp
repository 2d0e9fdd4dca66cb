#include "auxi/graph.hpp"

#include <algorithm>
#include <cmath>

#include "auxi/errors.hpp"

namespace auxi {

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kMul: return "multiply";
    case Op::kMatMul: return "matmul";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSoftplus: return "softplus";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kPow: return "power";
    case Op::kSoftmax: return "softmax";
    case Op::kSlice: return "slice";
    case Op::kZeroPad: return "zero-pad";
    case Op::kReshape: return "reshape";
    case Op::kClipMin: return "clip-min";
  }
  return "?";
}

namespace {

double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<int64_t> row_strides(std::span<const int64_t> shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int64_t d = static_cast<int64_t>(shape.size()) - 2; d >= 0; --d)
    s[static_cast<size_t>(d)] =
        s[static_cast<size_t>(d) + 1] * shape[static_cast<size_t>(d) + 1];
  return s;
}

bool next_index(std::vector<int64_t>& idx, std::span<const int64_t> shape) {
  for (int64_t d = static_cast<int64_t>(shape.size()) - 1; d >= 0; --d) {
    auto ud = static_cast<size_t>(d);
    if (++idx[ud] < shape[ud]) return true;
    idx[ud] = 0;
  }
  return false;
}

// matmul operand view: rank-2, possibly transposed; rank-1 promoted.
// rows/cols are the effective dims after transposition, scols the storage
// column count used for flat indexing.
struct MatView {
  const Tensor* t;
  int64_t rows, cols, scols;
  bool trans;
  double operator()(int64_t i, int64_t j) const {
    return trans ? (*t)[j * scols + i] : (*t)[i * scols + j];
  }
};

MatView mat_view(const Tensor& t, bool trans, bool promote_left) {
  if (t.rank() == 2) {
    int64_t r = trans ? t.dim(1) : t.dim(0);
    int64_t c = trans ? t.dim(0) : t.dim(1);
    return {&t, r, c, t.dim(1), trans};
  }
  if (t.rank() == 1) {
    if (trans) throw ContractError("transpose flag on rank-1 matmul operand");
    if (promote_left) return {&t, 1, t.dim(0), t.dim(0), false};  // (1,k)
    return {&t, t.dim(0), 1, 1, false};                           // (k,1)
  }
  throw ContractError("matmul operand must be rank 1 or 2, got " + t.shape_str());
}

}  // namespace

NodeId Graph::push(Node n) {
  if (n.op != Op::kConstant && n.op != Op::kParameter) n.value = eval_node(*this, n);
  nodes_.push_back(std::move(n));
  NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  if (nodes_.back().op == Op::kParameter) {
    auto [it, fresh] = params_.emplace(nodes_.back().param_name, id);
    if (!fresh)
      throw ContractError("parameter already bound in this graph: " + nodes_.back().param_name);
  }
  return id;
}

NodeId Graph::param(std::string_view name) const {
  auto it = params_.find(name);
  return it == params_.end() ? -1 : it->second;
}

void Graph::rebind(std::string_view name, const Tensor& v) {
  NodeId id = param(name);
  if (id < 0) throw ConfigError("rebind: no parameter named " + std::string(name));
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.value.same_shape(v))
    throw ContractError("rebind shape mismatch for " + std::string(name) + ": " +
                        n.value.shape_str() + " vs " + v.shape_str());
  n.value = v;
  n.bound = true;
}

Tensor eval_node(const Graph& g, const Node& n) {
  auto val = [&](NodeId id) -> const Tensor& { return g.value(id); };
  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      return n.value;

    case Op::kAdd: {
      const Tensor& A = val(n.a);
      const Tensor& B = val(n.b);
      switch (n.mode) {
        case PairMode::kElementwise: {
          Tensor out = A;
          for (int64_t i = 0; i < out.size(); ++i) out[i] += B[i];
          return out;
        }
        case PairMode::kScalarLeft: {
          Tensor out = B;
          double s = A[0];
          for (int64_t i = 0; i < out.size(); ++i) out[i] += s;
          return out;
        }
        case PairMode::kScalarRight: {
          Tensor out = A;
          double s = B[0];
          for (int64_t i = 0; i < out.size(); ++i) out[i] += s;
          return out;
        }
        case PairMode::kRowBroadcast: {
          Tensor out = A;
          int64_t rows = A.dim(0), cols = A.dim(1);
          for (int64_t i = 0; i < rows; ++i)
            for (int64_t j = 0; j < cols; ++j) out[i * cols + j] += B[j];
          return out;
        }
        default:
          throw ContractError("bad add mode");
      }
    }

    case Op::kMul: {
      const Tensor& A = val(n.a);
      const Tensor& B = val(n.b);
      switch (n.mode) {
        case PairMode::kElementwise: {
          Tensor out = A;
          for (int64_t i = 0; i < out.size(); ++i) out[i] *= B[i];
          return out;
        }
        case PairMode::kScalarLeft: {
          Tensor out = B;
          double s = A[0];
          for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
          return out;
        }
        case PairMode::kScalarRight: {
          Tensor out = A;
          double s = B[0];
          for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
          return out;
        }
        case PairMode::kRowScale: {
          Tensor out = A;
          int64_t rows = A.dim(0), cols = A.dim(1);
          for (int64_t i = 0; i < rows; ++i)
            for (int64_t j = 0; j < cols; ++j) out[i * cols + j] *= B[i];
          return out;
        }
        default:
          throw ContractError("bad mul mode");
      }
    }

    case Op::kMatMul: {
      const Tensor& A = val(n.a);
      const Tensor& B = val(n.b);
      MatView av = mat_view(A, n.trans_a, /*promote_left=*/true);
      MatView bv = mat_view(B, n.trans_b, /*promote_left=*/false);
      int64_t m = av.rows, k = av.cols;
      int64_t k2 = bv.rows, p = bv.cols;
      if (k != k2)
        throw ContractError("matmul inner dimension mismatch: " + A.shape_str() + " x " +
                            B.shape_str());
      std::vector<double> out(static_cast<size_t>(m * p), 0.0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < p; ++j) {
          double acc = 0;
          for (int64_t q = 0; q < k; ++q) acc += av(i, q) * bv(q, j);
          out[static_cast<size_t>(i * p + j)] = acc;
        }
      std::vector<int64_t> shape;
      if (A.rank() == 2 && B.rank() == 2)
        shape = {m, p};
      else if (A.rank() == 2)
        shape = {m};
      else if (B.rank() == 2)
        shape = {p};
      // both rank-1: scalar
      return Tensor(std::move(shape), std::move(out));
    }

    case Op::kSum:
    case Op::kMean: {
      const Tensor& A = val(n.a);
      switch (n.reduce) {
        case Reduce::kAll: {
          double acc = 0;
          for (int64_t i = 0; i < A.size(); ++i) acc += A[i];
          if (n.op == Op::kMean) acc /= static_cast<double>(A.size());
          return Tensor::scalar(acc);
        }
        case Reduce::kPerCol: {
          int64_t rows = A.dim(0), cols = A.dim(1);
          Tensor out({cols});
          for (int64_t j = 0; j < cols; ++j) {
            double acc = 0;
            for (int64_t i = 0; i < rows; ++i) acc += A[i * cols + j];
            out[j] = n.op == Op::kMean ? acc / static_cast<double>(rows) : acc;
          }
          return out;
        }
        case Reduce::kPerRow: {
          int64_t rows = A.dim(0), cols = A.dim(1);
          Tensor out({rows});
          for (int64_t i = 0; i < rows; ++i) {
            double acc = 0;
            for (int64_t j = 0; j < cols; ++j) acc += A[i * cols + j];
            out[i] = n.op == Op::kMean ? acc / static_cast<double>(cols) : acc;
          }
          return out;
        }
      }
      throw ContractError("bad reduce");
    }

    case Op::kSoftplus: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(out[i]);
      return out;
    }
    case Op::kSigmoid: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
      return out;
    }
    case Op::kLog: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
      return out;
    }
    case Op::kExp: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
      return out;
    }
    case Op::kSquare: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] *= out[i];
      return out;
    }
    case Op::kPow: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] = std::pow(out[i], n.scalar);
      return out;
    }

    case Op::kSoftmax: {
      const Tensor& A = val(n.a);
      Tensor out = A;
      double m = out[0];
      for (int64_t i = 1; i < out.size(); ++i) m = std::max(m, out[i]);
      double z = 0;
      for (int64_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(out[i] - m);
        z += out[i];
      }
      for (int64_t i = 0; i < out.size(); ++i) out[i] /= z;
      return out;
    }

    case Op::kSlice: {
      const Tensor& A = val(n.a);
      auto in_rs = row_strides(A.shape());
      Tensor out(n.extent);
      std::vector<int64_t> idx(n.extent.size(), 0);
      int64_t flat = 0;
      do {
        int64_t src = 0;
        for (size_t d = 0; d < idx.size(); ++d)
          src += (n.start[d] + idx[d] * n.stride[d]) * in_rs[d];
        out[flat++] = A[src];
      } while (next_index(idx, n.extent));
      return out;
    }

    case Op::kZeroPad: {
      const Tensor& A = val(n.a);
      Tensor out = Tensor::zeros(n.extent);
      auto out_rs = row_strides(n.extent);
      std::vector<int64_t> idx(A.shape().size(), 0);
      int64_t flat = 0;
      do {
        int64_t dst = 0;
        for (size_t d = 0; d < idx.size(); ++d)
          dst += (n.start[d] + idx[d] * n.stride[d]) * out_rs[d];
        out[dst] = A[flat++];
      } while (next_index(idx, A.shape()));
      return out;
    }

    case Op::kReshape: {
      const Tensor& A = val(n.a);
      return Tensor(n.extent, A.vec());
    }

    case Op::kClipMin: {
      Tensor out = val(n.a);
      for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], n.scalar);
      return out;
    }
  }
  throw ContractError("unhandled op");
}

Tensor forward(Graph& g, NodeId root) {
  if (root < 0 || root >= g.size()) throw ContractError("forward: no such node");
  for (NodeId id = 0; id <= root; ++id) {
    Node& n = g.node_mut(id);
    if (n.op == Op::kParameter) {
      if (!n.bound)
        throw ConfigError("unbound parameter " + n.param_name + " at node " + std::to_string(id));
      if (!n.value.all_finite())
        throw NumericError("non-finite parameter value at node " + std::to_string(id) + " (" +
                               n.param_name + ")",
                           id);
      continue;
    }
    if (n.op != Op::kConstant) n.value = eval_node(g, n);
    if (!n.value.all_finite())
      throw NumericError(
          "non-finite value produced at node " + std::to_string(id) + " (" + op_name(n.op) + ")",
          id);
  }
  return g.value(root);
}

// ---- builders ---------------------------------------------------------

NodeId constant(Graph& g, Tensor v) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(v);
  return g.push(std::move(n));
}

NodeId scalar_const(Graph& g, double v) { return constant(g, Tensor::scalar(v)); }

NodeId parameter(Graph& g, std::string name, Tensor v) {
  Node n;
  n.op = Op::kParameter;
  n.param_name = std::move(name);
  n.value = std::move(v);
  return g.push(std::move(n));
}

NodeId placeholder(Graph& g, std::string name, std::vector<int64_t> shape) {
  Node n;
  n.op = Op::kParameter;
  n.param_name = std::move(name);
  n.value = Tensor::zeros(std::move(shape));
  n.bound = false;
  return g.push(std::move(n));
}

void bind(Graph& g, const ParamSet& ps) {
  for (const auto& e : ps) parameter(g, e.name, e.value);
}

NodeId add(Graph& g, NodeId a, NodeId b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  if (A.same_shape(B))
    n.mode = PairMode::kElementwise;
  else if (A.rank() == 0)
    n.mode = PairMode::kScalarLeft;
  else if (B.rank() == 0)
    n.mode = PairMode::kScalarRight;
  else if (A.rank() == 2 && B.rank() == 1 && A.dim(1) == B.dim(0))
    n.mode = PairMode::kRowBroadcast;
  else
    throw ContractError("add shape mismatch: " + A.shape_str() + " + " + B.shape_str());
  return g.push(std::move(n));
}

NodeId sub(Graph& g, NodeId a, NodeId b) { return add(g, a, neg(g, b)); }

NodeId neg(Graph& g, NodeId a) { return scale(g, a, -1.0); }

NodeId mul(Graph& g, NodeId a, NodeId b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  if (A.same_shape(B))
    n.mode = PairMode::kElementwise;
  else if (A.rank() == 0)
    n.mode = PairMode::kScalarLeft;
  else if (B.rank() == 0)
    n.mode = PairMode::kScalarRight;
  else if (A.rank() == 2 && B.rank() == 1 && A.dim(0) == B.dim(0))
    n.mode = PairMode::kRowScale;
  else
    throw ContractError("mul shape mismatch: " + A.shape_str() + " * " + B.shape_str());
  return g.push(std::move(n));
}

NodeId scale(Graph& g, NodeId a, double s) { return mul(g, scalar_const(g, s), a); }

NodeId matmul(Graph& g, NodeId a, NodeId b, bool trans_a, bool trans_b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return g.push(std::move(n));
}

NodeId dot(Graph& g, NodeId a, NodeId b) {
  if (g.value(a).rank() != 1 || g.value(b).rank() != 1)
    throw ContractError("dot expects rank-1 operands");
  return matmul(g, a, b);
}

NodeId sum(Graph& g, NodeId a, Reduce r) {
  if (r != Reduce::kAll && g.value(a).rank() != 2)
    throw ContractError("axis reduction requires a rank-2 input, got " + g.value(a).shape_str());
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.reduce = r;
  return g.push(std::move(n));
}

NodeId mean(Graph& g, NodeId a) {
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.reduce = Reduce::kAll;
  return g.push(std::move(n));
}

namespace {
NodeId unary(Graph& g, Op op, NodeId a, double scalar = 0.0, bool smooth = true) {
  Node n;
  n.op = op;
  n.a = a;
  n.scalar = scalar;
  n.smooth = smooth;
  return g.push(std::move(n));
}
}  // namespace

NodeId softplus(Graph& g, NodeId a) { return unary(g, Op::kSoftplus, a); }
NodeId sigmoid(Graph& g, NodeId a) { return unary(g, Op::kSigmoid, a); }
NodeId log_(Graph& g, NodeId a) { return unary(g, Op::kLog, a); }
NodeId exp_(Graph& g, NodeId a) { return unary(g, Op::kExp, a); }
NodeId square(Graph& g, NodeId a) { return unary(g, Op::kSquare, a); }
NodeId pow_(Graph& g, NodeId a, double exponent) { return unary(g, Op::kPow, a, exponent); }

NodeId softmax(Graph& g, NodeId a) {
  if (g.value(a).rank() != 1) throw ContractError("softmax expects a rank-1 input");
  return unary(g, Op::kSoftmax, a);
}

NodeId slice(Graph& g, NodeId a, std::vector<int64_t> start, std::vector<int64_t> extent,
             std::vector<int64_t> stride) {
  const Tensor& A = g.value(a);
  auto r = static_cast<size_t>(A.rank());
  if (stride.empty()) stride.assign(r, 1);
  if (start.size() != r || extent.size() != r || stride.size() != r)
    throw ContractError("slice geometry rank mismatch for input " + A.shape_str());
  for (size_t d = 0; d < r; ++d) {
    if (extent[d] < 1 || stride[d] < 1 || start[d] < 0 ||
        start[d] + (extent[d] - 1) * stride[d] > A.dim(static_cast<int64_t>(d)) - 1)
      throw ContractError("slice out of bounds on dim " + std::to_string(d));
  }
  Node n;
  n.op = Op::kSlice;
  n.a = a;
  n.start = std::move(start);
  n.extent = std::move(extent);
  n.stride = std::move(stride);
  return g.push(std::move(n));
}

NodeId zero_pad(Graph& g, NodeId a, std::vector<int64_t> out_shape, std::vector<int64_t> start,
                std::vector<int64_t> stride) {
  const Tensor& A = g.value(a);
  auto r = static_cast<size_t>(A.rank());
  if (stride.empty()) stride.assign(r, 1);
  if (start.size() != r || out_shape.size() != r || stride.size() != r)
    throw ContractError("zero-pad geometry rank mismatch for input " + A.shape_str());
  for (size_t d = 0; d < r; ++d)
    if (stride[d] < 1 || start[d] < 0 ||
        start[d] + (A.dim(static_cast<int64_t>(d)) - 1) * stride[d] > out_shape[d] - 1)
      throw ContractError("zero-pad out of bounds on dim " + std::to_string(d));
  Node n;
  n.op = Op::kZeroPad;
  n.a = a;
  n.start = std::move(start);
  n.extent = std::move(out_shape);
  n.stride = std::move(stride);
  return g.push(std::move(n));
}

NodeId reshape(Graph& g, NodeId a, std::vector<int64_t> shape) {
  if (shape_size(shape) != g.value(a).size())
    throw ContractError("reshape size mismatch: " + g.value(a).shape_str() + " -> " +
                        shape_str(shape));
  Node n;
  n.op = Op::kReshape;
  n.a = a;
  n.extent = std::move(shape);
  return g.push(std::move(n));
}

NodeId clip_min(Graph& g, NodeId a, double floor) {
  return unary(g, Op::kClipMin, a, floor, /*smooth=*/false);
}

NodeId relu(Graph& g, NodeId a) { return clip_min(g, a, 0.0); }

NodeId at(Graph& g, NodeId a, std::vector<int64_t> index) {
  std::vector<int64_t> extent(index.size(), 1);
  return reshape(g, slice(g, a, std::move(index), std::move(extent)), {});
}

}  // namespace auxi
