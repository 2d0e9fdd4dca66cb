#include "auxi/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "auxi/errors.hpp"

namespace auxi {

namespace {

// Adjoint contributions of one node to its inputs, emitted as graph ops.
// `v` is the upstream adjoint node (same shape as n's value).
struct Vjp {
  NodeId da = -1;
  NodeId db = -1;
};

Vjp emit_vjp(Graph& g, NodeId id, NodeId v) {
  const Node n = g.node(id);  // copy: push() may reallocate the node array
  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      return {};

    case Op::kAdd:
      switch (n.mode) {
        case PairMode::kElementwise:
          return {v, v};
        case PairMode::kScalarLeft:
          return {sum(g, v), v};
        case PairMode::kScalarRight:
          return {v, sum(g, v)};
        case PairMode::kRowBroadcast:
          return {v, sum(g, v, Reduce::kPerCol)};
        default:
          throw ContractError("bad add mode in vjp");
      }

    case Op::kMul:
      switch (n.mode) {
        case PairMode::kElementwise:
          return {mul(g, v, n.b), mul(g, v, n.a)};
        case PairMode::kScalarLeft:
          return {sum(g, mul(g, v, n.b)), mul(g, n.a, v)};
        case PairMode::kScalarRight:
          return {mul(g, v, n.b), sum(g, mul(g, v, n.a))};
        case PairMode::kRowScale:
          return {mul(g, v, n.b), sum(g, mul(g, v, n.a), Reduce::kPerRow)};
        default:
          throw ContractError("bad mul mode in vjp");
      }

    case Op::kMatMul: {
      // Normalize rank-1 operands and upstream to their promoted rank-2
      // views, apply the rank-2 identities, then drop back to input ranks.
      const std::vector<int64_t> as = g.value(n.a).shape();
      const std::vector<int64_t> bs = g.value(n.b).shape();
      NodeId a2 = as.size() == 1 ? reshape(g, n.a, {1, as[0]}) : n.a;
      NodeId b2 = bs.size() == 1 ? reshape(g, n.b, {bs[0], 1}) : n.b;
      int64_t m = as.size() == 1 ? 1 : (n.trans_a ? as[1] : as[0]);
      int64_t p = bs.size() == 1 ? 1 : (n.trans_b ? bs[0] : bs[1]);
      NodeId v2 = g.value(v).rank() == 2 ? v : reshape(g, v, {m, p});
      // C = opA(A2) . opB(B2)
      NodeId da2 = n.trans_a ? matmul(g, b2, v2, n.trans_b, true)
                             : matmul(g, v2, b2, false, !n.trans_b);
      NodeId db2 = n.trans_b ? matmul(g, v2, a2, true, n.trans_a)
                             : matmul(g, a2, v2, !n.trans_a, false);
      NodeId da = as.size() == 1 ? reshape(g, da2, {as[0]}) : da2;
      NodeId db = bs.size() == 1 ? reshape(g, db2, {bs[0]}) : db2;
      return {da, db};
    }

    case Op::kSum: {
      const std::vector<int64_t> as = g.value(n.a).shape();
      switch (n.reduce) {
        case Reduce::kAll:
        case Reduce::kPerCol:  // row broadcast
          return {add(g, constant(g, Tensor::zeros(as)), v), -1};
        case Reduce::kPerRow:  // row scale
          return {mul(g, constant(g, Tensor::full(as, 1.0)), v), -1};
      }
      throw ContractError("bad reduce in vjp");
    }
    case Op::kMean: {
      const std::vector<int64_t> as = g.value(n.a).shape();
      NodeId s = scale(g, v, 1.0 / static_cast<double>(shape_size(as)));
      return {add(g, constant(g, Tensor::zeros(as)), s), -1};
    }

    case Op::kSoftplus:
      return {mul(g, v, sigmoid(g, n.a)), -1};
    case Op::kSigmoid: {
      NodeId s = id;  // reuse the forward node
      return {mul(g, v, sub(g, s, square(g, s))), -1};
    }
    case Op::kLog:
      return {mul(g, v, pow_(g, n.a, -1.0)), -1};
    case Op::kExp:
      return {mul(g, v, id), -1};
    case Op::kSquare:
      return {scale(g, mul(g, v, n.a), 2.0), -1};
    case Op::kPow:
      return {scale(g, mul(g, v, pow_(g, n.a, n.scalar - 1.0)), n.scalar), -1};

    case Op::kSoftmax: {
      NodeId s = id;
      NodeId d = dot(g, v, s);
      return {mul(g, s, add(g, v, neg(g, d))), -1};
    }

    case Op::kSlice:
      return {zero_pad(g, v, g.value(n.a).shape(), n.start, n.stride), -1};
    case Op::kZeroPad:
      return {slice(g, v, n.start, g.value(n.a).shape(), n.stride), -1};
    case Op::kReshape:
      return {reshape(g, v, g.value(n.a).shape()), -1};

    case Op::kClipMin: {
      // subgradient with the mask frozen at the values seen here
      const Tensor& A = g.value(n.a);
      Tensor mask(A.shape());
      for (int64_t i = 0; i < A.size(); ++i) mask[i] = A[i] > n.scalar ? 1.0 : 0.0;
      return {mul(g, v, constant(g, std::move(mask))), -1};
    }
  }
  throw ContractError("unhandled op in vjp");
}

}  // namespace

std::vector<NodeId> param_node_ids(const Graph& g, const ParamSet& ps) {
  std::vector<NodeId> ids;
  ids.reserve(static_cast<size_t>(ps.count()));
  for (const auto& e : ps) {
    NodeId id = g.param(e.name);
    if (id < 0) throw ConfigError("parameter not bound in graph: " + e.name);
    if (!g.value(id).same_shape(e.value))
      throw ContractError("bound parameter shape mismatch for " + e.name);
    ids.push_back(id);
  }
  return ids;
}

std::vector<NodeId> grad_nodes(Graph& g, NodeId out, std::span<const NodeId> wrt,
                               bool create_graph) {
  if (out < 0 || out >= g.size()) throw ContractError("grad: no such output node");
  if (g.value(out).size() != 1)
    throw ContractError("grad requires a scalar output, got shape " + g.value(out).shape_str());

  const NodeId top = out;
  // ancestors of out
  std::vector<char> anc(static_cast<size_t>(top) + 1, 0);
  anc[static_cast<size_t>(top)] = 1;
  for (NodeId id = top; id >= 0; --id) {
    if (!anc[static_cast<size_t>(id)]) continue;
    const Node& n = g.node(id);
    if (n.a >= 0) anc[static_cast<size_t>(n.a)] = 1;
    if (n.b >= 0) anc[static_cast<size_t>(n.b)] = 1;
  }
  // nodes reached from any wrt leaf
  std::vector<char> live(static_cast<size_t>(top) + 1, 0);
  for (NodeId w : wrt) {
    if (w < 0 || w >= g.size()) throw ContractError("grad: bad wrt node");
    if (w <= top) live[static_cast<size_t>(w)] = 1;
  }
  for (NodeId id = 0; id <= top; ++id) {
    const Node& n = g.node(id);
    if ((n.a >= 0 && live[static_cast<size_t>(n.a)]) ||
        (n.b >= 0 && live[static_cast<size_t>(n.b)]))
      live[static_cast<size_t>(id)] = 1;
  }
  std::vector<char> active(static_cast<size_t>(top) + 1, 0);
  for (NodeId id = 0; id <= top; ++id)
    active[static_cast<size_t>(id)] = anc[static_cast<size_t>(id)] && live[static_cast<size_t>(id)];

  if (create_graph && !g.allow_nonsmooth_second_order) {
    for (NodeId id = 0; id <= top; ++id)
      if (active[static_cast<size_t>(id)] && !g.node(id).smooth)
        throw ConfigError(std::string("non-smooth op '") + op_name(g.node(id).op) +
                          "' at node " + std::to_string(id) +
                          " in a second-order path; replace it with a smooth surrogate or set "
                          "allow_nonsmooth_second_order");
  }

  std::vector<NodeId> adj(static_cast<size_t>(top) + 1, -1);
  adj[static_cast<size_t>(top)] = constant(g, Tensor::full(g.value(top).shape(), 1.0));

  auto accumulate = [&](NodeId target, NodeId contrib) {
    if (target < 0 || target > top || !active[static_cast<size_t>(target)]) return;
    NodeId& slot = adj[static_cast<size_t>(target)];
    slot = slot < 0 ? contrib : add(g, slot, contrib);
  };

  for (NodeId id = top; id >= 0; --id) {
    if (!active[static_cast<size_t>(id)] || adj[static_cast<size_t>(id)] < 0) continue;
    const NodeId in_a = g.node(id).a, in_b = g.node(id).b;
    if (g.node(id).op == Op::kConstant || g.node(id).op == Op::kParameter) continue;
    Vjp d = emit_vjp(g, id, adj[static_cast<size_t>(id)]);
    if (in_a >= 0 && d.da >= 0) accumulate(in_a, d.da);
    if (in_b >= 0 && d.db >= 0) accumulate(in_b, d.db);
  }

  std::vector<NodeId> result;
  result.reserve(wrt.size());
  for (NodeId w : wrt) {
    NodeId a = w <= top ? adj[static_cast<size_t>(w)] : -1;
    if (a < 0) a = constant(g, Tensor::zeros(g.value(w).shape()));
    result.push_back(a);
  }
  return result;
}

GradResult grad(Graph& g, NodeId out, const ParamSet& wrt, bool create_graph) {
  auto ids = param_node_ids(g, wrt);
  auto nodes = grad_nodes(g, out, ids, create_graph);
  GradResult r;
  r.nodes = nodes;
  for (int64_t i = 0; i < wrt.count(); ++i) {
    const auto& e = wrt.entry(i);
    r.grads.add(e.name, g.value(nodes[static_cast<size_t>(i)]), e.nonneg);
  }
  return r;
}

namespace {

// <grad_nodes, flat vector> as a scalar graph node
NodeId contract_with_vector(Graph& g, const std::vector<NodeId>& grads,
                            std::span<const double> v) {
  NodeId acc = -1;
  size_t off = 0;
  for (NodeId gn : grads) {
    const Tensor& gv = g.value(gn);
    auto n = static_cast<size_t>(gv.size());
    Tensor vi(gv.shape(),
              std::vector<double>(v.begin() + static_cast<ptrdiff_t>(off),
                                  v.begin() + static_cast<ptrdiff_t>(off + n)));
    NodeId term = sum(g, mul(g, gn, constant(g, std::move(vi))));
    acc = acc < 0 ? term : add(g, acc, term);
    off += n;
  }
  return acc;
}

std::vector<double> read_flat(const Graph& g, const std::vector<NodeId>& ids) {
  std::vector<double> out;
  for (NodeId id : ids) {
    const Tensor& t = g.value(id);
    out.insert(out.end(), t.vec().begin(), t.vec().end());
  }
  return out;
}

}  // namespace

HvpOperator::HvpOperator(Graph& g, NodeId loss, const ParamSet& params)
    : g_(&g), wrt_(param_node_ids(g, params)), dim_(params.dim()) {
  g1_ = grad_nodes(g, loss, wrt_, /*create_graph=*/true);
}

std::vector<double> HvpOperator::apply(std::span<const double> v) {
  if (static_cast<int64_t>(v.size()) != dim_)
    throw ContractError("hvp vector dimension " + std::to_string(v.size()) +
                        " does not match parameter dimension " + std::to_string(dim_));
  NodeId s = contract_with_vector(*g_, g1_, v);
  auto g2 = grad_nodes(*g_, s, wrt_, /*create_graph=*/false);
  return read_flat(*g_, g2);
}

std::vector<double> HvpOperator::grad_values() const { return read_flat(*g_, g1_); }

std::vector<double> hvp(Graph& g, NodeId loss, const ParamSet& params,
                        std::span<const double> v) {
  HvpOperator op(g, loss, params);
  return op.apply(v);
}

std::vector<double> mixed_vjp(Graph& g, NodeId loss, const ParamSet& params_w,
                              const ParamSet& params_phi, std::span<const double> p) {
  if (static_cast<int64_t>(p.size()) != params_w.dim())
    throw ContractError("mixed_vjp vector dimension " + std::to_string(p.size()) +
                        " does not match |w| = " + std::to_string(params_w.dim()));
  auto w_ids = param_node_ids(g, params_w);
  auto phi_ids = param_node_ids(g, params_phi);
  auto g1 = grad_nodes(g, loss, w_ids, /*create_graph=*/true);
  NodeId s = contract_with_vector(g, g1, p);
  auto g2 = grad_nodes(g, s, phi_ids, /*create_graph=*/false);
  return read_flat(g, g2);
}

}  // namespace auxi
