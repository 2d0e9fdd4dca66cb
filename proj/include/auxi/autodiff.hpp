#pragma once

#include <span>
#include <vector>

#include "auxi/graph.hpp"
#include "auxi/param.hpp"

namespace auxi {

// Reverse pass over the graph. The adjoints are built out of ordinary graph
// ops and appended to g, so the returned nodes can themselves be
// differentiated (grad-of-grad). `out` must be scalar-valued.
//
// When create_graph is set and the differentiated subgraph contains a
// non-smooth op (clip-min / relu), this throws ConfigError unless
// g.allow_nonsmooth_second_order is set.
std::vector<NodeId> grad_nodes(Graph& g, NodeId out, std::span<const NodeId> wrt,
                               bool create_graph = false);

struct GradResult {
  ParamSet grads;               // same names/shapes as wrt
  std::vector<NodeId> nodes;    // adjoint node per wrt entry
};

// Gradient of `out` with respect to the parameters of `wrt` (looked up by
// name among g's bound parameters).
GradResult grad(Graph& g, NodeId out, const ParamSet& wrt, bool create_graph = false);

// v . H where H is the Hessian of `loss` w.r.t. `params`, computed as the
// gradient of <grad(loss, params, create_graph=true), v>.
std::vector<double> hvp(Graph& g, NodeId loss, const ParamSet& params,
                        std::span<const double> v);

// p . (d/d_phi d/d_w loss): contracts the |w| x |phi| mixed second-derivative
// block on the left with p; result has dimension |phi|.
std::vector<double> mixed_vjp(Graph& g, NodeId loss, const ParamSet& params_w,
                              const ParamSet& params_phi, std::span<const double> p);

// Caches the first (create_graph) backward pass so repeated Hessian-vector
// products against the same loss reuse it.
class HvpOperator {
 public:
  HvpOperator(Graph& g, NodeId loss, const ParamSet& params);
  std::vector<double> apply(std::span<const double> v);
  int64_t dim() const { return dim_; }
  const std::vector<NodeId>& grad_ids() const { return g1_; }
  std::vector<double> grad_values() const;

 private:
  Graph* g_;
  std::vector<NodeId> wrt_;
  std::vector<NodeId> g1_;
  int64_t dim_ = 0;
};

// Resolve ParamSet entries to their bound parameter nodes in g.
std::vector<NodeId> param_node_ids(const Graph& g, const ParamSet& ps);

}  // namespace auxi
