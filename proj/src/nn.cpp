#include "auxi/nn.hpp"

#include <cmath>

#include "auxi/errors.hpp"

namespace auxi {

NodeId apply_act(Graph& g, Act act, NodeId x) {
  switch (act) {
    case Act::kIdentity: return x;
    case Act::kSoftplus: return softplus(g, x);
    case Act::kSigmoid: return sigmoid(g, x);
  }
  throw ContractError("bad activation");
}

MlpSpec mlp_spec(int64_t in, const std::vector<int64_t>& hidden, int64_t out, Act hidden_act,
                 Act out_act, bool nonneg, bool weight_norm) {
  MlpSpec spec;
  int64_t prev = in;
  for (int64_t h : hidden) {
    spec.layers.push_back({prev, h, hidden_act, nonneg, weight_norm, true});
    prev = h;
  }
  spec.layers.push_back({prev, out, out_act, nonneg, weight_norm, true});
  return spec;
}

ParamSet dense_init(const DenseSpec& spec, const std::string& prefix, Rng& rng) {
  ParamSet ps;
  double bound = std::sqrt(1.0 / static_cast<double>(spec.in));
  Tensor w({spec.out, spec.in});
  for (int64_t i = 0; i < w.size(); ++i) {
    double v = rng.uniform(-bound, bound);
    w[i] = spec.nonneg ? std::abs(v) : v;
  }
  if (spec.weight_norm) {
    Tensor scale({spec.out});
    for (int64_t r = 0; r < spec.out; ++r) {
      double s2 = 0;
      for (int64_t c = 0; c < spec.in; ++c) s2 += w[r * spec.in + c] * w[r * spec.in + c];
      scale[r] = std::sqrt(s2);
    }
    ps.add(prefix + ".dir", std::move(w));
    ps.add(prefix + ".scale", std::move(scale), spec.nonneg);
  } else {
    ps.add(prefix + ".w", std::move(w), spec.nonneg);
  }
  if (spec.bias) ps.add(prefix + ".b", Tensor::zeros({spec.out}));
  return ps;
}

ParamSet mlp_init(const MlpSpec& spec, const std::string& prefix, Rng& rng) {
  ParamSet ps;
  for (size_t k = 0; k < spec.layers.size(); ++k) {
    ParamSet layer = dense_init(spec.layers[k], prefix + ".l" + std::to_string(k), rng);
    for (auto& e : layer) ps.add(e.name, std::move(e.value), e.nonneg);
  }
  return ps;
}

namespace {

// effective weight node, (out, in)
NodeId dense_weight(Graph& g, const DenseSpec& spec, const std::string& prefix) {
  if (!spec.weight_norm) {
    NodeId w = g.param(prefix + ".w");
    if (w < 0) throw ConfigError("dense layer parameters not bound: " + prefix);
    return w;
  }
  NodeId dir = g.param(prefix + ".dir");
  NodeId sc = g.param(prefix + ".scale");
  if (dir < 0 || sc < 0) throw ConfigError("weight-norm layer parameters not bound: " + prefix);
  NodeId inv_norm = pow_(g, sum(g, square(g, dir), Reduce::kPerRow), -0.5);
  return mul(g, dir, mul(g, sc, inv_norm));  // row scale
}

}  // namespace

NodeId dense_forward(Graph& g, const DenseSpec& spec, const std::string& prefix, NodeId x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 1 && xv.rank() != 2)
    throw ContractError("dense input must be rank 1 or 2, got " + xv.shape_str());
  int64_t in_dim = xv.rank() == 1 ? xv.dim(0) : xv.dim(1);
  if (in_dim != spec.in)
    throw ContractError("dense input width " + std::to_string(in_dim) + " != layer input " +
                        std::to_string(spec.in));
  NodeId w = dense_weight(g, spec, prefix);
  NodeId y = xv.rank() == 1 ? matmul(g, w, x) : matmul(g, x, w, false, /*trans_b=*/true);
  if (spec.bias) y = add(g, y, g.param(prefix + ".b"));
  return apply_act(g, spec.act, y);
}

NodeId mlp_forward(Graph& g, const MlpSpec& spec, const std::string& prefix, NodeId x) {
  NodeId h = x;
  for (size_t k = 0; k < spec.layers.size(); ++k)
    h = dense_forward(g, spec.layers[k], prefix + ".l" + std::to_string(k), h);
  return h;
}

NodeId logsumexp(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 1) throw ContractError("logsumexp expects a rank-1 input");
  double c = xv[0];
  for (int64_t i = 1; i < xv.size(); ++i) c = std::max(c, xv[i]);
  NodeId shifted = add(g, x, scalar_const(g, -c));
  return add(g, log_(g, sum(g, exp_(g, shifted))), scalar_const(g, c));
}

NodeId cross_entropy(Graph& g, NodeId logits, NodeId soft_target) {
  const Tensor& lv = g.value(logits);
  const Tensor& tv = g.value(soft_target);
  if (lv.rank() != 1 || !lv.same_shape(tv))
    throw ContractError("cross_entropy shape mismatch: logits " + lv.shape_str() + ", target " +
                        tv.shape_str());
  // -<t, x - lse(x) 1> = lse(x) * sum(t) - <t, x>; sum(t) == 1 on the simplex
  return sub(g, logsumexp(g, logits), dot(g, soft_target, logits));
}

NodeId cross_entropy(Graph& g, NodeId logits, const Tensor& soft_target) {
  double s = 0, lo = soft_target[0];
  for (int64_t i = 0; i < soft_target.size(); ++i) {
    s += soft_target[i];
    lo = std::min(lo, soft_target[i]);
  }
  if (std::abs(s - 1.0) > 1e-6 || lo < -1e-6)
    throw ContractError("soft target is not on the simplex (sum=" + std::to_string(s) +
                        ", min=" + std::to_string(lo) + ")");
  return cross_entropy(g, logits, constant(g, soft_target));
}

NodeId cross_entropy(Graph& g, NodeId logits, int64_t target_class) {
  const Tensor& lv = g.value(logits);
  if (lv.rank() != 1) throw ContractError("cross_entropy expects rank-1 logits");
  if (target_class < 0 || target_class >= lv.dim(0))
    throw ContractError("target class out of range");
  Tensor onehot({lv.dim(0)});
  onehot[target_class] = 1.0;
  return cross_entropy(g, logits, constant(g, std::move(onehot)));
}

NodeId squared_error(Graph& g, NodeId pred, NodeId target) {
  if (!g.value(pred).same_shape(g.value(target)))
    throw ContractError("squared_error shape mismatch: " + g.value(pred).shape_str() + " vs " +
                        g.value(target).shape_str());
  return mean(g, square(g, sub(g, pred, target)));
}

NodeId squared_error(Graph& g, NodeId pred, const Tensor& target) {
  return squared_error(g, pred, constant(g, target));
}

ParamSet conv2d_init(const Conv2dSpec& spec, const std::string& prefix, Rng& rng) {
  ParamSet ps;
  double fan_in = static_cast<double>(spec.in_ch * spec.kh * spec.kw);
  double bound = std::sqrt(1.0 / fan_in);
  Tensor k({spec.out_ch, spec.in_ch, spec.kh, spec.kw});
  for (int64_t i = 0; i < k.size(); ++i) {
    double v = rng.uniform(-bound, bound);
    k[i] = spec.nonneg ? std::abs(v) : v;
  }
  ps.add(prefix + ".k", std::move(k), spec.nonneg);
  if (spec.bias) ps.add(prefix + ".b", Tensor::zeros({spec.out_ch}));
  return ps;
}

NodeId conv2d_forward(Graph& g, const Conv2dSpec& spec, const std::string& prefix, NodeId x) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || xv.dim(0) != spec.in_ch)
    throw ContractError("conv2d input must be (in_ch,H,W), got " + xv.shape_str());
  NodeId k = g.param(prefix + ".k");
  if (k < 0) throw ConfigError("conv2d parameters not bound: " + prefix);

  int64_t h = xv.dim(1), w = xv.dim(2);
  NodeId xp = x;
  if (spec.pad > 0) {
    h += 2 * spec.pad;
    w += 2 * spec.pad;
    xp = zero_pad(g, x, {spec.in_ch, h, w}, {0, spec.pad, spec.pad});
  }
  int64_t oh = (h - spec.kh) / spec.stride + 1;
  int64_t ow = (w - spec.kw) / spec.stride + 1;
  if (oh < 1 || ow < 1) throw ContractError("conv2d kernel larger than padded input");

  NodeId out = -1;
  for (int64_t oc = 0; oc < spec.out_ch; ++oc) {
    NodeId acc = -1;
    for (int64_t ic = 0; ic < spec.in_ch; ++ic)
      for (int64_t u = 0; u < spec.kh; ++u)
        for (int64_t v = 0; v < spec.kw; ++v) {
          NodeId wscal = at(g, k, {oc, ic, u, v});
          NodeId win = reshape(
              g, slice(g, xp, {ic, u, v}, {1, oh, ow}, {1, spec.stride, spec.stride}), {oh, ow});
          NodeId term = mul(g, wscal, win);
          acc = acc < 0 ? term : add(g, acc, term);
        }
    if (spec.bias) acc = add(g, acc, at(g, g.param(prefix + ".b"), {oc}));
    NodeId chan = zero_pad(g, reshape(g, acc, {1, oh, ow}), {spec.out_ch, oh, ow}, {oc, 0, 0});
    out = out < 0 ? chan : add(g, out, chan);
  }
  return apply_act(g, spec.act, out);
}

}  // namespace auxi
