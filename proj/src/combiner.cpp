#include "auxi/combiner.hpp"

#include <algorithm>
#include <cmath>

#include "auxi/autodiff.hpp"
#include "auxi/errors.hpp"

namespace auxi {

const char* combiner_kind_name(CombinerKind k) {
  switch (k) {
    case CombinerKind::kLinear: return "linear";
    case CombinerKind::kDeepLinear: return "deep-linear";
    case CombinerKind::kNonlinear: return "nonlinear";
    case CombinerKind::kConvNet: return "convnet";
    case CombinerKind::kPolyLinear: return "poly-linear";
  }
  return "?";
}

CombinerKind combiner_kind_from(std::string_view name) {
  if (name == "linear") return CombinerKind::kLinear;
  if (name == "deep-linear") return CombinerKind::kDeepLinear;
  if (name == "nonlinear") return CombinerKind::kNonlinear;
  if (name == "convnet") return CombinerKind::kConvNet;
  if (name == "poly-linear") return CombinerKind::kPolyLinear;
  throw ConfigError("unknown combiner kind: " + std::string(name));
}

CombinerSpec make_combiner(CombinerKind kind, int64_t num_aux) {
  CombinerSpec spec;
  spec.kind = kind;
  spec.num_aux = num_aux;
  spec.include_main =
      kind == CombinerKind::kNonlinear || kind == CombinerKind::kPolyLinear;
  return spec;
}

int64_t combiner_input_count(const CombinerSpec& spec) {
  return spec.num_aux + (spec.include_main ? 1 : 0);
}

namespace {

// combinations with repetition of {0..n-1}, sizes 1..degree, by degree then lex
void enumerate_monomials(int64_t n, int64_t degree,
                         const std::function<void(const std::vector<int64_t>&)>& fn) {
  std::vector<int64_t> idx;
  std::function<void(int64_t, int64_t)> rec = [&](int64_t lo, int64_t left) {
    if (left == 0) {
      fn(idx);
      return;
    }
    for (int64_t i = lo; i < n; ++i) {
      idx.push_back(i);
      rec(i, left - 1);
      idx.pop_back();
    }
  };
  for (int64_t d = 1; d <= degree; ++d) rec(0, d);
}

std::string monomial_label(const std::vector<int64_t>& idx,
                           const std::vector<std::string>& names) {
  std::string out;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j < idx.size() && idx[j] == idx[i]) ++j;
    if (!out.empty()) out += "*";
    out += names[static_cast<size_t>(idx[i])];
    if (j - i > 1) out += "^" + std::to_string(j - i);
    i = j;
  }
  return out;
}

std::vector<std::string> input_names(const CombinerSpec& spec,
                                     const std::vector<std::string>& aux_labels) {
  std::vector<std::string> names;
  if (spec.include_main) names.push_back("main");
  for (int64_t j = 0; j < spec.num_aux; ++j)
    names.push_back(j < static_cast<int64_t>(aux_labels.size())
                        ? aux_labels[static_cast<size_t>(j)]
                        : "aux" + std::to_string(j));
  return names;
}

std::vector<NodeId> g_inputs(const CombinerSpec& spec, const LossVector& lv) {
  if (static_cast<int64_t>(lv.aux.size()) != spec.num_aux)
    throw ContractError("loss vector has " + std::to_string(lv.aux.size()) +
                        " auxiliaries, combiner expects " + std::to_string(spec.num_aux));
  std::vector<NodeId> in;
  if (spec.include_main) in.push_back(lv.main);
  in.insert(in.end(), lv.aux.begin(), lv.aux.end());
  return in;
}

// out_k = sum_j w[k,j] * in[j] (+ b[k]); shape-generic over the entry shape
std::vector<NodeId> affine_list(Graph& g, NodeId w, NodeId b, const std::vector<NodeId>& in) {
  const Tensor& wv = g.value(w);
  int64_t out_n = wv.dim(0), in_n = wv.dim(1);
  if (in_n != static_cast<int64_t>(in.size()))
    throw ContractError("affine fan-in mismatch");
  std::vector<NodeId> out;
  out.reserve(static_cast<size_t>(out_n));
  for (int64_t k = 0; k < out_n; ++k) {
    NodeId acc = -1;
    for (int64_t j = 0; j < in_n; ++j) {
      NodeId term = mul(g, at(g, w, {k, j}), in[static_cast<size_t>(j)]);
      acc = acc < 0 ? term : add(g, acc, term);
    }
    if (acc < 0) acc = scalar_const(g, 0.0);
    if (b >= 0) acc = add(g, acc, at(g, b, {k}));
    out.push_back(acc);
  }
  return out;
}

// softplus shifted to pass through the origin: keeps a monotone head while
// an all-zero network still contributes nothing
NodeId monotone_head(Graph& g, NodeId z) {
  return add(g, softplus(g, z), scalar_const(g, -std::log(2.0)));
}

NodeId require_param(const Graph& g, const std::string& name) {
  NodeId id = g.param(name);
  if (id < 0) throw ConfigError("combiner parameter not bound: " + name);
  return id;
}

std::vector<int64_t> deep_widths(const CombinerSpec& spec) {
  // F -> width x (depth-1) -> 1
  std::vector<int64_t> w;
  w.push_back(combiner_input_count(spec));
  for (int64_t d = 0; d + 1 < spec.depth; ++d) w.push_back(spec.width);
  w.push_back(1);
  return w;
}

Conv2dSpec conv_layer_spec(const CombinerSpec& spec, int64_t layer) {
  Conv2dSpec c;
  c.in_ch = layer == 0 ? spec.num_aux + 1 : spec.conv_channels;
  c.out_ch = spec.conv_channels;
  c.kh = c.kw = spec.kernel;
  c.stride = 1;
  c.pad = 0;
  c.act = Act::kSoftplus;
  c.nonneg = spec.monotone;
  return c;
}

}  // namespace

int64_t combiner_feature_count(const CombinerSpec& spec) {
  int64_t n = combiner_input_count(spec);
  if (spec.kind == CombinerKind::kPolyLinear) {
    int64_t count = 0;
    enumerate_monomials(n, spec.poly_degree, [&](const std::vector<int64_t>&) { ++count; });
    return count;
  }
  return n;
}

std::vector<std::string> combiner_feature_labels(const CombinerSpec& spec,
                                                 const std::vector<std::string>& aux_labels) {
  auto names = input_names(spec, aux_labels);
  if (spec.kind != CombinerKind::kPolyLinear) return names;
  std::vector<std::string> out;
  enumerate_monomials(static_cast<int64_t>(names.size()), spec.poly_degree,
                      [&](const std::vector<int64_t>& idx) {
                        out.push_back(monomial_label(idx, names));
                      });
  return out;
}

ParamSet combiner_init(const CombinerSpec& spec, Rng& rng, const std::string& prefix) {
  ParamSet ps;
  switch (spec.kind) {
    case CombinerKind::kLinear:
    case CombinerKind::kPolyLinear: {
      int64_t f = combiner_feature_count(spec);
      ps.add(prefix + ".w", Tensor::full({1, std::max<int64_t>(f, 1)}, spec.init_weight),
             spec.monotone);
      return ps;
    }
    case CombinerKind::kDeepLinear: {
      auto widths = deep_widths(spec);
      for (size_t k = 0; k + 1 < widths.size(); ++k) {
        DenseSpec d{widths[k], widths[k + 1], Act::kIdentity, spec.monotone, false,
                    /*bias=*/false};
        ParamSet layer = dense_init(d, prefix + ".l" + std::to_string(k), rng);
        for (auto& e : layer) ps.add(e.name, std::move(e.value), e.nonneg);
      }
      return ps;
    }
    case CombinerKind::kNonlinear: {
      std::vector<int64_t> hidden(static_cast<size_t>(spec.depth), spec.width);
      MlpSpec m = mlp_spec(combiner_input_count(spec), hidden, 1, Act::kSoftplus,
                           Act::kIdentity, spec.monotone);
      return mlp_init(m, prefix, rng);
    }
    case CombinerKind::kConvNet: {
      for (int64_t l = 0; l < spec.conv_layers; ++l) {
        ParamSet layer = conv2d_init(conv_layer_spec(spec, l), prefix + ".c" + std::to_string(l),
                                     rng);
        for (auto& e : layer) ps.add(e.name, std::move(e.value), e.nonneg);
      }
      DenseSpec head{spec.conv_channels, 1, Act::kIdentity, spec.monotone, false, true};
      ParamSet h = dense_init(head, prefix + ".head", rng);
      for (auto& e : h) ps.add(e.name, std::move(e.value), e.nonneg);
      return ps;
    }
  }
  throw ConfigError("bad combiner kind");
}

LossVector poly_features(Graph& g, const LossVector& losses, int64_t degree, bool include_main) {
  if (degree < 1) throw ContractError("poly degree must be >= 1");
  std::vector<NodeId> base;
  std::vector<std::string> names;
  if (include_main) {
    base.push_back(losses.main);
    names.push_back("main");
  }
  for (size_t j = 0; j < losses.aux.size(); ++j) {
    base.push_back(losses.aux[j]);
    names.push_back(j < losses.labels.size() ? losses.labels[j] : "aux" + std::to_string(j));
  }
  LossVector out;
  out.main = losses.main;
  enumerate_monomials(static_cast<int64_t>(base.size()), degree,
                      [&](const std::vector<int64_t>& idx) {
                        NodeId prod = base[static_cast<size_t>(idx[0])];
                        for (size_t i = 1; i < idx.size(); ++i)
                          prod = mul(g, prod, base[static_cast<size_t>(idx[i])]);
                        out.aux.push_back(prod);
                        out.labels.push_back(monomial_label(idx, names));
                      });
  return out;
}

NodeId combiner_g(Graph& g, const CombinerSpec& spec, const std::string& prefix,
                  const LossVector& losses) {
  switch (spec.kind) {
    case CombinerKind::kLinear: {
      auto in = g_inputs(spec, losses);
      if (in.empty()) return scalar_const(g, 0.0);
      return affine_list(g, require_param(g, prefix + ".w"), -1, in)[0];
    }
    case CombinerKind::kPolyLinear: {
      LossVector feats = poly_features(g, losses, spec.poly_degree, spec.include_main);
      // monomials enumerate main explicitly; hand affine the feature list
      if (feats.aux.empty()) return scalar_const(g, 0.0);
      return affine_list(g, require_param(g, prefix + ".w"), -1, feats.aux)[0];
    }
    case CombinerKind::kDeepLinear: {
      auto h = g_inputs(spec, losses);
      auto widths = deep_widths(spec);
      for (size_t k = 0; k + 1 < widths.size(); ++k)
        h = affine_list(g, require_param(g, prefix + ".l" + std::to_string(k) + ".w"), -1, h);
      return h[0];
    }
    case CombinerKind::kNonlinear: {
      auto h = g_inputs(spec, losses);
      for (int64_t k = 0; k < spec.depth; ++k) {
        std::string lp = prefix + ".l" + std::to_string(k);
        h = affine_list(g, require_param(g, lp + ".w"), require_param(g, lp + ".b"), h);
        for (auto& n : h) n = softplus(g, n);
      }
      std::string lp = prefix + ".l" + std::to_string(spec.depth);
      NodeId z = affine_list(g, require_param(g, lp + ".w"), require_param(g, lp + ".b"), h)[0];
      return spec.monotone ? monotone_head(g, z) : z;
    }
    case CombinerKind::kConvNet:
      throw ContractError("ConvNet combiner expects a loss-image input");
  }
  throw ConfigError("bad combiner kind");
}

NodeId combine(Graph& g, const CombinerSpec& spec, const std::string& prefix,
               const LossVector& losses) {
  return add(g, losses.main, combiner_g(g, spec, prefix, losses));
}

namespace {

NodeId convnet_g(Graph& g, const CombinerSpec& spec, const std::string& prefix, NodeId image) {
  NodeId h = image;
  for (int64_t l = 0; l < spec.conv_layers; ++l)
    h = conv2d_forward(g, conv_layer_spec(spec, l), prefix + ".c" + std::to_string(l), h);
  // global mean pool per channel, then a dense head to a scalar
  const Tensor& hv = g.value(h);
  int64_t ch = hv.dim(0), hh = hv.dim(1), ww = hv.dim(2);
  std::vector<NodeId> pooled;
  pooled.reserve(static_cast<size_t>(ch));
  for (int64_t c = 0; c < ch; ++c)
    pooled.push_back(mean(g, slice(g, h, {c, 0, 0}, {1, hh, ww})));
  NodeId z = affine_list(g, require_param(g, prefix + ".head.w"),
                         require_param(g, prefix + ".head.b"), pooled)[0];
  return spec.monotone ? monotone_head(g, z) : z;
}

}  // namespace

NodeId combine(Graph& g, const CombinerSpec& spec, const std::string& prefix,
               const LossImage& losses) {
  if (spec.kind != CombinerKind::kConvNet)
    throw ContractError("loss-image input requires the ConvNet combiner");
  const Tensor& img = g.value(losses.image);
  if (img.rank() != 3 || img.dim(0) != spec.num_aux + 1)
    throw ContractError("loss-image must be (1+K,H,W), got " + img.shape_str());
  NodeId main_term = mean(g, slice(g, losses.image, {0, 0, 0}, {1, img.dim(1), img.dim(2)}));
  return add(g, main_term, convnet_g(g, spec, prefix, losses.image));
}

std::vector<double> adaptive_weights(const CombinerSpec& spec, const ParamSet& phi,
                                     const std::vector<double>& losses) {
  if (static_cast<int64_t>(losses.size()) != spec.num_aux + 1)
    throw ContractError("adaptive_weights expects K+1 loss values, main first");
  Graph g;
  bind(g, phi);
  ParamSet leaves;
  leaves.add("l.main", Tensor::scalar(losses[0]));
  for (int64_t j = 0; j < spec.num_aux; ++j)
    leaves.add("l.a" + std::to_string(j), Tensor::scalar(losses[static_cast<size_t>(j) + 1]));
  bind(g, leaves);
  LossVector lv;
  lv.main = g.param("l.main");
  for (int64_t j = 0; j < spec.num_aux; ++j) lv.aux.push_back(g.param("l.a" + std::to_string(j)));
  NodeId gn = combiner_g(g, spec, "g", lv);
  auto r = grad(g, gn, leaves);
  return r.grads.flatten();
}

Tensor adaptive_weight_map(const CombinerSpec& spec, const ParamSet& phi,
                           const Tensor& loss_image) {
  Graph g;
  bind(g, phi);
  ParamSet leaves;
  leaves.add("img", loss_image);
  bind(g, leaves);
  LossImage li{g.param("img")};
  NodeId lt = combine(g, spec, "g", li);
  auto r = grad(g, lt, leaves);
  const Tensor& full = r.grads.at("img");
  int64_t ch = full.dim(0), h = full.dim(1), w = full.dim(2);
  Tensor map({h, w});
  for (int64_t c = 0; c < ch; ++c)
    for (int64_t i = 0; i < h * w; ++i) map[i] += full[c * h * w + i];
  return map;
}

ParamSet project_monotone(ParamSet phi) {
  for (auto& e : phi)
    if (e.nonneg)
      for (auto& v : e.value.vec()) v = std::max(v, 0.0);
  return phi;
}

}  // namespace auxi
