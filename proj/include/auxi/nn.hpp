#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "auxi/graph.hpp"
#include "auxi/param.hpp"
#include "auxi/rng.hpp"

namespace auxi {

enum class Act : uint8_t { kIdentity, kSoftplus, kSigmoid };

NodeId apply_act(Graph& g, Act act, NodeId x);

// One dense layer. With weight_norm the effective weight is
// scale_i * row_i(direction) / ||row_i(direction)||.
struct DenseSpec {
  int64_t in = 0;
  int64_t out = 0;
  Act act = Act::kIdentity;
  bool nonneg = false;      // weights clipped to >= 0 by monotone projection
  bool weight_norm = false;
  bool bias = true;
};

struct MlpSpec {
  std::vector<DenseSpec> layers;
  int64_t in() const { return layers.front().in; }
  int64_t out() const { return layers.back().out; }
};

// in -> hidden... -> out with hidden_act between layers and out_act on top
MlpSpec mlp_spec(int64_t in, const std::vector<int64_t>& hidden, int64_t out, Act hidden_act,
                 Act out_act = Act::kIdentity, bool nonneg = false, bool weight_norm = false);

// Parameter names: <prefix>.l<k>.w/.b (plain) or .dir/.scale/.b (weight norm).
ParamSet dense_init(const DenseSpec& spec, const std::string& prefix, Rng& rng);
ParamSet mlp_init(const MlpSpec& spec, const std::string& prefix, Rng& rng);

// x: (in) for one sample or (n, in) for a batch.
NodeId dense_forward(Graph& g, const DenseSpec& spec, const std::string& prefix, NodeId x);
NodeId mlp_forward(Graph& g, const MlpSpec& spec, const std::string& prefix, NodeId x);

// -sum target * log softmax(logits), logits rank-1
NodeId cross_entropy(Graph& g, NodeId logits, int64_t target_class);
NodeId cross_entropy(Graph& g, NodeId logits, const Tensor& soft_target);  // simplex-checked
NodeId cross_entropy(Graph& g, NodeId logits, NodeId soft_target);         // target is a node

// mean of squared differences
NodeId squared_error(Graph& g, NodeId pred, NodeId target);
NodeId squared_error(Graph& g, NodeId pred, const Tensor& target);

// log sum exp of a rank-1 node, shift taken from current values
NodeId logsumexp(Graph& g, NodeId x);

struct Conv2dSpec {
  int64_t in_ch = 1;
  int64_t out_ch = 1;
  int64_t kh = 3;
  int64_t kw = 3;
  int64_t stride = 1;
  int64_t pad = 0;
  Act act = Act::kIdentity;
  bool nonneg = false;
  bool bias = true;
};

// Parameter names: <prefix>.k (out,in,kh,kw) and <prefix>.b (out).
ParamSet conv2d_init(const Conv2dSpec& spec, const std::string& prefix, Rng& rng);

// x: (in_ch, H, W) -> (out_ch, H', W')
NodeId conv2d_forward(Graph& g, const Conv2dSpec& spec, const std::string& prefix, NodeId x);

}  // namespace auxi
