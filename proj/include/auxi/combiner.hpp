#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "auxi/graph.hpp"
#include "auxi/nn.hpp"
#include "auxi/param.hpp"
#include "auxi/rng.hpp"

namespace auxi {

// Per-sample (or per-batch, when the entries are vectors) task losses fed to
// a combiner. Entries must live in one graph; main first by convention.
struct LossVector {
  NodeId main = -1;
  std::vector<NodeId> aux;
  std::vector<std::string> labels;  // aux labels; optional
};

// Per-pixel task losses: channel 0 is the main loss, 1..K the auxiliaries.
struct LossImage {
  NodeId image = -1;  // (1+K, H, W)
};

enum class CombinerKind : uint8_t { kLinear, kDeepLinear, kNonlinear, kConvNet, kPolyLinear };

const char* combiner_kind_name(CombinerKind k);
CombinerKind combiner_kind_from(std::string_view name);

struct CombinerSpec {
  CombinerKind kind = CombinerKind::kLinear;
  int64_t num_aux = 0;  // K
  bool monotone = true;
  // Feed l_main to g as an input alongside the auxiliaries. The skip
  // connection l_main + g(...) is always present regardless.
  bool include_main = false;
  int64_t depth = 5;       // hidden layers (DeepLinear: total linear maps)
  int64_t width = 10;      // hidden units
  int64_t poly_degree = 2;
  int64_t conv_layers = 4;
  int64_t conv_channels = 8;
  int64_t kernel = 3;
  double init_weight = 1.0;  // Linear / PolyLinear initial per-task weight
};

// kind defaults: Linear and DeepLinear weight the auxiliaries only; the
// richer families see the full loss vector.
CombinerSpec make_combiner(CombinerKind kind, int64_t num_aux);

int64_t combiner_input_count(const CombinerSpec& spec);    // g's fan-in
int64_t combiner_feature_count(const CombinerSpec& spec);  // Linear/Poly weight count
std::vector<std::string> combiner_feature_labels(const CombinerSpec& spec,
                                                 const std::vector<std::string>& aux_labels);

ParamSet combiner_init(const CombinerSpec& spec, Rng& rng, const std::string& prefix = "g");

// l_main + g(l; phi). Parameters must already be bound in g under `prefix`.
NodeId combine(Graph& g, const CombinerSpec& spec, const std::string& prefix,
               const LossVector& losses);
NodeId combine(Graph& g, const CombinerSpec& spec, const std::string& prefix,
               const LossImage& losses);

// g alone, without the skip connection.
NodeId combiner_g(Graph& g, const CombinerSpec& spec, const std::string& prefix,
                  const LossVector& losses);

// All monomials of the entries up to `degree`, ordered by degree then
// lexicographically. The main entry participates when include_main is set;
// the returned vector keeps the original main for the skip connection.
LossVector poly_features(Graph& g, const LossVector& losses, int64_t degree, bool include_main);

// (dg/dl_main, dg/dl_1, ..., dg/dl_K) at the given loss values (main first).
std::vector<double> adaptive_weights(const CombinerSpec& spec, const ParamSet& phi,
                                     const std::vector<double>& losses);

// Per-pixel weight map sum_j dL_T/dl_j for a ConvNet combiner, shape (H, W).
Tensor adaptive_weight_map(const CombinerSpec& spec, const ParamSet& phi,
                           const Tensor& loss_image);

// Clamp every nonneg-flagged weight entry to >= 0. Biases are exempt.
ParamSet project_monotone(ParamSet phi);

}  // namespace auxi
