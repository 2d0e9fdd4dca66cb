#pragma once

// Finite-difference checking utilities shared by the unit suites and the
// acceptance runner. Oracles here are independent of the reverse pass they
// check: they only use forward evaluation.

#include <functional>
#include <string>
#include <vector>

#include "auxi/autodiff.hpp"
#include "auxi/graph.hpp"
#include "auxi/param.hpp"
#include "auxi/rng.hpp"

namespace auxi::testing {

using Builder = std::function<NodeId(Graph&, const ParamSet&)>;

struct GradCase {
  std::string name;
  Builder build;
  ParamSet params;  // shapes; values are replaced per trial
  std::function<void(ParamSet&, Rng&)> randomize;  // default: uniform [-2, 2]
};

inline void default_randomize(ParamSet& ps, Rng& rng) {
  for (auto& e : ps)
    for (auto& v : e.value.vec()) v = rng.uniform(-2.0, 2.0);
}

// uniform draw in [lo, hi]
inline std::function<void(ParamSet&, Rng&)> uniform_randomizer(double lo, double hi) {
  return [lo, hi](ParamSet& ps, Rng& rng) {
    for (auto& e : ps)
      for (auto& v : e.value.vec()) v = rng.uniform(lo, hi);
  };
}

// magnitude in [lo, hi], random sign: keeps inputs away from a kink at 0
inline std::function<void(ParamSet&, Rng&)> signed_randomizer(double lo, double hi) {
  return [lo, hi](ParamSet& ps, Rng& rng) {
    for (auto& e : ps)
      for (auto& v : e.value.vec())
        v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  };
}

inline double eval_at(const GradCase& c, const ParamSet& ps) {
  Graph g;
  bind(g, ps);
  NodeId out = c.build(g, ps);
  return g.value(out).item();
}

// central finite differences of the scalar output w.r.t. every coordinate
inline std::vector<double> numeric_grad(const GradCase& c, const ParamSet& at, double step) {
  std::vector<double> flat = at.flatten();
  std::vector<double> out(flat.size());
  ParamSet ps = at;
  for (size_t i = 0; i < flat.size(); ++i) {
    std::vector<double> hi = flat, lo = flat;
    hi[i] += step;
    lo[i] -= step;
    ps.unflatten(hi);
    double fhi = eval_at(c, ps);
    ps.unflatten(lo);
    double flo = eval_at(c, ps);
    out[i] = (fhi - flo) / (2 * step);
  }
  return out;
}

inline double rel_err(double a, double b) {
  double denom = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

// Max relative error between reverse-mode and central differences over
// `trials` random draws.
inline double gradcheck(const GradCase& c, int trials, Rng& rng, double step = 1e-5) {
  double worst = 0;
  ParamSet ps = c.params;
  auto randomize = c.randomize ? c.randomize : default_randomize;
  for (int t = 0; t < trials; ++t) {
    randomize(ps, rng);
    Graph g;
    g.allow_nonsmooth_second_order = true;  // first-order checks cover relu/clip too
    bind(g, ps);
    NodeId out = c.build(g, ps);
    auto analytic = grad(g, out, ps).grads.flatten();
    auto numeric = numeric_grad(c, ps, step);
    for (size_t i = 0; i < analytic.size(); ++i)
      worst = std::max(worst, rel_err(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace auxi::testing
