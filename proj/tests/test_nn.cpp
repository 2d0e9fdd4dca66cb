#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "auxi/autodiff.hpp"
#include "auxi/errors.hpp"
#include "auxi/nn.hpp"
#include "support/gradcheck.hpp"

using namespace auxi;

TEST_CASE("mlp_forward: worked values") {
  {  // 1-layer identity net: w=2, b=1, x=3 -> 7
    MlpSpec spec = mlp_spec(1, {}, 1, Act::kIdentity);
    ParamSet ps;
    ps.add("f.l0.w", Tensor({1, 1}, {2.0}));
    ps.add("f.l0.b", Tensor({1}, {1.0}));
    Graph g;
    bind(g, ps);
    NodeId y = mlp_forward(g, spec, "f", constant(g, Tensor::from({3.0})));
    CHECK(g.value(y)[0] == 7.0);
  }
  {  // zero weights -> bias
    MlpSpec spec = mlp_spec(3, {}, 2, Act::kIdentity);
    ParamSet ps;
    ps.add("f.l0.w", Tensor::zeros({2, 3}));
    ps.add("f.l0.b", Tensor::from({0.5, -1.5}));
    Graph g;
    bind(g, ps);
    NodeId y = mlp_forward(g, spec, "f", constant(g, Tensor::from({9, 8, 7})));
    CHECK(g.value(y)[0] == 0.5);
    CHECK(g.value(y)[1] == -1.5);
  }
  {  // 2-layer softplus net vs hand-computed composition
    MlpSpec spec = mlp_spec(2, {2}, 1, Act::kSoftplus);
    ParamSet ps;
    ps.add("f.l0.w", Tensor({2, 2}, {0.3, -0.7, 1.1, 0.4}));
    ps.add("f.l0.b", Tensor::from({0.1, -0.2}));
    ps.add("f.l1.w", Tensor({1, 2}, {0.9, -0.5}));
    ps.add("f.l1.b", Tensor::from({0.25}));
    Graph g;
    bind(g, ps);
    double x0 = 0.6, x1 = -1.3;
    NodeId y = mlp_forward(g, spec, "f", constant(g, Tensor::from({x0, x1})));
    auto sp = [](double v) { return std::log1p(std::exp(v)); };
    double h0 = sp(0.3 * x0 - 0.7 * x1 + 0.1);
    double h1 = sp(1.1 * x0 + 0.4 * x1 - 0.2);
    double want = 0.9 * h0 - 0.5 * h1 + 0.25;
    CHECK(std::abs(g.value(y)[0] - want) < 1e-12);
  }
  {  // shape mismatch
    MlpSpec spec = mlp_spec(2, {}, 1, Act::kIdentity);
    Rng rng(1);
    ParamSet ps = mlp_init(spec, "f", rng);
    Graph g;
    bind(g, ps);
    CHECK_THROWS_AS(mlp_forward(g, spec, "f", constant(g, Tensor::from({1, 2, 3}))), ContractError);
  }
}

TEST_CASE("mlp_forward: batched rows equal per-sample evaluation") {
  Rng rng(5);
  MlpSpec spec = mlp_spec(3, {4}, 2, Act::kSoftplus);
  ParamSet ps = mlp_init(spec, "f", rng);
  Tensor batch({4, 3});
  for (int64_t i = 0; i < batch.size(); ++i) batch[i] = rng.normal();

  Graph g;
  bind(g, ps);
  NodeId yb = mlp_forward(g, spec, "f", constant(g, batch));
  for (int64_t i = 0; i < 4; ++i) {
    Tensor row({3});
    for (int64_t j = 0; j < 3; ++j) row[j] = batch[i * 3 + j];
    NodeId yi = mlp_forward(g, spec, "f", constant(g, row));
    for (int64_t j = 0; j < 2; ++j)
      CHECK(g.value(yb)[i * 2 + j] == doctest::Approx(g.value(yi)[j]).epsilon(1e-14));
  }
}

TEST_CASE("cross_entropy: worked values") {
  {  // uniform logits, M classes, hard target -> ln M
    for (int64_t m : {2, 5, 10}) {
      Graph g;
      NodeId logits = constant(g, Tensor::full({m}, 0.37));
      NodeId ce = cross_entropy(g, logits, int64_t{0});
      CHECK(g.value(ce).item() ==
            doctest::Approx(std::log(static_cast<double>(m))).epsilon(1e-13));
    }
  }
  {  // soft target equal to softmax(logits) -> entropy of that distribution
    Graph g;
    NodeId logits = constant(g, Tensor::from({0.2, -1.0, 0.8, 0.0}));
    Tensor st = g.value(softmax(g, logits));
    double entropy = 0;
    for (int64_t i = 0; i < st.size(); ++i) entropy -= st[i] * std::log(st[i]);
    NodeId ce = cross_entropy(g, logits, st);
    CHECK(g.value(ce).item() == doctest::Approx(entropy).epsilon(1e-13));
  }
  {  // logits (2,0), target class 0 -> ln(1 + e^-2)
    Graph g;
    NodeId ce = cross_entropy(g, constant(g, Tensor::from({2.0, 0.0})), int64_t{0});
    CHECK(g.value(ce).item() == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-13));
  }
  {  // off-simplex soft target
    Graph g;
    NodeId logits = constant(g, Tensor::from({1.0, 2.0}));
    CHECK_THROWS_AS(cross_entropy(g, logits, Tensor::from({0.6, 0.6})), ContractError);
    CHECK_THROWS_AS(cross_entropy(g, logits, Tensor::from({1.4, -0.4})), ContractError);
  }
}

TEST_CASE("squared_error: worked values") {
  Graph g;
  NodeId a = constant(g, Tensor::from({1.0, 3.0}));
  CHECK(g.value(squared_error(g, a, Tensor::from({1.0, 3.0}))).item() == 0.0);
  NodeId p = constant(g, Tensor::from({2.0}));
  CHECK(g.value(squared_error(g, p, Tensor::from({0.0}))).item() == 4.0);
  NodeId b = constant(g, Tensor::from({1.0, 3.0}));
  CHECK(g.value(squared_error(g, b, Tensor::from({0.0, 0.0}))).item() == 5.0);
  CHECK_THROWS_AS(squared_error(g, a, Tensor::from({1.0})), ContractError);
}

TEST_CASE("softmax outputs lie on the simplex") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    Graph g;
    Tensor x({6});
    for (int64_t i = 0; i < 6; ++i) x[i] = rng.uniform(-30, 30);
    NodeId s = softmax(g, constant(g, x));
    double total = 0;
    for (int64_t i = 0; i < 6; ++i) {
      total += g.value(s)[i];
      CHECK(g.value(s)[i] >= 0.0);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("weight-normalized layer is invariant to row rescaling of direction") {
  Rng rng(3);
  DenseSpec spec{4, 3, Act::kSoftplus, false, /*weight_norm=*/true, true};
  ParamSet ps = dense_init(spec, "wn", rng);
  Tensor x({4});
  for (int64_t i = 0; i < 4; ++i) x[i] = rng.normal();

  Graph g1;
  bind(g1, ps);
  NodeId y1 = dense_forward(g1, spec, "wn", constant(g1, x));

  ParamSet scaled = ps;
  Tensor& dir = scaled.at("wn.dir");
  for (int64_t r = 0; r < 3; ++r) {
    double m = rng.uniform(0.5, 7.0);
    for (int64_t c = 0; c < 4; ++c) dir[r * 4 + c] *= m;
  }
  Graph g2;
  bind(g2, scaled);
  NodeId y2 = dense_forward(g2, spec, "wn", constant(g2, x));

  for (int64_t i = 0; i < 3; ++i)
    CHECK(std::abs(g1.value(y1)[i] - g2.value(y2)[i]) < 1e-10);
}

namespace {

// plain nested-loop convolution over (C,H,W)
Tensor conv_reference(const Tensor& x, const Tensor& k, const Tensor& b, int64_t stride,
                      int64_t pad) {
  int64_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  int64_t co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  int64_t oh = (h + 2 * pad - kh) / stride + 1;
  int64_t ow = (w + 2 * pad - kw) / stride + 1;
  Tensor out({co, oh, ow});
  for (int64_t oc = 0; oc < co; ++oc)
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        double acc = b[oc];
        for (int64_t ic = 0; ic < ci; ++ic)
          for (int64_t u = 0; u < kh; ++u)
            for (int64_t v = 0; v < kw; ++v) {
              int64_t yy = i * stride + u - pad;
              int64_t xx = j * stride + v - pad;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += x[(ic * h + yy) * w + xx] * k[((oc * ci + ic) * kh + u) * kw + v];
            }
        out[(oc * oh + i) * ow + j] = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches the nested-loop reference on random 8x8 inputs") {
  Rng rng(17);
  for (auto [stride, pad] : std::vector<std::pair<int64_t, int64_t>>{{1, 0}, {1, 1}, {2, 1}}) {
    Conv2dSpec spec{2, 3, 3, 3, stride, pad, Act::kIdentity, false, true};
    ParamSet ps = conv2d_init(spec, "c", rng);
    Tensor x({2, 8, 8});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

    Graph g;
    bind(g, ps);
    NodeId y = conv2d_forward(g, spec, "c", constant(g, x));
    Tensor want = conv_reference(x, ps.at("c.k"), ps.at("c.b"), stride, pad);
    REQUIRE(g.value(y).shape() == want.shape());
    for (int64_t i = 0; i < want.size(); ++i) CHECK(std::abs(g.value(y)[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("layer gradients against finite differences") {
  using namespace auxi::testing;
  Rng rng(23);

  GradCase mlp_case{
      "mlp",
      [](Graph& g, const ParamSet&) {
        MlpSpec spec = mlp_spec(3, {4}, 2, Act::kSoftplus, Act::kSigmoid);
        NodeId y = mlp_forward(g, spec, "f", constant(g, Tensor::from({0.4, -1.0, 0.7})));
        return mean(g, square(g, y));
      },
      [] {
        Rng r(29);
        return mlp_init(mlp_spec(3, {4}, 2, Act::kSoftplus, Act::kSigmoid), "f", r);
      }(),
      nullptr};
  CHECK(gradcheck(mlp_case, 30, rng) < 1e-5);

  GradCase wn_case{
      "weight_norm",
      [](Graph& g, const ParamSet&) {
        DenseSpec spec{3, 2, Act::kSoftplus, false, true, true};
        NodeId y = dense_forward(g, spec, "wn", constant(g, Tensor::from({0.5, 1.0, -0.5})));
        return sum(g, square(g, y));
      },
      [] {
        Rng r(31);
        return dense_init(DenseSpec{3, 2, Act::kSoftplus, false, true, true}, "wn", r);
      }(),
      signed_randomizer(0.2, 1.5)};
  CHECK(gradcheck(wn_case, 30, rng) < 1e-5);

  GradCase conv_case{
      "conv2d",
      [](Graph& g, const ParamSet&) {
        Conv2dSpec spec{1, 2, 3, 3, 1, 1, Act::kSoftplus, false, true};
        Rng r(37);
        Tensor x({1, 5, 5});
        for (int64_t i = 0; i < x.size(); ++i) x[i] = r.normal();
        return mean(g, square(g, conv2d_forward(g, spec, "c", constant(g, x))));
      },
      [] {
        Rng r(41);
        return conv2d_init(Conv2dSpec{1, 2, 3, 3, 1, 1, Act::kSoftplus, false, true}, "c", r);
      }(),
      nullptr};
  CHECK(gradcheck(conv_case, 10, rng) < 1e-5);

  GradCase ce_case{
      "cross_entropy_soft_node",
      [](Graph& g, const ParamSet&) {
        NodeId t = softmax(g, g.param("tl"));
        return cross_entropy(g, g.param("x"), t);
      },
      [] {
        ParamSet ps;
        ps.add("x", Tensor::zeros({4}));
        ps.add("tl", Tensor::zeros({4}));
        return ps;
      }(),
      nullptr};
  CHECK(gradcheck(ce_case, 50, rng) < 1e-5);
}
