#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "ttmr/autodiff/adam.hpp"
#include "ttmr/autodiff/ops.hpp"
#include "ttmr/autodiff/parameters.hpp"

namespace ttmr {
namespace {

using ad::Graph;
using ad::Var;
using testing::gradcheck;
using testing::project;
using testing::random_tensor;

constexpr double kGradTol = 1e-4;

// Direct nested-loop convolution used as the oracle for the im2col kernel.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                           int pad) {
  const long C = x.dim(0), H = x.dim(1), W = x.dim(2), O = w.dim(0), K = w.dim(2);
  const long Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  Tensor<double> out({static_cast<size_t>(O), static_cast<size_t>(Ho), static_cast<size_t>(Wo)});
  for (long o = 0; o < O; ++o)
    for (long oy = 0; oy < Ho; ++oy)
      for (long ox = 0; ox < Wo; ++ox) {
        double acc = b[o];
        for (long c = 0; c < C; ++c)
          for (long ky = 0; ky < K; ++ky)
            for (long kx = 0; kx < K; ++kx) {
              const long iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += w[((o * C + c) * K + ky) * K + kx] * x.at(c, iy, ix);
            }
        out.at(o, oy, ox) = acc;
      }
  return out;
}

TEST(Graph, GradientsAccumulateOverFanOut) {
  Graph<double> g;
  const Var x = g.variable(Tensor<double>({3}, std::vector<double>{1, 2, 3}));
  const Var y = ad::add(g, x, x);
  g.backward(ad::sum(g, ad::mul(g, y, x)));  // sum(2x^2) -> 4x
  const auto dx = g.grad(x);
  EXPECT_DOUBLE_EQ(dx[0], 4.0);
  EXPECT_DOUBLE_EQ(dx[2], 12.0);
}

TEST(Graph, BackwardRunsOnce) {
  Graph<double> g;
  const Var x = g.variable(Tensor<double>({1}, 2.0));
  const Var l = ad::sum(g, x);
  g.backward(l);
  EXPECT_THROW(g.backward(l), std::logic_error);
}

TEST(Graph, NonScalarLossRejected) {
  Graph<double> g;
  const Var x = g.variable(Tensor<double>({2}, 1.0));
  EXPECT_THROW(g.backward(x), ShapeError);
}

TEST(Graph, ConstantsReceiveNoGradient) {
  Graph<double> g;
  const Var c = g.constant(Tensor<double>({2}, 1.0));
  const Var x = g.variable(Tensor<double>({2}, 3.0));
  g.backward(ad::sum(g, ad::mul(g, c, x)));
  EXPECT_FALSE(g.requires_grad(c));
  EXPECT_EQ(g.grad(x), Tensor<double>({2}, 1.0));
}

TEST(Graph, ParameterGradientsLandInSink) {
  Tensor<double> sink({2}, 10.0);
  Graph<double> g;
  const Var p = g.parameter(Tensor<double>({2}, std::vector<double>{1, -1}), &sink);
  g.backward(ad::sum(g, ad::scale(g, p, 3.0)));
  EXPECT_EQ(sink, Tensor<double>({2}, 13.0));
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      const auto x = random_tensor({3, 9, 8}, 1);
      const auto w = random_tensor({4, 3, 3, 3}, 2);
      const auto b = random_tensor({4}, 3);
      EXPECT_LT(max_abs_diff(ad::kernels::conv2d(x, w, b, stride, pad), conv_oracle(x, w, b, stride, pad)), 1e-12)
          << "stride " << stride << " pad " << pad;
    }
  }
}

TEST(Conv2d, PointwiseMatchesOracle) {
  const auto x = random_tensor({5, 4, 6}, 4);
  const auto w = random_tensor({3, 5, 1, 1}, 5);
  const auto b = random_tensor({3}, 6);
  EXPECT_LT(max_abs_diff(ad::kernels::conv2d(x, w, b, 1, 0), conv_oracle(x, w, b, 1, 0)), 1e-12);
}

TEST(Conv2d, RejectsInconsistentShapes) {
  const auto x = random_tensor({3, 8, 8}, 1);
  EXPECT_THROW(ad::kernels::conv2d(x, random_tensor({4, 2, 3, 3}, 2), random_tensor({4}, 3), 1, 1), ShapeError);
  EXPECT_THROW(ad::kernels::conv2d(x, random_tensor({4, 3, 3, 3}, 2), random_tensor({5}, 3), 1, 1), ShapeError);
  EXPECT_THROW(ad::kernels::conv2d(x, random_tensor({4, 3, 9, 9}, 2), random_tensor({4}, 3), 1, 0), ShapeError);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  for (int stride : {1, 2}) {
    const auto r = gradcheck({random_tensor({3, 7, 7}, 1), random_tensor({4, 3, 3, 3}, 2), random_tensor({4}, 3)},
                             [stride](Graph<double>& g, const std::vector<Var>& v) {
                               return project(g, ad::conv2d(g, v[0], v[1], v[2], stride, 1));
                             });
    EXPECT_LT(r.max_rel_error, kGradTol) << "stride " << stride;
  }
}

TEST(Conv2d, FloatAgreesWithDouble) {
  const auto x = random_tensor({4, 16, 16}, 7);
  const auto w = random_tensor({6, 4, 3, 3}, 8);
  const auto b = random_tensor({6}, 9);
  const auto d = ad::kernels::conv2d(x, w, b, 1, 1);
  const auto f = ad::kernels::conv2d(x.cast<float>(), w.cast<float>(), b.cast<float>(), 1, 1);
  EXPECT_LT(max_abs_diff(f.cast<double>(), d), 1e-5);
}

TEST(Relu, ForwardAndGradient) {
  Graph<double> g;
  const Var x = g.variable(Tensor<double>({4}, std::vector<double>{-2, -0.0, 0.5, 3}));
  const Var y = ad::relu(g, x);
  EXPECT_EQ(g.value(y), Tensor<double>({4}, std::vector<double>{0, 0, 0.5, 3}));
  EXPECT_FALSE(std::signbit(g.value(y)[1]));
  g.backward(ad::sum(g, y));
  EXPECT_EQ(g.grad(x), Tensor<double>({4}, std::vector<double>{0, 0, 1, 1}));

  const auto r = gradcheck({random_tensor({2, 5, 5}, 11)},
                           [](Graph<double>& gg, const std::vector<Var>& v) { return project(gg, ad::relu(gg, v[0])); });
  EXPECT_LT(r.max_rel_error, kGradTol);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  const auto a = random_tensor({2, 3, 4}, 21), b = random_tensor({2, 3, 4}, 22);
  EXPECT_LT(gradcheck({a, b}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::add(g, v[0], v[1]));
            }).max_rel_error,
            kGradTol);
  EXPECT_LT(gradcheck({a, b}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::mul(g, v[0], v[1]));
            }).max_rel_error,
            kGradTol);
  EXPECT_LT(gradcheck({a}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::scale(g, v[0], -2.5));
            }).max_rel_error,
            kGradTol);
  EXPECT_LT(gradcheck({a}, [](Graph<double>& g, const std::vector<Var>& v) { return ad::abs_sum(g, v[0]); })
                .max_rel_error,
            kGradTol);
}

TEST(Elementwise, ShapeMismatchRejected) {
  Graph<double> g;
  const Var a = g.constant(Tensor<double>({2, 3}));
  const Var b = g.constant(Tensor<double>({3, 2}));
  EXPECT_THROW(ad::add(g, a, b), ShapeError);
  EXPECT_THROW(ad::mul(g, a, b), ShapeError);
}

TEST(ChannelOps, ConcatSliceBroadcast) {
  const auto a = random_tensor({2, 3, 3}, 31), b = random_tensor({3, 3, 3}, 32), gate = random_tensor({1, 3, 3}, 33);
  Graph<double> g;
  const Var cat = ad::concat_channels(g, g.constant(a), g.constant(b));
  ASSERT_EQ(g.value(cat).shape(), (Shape{5, 3, 3}));
  EXPECT_EQ(g.value(ad::slice_channels(g, cat, 0, 2)), a);
  EXPECT_EQ(g.value(ad::slice_channels(g, cat, 2, 3)), b);
  EXPECT_THROW(ad::slice_channels(g, cat, 4, 2), ShapeError);
  const Var m = ad::mul_channel_broadcast(g, g.constant(b), g.constant(gate));
  for (size_t c = 0; c < 3; ++c)
    for (size_t y = 0; y < 3; ++y)
      for (size_t x = 0; x < 3; ++x) EXPECT_DOUBLE_EQ(g.value(m).at(c, y, x), b.at(c, y, x) * gate.at(0, y, x));

  EXPECT_LT(gradcheck({a, b}, [](Graph<double>& gg, const std::vector<Var>& v) {
              return project(gg, ad::concat_channels(gg, v[0], v[1]));
            }).max_rel_error,
            kGradTol);
  EXPECT_LT(gradcheck({b}, [](Graph<double>& gg, const std::vector<Var>& v) {
              return project(gg, ad::slice_channels(gg, v[0], 1, 2));
            }).max_rel_error,
            kGradTol);
  EXPECT_LT(gradcheck({b, gate}, [](Graph<double>& gg, const std::vector<Var>& v) {
              return project(gg, ad::mul_channel_broadcast(gg, v[0], v[1]));
            }).max_rel_error,
            kGradTol);
}

TEST(Patches, UnfoldLayoutAndFoldInverse) {
  const auto x = random_tensor({2, 8, 8}, 41);
  const auto p = ad::kernels::unfold(x, 4, 2);
  const ad::PatchGeometry geo{2, 8, 8, 4, 2};
  ASSERT_EQ(p.shape(), (Shape{9, 32}));
  // Row 4 is grid cell (1, 1): channel 1, patch row 2, patch col 3 -> x(1, 2 + 2, 2 + 3).
  EXPECT_EQ(p.at(4, 16 + 2 * 4 + 3), x.at(1, 4, 5));
  EXPECT_LT(max_abs_diff(ad::kernels::fold(p, geo), x), 1e-15);
}

TEST(Patches, FoldAveragesOverlaps) {
  const ad::PatchGeometry geo{1, 8, 8, 4, 2};
  const auto cover = ad::kernels::fold_coverage(geo);
  EXPECT_EQ(cover[0], 1u);
  EXPECT_EQ(cover[2 * 8 + 2], 4u);
  EXPECT_EQ(cover[3 * 8 + 0], 2u);
  Tensor<double> ones({geo.count(), geo.row_length()}, 1.0);
  EXPECT_EQ(ad::kernels::fold(ones, geo), Tensor<double>({1, 8, 8}, 1.0));
}

TEST(Patches, GeometryValidation) {
  EXPECT_THROW((ad::PatchGeometry{1, 8, 8, 4, 3}.validate()), ShapeError);
  EXPECT_THROW((ad::PatchGeometry{1, 8, 8, 4, 5}.validate()), ShapeError);
  EXPECT_THROW((ad::PatchGeometry{1, 3, 8, 4, 2}.validate()), ShapeError);
  EXPECT_NO_THROW((ad::PatchGeometry{64, 64, 64, 16, 8}.validate()));
  EXPECT_EQ((ad::PatchGeometry{64, 64, 64, 16, 8}.count()), 49u);
}

TEST(Patches, GradientsMatchFiniteDifferences) {
  const ad::PatchGeometry geo{2, 8, 8, 4, 2};
  EXPECT_LT(gradcheck({random_tensor({2, 8, 8}, 51)}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::unfold(g, v[0], 4, 2));
            }).max_rel_error,
            kGradTol);
  EXPECT_LT(gradcheck({random_tensor({9, 32}, 52)}, [geo](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::fold(g, v[0], geo));
            }).max_rel_error,
            kGradTol);
}

TEST(GatherRows, SelectsRowsAndScattersGradient) {
  const auto t = random_tensor({4, 3}, 61);
  Graph<double> g;
  const Var v = g.variable(t);
  const Var r = ad::gather_rows(g, v, {2, 2, 0});
  EXPECT_EQ(g.value(r).at(1, 1), t.at(2, 1));
  g.backward(ad::sum(g, r));
  const auto d = g.grad(v);
  EXPECT_EQ(d.at(2, 0), 2.0);
  EXPECT_EQ(d.at(0, 0), 1.0);
  EXPECT_EQ(d.at(1, 0), 0.0);

  Graph<double> g2;
  EXPECT_THROW(ad::gather_rows(g2, g2.constant(t), {0, 4}), std::out_of_range);
  EXPECT_THROW(ad::gather_rows(g2, g2.constant(t), {-1}), std::out_of_range);
  EXPECT_LT(gradcheck({t}, [](Graph<double>& gg, const std::vector<Var>& vv) {
              return project(gg, ad::gather_rows(gg, vv[0], {3, 1, 1, 0, 2}));
            }).max_rel_error,
            kGradTol);
}

TEST(RowMax, ValuesAndLowestIndexRouting) {
  Graph<double> g;
  const Var m = g.variable(Tensor<double>({2, 3}, std::vector<double>{0.2, 0.9, 0.9, -0.5, 0.3, -1.0}));
  const Var s = ad::row_max(g, m);
  EXPECT_EQ(g.value(s), Tensor<double>({2}, std::vector<double>{0.9, 0.3}));
  g.backward(ad::sum(g, s));
  EXPECT_EQ(g.grad(m), Tensor<double>({2, 3}, std::vector<double>{0, 1, 0, 0, 1, 0}));
}

TEST(RowMax, GradientMatchesFiniteDifferencesOffTies) {
  EXPECT_LT(gradcheck({random_tensor({6, 7}, 71)}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::row_max(g, v[0]));
            }).max_rel_error,
            kGradTol);
}

TEST(BroadcastColumns, RepeatsAndSums) {
  EXPECT_LT(gradcheck({random_tensor({5}, 81)}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::broadcast_columns(g, v[0], 4));
            }).max_rel_error,
            kGradTol);
  Graph<double> g;
  const Var b = ad::broadcast_columns(g, g.constant(Tensor<double>({2}, std::vector<double>{1, 2})), 3);
  EXPECT_EQ(g.value(b), Tensor<double>({2, 3}, std::vector<double>{1, 1, 1, 2, 2, 2}));
}

TEST(CosineSimilarity, MatchesDirectFormulaAndBounds) {
  const auto a = random_tensor({5, 12}, 91), b = random_tensor({4, 12}, 92);
  Graph<double> g;
  const auto& r = g.value(ad::cosine_similarity(g, g.constant(a), g.constant(b)));
  for (size_t i = 0; i < 5; ++i)
    for (size_t j = 0; j < 4; ++j) {
      double dot = 0, na = 0, nb = 0;
      for (size_t k = 0; k < 12; ++k) {
        dot += a.at(i, k) * b.at(j, k);
        na += a.at(i, k) * a.at(i, k);
        nb += b.at(j, k) * b.at(j, k);
      }
      EXPECT_NEAR(r.at(i, j), dot / std::sqrt(na * nb), 1e-14);
      EXPECT_LE(std::abs(r.at(i, j)), 1.0 + 1e-12);
    }
}

TEST(CosineSimilarity, ZeroRowsUseTheNormFloor) {
  Graph<double> g;
  Tensor<double> a({2, 3});
  a.at(1, 0) = 1.0;
  const auto& r = g.value(ad::cosine_similarity(g, g.constant(a), g.constant(a)));
  EXPECT_EQ(r.at(0, 0), 0.0);
  EXPECT_EQ(r.at(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r.at(1, 1), 1.0);
}

TEST(CosineSimilarity, GradientMatchesFiniteDifferences) {
  EXPECT_LT(gradcheck({random_tensor({5, 12}, 93), random_tensor({4, 12}, 94)},
                      [](Graph<double>& g, const std::vector<Var>& v) {
                        return project(g, ad::cosine_similarity(g, v[0], v[1]));
                      })
                .max_rel_error,
            kGradTol);
  // Shared input: Q and K from the same tensor.
  EXPECT_LT(gradcheck({random_tensor({6, 8}, 95)}, [](Graph<double>& g, const std::vector<Var>& v) {
              return project(g, ad::cosine_similarity(g, v[0], v[0]));
            }).max_rel_error,
            kGradTol);
}

TEST(L1Loss, ValueAndGradient) {
  Graph<double> g;
  const Var p = g.variable(Tensor<double>({4}, std::vector<double>{1, 2, 3, 4}));
  const Var t = g.constant(Tensor<double>({4}, std::vector<double>{0, 2, 5, 4.5}));
  const Var l = ad::l1_loss(g, p, t);
  EXPECT_DOUBLE_EQ(g.value(l)[0], (1 + 0 + 2 + 0.5) / 4.0);
  g.backward(l);
  EXPECT_EQ(g.grad(p), Tensor<double>({4}, std::vector<double>{0.25, 0, -0.25, -0.25}));
  const auto target = random_tensor({2, 4, 4}, 102);
  EXPECT_LT(gradcheck({random_tensor({2, 4, 4}, 101)}, [&](Graph<double>& gg, const std::vector<Var>& v) {
              return ad::l1_loss(gg, v[0], gg.constant(target));
            }).max_rel_error,
            kGradTol);
}

TEST(Parameters, AddConvInitialisation) {
  ad::ParameterSet<double> p;
  ad::add_conv(p, "layer", 8, 4, 3, 7);
  ASSERT_EQ(p.names(), (std::vector<std::string>{"layer.weight", "layer.bias"}));
  EXPECT_EQ(p["layer.weight"].shape(), (Shape{8, 4, 3, 3}));
  const double bound = std::sqrt(1.0 / 36.0);
  for (double v : p["layer.weight"].values()) EXPECT_LE(std::abs(v), bound);
  for (double v : p["layer.bias"].values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(p.scalar_count(), 8u * 36u + 8u);
  EXPECT_THROW(ad::add_conv(p, "layer", 8, 4, 3, 7), std::invalid_argument);

  ad::ParameterSet<double> same, other;
  ad::add_conv(same, "layer", 8, 4, 3, 7);
  ad::add_conv(other, "layer", 8, 4, 3, 8);
  EXPECT_EQ(same, p);
  EXPECT_FALSE(other == p);
}

TEST(Parameters, StreamsDependOnName) {
  ad::ParameterSet<double> p;
  ad::add_conv(p, "a", 2, 2, 3, 1);
  ad::add_conv(p, "b", 2, 2, 3, 1);
  EXPECT_FALSE(p["a.weight"] == p["b.weight"]);
}

TEST(Parameters, BindRoutesGradients) {
  ad::ParameterSet<double> p;
  p.add("w", Tensor<double>({2}, std::vector<double>{1, 2}));
  auto grads = p.zeros_like();
  Graph<double> g;
  const auto bound = ad::bind(g, p, &grads);
  g.backward(ad::sum(g, ad::mul(g, bound["w"], bound["w"])));
  EXPECT_EQ(grads[0], Tensor<double>({2}, std::vector<double>{2, 4}));
  EXPECT_THROW(bound["missing"], std::out_of_range);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ad::ParameterSet<double> p;
  p.add("w", Tensor<double>({3}, std::vector<double>{0.5, -1.0, 2.0}));
  auto state = ad::AdamState<double>::zeros_like(p);
  const ad::AdamConfig cfg;
  std::vector<double> w{0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 5; ++t) {
    std::vector<Tensor<double>> grads{Tensor<double>({3}, std::vector<double>{0.1 * t, -0.3, 0.05 / t})};
    ad::adam_step(p, std::span<const Tensor<double>>(grads), state, 1e-2, cfg);
    for (int i = 0; i < 3; ++i) {
      const double gi = grads[0][i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      w[i] -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_EQ(state.step, 5u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p["w"][i], w[i], 1e-12);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ad::ParameterSet<float> p;
  p.add("w", Tensor<float>({2}, std::vector<float>{0.f, 0.f}));
  auto state = ad::AdamState<float>::zeros_like(p);
  std::vector<Tensor<float>> grads{Tensor<float>({2}, std::vector<float>{3.f, -0.01f})};
  ad::adam_step(p, std::span<const Tensor<float>>(grads), state, 1e-3);
  EXPECT_NEAR(p["w"][0], -1e-3, 1e-9);
  EXPECT_NEAR(p["w"][1], 1e-3, 1e-8);
}

TEST(Adam, RejectsMismatchedGradients) {
  ad::ParameterSet<float> p;
  p.add("w", Tensor<float>({2}));
  auto state = ad::AdamState<float>::zeros_like(p);
  std::vector<Tensor<float>> grads{Tensor<float>({3})};
  EXPECT_THROW(ad::adam_step(p, std::span<const Tensor<float>>(grads), state, 1e-3), ShapeError);
}

}  // namespace
}  // namespace ttmr
