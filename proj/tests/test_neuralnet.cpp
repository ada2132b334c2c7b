#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sensedef/adadelta.hpp"
#include "sensedef/gradcheck.hpp"
#include "sensedef/neuralnet.hpp"

using namespace sensedef;

namespace {

constexpr CellKind kKinds[] = {CellKind::vanilla, CellKind::gru, CellKind::lstm};

std::vector<Vector> random_inputs(std::mt19937_64& gen, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vector> xs(n, Vector(d));
  for (auto& x : xs)
    for (auto& v : x) v = u(gen);
  return xs;
}

} // namespace

TEST(InitParams, RangeBiasesAndDeterminism) {
  for (auto kind : kKinds) {
    const ModelDims dims{5, 6, 4};
    const auto p = init_params(kind, dims, 42);
    for (const auto& t : p.tensors) {
      for (double x : t.data) {
        if (t.cols == 1)
          EXPECT_EQ(x, 0.0) << t.name;
        else
          EXPECT_LT(std::abs(x), kInitRange) << t.name;
      }
    }
    EXPECT_EQ(p, init_params(kind, dims, 42));
    EXPECT_NE(p, init_params(kind, dims, 43));
    EXPECT_EQ(p.tensors.size(), 3 * gate_count(kind) + 2);
  }
}

TEST(Forward, ZeroParamsGiveZeroOutput) {
  std::mt19937_64 gen(1);
  for (auto kind : kKinds) {
    const auto p = make_params(kind, {3, 4, 2});
    const auto tr = forward(p, random_inputs(gen, 5, 3));
    EXPECT_EQ(tr.e_hat, Vector(2, 0.0));
  }
}

TEST(Forward, GruAllZeroWeightsKeepsStateZero) {
  std::mt19937_64 gen(2);
  const auto p = make_params(CellKind::gru, {3, 4, 2});
  const auto tr = forward(p, random_inputs(gen, 6, 3));
  for (const auto& h : tr.h) EXPECT_EQ(h, Vector(4, 0.0));
}

TEST(Forward, VanillaSingleStepByHand) {
  auto p = make_params(CellKind::vanilla, {2, 2, 2});
  p.tensors[0].data = {0.1, 0.2, 0.3, 0.4};  // W_a
  p.tensors[2].data = {0.0, 0.1};            // b_a
  p.tensors[3].data = {1, 0, 1, 1};          // proj.W
  p.tensors[4].data = {0.0, -0.5};           // proj.b
  const auto tr = forward(p, std::vector<Vector>{{1, 2}});
  // W x + b = [0.5, 1.2]
  EXPECT_NEAR(tr.e_hat[0], std::tanh(0.5), 1e-15);
  EXPECT_NEAR(tr.e_hat[1], std::tanh(0.5) + std::tanh(1.2) - 0.5, 1e-15);
}

TEST(Forward, RejectsBadInputs) {
  const auto p = make_params(CellKind::lstm, {3, 4, 2});
  EXPECT_THROW(forward(p, std::vector<Vector>{}), ArgumentError);
  EXPECT_THROW(forward(p, std::vector<Vector>{{1, 2}}), ArgumentError);
}

TEST(Forward, DeterministicAndGruBounded) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = init_params(CellKind::gru, {4, 5, 3}, trial, 2.0);
    const auto xs = random_inputs(gen, 15, 4);
    const auto a = forward(p, xs), b = forward(p, xs);
    EXPECT_EQ(a.e_hat, b.e_hat);
    for (const auto& h : a.h)
      for (double x : h) EXPECT_LE(std::abs(x), 1.0);
  }
}

TEST(CosineLoss, HandValues) {
  EXPECT_NEAR(cosine_loss(Vector{1, 2}, Vector{1, 2}), -1.0, 1e-15);
  EXPECT_EQ(cosine_loss(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_NEAR(cosine_loss(Vector{1, 2}, Vector{2, 1}), -0.8, 1e-15);
  EXPECT_EQ(cosine_loss(Vector{0, 0}, Vector{2, 1}), 0.0);
}

TEST(CosineLoss, StaysInRange) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 200; ++i) {
    const auto v = random_inputs(gen, 2, 6);
    const double l = cosine_loss(v[0], v[1]);
    EXPECT_GE(l, -1.0);
    EXPECT_LE(l, 1.0);
  }
}

TEST(Backward, TargetGradientVanishesAtOptimum) {
  auto inst = random_instance(CellKind::gru, 9, 4);
  const auto tr = forward(inst.params, inst.inputs);
  const auto g = backward(inst.params, tr, inst.inputs, tr.e_hat);
  for (double x : g.target) EXPECT_NEAR(x, 0.0, 1e-14);
}

TEST(Backward, TargetScaleLeavesParamGradientsUnchanged) {
  for (auto kind : kKinds) {
    auto inst = random_instance(kind, 10, 5);
    const auto tr = forward(inst.params, inst.inputs);
    Vector doubled = inst.target;
    for (auto& x : doubled) x *= 2;
    const auto g1 = backward(inst.params, tr, inst.inputs, inst.target);
    const auto g2 = backward(inst.params, tr, inst.inputs, doubled);
    EXPECT_NEAR(g1.loss, g2.loss, 1e-15);
    for (std::size_t i = 0; i < g1.params.size(); ++i)
      for (std::size_t k = 0; k < g1.params[i].data.size(); ++k)
        EXPECT_NEAR(g1.params[i].data[k], g2.params[i].data[k], 1e-14);
  }
}

TEST(Backward, RejectsMismatchedTrace) {
  auto inst = random_instance(CellKind::lstm, 1, 3);
  const auto tr = forward(inst.params, inst.inputs);
  auto shorter = inst.inputs;
  shorter.pop_back();
  EXPECT_THROW(backward(inst.params, tr, shorter, inst.target), ArgumentError);
  auto other = random_instance(CellKind::gru, 1, 3);
  EXPECT_THROW(backward(other.params, tr, inst.inputs, inst.target), ArgumentError);
}

class GradCheck : public ::testing::TestWithParam<CellKind> {};

TEST_P(GradCheck, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto rep = grad_check(GetParam(), seed);
    EXPECT_LT(rep.max_rel_error, 1e-4) << cell_name(GetParam()) << " worst " << rep.worst;
    EXPECT_GT(rep.checked, 0u);
  }
}

TEST_P(GradCheck, SameSeedSameReport) {
  const auto a = grad_check(GetParam(), 5), b = grad_check(GetParam(), 5);
  EXPECT_EQ(a.max_rel_error, b.max_rel_error);
  EXPECT_EQ(a.worst, b.worst);
}

TEST_P(GradCheck, CorruptedComponentDetected) {
  auto inst = random_instance(GetParam(), 6, 3);
  const auto tr = forward(inst.params, inst.inputs);
  for (int which = 0; which < 3; ++which) {
    auto g = backward(inst.params, tr, inst.inputs, inst.target);
    if (which == 0) g.params[1].data[0] += 0.1;
    if (which == 1) g.inputs[2][1] += 0.1;
    if (which == 2) g.target[0] += 0.1;
    EXPECT_FALSE(compare_gradients(inst.params, inst.inputs, inst.target, g).passed());
  }
}

INSTANTIATE_TEST_SUITE_P(Cells, GradCheck, ::testing::ValuesIn(kKinds),
                         [](const auto& info) { return std::string(cell_name(info.param)); });

TEST(Adadelta, FirstStepByHand) {
  AdadeltaSlot slot(1);
  std::vector<double> x{0.0};
  const std::vector<double> g{1.0};
  adadelta_step({0.95, 1e-6, 0.12}, slot, x, g);
  const double expected = -0.12 * std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
  EXPECT_NEAR(x[0], expected, 1e-15);
  EXPECT_NEAR(x[0], -5.3666e-4, 1e-8);
  EXPECT_NEAR(slot.avg_sq_grad[0], 0.05, 1e-15);
  EXPECT_NEAR(slot.avg_sq_update[0], 0.05 * expected * expected, 1e-20);
}

TEST(Adadelta, ZeroGradientIsFixedPoint) {
  auto p = init_params(CellKind::lstm, {3, 3, 3}, 8);
  const auto before = p;
  AdadeltaState opt({}, p.tensors);
  opt.step(p.tensors, zeros_like(p.tensors));
  EXPECT_EQ(p, before);
}

TEST(Adadelta, UpdateOpposesGradientSign) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> nd;
  AdadeltaSlot slot(50);
  std::vector<double> x(50, 0.0);
  for (int step = 0; step < 20; ++step) {
    std::vector<double> g(50);
    for (auto& v : g) v = nd(gen);
    const auto before = x;
    adadelta_step({}, slot, x, g);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (g[k] > 0) EXPECT_LT(x[k], before[k]);
      if (g[k] < 0) EXPECT_GT(x[k], before[k]);
      EXPECT_GE(slot.avg_sq_grad[k], 0.0);
      EXPECT_GE(slot.avg_sq_update[k], 0.0);
    }
  }
}

TEST(Adadelta, ShapeMismatchThrows) {
  AdadeltaSlot slot(2);
  std::vector<double> x(3), g(3);
  EXPECT_THROW(adadelta_step({}, slot, x, g), ArgumentError);
}
