#include <random>

#include <gtest/gtest.h>

#include "puma/error.hpp"
#include "puma/graph/interpreter.hpp"
#include "puma/graph/layers.hpp"
#include "puma/graph/serialize.hpp"

using namespace puma;
using namespace puma::graph;

namespace {

Eigen::VectorXd real(const num::RawVector& v) { return num::dequantize(v, 12); }

Eigen::VectorXd uniform(int n, double scale, std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Eigen::MatrixXd uniform(int r, int c, double scale, std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

}  // namespace

TEST(Graph, MlpLayerTracksRealArithmetic) {
  std::mt19937 rng(1);
  const Eigen::MatrixXd w = uniform(200, 30, 0.1, rng);
  const Eigen::VectorXd b = uniform(30, 0.5, rng), x = uniform(200, 1.0, rng);
  ModelGraph g("fc");
  auto in = g.input("x", 200);
  g.output("y", mlp_layer(g, in, w, b, ActFn::Relu));
  const auto out = Interpreter().evaluate(g, {{"x", num::quantize(x)}});
  const Eigen::VectorXd expect = (w.transpose() * x + b).cwiseMax(0.0);
  EXPECT_LT((real(out.at("y")) - expect).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Graph, LstmCellTracksReference) {
  std::mt19937 rng(2);
  const auto w = LstmWeights::random(16, 8, 0.3, 5);
  const Eigen::VectorXd x = uniform(8, 1.0, rng), h = uniform(16, 0.5, rng), c = uniform(16, 0.5, rng);
  ModelGraph g("lstm");
  auto xi = g.input("x", 8), hi = g.input("h", 16), ci = g.input("c", 16);
  const auto s = lstm_cell(g, xi, hi, ci, w);
  g.output("h1", s.h);
  g.output("c1", s.c);
  EXPECT_EQ(static_cast<int>(g.nodes().size()), 3 + lstm_node_count() + 2);
  const auto out = Interpreter().evaluate(g, {{"x", num::quantize(x)}, {"h", num::quantize(h)}, {"c", num::quantize(c)}});
  const auto [h1, c1] = lstm_reference(x, h, c, w);
  EXPECT_LT((real(out.at("h1")) - h1).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT((real(out.at("c1")) - c1).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Graph, ConvLayerMatchesDirectConvolution) {
  std::mt19937 rng(3);
  const ConvShape s{7, 7, 2, 3, 3, 4, 2};
  const Eigen::MatrixXd w = uniform(s.window(), s.filters, 0.2, rng);
  const Eigen::VectorXd b = uniform(s.filters, 0.2, rng), x = uniform(s.height * s.width * s.channels, 1.0, rng);
  ModelGraph g("conv");
  auto in = g.input("x", static_cast<int>(x.size()));
  const std::size_t before = g.nodes().size();
  g.output("y", conv_layer(g, in, s, w, b, ActFn::None));
  EXPECT_EQ(static_cast<int>(g.nodes().size() - before), conv_node_count(s, ActFn::None) + 1);
  ASSERT_EQ(g.conv_regions().size(), 1u);
  const auto out = Interpreter().evaluate(g, {{"x", num::quantize(x)}});
  const Eigen::VectorXd expect = conv_reference(x, s, w, b);
  ASSERT_EQ(out.at("y").size(), s.out_h() * s.out_w() * s.filters);
  EXPECT_LT((real(out.at("y")) - expect).cwiseAbs().maxCoeff(), 0.01);
}

TEST(Graph, BlockedMvmRoundsEachBlock) {
  std::mt19937 rng(4);
  num::RawMatrix w(40, 3);
  num::RawVector x(40);
  std::uniform_int_distribution<int> d(-20000, 20000);
  for (int r = 0; r < 40; ++r) {
    x(r) = static_cast<std::int16_t>(d(rng));
    for (int c = 0; c < 3; ++c) w(r, c) = static_cast<std::int16_t>(d(rng) / 8);
  }
  const auto y = blocked_mvm(w, x, 16, 12);
  for (int c = 0; c < 3; ++c) {
    std::int16_t acc = 0;
    for (int b = 0; b < 40; b += 16) {
      const int n = std::min(16, 40 - b);
      const num::RawVector part = num::ideal_mvm(w.block(b, c, n, 1), x.segment(b, n), 12);
      acc = num::add_sat(acc, part(0));
    }
    EXPECT_EQ(y(c), acc);
  }
  EXPECT_EQ(blocked_mvm(w.topRows(16), x.head(16), 16, 12), num::ideal_mvm(w.topRows(16), x.head(16), 12));
}

TEST(Graph, ShapeErrors) {
  ModelGraph g;
  auto x = g.input("x", 4);
  auto y = g.input("y", 5);
  EXPECT_THROW(g.alu(isa::AluOp::Add, x, y), ShapeError);
  auto w = g.matrix("w", num::RawMatrix(num::RawMatrix::Zero(3, 2)));
  EXPECT_THROW(g.mvm(w, x), ShapeError);
  EXPECT_THROW(g.slice(x, 2, 3), ShapeError);
  ModelGraph other;
  auto z = other.input("z", 4);
  EXPECT_THROW(g.alu(isa::AluOp::Add, x, z), ShapeError);
}

TEST(Graph, FrozenGraphRejectsEdits) {
  ModelGraph g;
  auto x = g.input("x", 2);
  g.output("y", x);
  g.freeze();
  EXPECT_THROW(g.act(ActFn::Relu, x), Error);
}

TEST(Graph, InterpreterChecksInputs) {
  ModelGraph g;
  auto x = g.input("x", 3);
  g.output("y", g.act(ActFn::Relu, x));
  EXPECT_THROW(Interpreter().evaluate(g, {}), ShapeError);
  EXPECT_THROW(Interpreter().evaluate(g, {{"x", num::RawVector::Zero(2)}}), ShapeError);
}

TEST(Graph, ConcatAndSlice) {
  ModelGraph g;
  auto a = g.input("a", 3), b = g.input("b", 2);
  auto c = g.concat({a, b});
  g.output("s", g.slice(c, 2, 2));
  num::RawVector av(3), bv(2);
  av << 1, 2, 3;
  bv << 4, 5;
  const auto out = Interpreter().evaluate(g, {{"a", av}, {"b", bv}});
  num::RawVector expect(2);
  expect << 3, 4;
  EXPECT_EQ(out.at("s"), expect);
}

TEST(Graph, TextRoundTrip) {
  std::mt19937 rng(6);
  ModelGraph g("rt");
  auto x = g.input("x", 20);
  auto h = mlp_layer(g, x, uniform(20, 10, 0.3, rng), uniform(10, 0.1, rng), ActFn::Sigmoid);
  g.output("y", g.alu_imm(isa::AluOp::Mul, h, -1.5));
  const ModelGraph back = from_text(to_text(g));
  EXPECT_TRUE(back == g);
  EXPECT_THROW(from_text("{\"version\": 99}"), Error);
  EXPECT_THROW(from_text("not json"), Error);
}

TEST(Graph, TensorTextAcceptsHexAndReals) {
  num::RawVector v(3);
  v << -1, 0, 4096;
  const TensorMap t{{"a", v}};
  EXPECT_EQ(tensors_from_text(tensors_to_text(t), 12), t);
  const auto r = tensors_from_text(R"({"b": [1.0, -0.5, 0.000244140625]})", 12);
  num::RawVector e(3);
  e << 4096, -2048, 1;
  EXPECT_EQ(r.at("b"), e);
}
