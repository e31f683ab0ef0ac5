#include "puma/metrics/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "puma/error.hpp"
#include "puma/graph/layers.hpp"

namespace puma::metrics {

using graph::ActFn;
using graph::Handle;
using graph::ModelGraph;
using isa::AluOp;

namespace {

Eigen::MatrixXd uniform(int rows, int cols, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&]() { return u(rng); });
}

Eigen::VectorXd uniform(int n, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Eigen::VectorXd::NullaryExpr(n, [&]() { return u(rng); });
}

ExampleModel finish(ModelGraph g, std::uint64_t seed) {
  g.freeze();
  ExampleModel e{std::move(g), {}, {}, {}};
  e.inputs = random_inputs(e.graph, seed ^ 0xABCDEFull);
  return e;
}

}  // namespace

std::vector<std::string> example_names() {
  return {"mlp4", "mlp128", "mlp256", "lstm8", "lstm128", "conv8x8", "cnn_small", "coalesce_pair", "vector_kernel", "classifier"};
}

ExampleModel make_example(const std::string& name, std::uint64_t seed) {
  if (name == "mlp4") return mlp_example(4, seed);
  if (name == "mlp128") return mlp_example(128, seed);
  if (name == "mlp256") return mlp_example(256, seed);
  if (name == "lstm8") return lstm_example(8, seed);
  if (name == "lstm128") return lstm_example(128, seed);
  if (name == "conv8x8") return conv_example(seed);
  if (name == "cnn_small") return cnn_example(seed);
  if (name == "coalesce_pair") return coalesce_pair_example(seed);
  if (name == "vector_kernel") return vector_kernel_example(256, 8, seed);
  if (name == "classifier") return classifier_example(seed);
  throw Error(fmt::format("unknown example '{}'", name));
}

ExampleModel mlp_example(int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelGraph g(fmt::format("mlp{}", width));
  const double s = 1.0 / std::sqrt(static_cast<double>(width));
  Handle x = g.input("x", width);
  g.set_layer(1);
  Handle h = graph::mlp_layer(g, x, uniform(width, width, s, rng), uniform(width, 0.1, rng), ActFn::Relu, "fc1");
  g.set_layer(2);
  Handle y = graph::mlp_layer(g, h, uniform(width, width, s, rng), uniform(width, 0.1, rng), ActFn::Sigmoid, "fc2");
  g.output("y", y);
  return finish(std::move(g), seed);
}

ExampleModel lstm_example(int cells, std::uint64_t seed) {
  ModelGraph g(fmt::format("lstm{}", cells));
  Handle x = g.input("x", cells);
  Handle h = g.input("h0", cells);
  Handle c = g.input("c0", cells);
  const auto w = graph::LstmWeights::random(cells, cells, 1.0 / std::sqrt(2.0 * cells), static_cast<unsigned>(seed));
  g.set_layer(1);
  const auto st = graph::lstm_cell(g, x, h, c, w);
  g.output("h", st.h);
  g.output("c", st.c);
  return finish(std::move(g), seed);
}

ExampleModel conv_example(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelGraph g("conv8x8");
  const graph::ConvShape s{8, 8, 2, 3, 3, 4, 1};
  Handle x = g.input("x", s.height * s.width * s.channels);
  g.set_layer(1);
  Handle y = graph::conv_layer(g, x, s, uniform(s.window(), s.filters, 0.25, rng), uniform(s.filters, 0.1, rng), ActFn::Relu);
  g.output("y", y);
  return finish(std::move(g), seed);
}

ExampleModel cnn_example(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelGraph g("cnn_small");
  const graph::ConvShape s{6, 6, 16, 3, 3, 8, 1};
  Handle x = g.input("x", s.height * s.width * s.channels);
  g.set_layer(1);
  Handle f = graph::conv_layer(g, x, s, uniform(s.window(), s.filters, 1.0 / 12.0, rng), uniform(s.filters, 0.1, rng),
                               ActFn::Relu);
  g.set_layer(2);
  const int n = s.out_h() * s.out_w() * s.filters;
  Handle y = graph::mlp_layer(g, f, uniform(n, 10, 1.0 / std::sqrt(static_cast<double>(n)), rng), uniform(10, 0.1, rng),
                              ActFn::None, "fc");
  g.output("y", y);
  return finish(std::move(g), seed);
}

ExampleModel coalesce_pair_example(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelGraph g("coalesce_pair");
  const double s = 1.0 / std::sqrt(128.0);
  Handle a = g.input("a", 128);
  Handle b = g.input("b", 128);
  g.output("ya", g.mvm(g.matrix("Wa", uniform(128, 128, s, rng)), a));
  g.output("yb", g.mvm(g.matrix("Wb", uniform(128, 128, s, rng)), b));
  return finish(std::move(g), seed);
}

ExampleModel vector_kernel_example(int width, int depth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelGraph g("vector_kernel");
  Handle x = g.input("x", width);
  Handle v = g.input("v", width);
  Handle y = x;
  for (int k = 0; k < depth; ++k) {
    y = g.alu(k % 2 ? AluOp::Mul : AluOp::Add, y, v);
    y = g.act(k % 3 == 0 ? ActFn::Relu : ActFn::Tanh, y);
  }
  const int n = std::min(width, 16);
  Handle head = g.mvm(g.matrix("W", uniform(n, n, 0.25, rng)), g.slice(y, 0, n));
  g.output("y", y);
  g.output("head", head);
  return finish(std::move(g), seed);
}

ExampleModel classifier_example(std::uint64_t seed, int test_samples) {
  constexpr int kIn = 16, kHidden = 16, kClasses = 4, kTrain = 512;
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd centers = uniform(kIn, kClasses, 1.0, rng);
  std::normal_distribution<double> noise(0.0, 0.45);
  auto sample = [&](int label) {
    return Eigen::VectorXd(centers.col(label) + Eigen::VectorXd::NullaryExpr(kIn, [&]() { return noise(rng); }));
  };

  Eigen::MatrixXd X(kIn, kTrain);
  std::vector<int> y(kTrain);
  for (int n = 0; n < kTrain; ++n) {
    y[static_cast<std::size_t>(n)] = n % kClasses;
    X.col(n) = sample(n % kClasses);
  }

  // Full-batch gradient descent on softmax cross-entropy.
  Eigen::MatrixXd w1 = uniform(kIn, kHidden, 0.5, rng), w2 = uniform(kHidden, kClasses, 0.5, rng);
  Eigen::VectorXd b1 = Eigen::VectorXd::Zero(kHidden), b2 = Eigen::VectorXd::Zero(kClasses);
  const double lr = 0.2;
  for (int epoch = 0; epoch < 400; ++epoch) {
    const Eigen::MatrixXd z1 = (w1.transpose() * X).colwise() + b1;
    const Eigen::MatrixXd h = z1.cwiseMax(0.0);
    Eigen::MatrixXd z2 = (w2.transpose() * h).colwise() + b2;
    for (int n = 0; n < kTrain; ++n) {
      Eigen::VectorXd e = (z2.col(n).array() - z2.col(n).maxCoeff()).exp();
      z2.col(n) = e / e.sum();
      z2(y[static_cast<std::size_t>(n)], n) -= 1.0;
    }
    const Eigen::MatrixXd d2 = z2 / kTrain;
    const Eigen::MatrixXd d1 = ((w2 * d2).array() * (z1.array() > 0.0).cast<double>()).matrix();
    w2 -= lr * h * d2.transpose();
    b2 -= lr * d2.rowwise().sum();
    w1 -= lr * X * d1.transpose();
    b1 -= lr * d1.rowwise().sum();
  }

  ModelGraph g("classifier");
  Handle x = g.input("x", kIn);
  g.set_layer(1);
  Handle hid = graph::mlp_layer(g, x, w1, b1, ActFn::Relu, "fc1");
  g.set_layer(2);
  Handle out = graph::mlp_layer(g, hid, w2, b2, ActFn::None, "fc2");
  g.output("y", out);
  ExampleModel e = finish(std::move(g), seed);
  e.output = "y";
  for (int n = 0; n < test_samples; ++n) {
    const int label = n % kClasses;
    graph::TensorMap in;
    in["x"] = num::quantize(sample(label), e.graph.frac_bits());
    e.test_set.push_back({std::move(in), label});
  }
  e.inputs = e.test_set.front().inputs;
  return e;
}

ModelGraph random_model(std::uint64_t seed, int dim, int max_nodes, int max_mvms) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  ModelGraph g(fmt::format("random{}", seed));
  std::vector<Handle> pool;
  std::vector<int> uses;
  const int n_inputs = pick(1, 2);
  for (int k = 0; k < n_inputs; ++k) {
    pool.push_back(g.input(fmt::format("in{}", k), pick(2, dim)));
    uses.push_back(0);
  }
  const std::size_t first_value = pool.size();
  auto take = [&]() {
    const std::size_t k = static_cast<std::size_t>(pick(0, static_cast<int>(pool.size()) - 1));
    ++uses[k];
    return pool[k];
  };
  auto add = [&](Handle h) {
    pool.push_back(h);
    uses.push_back(0);
  };
  int mvms = 0;
  const int steps = pick(max_nodes / 2, max_nodes);
  for (int s = 0; s < steps; ++s) {
    const int kind = s == 0 ? 0 : pick(0, 5);
    if (kind == 0 && mvms < max_mvms) {
      Handle a = take();
      if (g.size(a) > dim) a = g.slice(a, 0, dim);
      const int cols = pick(1, dim);
      add(g.mvm(g.matrix(fmt::format("W{}", mvms), uniform(g.size(a), cols, 0.5, rng)), a));
      ++mvms;
    } else if (kind <= 2) {
      Handle a = take(), b = take();
      const int w = std::min(g.size(a), g.size(b));
      if (g.size(a) != w) a = g.slice(a, 0, w);
      if (g.size(b) != w) b = g.slice(b, g.size(b) - w, w);
      static constexpr AluOp ops[] = {AluOp::Add, AluOp::Sub, AluOp::Mul, AluOp::Max, AluOp::Min};
      add(g.alu(ops[pick(0, 4)], a, b));
    } else if (kind == 3) {
      static constexpr ActFn fns[] = {ActFn::Relu, ActFn::Sigmoid, ActFn::Tanh};
      add(g.act(fns[pick(0, 2)], take()));
    } else if (kind == 4) {
      Handle a = take();
      add(pick(0, 1) ? g.alu_imm(AluOp::Mul, a, 0.5) : g.alu_imm(AluOp::Add, a, 0.25));
    } else {
      Handle a = take(), b = take();
      if (g.size(a) + g.size(b) <= 2 * dim) add(g.concat({a, b}));
      else add(g.slice(a, 0, std::max(1, g.size(a) / 2)));
    }
  }
  int outputs = 0;
  for (std::size_t k = first_value; k < pool.size(); ++k)
    if (uses[k] == 0) g.output(fmt::format("out{}", outputs++), pool[k]);
  if (outputs == 0) g.output("out0", pool.back());
  g.freeze();
  return g;
}

graph::TensorMap random_inputs(const ModelGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  graph::TensorMap t;
  for (int id : g.inputs()) {
    const auto& n = g.node(id);
    t[n.name] = num::quantize(Eigen::VectorXd::NullaryExpr(n.size, [&]() { return u(rng); }), g.frac_bits());
  }
  return t;
}

int argmax(const num::RawVector& v) {
  int best = 0;
  for (int k = 1; k < v.size(); ++k)
    if (v(k) > v(best)) best = k;
  return best;
}

}  // namespace puma::metrics
