#include "puma/graph/layers.hpp"

#include <random>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::graph {

Handle mlp_layer(ModelGraph& g, Handle x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b, ActFn f,
                 const std::string& name) {
  if (w.cols() != b.size())
    throw ShapeError(fmt::format("{}: bias length {} does not match {} outputs", name, b.size(), w.cols()));
  const Handle wm = g.matrix(name + ".W", w);
  const Handle bias = g.constant(name + ".B", b);
  return g.act(f, g.alu(isa::AluOp::Add, bias, g.mvm(wm, x)));
}

LstmWeights LstmWeights::zeros(int hidden, int inputs) {
  LstmWeights w;
  for (auto* m : {&w.wf, &w.wi, &w.wo, &w.wg}) *m = Eigen::MatrixXd::Zero(hidden + inputs, hidden);
  for (auto* v : {&w.bf, &w.bi, &w.bo, &w.bg}) *v = Eigen::VectorXd::Zero(hidden);
  return w;
}

LstmWeights LstmWeights::random(int hidden, int inputs, double scale, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  auto fill = [&](auto& m) { m = m.unaryExpr([&](double) { return u(rng); }); };
  LstmWeights w = zeros(hidden, inputs);
  for (auto* m : {&w.wf, &w.wi, &w.wo, &w.wg}) fill(*m);
  for (auto* v : {&w.bf, &w.bi, &w.bo, &w.bg}) fill(*v);
  return w;
}

LstmState lstm_cell(ModelGraph& g, Handle x, Handle h_prev, Handle c_prev, const LstmWeights& w,
                    const std::string& name) {
  const int hidden = g.size(h_prev);
  const int inputs = g.size(x);
  if (g.size(c_prev) != hidden) throw ShapeError(name + ": cell state and hidden state lengths differ");
  for (const auto* m : {&w.wf, &w.wi, &w.wo, &w.wg})
    if (m->rows() != hidden + inputs || m->cols() != hidden)
      throw ShapeError(fmt::format("{}: gate matrix must be {}x{}", name, hidden + inputs, hidden));
  for (const auto* v : {&w.bf, &w.bi, &w.bo, &w.bg})
    if (v->size() != hidden) throw ShapeError(fmt::format("{}: gate bias must have length {}", name, hidden));

  Eigen::MatrixXd wa(hidden + inputs, 2 * hidden), wb(hidden + inputs, 2 * hidden);
  wa << w.wf, w.wi;
  wb << w.wo, w.wg;
  Eigen::VectorXd ba(2 * hidden), bb(2 * hidden);
  ba << w.bf, w.bi;
  bb << w.bo, w.bg;

  const Handle mwa = g.matrix(name + ".Wfi", wa);
  const Handle cba = g.constant(name + ".Bfi", ba);
  const Handle mwb = g.matrix(name + ".Wog", wb);
  const Handle cbb = g.constant(name + ".Bog", bb);
  const Handle z = g.concat({h_prev, x});
  const Handle pa = g.alu(isa::AluOp::Add, g.mvm(mwa, z), cba);
  const Handle pb = g.alu(isa::AluOp::Add, g.mvm(mwb, z), cbb);
  const Handle f = g.act(ActFn::Sigmoid, g.slice(pa, 0, hidden));
  const Handle i = g.act(ActFn::Sigmoid, g.slice(pa, hidden, hidden));
  const Handle o = g.act(ActFn::Sigmoid, g.slice(pb, 0, hidden));
  const Handle gg = g.act(ActFn::Tanh, g.slice(pb, hidden, hidden));
  const Handle c = g.alu(isa::AluOp::Add, g.alu(isa::AluOp::Mul, f, c_prev), g.alu(isa::AluOp::Mul, i, gg));
  const Handle h = g.alu(isa::AluOp::Mul, o, g.act(ActFn::Tanh, c));
  return {h, c};
}

int lstm_node_count() { return 22; }

std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_reference(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                                                           const Eigen::VectorXd& c, const LstmWeights& w) {
  Eigen::VectorXd z(h.size() + x.size());
  z << h, x;
  auto sig = [](const Eigen::VectorXd& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix().eval(); };
  const Eigen::VectorXd f = sig(w.wf.transpose() * z + w.bf);
  const Eigen::VectorXd i = sig(w.wi.transpose() * z + w.bi);
  const Eigen::VectorXd o = sig(w.wo.transpose() * z + w.bo);
  const Eigen::VectorXd gg = (w.wg.transpose() * z + w.bg).array().tanh().matrix();
  const Eigen::VectorXd c2 = (f.array() * c.array() + i.array() * gg.array()).matrix();
  const Eigen::VectorXd h2 = (o.array() * c2.array().tanh()).matrix();
  return {h2, c2};
}

Handle conv_layer(ModelGraph& g, Handle x, const ConvShape& s, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                  ActFn f, const std::string& name) {
  if (s.height < 1 || s.width < 1 || s.channels < 1 || s.kernel_h < 1 || s.kernel_w < 1 || s.filters < 1 || s.stride < 1)
    throw ShapeError(name + ": conv dimensions must be positive");
  if (s.kernel_h > s.height || s.kernel_w > s.width) throw ShapeError(name + ": kernel larger than image");
  if ((s.height - s.kernel_h) % s.stride != 0 || (s.width - s.kernel_w) % s.stride != 0)
    throw ShapeError(fmt::format("{}: stride {} does not tile the {}x{} image", name, s.stride, s.height, s.width));
  if (g.size(x) != s.height * s.width * s.channels)
    throw ShapeError(fmt::format("{}: input length {} is not {}x{}x{}", name, g.size(x), s.height, s.width, s.channels));
  if (w.rows() != s.window() || w.cols() != s.filters)
    throw ShapeError(fmt::format("{}: kernel matrix must be {}x{}", name, s.window(), s.filters));
  if (b.size() != s.filters) throw ShapeError(name + ": bias length must equal filter count");

  const Handle wm = g.matrix(name + ".W", w);
  const Handle bias = g.constant(name + ".B", b);
  std::vector<Handle> results;
  const int run = s.kernel_w * s.channels;
  for (int oy = 0; oy < s.out_h(); ++oy) {
    for (int ox = 0; ox < s.out_w(); ++ox) {
      std::vector<Piece> pieces;
      for (int i = 0; i < s.kernel_h; ++i)
        pieces.push_back({0, ((oy * s.stride + i) * s.width + ox * s.stride) * s.channels, run});
      const Handle win = g.gather({x}, pieces);
      results.push_back(g.act(f, g.alu(isa::AluOp::Add, g.mvm(wm, win), bias)));
    }
  }
  const Handle out = g.concat(results);
  ConvRegion r;
  r.input = x.id;
  r.matrix = wm.id;
  r.bias = bias.id;
  r.output = out.id;
  r.height = s.height;
  r.width = s.width;
  r.channels = s.channels;
  r.kernel_h = s.kernel_h;
  r.kernel_w = s.kernel_w;
  r.stride = s.stride;
  r.filters = s.filters;
  r.act = f;
  g.add_conv_region(r);
  return out;
}

int conv_node_count(const ConvShape& s, ActFn f) {
  return 2 + s.out_h() * s.out_w() * (3 + (f == ActFn::None ? 0 : 1)) + 1;
}

Eigen::VectorXd conv_reference(const Eigen::VectorXd& x, const ConvShape& s, const Eigen::MatrixXd& w,
                               const Eigen::VectorXd& b) {
  Eigen::VectorXd out(s.out_h() * s.out_w() * s.filters);
  for (int oy = 0; oy < s.out_h(); ++oy)
    for (int ox = 0; ox < s.out_w(); ++ox)
      for (int m = 0; m < s.filters; ++m) {
        double acc = b(m);
        for (int i = 0; i < s.kernel_h; ++i)
          for (int j = 0; j < s.kernel_w; ++j)
            for (int k = 0; k < s.channels; ++k)
              acc += x(((oy * s.stride + i) * s.width + ox * s.stride + j) * s.channels + k) *
                     w((i * s.kernel_w + j) * s.channels + k, m);
        out((oy * s.out_w() + ox) * s.filters + m) = acc;
      }
  return out;
}

}  // namespace puma::graph
