#include "puma/compiler/ir.hpp"

#include <array>
#include <queue>

#include <fmt/format.h>

#include "puma/error.hpp"
#include "puma/isa/semantics.hpp"

namespace puma::compiler {

std::string_view to_string(OpKind k) {
  static constexpr std::array<std::string_view, 12> names = {"input", "const",  "mvm",   "alu",  "alui",    "gather",
                                                              "output", "store", "load", "send", "receive", "convloop"};
  return names.at(static_cast<std::size_t>(k));
}

bool is_memory_value(OpKind k) {
  return k == OpKind::Input || k == OpKind::Const || k == OpKind::Store || k == OpKind::Receive;
}

bool runs_on_core(OpKind k) {
  switch (k) {
    case OpKind::MvmTile:
    case OpKind::Alu:
    case OpKind::AluImm:
    case OpKind::Gather:
    case OpKind::Output:
    case OpKind::Store:
    case OpKind::Load:
    case OpKind::ConvLoop:
      return true;
    default:
      return false;
  }
}

int Program::add(Op o) {
  o.id = static_cast<int>(ops.size());
  ops.push_back(std::move(o));
  return ops.back().id;
}

std::vector<std::vector<int>> Program::consumers() const {
  std::vector<std::vector<int>> out(ops.size());
  for (const auto& o : ops)
    for (int a : o.args) {
      auto& list = out[static_cast<std::size_t>(a)];
      if (list.empty() || list.back() != o.id) list.push_back(o.id);
    }
  return out;
}

std::vector<int> Program::topological_order() const {
  std::vector<int> indeg(ops.size(), 0);
  const auto cons = consumers();
  for (const auto& o : ops)
    for (std::size_t k = 0; k < o.args.size(); ++k) {
      bool dup = false;
      for (std::size_t j = 0; j < k; ++j) dup |= o.args[j] == o.args[k];
      if (!dup) ++indeg[static_cast<std::size_t>(o.id)];
    }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (const auto& o : ops)
    if (indeg[static_cast<std::size_t>(o.id)] == 0) ready.push(o.id);
  std::vector<int> order;
  order.reserve(ops.size());
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : cons[static_cast<std::size_t>(v)])
      if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push(c);
  }
  if (order.size() != ops.size()) throw CompileError("dependence cycle in program graph");
  return order;
}

namespace {

num::RawVector conv_windows(const graph::ConvRegion& r, const num::RawMatrix& w, const num::RawVector& x,
                            const num::RawVector& bias, int frac, const num::LutSet& luts) {
  const int run = r.kernel_w * r.channels;
  num::RawVector out(r.out_h() * r.out_w() * r.filters);
  num::RawVector win(r.kernel_h * run);
  for (int oy = 0; oy < r.out_h(); ++oy)
    for (int ox = 0; ox < r.out_w(); ++ox) {
      for (int i = 0; i < r.kernel_h; ++i)
        win.segment(i * run, run) = x.segment(((oy * r.stride + i) * r.width + ox * r.stride) * r.channels, run);
      num::RawVector y = num::ideal_mvm(w, win, frac);
      for (int m = 0; m < r.filters; ++m) {
        std::int16_t v = num::add_sat(y(m), bias(m));
        if (r.act != graph::ActFn::None) v = isa::alu_scalar(graph::act_alu_op(r.act), v, 0, frac, luts);
        out((oy * r.out_w() + ox) * r.filters + m) = v;
      }
    }
  return out;
}

}  // namespace

graph::TensorMap Program::evaluate(const graph::TensorMap& inputs, int lut_index_bits) const {
  const num::LutSet luts(frac_bits, lut_index_bits);
  std::vector<num::RawVector> val(ops.size());
  graph::TensorMap out;
  for (int id : topological_order()) {
    const Op& o = op(id);
    auto& v = val[static_cast<std::size_t>(id)];
    auto arg = [&](std::size_t k) -> const num::RawVector& { return val[static_cast<std::size_t>(o.args[k])]; };
    switch (o.kind) {
      case OpKind::Input: {
        auto it = inputs.find(o.name);
        if (it == inputs.end() || it->second.size() != o.width) throw ShapeError(fmt::format("missing or mis-sized input '{}'", o.name));
        v = it->second;
        break;
      }
      case OpKind::Const: v = const_data.at(id); break;
      case OpKind::MvmTile: v = num::ideal_mvm(mtiles.at(static_cast<std::size_t>(o.mtile)).data, arg(0), frac_bits); break;
      case OpKind::Alu:
      case OpKind::AluImm: {
        v.resize(o.width);
        std::span<const std::int16_t> b;
        if (o.kind == OpKind::Alu && o.args.size() > 1) b = {arg(1).data(), static_cast<std::size_t>(arg(1).size())};
        if (o.kind == OpKind::AluImm) b = {&o.imm, 1};
        isa::alu_vector(o.alu, {arg(0).data(), static_cast<std::size_t>(arg(0).size())}, b, o.kind == OpKind::AluImm,
                        {v.data(), static_cast<std::size_t>(v.size())}, frac_bits, luts);
        break;
      }
      case OpKind::Gather: {
        v.resize(o.width);
        Eigen::Index at = 0;
        for (const auto& p : o.pieces) {
          v.segment(at, p.length) = arg(static_cast<std::size_t>(p.operand)).segment(p.offset, p.length);
          at += p.length;
        }
        break;
      }
      case OpKind::Output:
        v = arg(0);
        out[o.name] = v;
        break;
      case OpKind::Store:
      case OpKind::Load:
      case OpKind::Send:
      case OpKind::Receive: v = arg(0); break;
      case OpKind::ConvLoop:
        v = conv_windows(conv_regions.at(static_cast<std::size_t>(o.conv)), mtiles.at(static_cast<std::size_t>(o.mtile)).data,
                         arg(0), arg(1), frac_bits, luts);
        break;
    }
  }
  return out;
}

Reachability::Reachability(const Program& p) : words_((p.ops.size() + 63) / 64), bits_(words_ * p.ops.size(), 0) {
  const auto order = p.topological_order();
  const auto cons = p.consumers();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    std::uint64_t* row = &bits_[v * words_];
    for (int c : cons[v]) {
      const auto cu = static_cast<std::size_t>(c);
      row[cu / 64] |= std::uint64_t{1} << (cu % 64);
      const std::uint64_t* crow = &bits_[cu * words_];
      for (std::size_t w = 0; w < words_; ++w) row[w] |= crow[w];
    }
  }
}

bool Reachability::reaches(int from, int to) const {
  const auto f = static_cast<std::size_t>(from), t = static_cast<std::size_t>(to);
  return bits_[f * words_ + t / 64] >> (t % 64) & 1;
}

}  // namespace puma::compiler
