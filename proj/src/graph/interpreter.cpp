#include "puma/graph/interpreter.hpp"

#include <fmt/format.h>

#include "puma/error.hpp"
#include "puma/isa/semantics.hpp"

namespace puma::graph {

num::RawVector blocked_mvm(const num::RawMatrix& w, const num::RawVector& x, int crossbar_dim, int frac_bits) {
  if (w.rows() != x.size()) throw ShapeError("blocked_mvm: input length does not match matrix rows");
  num::RawVector acc;
  for (Eigen::Index r0 = 0; r0 < w.rows(); r0 += crossbar_dim) {
    const Eigen::Index n = std::min<Eigen::Index>(crossbar_dim, w.rows() - r0);
    const num::RawMatrix block = w.middleRows(r0, n);
    const num::RawVector xb = x.segment(r0, n);
    num::RawVector part = num::ideal_mvm(block, xb, frac_bits);
    if (r0 == 0) {
      acc = std::move(part);
    } else {
      for (Eigen::Index c = 0; c < acc.size(); ++c) acc(c) = num::add_sat(acc(c), part(c));
    }
  }
  return acc;
}

std::vector<num::RawVector> Interpreter::evaluate_all(const ModelGraph& g, const TensorMap& inputs) const {
  const num::LutSet luts(g.frac_bits(), lut_bits_);
  const int frac = g.frac_bits();
  std::vector<num::RawVector> val(g.nodes().size());
  for (const Node& n : g.nodes()) {
    auto& out = val[static_cast<std::size_t>(n.id)];
    auto arg = [&](std::size_t k) -> const num::RawVector& { return val[static_cast<std::size_t>(n.operands[k])]; };
    switch (n.kind) {
      case NodeKind::Input: {
        auto it = inputs.find(n.name);
        if (it == inputs.end()) throw ShapeError(fmt::format("missing input '{}'", n.name));
        if (it->second.size() != n.size)
          throw ShapeError(fmt::format("input '{}' has length {}, expected {}", n.name, it->second.size(), n.size));
        out = it->second;
        break;
      }
      case NodeKind::ConstVector: out = g.vector_data(n.id); break;
      case NodeKind::ConstMatrix: break;
      case NodeKind::Mvm: out = blocked_mvm(g.matrix_data(n.operands[0]), arg(1), dim_, frac); break;
      case NodeKind::Alu:
      case NodeKind::AluImm:
      case NodeKind::Act: {
        out.resize(n.size);
        const isa::AluOp op = n.kind == NodeKind::Act ? act_alu_op(n.act) : n.alu_op;
        const std::int16_t imm = n.imm;
        std::span<const std::int16_t> b;
        if (n.kind == NodeKind::Alu && n.operands.size() > 1) b = {arg(1).data(), static_cast<std::size_t>(arg(1).size())};
        if (n.kind == NodeKind::AluImm) b = {&imm, 1};
        isa::alu_vector(op, {arg(0).data(), static_cast<std::size_t>(arg(0).size())}, b, n.kind == NodeKind::AluImm,
                        {out.data(), static_cast<std::size_t>(out.size())}, frac, luts);
        break;
      }
      case NodeKind::Gather: {
        out.resize(n.size);
        Eigen::Index at = 0;
        for (const auto& p : n.pieces) {
          out.segment(at, p.length) = arg(static_cast<std::size_t>(p.operand)).segment(p.offset, p.length);
          at += p.length;
        }
        break;
      }
      case NodeKind::Output: out = arg(0); break;
    }
  }
  return val;
}

TensorMap Interpreter::evaluate(const ModelGraph& g, const TensorMap& inputs) const {
  const auto val = evaluate_all(g, inputs);
  TensorMap out;
  for (int id : g.outputs()) out[g.node(id).name] = val[static_cast<std::size_t>(id)];
  return out;
}

}  // namespace puma::graph
