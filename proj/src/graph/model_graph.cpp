#include "puma/graph/model_graph.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::graph {

namespace {

constexpr std::array<std::string_view, 9> kKindNames = {"input", "const_vector", "const_matrix", "mvm", "alu",
                                                         "alu_imm", "act", "gather", "output"};
constexpr std::array<std::string_view, 6> kActNames = {"none", "relu", "sigmoid", "tanh", "log", "exp"};

}  // namespace

std::string_view to_string(NodeKind k) { return kKindNames.at(static_cast<std::size_t>(k)); }
std::string_view to_string(ActFn f) { return kActNames.at(static_cast<std::size_t>(f)); }

std::optional<ActFn> act_from_string(std::string_view s) {
  auto it = std::find(kActNames.begin(), kActNames.end(), s);
  if (it == kActNames.end()) return std::nullopt;
  return static_cast<ActFn>(it - kActNames.begin());
}

isa::AluOp act_alu_op(ActFn f) {
  switch (f) {
    case ActFn::Relu: return isa::AluOp::Relu;
    case ActFn::Sigmoid: return isa::AluOp::Sigmoid;
    case ActFn::Tanh: return isa::AluOp::Tanh;
    case ActFn::Log: return isa::AluOp::Log;
    case ActFn::Exp: return isa::AluOp::Exp;
    case ActFn::None: break;
  }
  throw Error("identity activation has no ALU operation");
}

ModelGraph::ModelGraph(std::string name, int frac_bits) : name_(std::move(name)), frac_bits_(frac_bits) {
  if (frac_bits < 0 || frac_bits > 15) throw Error("frac_bits must lie in [0, 15]");
}

void ModelGraph::check_mutable() const {
  if (frozen_) throw Error("model '" + name_ + "' is frozen");
}

void ModelGraph::check_owner(Handle h) const {
  if (h.owner != this) throw ShapeError("handle belongs to a different model");
  if (h.id < 0 || h.id >= static_cast<int>(nodes_.size())) throw ShapeError("dangling node handle");
}

const Node& ModelGraph::node(Handle h) const {
  check_owner(h);
  return nodes_[static_cast<std::size_t>(h.id)];
}

const Node& ModelGraph::vector_operand(Handle h, const char* what) const {
  const Node& n = node(h);
  if (n.kind == NodeKind::ConstMatrix)
    throw ShapeError(fmt::format("{}: matrix '{}' used where a vector is expected", what, n.name));
  if (n.kind == NodeKind::Output) throw ShapeError(fmt::format("{}: output '{}' cannot be consumed", what, n.name));
  return n;
}

int ModelGraph::append(Node n) {
  n.id = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

Handle ModelGraph::input(const std::string& name, int n) {
  check_mutable();
  if (n < 1) throw ShapeError("input length must be positive");
  for (const auto& x : nodes_)
    if ((x.kind == NodeKind::Input || x.kind == NodeKind::Output) && x.name == name)
      throw ShapeError("duplicate input/output name '" + name + "'");
  Node node;
  node.kind = NodeKind::Input;
  node.name = name;
  node.size = n;
  node.layer = layer_;
  return {this, append(std::move(node))};
}

std::vector<Handle> ModelGraph::stream(const std::string& name, int n, int steps) {
  std::vector<Handle> out;
  for (int t = 0; t < steps; ++t) out.push_back(input(fmt::format("{}[{}]", name, t), n));
  return out;
}

Handle ModelGraph::constant(const std::string& name, const num::RawVector& v) {
  check_mutable();
  if (v.size() < 1) throw ShapeError("constant vector must be nonempty");
  Node node;
  node.kind = NodeKind::ConstVector;
  node.name = name;
  node.size = static_cast<int>(v.size());
  node.layer = layer_;
  const int id = append(std::move(node));
  vectors_[id] = v;
  return {this, id};
}

Handle ModelGraph::constant(const std::string& name, const Eigen::VectorXd& v) {
  return constant(name, num::RawVector(num::quantize(v, frac_bits_)));
}

Handle ModelGraph::matrix(const std::string& name, const num::RawMatrix& w) {
  check_mutable();
  if (w.rows() < 1 || w.cols() < 1) throw ShapeError("matrix must be nonempty");
  Node node;
  node.kind = NodeKind::ConstMatrix;
  node.name = name;
  node.rows = static_cast<int>(w.rows());
  node.size = static_cast<int>(w.cols());
  node.layer = layer_;
  const int id = append(std::move(node));
  matrices_[id] = w;
  return {this, id};
}

Handle ModelGraph::matrix(const std::string& name, const Eigen::MatrixXd& w) {
  return matrix(name, num::quantize(w, frac_bits_));
}

Handle ModelGraph::mvm(Handle w, Handle x) {
  check_mutable();
  const Node& wm = node(w);
  if (wm.kind != NodeKind::ConstMatrix) throw ShapeError(fmt::format("mvm: '{}' is not a constant matrix", wm.name));
  const Node& xv = vector_operand(x, "mvm");
  if (xv.size != wm.rows)
    throw ShapeError(fmt::format("mvm: matrix '{}' has {} rows but input has length {}", wm.name, wm.rows, xv.size));
  Node node;
  node.kind = NodeKind::Mvm;
  node.size = wm.size;
  node.operands = {w.id, x.id};
  node.layer = layer_;
  return {this, append(std::move(node))};
}

Handle ModelGraph::alu(isa::AluOp op, Handle a, Handle b) {
  check_mutable();
  if (isa::is_unary(op)) throw ShapeError(fmt::format("alu: '{}' takes one operand", isa::to_string(op)));
  if (op == isa::AluOp::Subsample) throw ShapeError("alu: subsample takes an immediate stride");
  const Node& na = vector_operand(a, "alu");
  const Node& nb = vector_operand(b, "alu");
  if (na.size != nb.size) throw ShapeError(fmt::format("alu {}: operand lengths {} and {} differ", isa::to_string(op), na.size, nb.size));
  Node node;
  node.kind = NodeKind::Alu;
  node.alu_op = op;
  node.size = na.size;
  node.operands = {a.id, b.id};
  node.layer = layer_;
  return {this, append(std::move(node))};
}

Handle ModelGraph::alu(isa::AluOp op, Handle a) {
  check_mutable();
  if (!isa::is_unary(op)) throw ShapeError(fmt::format("alu: '{}' takes two operands", isa::to_string(op)));
  const Node& na = vector_operand(a, "alu");
  Node node;
  node.kind = NodeKind::Alu;
  node.alu_op = op;
  node.size = na.size;
  node.operands = {a.id};
  node.layer = layer_;
  return {this, append(std::move(node))};
}

Handle ModelGraph::alu_imm_raw(isa::AluOp op, Handle a, std::int16_t raw) {
  check_mutable();
  if (isa::is_unary(op)) throw ShapeError(fmt::format("alu_imm: '{}' takes no immediate", isa::to_string(op)));
  const int half = 1 << (isa::kAluImmBits - 1);
  if (raw < -half || raw >= half) throw ShapeError(fmt::format("alu_imm: immediate {} does not fit in 14 bits", raw));
  const Node& na = vector_operand(a, "alu_imm");
  int size = na.size;
  if (op == isa::AluOp::Subsample) {
    if (raw < 1) throw ShapeError("subsample stride must be positive");
    size = (na.size + raw - 1) / raw;
  }
  Node node;
  node.kind = NodeKind::AluImm;
  node.alu_op = op;
  node.imm = raw;
  node.size = size;
  node.operands = {a.id};
  node.layer = layer_;
  return {this, append(std::move(node))};
}

Handle ModelGraph::alu_imm(isa::AluOp op, Handle a, double k) {
  const bool integral = op == isa::AluOp::Shl || op == isa::AluOp::Shr || op == isa::AluOp::Subsample;
  const double raw = integral ? k : std::ldexp(k, frac_bits_);
  return alu_imm_raw(op, a, static_cast<std::int16_t>(std::clamp(std::nearbyint(raw), -32768.0, 32767.0)));
}

Handle ModelGraph::act(ActFn f, Handle x) {
  check_mutable();
  const Node& nx = vector_operand(x, "act");
  if (f == ActFn::None) return x;
  Node node;
  node.kind = NodeKind::Act;
  node.act = f;
  node.size = nx.size;
  node.operands = {x.id};
  node.layer = layer_;
  return {this, append(std::move(node))};
}

Handle ModelGraph::gather(const std::vector<Handle>& sources, const std::vector<Piece>& pieces) {
  check_mutable();
  if (pieces.empty()) throw ShapeError("gather needs at least one piece");
  Node node;
  node.kind = NodeKind::Gather;
  node.layer = layer_;
  for (const auto& s : sources) node.operands.push_back(vector_operand(s, "gather").id);
  for (const auto& p : pieces) {
    if (p.operand < 0 || p.operand >= static_cast<int>(sources.size())) throw ShapeError("gather piece names a missing operand");
    const int n = vector_operand(sources[static_cast<std::size_t>(p.operand)], "gather").size;
    if (p.length < 1 || p.offset < 0 || p.offset + p.length > n)
      throw ShapeError(fmt::format("gather piece [{}, +{}) exceeds operand of length {}", p.offset, p.length, n));
    node.size += p.length;
  }
  node.pieces = pieces;
  return {this, append(std::move(node))};
}

Handle ModelGraph::concat(const std::vector<Handle>& parts) {
  std::vector<Piece> pieces;
  for (std::size_t k = 0; k < parts.size(); ++k) pieces.push_back({static_cast<int>(k), 0, size(parts[k])});
  return gather(parts, pieces);
}

Handle ModelGraph::slice(Handle x, int offset, int length) { return gather({x}, {{0, offset, length}}); }

Handle ModelGraph::output(const std::string& name, Handle x) {
  check_mutable();
  const Node& nx = vector_operand(x, "output");
  for (const auto& n : nodes_)
    if ((n.kind == NodeKind::Input || n.kind == NodeKind::Output) && n.name == name)
      throw ShapeError("duplicate input/output name '" + name + "'");
  Node node;
  node.kind = NodeKind::Output;
  node.name = name;
  node.size = nx.size;
  node.operands = {x.id};
  node.layer = layer_;
  return {this, append(std::move(node))};
}

void ModelGraph::add_conv_region(const ConvRegion& r) {
  check_mutable();
  regions_.push_back(r);
}

std::vector<int> ModelGraph::inputs() const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Input) out.push_back(n.id);
  return out;
}

std::vector<int> ModelGraph::outputs() const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Output) out.push_back(n.id);
  return out;
}

std::vector<std::vector<int>> ModelGraph::consumers() const {
  std::vector<std::vector<int>> out(nodes_.size());
  for (const auto& n : nodes_)
    for (int o : n.operands) out[static_cast<std::size_t>(o)].push_back(n.id);
  return out;
}

void ModelGraph::validate() const {
  for (const auto& n : nodes_) {
    for (std::size_t k = 0; k < n.operands.size(); ++k) {
      const int o = n.operands[k];
      if (o < 0 || o >= n.id) throw ShapeError(fmt::format("node {} has operand {} that does not precede it", n.id, o));
      const Node& src = nodes_[static_cast<std::size_t>(o)];
      const bool matrix_slot = n.kind == NodeKind::Mvm && k == 0;
      if ((src.kind == NodeKind::ConstMatrix) != matrix_slot)
        throw ShapeError(fmt::format("node {}: constant matrices may only feed the matrix slot of an mvm", n.id));
      if (src.kind == NodeKind::Output) throw ShapeError(fmt::format("node {} consumes output node {}", n.id, o));
    }
    switch (n.kind) {
      case NodeKind::Input:
      case NodeKind::ConstVector:
      case NodeKind::ConstMatrix:
        if (!n.operands.empty()) throw ShapeError(fmt::format("leaf node {} has operands", n.id));
        break;
      case NodeKind::Mvm:
        if (n.operands.size() != 2) throw ShapeError(fmt::format("mvm node {} needs a matrix and a vector", n.id));
        break;
      case NodeKind::Alu:
        if (n.operands.size() != (isa::is_unary(n.alu_op) ? 1u : 2u))
          throw ShapeError(fmt::format("alu node {} has the wrong arity", n.id));
        break;
      case NodeKind::AluImm:
      case NodeKind::Act:
      case NodeKind::Output:
        if (n.operands.size() != 1) throw ShapeError(fmt::format("node {} needs exactly one operand", n.id));
        break;
      case NodeKind::Gather:
        if (n.pieces.empty()) throw ShapeError(fmt::format("gather node {} has no pieces", n.id));
        break;
    }
  }
}

namespace {

template <typename M>
bool same_tensors(const std::map<int, M>& a, const std::map<int, M>& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.rows() != ib->second.rows() || ia->second.cols() != ib->second.cols())
      return false;
    if (ia->second != ib->second) return false;
  }
  return true;
}

}  // namespace

bool operator==(const ModelGraph& a, const ModelGraph& b) {
  return a.name_ == b.name_ && a.frac_bits_ == b.frac_bits_ && a.nodes_ == b.nodes_ &&
         same_tensors(a.matrices_, b.matrices_) && same_tensors(a.vectors_, b.vectors_) && a.regions_ == b.regions_;
}

}  // namespace puma::graph
