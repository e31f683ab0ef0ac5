#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "puma/graph/interpreter.hpp"
#include "puma/graph/model_graph.hpp"
#include "puma/isa/instruction.hpp"

namespace puma::compiler {

enum class OpKind : std::uint8_t {
  Input,    // host-written tile memory
  Const,    // host-written tile memory
  MvmTile,  // one crossbar-sized block of a logical MVM
  Alu,
  AluImm,
  Gather,
  Output,
  Store,    // core register -> tile memory
  Load,     // tile memory -> core register
  Send,     // tile memory -> network
  Receive,  // network -> tile memory
  ConvLoop, // a whole conv layer emitted as a counted loop
};

std::string_view to_string(OpKind k);

/// Execution site. core == -1 with tile >= 0 means the tile control unit.
struct Loc {
  int tile = -1;
  int core = -1;
  bool valid() const { return tile >= 0; }
  friend bool operator==(const Loc&, const Loc&) = default;
  friend auto operator<=>(const Loc&, const Loc&) = default;
};

struct MatrixTile {
  int matrix = -1;  // graph node id of the logical matrix
  int row_block = 0;
  int col_block = 0;
  num::RawMatrix data;  // rows x cols, rows index inputs
  Loc loc;
  int mvmu = -1;
};

struct Op {
  int id = 0;
  OpKind kind = OpKind::Input;
  int width = 0;
  std::vector<int> args;
  isa::AluOp alu = isa::AluOp::Add;
  std::int16_t imm = 0;
  std::vector<graph::Piece> pieces;
  int mtile = -1;  // MvmTile / ConvLoop
  int conv = -1;   // ConvLoop: index into Program::conv_regions
  std::string name;
  int origin = -1;  // graph node this op realizes (provenance)
  int layer = 0;
  Loc loc;
  int count = 0;   // Store / Receive consumer count; 0 = sticky
  int target = -1; // Send: receiving tile
  int fifo = -1;   // Send / Receive
};

/// Compiler intermediate form: a DAG of vector operations over crossbar-sized matrix tiles.
struct Program {
  std::string name;
  int frac_bits = 12;
  int crossbar_dim = 128;
  std::vector<Op> ops;
  std::vector<MatrixTile> mtiles;
  std::map<int, num::RawVector> const_data;  // Const op id -> payload
  std::vector<graph::ConvRegion> conv_regions;

  int add(Op op);
  Op& op(int id) { return ops.at(static_cast<std::size_t>(id)); }
  const Op& op(int id) const { return ops.at(static_cast<std::size_t>(id)); }
  std::vector<std::vector<int>> consumers() const;

  /// Kahn order, lowest id first among ready ops. Throws CompileError on a cycle.
  std::vector<int> topological_order() const;

  /// Reference semantics of the IR itself, for pass-equivalence checks.
  graph::TensorMap evaluate(const graph::TensorMap& inputs, int lut_index_bits = 8) const;
};

/// Whole-graph reachability over op ids, one bit row per op.
class Reachability {
 public:
  explicit Reachability(const Program& p);
  /// True when `to` depends on `from` (transitively); false for from == to.
  bool reaches(int from, int to) const;

 private:
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

bool is_memory_value(OpKind k);
bool runs_on_core(OpKind k);

}  // namespace puma::compiler
