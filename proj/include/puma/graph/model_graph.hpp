#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "puma/isa/instruction.hpp"
#include "puma/numerics/fixed.hpp"

namespace puma::graph {

enum class NodeKind : std::uint8_t { Input, ConstVector, ConstMatrix, Mvm, Alu, AluImm, Act, Gather, Output };
enum class ActFn : std::uint8_t { None, Relu, Sigmoid, Tanh, Log, Exp };

std::string_view to_string(NodeKind k);
std::string_view to_string(ActFn f);
std::optional<ActFn> act_from_string(std::string_view s);
isa::AluOp act_alu_op(ActFn f);

/// Contiguous run copied from one gather operand.
struct Piece {
  int operand = 0;  // index into Node::operands
  int offset = 0;
  int length = 0;
  friend bool operator==(const Piece&, const Piece&) = default;
};

struct Node {
  int id = 0;
  NodeKind kind = NodeKind::Input;
  std::string name;
  int size = 0;  // vector length; for ConstMatrix the column (output) count
  int rows = 0;  // ConstMatrix only: input length
  std::vector<int> operands;
  isa::AluOp alu_op = isa::AluOp::Add;
  std::int16_t imm = 0;  // AluImm raw operand
  ActFn act = ActFn::None;
  std::vector<Piece> pieces;
  int layer = 0;
  friend bool operator==(const Node&, const Node&) = default;
};

class ModelGraph;

/// Reference to a node of a specific graph.
struct Handle {
  const ModelGraph* owner = nullptr;
  int id = -1;
  bool valid() const { return owner && id >= 0; }
};

/// Window iteration of one conv layer, kept so the compiler can emit it as a loop.
struct ConvRegion {
  int input = -1;   // HWC-flattened image
  int matrix = -1;  // (R*S*C) x M
  int bias = -1;
  int output = -1;  // gather of all window results
  int height = 0, width = 0, channels = 0;
  int kernel_h = 0, kernel_w = 0, stride = 1, filters = 0;
  ActFn act = ActFn::None;
  int out_h() const { return (height - kernel_h) / stride + 1; }
  int out_w() const { return (width - kernel_w) / stride + 1; }
  friend bool operator==(const ConvRegion&, const ConvRegion&) = default;
};

/// Dataflow graph built by the user API. Nodes are appended in topological order.
class ModelGraph {
 public:
  explicit ModelGraph(std::string name = "model", int frac_bits = num::kDefaultFracBits);

  const std::string& name() const { return name_; }
  int frac_bits() const { return frac_bits_; }

  Handle input(const std::string& name, int n);
  /// Sequence input: one vector per time step, exposed as name[0], name[1], ...
  std::vector<Handle> stream(const std::string& name, int n, int steps);
  Handle constant(const std::string& name, const num::RawVector& v);
  Handle constant(const std::string& name, const Eigen::VectorXd& v);
  /// Rows of W index inputs, columns index outputs.
  Handle matrix(const std::string& name, const num::RawMatrix& w);
  Handle matrix(const std::string& name, const Eigen::MatrixXd& w);

  Handle mvm(Handle w, Handle x);
  Handle alu(isa::AluOp op, Handle a, Handle b);
  Handle alu(isa::AluOp op, Handle a);
  Handle alu_imm(isa::AluOp op, Handle a, double k);
  Handle alu_imm_raw(isa::AluOp op, Handle a, std::int16_t raw);
  Handle act(ActFn f, Handle x);
  Handle gather(const std::vector<Handle>& sources, const std::vector<Piece>& pieces);
  Handle concat(const std::vector<Handle>& parts);
  Handle slice(Handle x, int offset, int length);
  Handle output(const std::string& name, Handle x);

  /// Subsequent nodes carry this layer tag, used as the communication phase.
  void set_layer(int layer) { layer_ = layer; }
  int layer() const { return layer_; }
  int next_layer() { return ++layer_; }

  void add_conv_region(const ConvRegion& r);
  const std::vector<ConvRegion>& conv_regions() const { return regions_; }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(Handle h) const;
  int size(Handle h) const { return node(h).size; }

  const num::RawMatrix& matrix_data(int id) const { return matrices_.at(id); }
  const num::RawVector& vector_data(int id) const { return vectors_.at(id); }
  std::vector<int> inputs() const;
  std::vector<int> outputs() const;
  std::vector<std::vector<int>> consumers() const;

  /// Checks the structural invariants; throws ShapeError on violation.
  void validate() const;

  // Low-level hooks for deserialization.
  int append(Node n);
  void set_matrix_data(int id, num::RawMatrix m) { matrices_[id] = std::move(m); }
  void set_vector_data(int id, num::RawVector v) { vectors_[id] = std::move(v); }

  friend bool operator==(const ModelGraph& a, const ModelGraph& b);

 private:
  const Node& vector_operand(Handle h, const char* what) const;
  void check_owner(Handle h) const;
  void check_mutable() const;

  std::string name_;
  int frac_bits_;
  int layer_ = 0;
  bool frozen_ = false;
  std::vector<Node> nodes_;
  std::map<int, num::RawMatrix> matrices_;
  std::map<int, num::RawVector> vectors_;
  std::vector<ConvRegion> regions_;
};

}  // namespace puma::graph
