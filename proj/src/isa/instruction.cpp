#include "puma/isa/instruction.hpp"

#include <algorithm>

namespace puma::isa {

namespace {

constexpr std::array<std::string_view, kOpcodeCount> kMnemonics = {
    "mvm", "alu", "alui", "aluint", "set", "copy", "load", "store", "send", "receive", "jmp", "brn"};
constexpr std::array<std::string_view, kAluOpCount> kAluNames = {
    "add", "sub", "mul", "div", "shl", "shr", "and", "or", "not",
    "relu", "sigmoid", "tanh", "log", "exp", "rand", "subsample", "min", "max"};
constexpr std::array<std::string_view, kAluIntOpCount> kAluIntNames = {"add", "sub", "eq", "gt", "ne"};
constexpr std::array<std::string_view, kBrnOpCount> kBrnNames = {"eq", "ne", "lt", "gt"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  auto it = std::find(names.begin(), names.end(), s);
  if (it == names.end()) return std::nullopt;
  return static_cast<E>(it - names.begin());
}

std::uint16_t u16(int v) { return static_cast<std::uint16_t>(v); }

}  // namespace

std::string_view mnemonic(Opcode op) {
  const auto i = static_cast<std::size_t>(op) - 1;
  return i < kMnemonics.size() ? kMnemonics[i] : "?";
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view s) {
  auto it = std::find(kMnemonics.begin(), kMnemonics.end(), s);
  if (it == kMnemonics.end()) return std::nullopt;
  return static_cast<Opcode>(it - kMnemonics.begin() + 1);
}

std::string_view to_string(AluOp op) { return kAluNames.at(static_cast<std::size_t>(op)); }
std::string_view to_string(AluIntOp op) { return kAluIntNames.at(static_cast<std::size_t>(op)); }
std::string_view to_string(BrnOp op) { return kBrnNames.at(static_cast<std::size_t>(op)); }
std::optional<AluOp> alu_op_from_string(std::string_view s) { return lookup<AluOp>(kAluNames, s); }
std::optional<AluIntOp> alu_int_op_from_string(std::string_view s) { return lookup<AluIntOp>(kAluIntNames, s); }
std::optional<BrnOp> brn_op_from_string(std::string_view s) { return lookup<BrnOp>(kBrnNames, s); }

bool is_unary(AluOp op) {
  switch (op) {
    case AluOp::Not:
    case AluOp::Relu:
    case AluOp::Sigmoid:
    case AluOp::Tanh:
    case AluOp::Log:
    case AluOp::Exp:
    case AluOp::Rand:
      return true;
    default:
      return false;
  }
}

bool uses_rom(AluOp op) {
  return op == AluOp::Sigmoid || op == AluOp::Tanh || op == AluOp::Log || op == AluOp::Exp;
}

Instruction Instruction::mvm(std::uint16_t mask, std::uint8_t shuffle) {
  Instruction i;
  i.opcode = Opcode::Mvm;
  i.mask = mask;
  i.subop = shuffle;
  return i;
}

Instruction Instruction::alu(AluOp op, int dest, int src1, int src2, int width) {
  Instruction i;
  i.opcode = Opcode::Alu;
  i.subop = static_cast<std::uint8_t>(op);
  i.dest = u16(dest);
  i.src1 = u16(src1);
  i.src2 = is_unary(op) ? 0 : u16(src2);
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::alu_imm(AluOp op, int dest, int src1, int imm, int width) {
  Instruction i;
  i.opcode = Opcode::AluImm;
  i.subop = static_cast<std::uint8_t>(op);
  i.dest = u16(dest);
  i.src1 = u16(src1);
  i.imm = imm;
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::alu_int(AluIntOp op, int dest, int src1, int src2) {
  Instruction i;
  i.opcode = Opcode::AluInt;
  i.subop = static_cast<std::uint8_t>(op);
  i.dest = u16(dest);
  i.src1 = u16(src1);
  i.src2 = u16(src2);
  return i;
}

Instruction Instruction::set(int dest, int imm) {
  Instruction i;
  i.opcode = Opcode::Set;
  i.dest = u16(dest);
  i.imm = imm;
  return i;
}

Instruction Instruction::copy(int dest, int src1, int width) {
  Instruction i;
  i.opcode = Opcode::Copy;
  i.dest = u16(dest);
  i.src1 = u16(src1);
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::load(int dest, int addr, int width) {
  Instruction i;
  i.opcode = Opcode::Load;
  i.dest = u16(dest);
  i.addr = u16(addr);
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::store(int addr, int src1, int count, int width) {
  Instruction i;
  i.opcode = Opcode::Store;
  i.addr = u16(addr);
  i.src1 = u16(src1);
  i.count = u16(count);
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::send(int addr, int fifo, int target, int width) {
  Instruction i;
  i.opcode = Opcode::Send;
  i.addr = u16(addr);
  i.fifo = u16(fifo);
  i.target = u16(target);
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::receive(int addr, int fifo, int count, int width) {
  Instruction i;
  i.opcode = Opcode::Receive;
  i.addr = u16(addr);
  i.fifo = u16(fifo);
  i.count = u16(count);
  i.vec_width = u16(width);
  return i;
}

Instruction Instruction::jmp(int pc) {
  Instruction i;
  i.opcode = Opcode::Jmp;
  i.pc = u16(pc);
  return i;
}

Instruction Instruction::brn(BrnOp op, int src1, int src2, int pc) {
  Instruction i;
  i.opcode = Opcode::Brn;
  i.subop = static_cast<std::uint8_t>(op);
  i.src1 = u16(src1);
  i.src2 = u16(src2);
  i.pc = u16(pc);
  return i;
}

}  // namespace puma::isa
