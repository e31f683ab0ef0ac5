#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace puma::isa {

enum class Opcode : std::uint8_t {
  Mvm = 1,
  Alu,
  AluImm,
  AluInt,
  Set,
  Copy,
  Load,
  Store,
  Send,
  Receive,
  Jmp,
  Brn,
};
inline constexpr int kOpcodeCount = 12;

enum class AluOp : std::uint8_t {
  Add, Sub, Mul, Div, Shl, Shr, And, Or, Not,
  Relu, Sigmoid, Tanh, Log, Exp, Rand, Subsample, Min, Max,
};
inline constexpr int kAluOpCount = 18;

enum class AluIntOp : std::uint8_t { Add, Sub, Eq, Gt, Ne };
inline constexpr int kAluIntOpCount = 5;

enum class BrnOp : std::uint8_t { Eq, Ne, Lt, Gt };
inline constexpr int kBrnOpCount = 4;

std::string_view mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view s);
std::string_view to_string(AluOp op);
std::string_view to_string(AluIntOp op);
std::string_view to_string(BrnOp op);
std::optional<AluOp> alu_op_from_string(std::string_view s);
std::optional<AluIntOp> alu_int_op_from_string(std::string_view s);
std::optional<BrnOp> brn_op_from_string(std::string_view s);

/// Single-operand VFU operations; src2 is unused for these.
bool is_unary(AluOp op);
/// Transcendental ops that read the ROM-embedded tables.
bool uses_rom(AluOp op);

/// Decoded instruction. Fields a given opcode does not carry stay zero.
struct Instruction {
  Opcode opcode = Opcode::Jmp;
  std::uint8_t subop = 0;  // AluOp / AluIntOp / BrnOp, or shuffle-pattern id for MVM
  std::uint16_t mask = 0;  // MVM: one bit per MVMU
  std::uint16_t dest = 0;
  std::uint16_t src1 = 0;
  std::uint16_t src2 = 0;
  std::int32_t imm = 0;  // ALUimm immediate (signed) or set immediate (unsigned)
  std::uint16_t addr = 0;
  std::uint16_t count = 0;
  std::uint16_t fifo = 0;
  std::uint16_t target = 0;
  std::uint16_t pc = 0;
  std::uint16_t vec_width = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;

  AluOp alu_op() const { return static_cast<AluOp>(subop); }
  AluIntOp alu_int_op() const { return static_cast<AluIntOp>(subop); }
  BrnOp brn_op() const { return static_cast<BrnOp>(subop); }

  /// Whether the instruction runs on a tile control unit rather than a core.
  bool is_tile_op() const { return opcode == Opcode::Send || opcode == Opcode::Receive; }

  static Instruction mvm(std::uint16_t mask, std::uint8_t shuffle = 0);
  static Instruction alu(AluOp op, int dest, int src1, int src2, int width);
  static Instruction alu_imm(AluOp op, int dest, int src1, int imm, int width);
  static Instruction alu_int(AluIntOp op, int dest, int src1, int src2);
  static Instruction set(int dest, int imm);
  static Instruction copy(int dest, int src1, int width);
  static Instruction load(int dest, int addr, int width);
  static Instruction store(int addr, int src1, int count, int width);
  static Instruction send(int addr, int fifo, int target, int width);
  static Instruction receive(int addr, int fifo, int count, int width);
  static Instruction jmp(int pc);
  static Instruction brn(BrnOp op, int src1, int src2, int pc);
};

inline constexpr std::size_t kInstructionBytes = 7;
using Word = std::array<std::uint8_t, kInstructionBytes>;

// Field widths of the encoding.
inline constexpr int kRegBits = 12;
inline constexpr int kAddrBits = 16;
inline constexpr int kCountBits = 8;
inline constexpr int kFifoBits = 8;
inline constexpr int kTargetBits = 12;
inline constexpr int kPcBits = 16;
inline constexpr int kVecBits = 8;
inline constexpr int kMaskBits = 12;
inline constexpr int kAluImmBits = 14;
inline constexpr int kSetImmBits = 16;
inline constexpr int kMaxVecWidth = 1 << kVecBits;
inline constexpr int kMaxShufflePatterns = 32;

}  // namespace puma::isa
