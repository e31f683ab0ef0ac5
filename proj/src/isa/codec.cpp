#include "puma/isa/codec.hpp"

#include <array>

#include <fmt/format.h>

#include "puma/error.hpp"

namespace puma::isa {

namespace {

constexpr int kOpcodeBits = 5;
constexpr int kSubopBits = 5;
constexpr int kHeaderBits = kOpcodeBits + kSubopBits;

using F = Field;
constexpr FieldSpec kMvm[] = {{F::Mask, kMaskBits}};
constexpr FieldSpec kAlu[] = {{F::Dest, kRegBits}, {F::Src1, kRegBits}, {F::Src2, kRegBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kAluImm[] = {{F::Dest, kRegBits}, {F::Src1, kRegBits}, {F::AluImm, kAluImmBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kAluInt[] = {{F::Dest, kRegBits}, {F::Src1, kRegBits}, {F::Src2, kRegBits}};
constexpr FieldSpec kSet[] = {{F::Dest, kRegBits}, {F::SetImm, kSetImmBits}};
constexpr FieldSpec kCopy[] = {{F::Dest, kRegBits}, {F::Src1, kRegBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kLoad[] = {{F::Dest, kRegBits}, {F::Addr, kAddrBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kStore[] = {{F::Addr, kAddrBits}, {F::Src1, kRegBits}, {F::Count, kCountBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kSend[] = {{F::Addr, kAddrBits}, {F::Fifo, kFifoBits}, {F::Target, kTargetBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kReceive[] = {{F::Addr, kAddrBits}, {F::Fifo, kFifoBits}, {F::Count, kCountBits}, {F::Vec, kVecBits}};
constexpr FieldSpec kJmp[] = {{F::Pc, kPcBits}};
constexpr FieldSpec kBrn[] = {{F::Src1, kRegBits}, {F::Src2, kRegBits}, {F::Pc, kPcBits}};

int subop_limit(Opcode op) {
  switch (op) {
    case Opcode::Mvm: return kMaxShufflePatterns;
    case Opcode::Alu:
    case Opcode::AluImm: return kAluOpCount;
    case Opcode::AluInt: return kAluIntOpCount;
    case Opcode::Brn: return kBrnOpCount;
    default: return 1;
  }
}

const char* field_name(Field f) {
  switch (f) {
    case F::Mask: return "mask";
    case F::Dest: return "dest";
    case F::Src1: return "src1";
    case F::Src2: return "src2";
    case F::AluImm: return "imm";
    case F::SetImm: return "imm";
    case F::Addr: return "addr";
    case F::Count: return "count";
    case F::Fifo: return "fifo";
    case F::Target: return "target";
    case F::Pc: return "pc";
    case F::Vec: return "vec_width";
  }
  return "?";
}

// Raw (unsigned) field content for encoding, or -1 when out of range.
std::int64_t field_value(const Instruction& i, const FieldSpec& s) {
  const std::int64_t lim = std::int64_t{1} << s.bits;
  auto in_range = [&](std::int64_t v) { return v >= 0 && v < lim ? v : -1; };
  switch (s.field) {
    case F::Mask: return in_range(i.mask);
    case F::Dest: return in_range(i.dest);
    case F::Src1: return in_range(i.src1);
    case F::Src2: return in_range(i.src2);
    case F::AluImm: {
      const std::int64_t half = lim / 2;
      if (i.imm < -half || i.imm >= half) return -1;
      return i.imm & (lim - 1);
    }
    case F::SetImm: return in_range(i.imm);
    case F::Addr: return in_range(i.addr);
    case F::Count: return in_range(i.count);
    case F::Fifo: return in_range(i.fifo);
    case F::Target: return in_range(i.target);
    case F::Pc: return in_range(i.pc);
    case F::Vec:
      if (i.vec_width < 1 || i.vec_width > lim) return -1;
      return i.vec_width - 1;
  }
  return -1;
}

void store_field(Instruction& i, const FieldSpec& s, std::uint64_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  switch (s.field) {
    case F::Mask: i.mask = u; break;
    case F::Dest: i.dest = u; break;
    case F::Src1: i.src1 = u; break;
    case F::Src2: i.src2 = u; break;
    case F::AluImm: {
      const std::int64_t half = std::int64_t{1} << (s.bits - 1);
      i.imm = static_cast<std::int32_t>(v >= static_cast<std::uint64_t>(half) ? std::int64_t(v) - 2 * half : std::int64_t(v));
      break;
    }
    case F::SetImm: i.imm = static_cast<std::int32_t>(v); break;
    case F::Addr: i.addr = u; break;
    case F::Count: i.count = u; break;
    case F::Fifo: i.fifo = u; break;
    case F::Target: i.target = u; break;
    case F::Pc: i.pc = u; break;
    case F::Vec: i.vec_width = static_cast<std::uint16_t>(v + 1); break;
  }
}

}  // namespace

std::span<const FieldSpec> layout(Opcode op) {
  switch (op) {
    case Opcode::Mvm: return kMvm;
    case Opcode::Alu: return kAlu;
    case Opcode::AluImm: return kAluImm;
    case Opcode::AluInt: return kAluInt;
    case Opcode::Set: return kSet;
    case Opcode::Copy: return kCopy;
    case Opcode::Load: return kLoad;
    case Opcode::Store: return kStore;
    case Opcode::Send: return kSend;
    case Opcode::Receive: return kReceive;
    case Opcode::Jmp: return kJmp;
    case Opcode::Brn: return kBrn;
  }
  return {};
}

Word encode(const Instruction& i) {
  const auto code = static_cast<int>(i.opcode);
  if (code < 1 || code > kOpcodeCount) throw CodecError(fmt::format("invalid opcode {}", code), 0);
  if (i.subop >= subop_limit(i.opcode))
    throw CodecError(fmt::format("{}: sub-operation {} out of range", mnemonic(i.opcode), i.subop), 0);
  // Fields outside the opcode's layout must be zero for the encoding to be lossless.
  Instruction probe = i;
  std::uint64_t bits = static_cast<std::uint64_t>(code) | (std::uint64_t{i.subop} << kOpcodeBits);
  int pos = kHeaderBits;
  for (const auto& s : layout(i.opcode)) {
    const std::int64_t v = field_value(i, s);
    if (v < 0) throw CodecError(fmt::format("{}: {} does not fit in {} bits", mnemonic(i.opcode), field_name(s.field), s.bits), 0);
    bits |= static_cast<std::uint64_t>(v) << pos;
    pos += s.bits;
    store_field(probe, s, 0);
    if (s.field == F::Vec) probe.vec_width = 0;
  }
  probe.subop = 0;
  Instruction blank;
  blank.opcode = i.opcode;
  if (!(probe == blank))
    throw CodecError(fmt::format("{}: operand set that the encoding does not carry", mnemonic(i.opcode)), 0);
  Word w{};
  for (std::size_t b = 0; b < kInstructionBytes; ++b) w[b] = static_cast<std::uint8_t>(bits >> (8 * b));
  return w;
}

Instruction decode(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (bytes.size() < kInstructionBytes)
    throw CodecError(fmt::format("truncated instruction: {} of {} bytes", bytes.size(), kInstructionBytes), offset);
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < kInstructionBytes; ++b) bits |= std::uint64_t{bytes[b]} << (8 * b);
  const int code = static_cast<int>(bits & ((1u << kOpcodeBits) - 1));
  if (code < 1 || code > kOpcodeCount) throw CodecError(fmt::format("unknown opcode {}", code), offset);
  Instruction i;
  i.opcode = static_cast<Opcode>(code);
  i.subop = static_cast<std::uint8_t>((bits >> kOpcodeBits) & ((1u << kSubopBits) - 1));
  if (i.subop >= subop_limit(i.opcode))
    throw CodecError(fmt::format("{}: unknown sub-operation {}", mnemonic(i.opcode), i.subop), offset);
  int pos = kHeaderBits;
  for (const auto& s : layout(i.opcode)) {
    store_field(i, s, (bits >> pos) & ((std::uint64_t{1} << s.bits) - 1));
    pos += s.bits;
  }
  if (pos < 56 && (bits >> pos) != 0) throw CodecError(fmt::format("{}: reserved bits set", mnemonic(i.opcode)), offset);
  return i;
}

std::vector<std::uint8_t> encode_all(std::span<const Instruction> code) {
  std::vector<std::uint8_t> out;
  out.reserve(code.size() * kInstructionBytes);
  for (std::size_t k = 0; k < code.size(); ++k) {
    try {
      const Word w = encode(code[k]);
      out.insert(out.end(), w.begin(), w.end());
    } catch (const CodecError& e) {
      throw CodecError(std::string("instruction ") + std::to_string(k) + ": " + e.what(), k * kInstructionBytes);
    }
  }
  return out;
}

std::vector<Instruction> decode_all(std::span<const std::uint8_t> bytes, std::size_t base_offset) {
  if (bytes.size() % kInstructionBytes != 0)
    throw CodecError("byte stream length is not a multiple of 7", base_offset + bytes.size());
  std::vector<Instruction> out;
  out.reserve(bytes.size() / kInstructionBytes);
  for (std::size_t k = 0; k < bytes.size(); k += kInstructionBytes)
    out.push_back(decode(bytes.subspan(k, kInstructionBytes), base_offset + k));
  return out;
}

}  // namespace puma::isa
