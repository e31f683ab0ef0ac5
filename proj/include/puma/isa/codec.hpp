#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "puma/isa/instruction.hpp"

namespace puma::isa {

/// Field order of one opcode's payload, starting at bit 10.
enum class Field : std::uint8_t { Mask, Dest, Src1, Src2, AluImm, SetImm, Addr, Count, Fifo, Target, Pc, Vec };

struct FieldSpec {
  Field field;
  int bits;
};

std::span<const FieldSpec> layout(Opcode op);

/// Throws CodecError (offset 0) when an operand does not fit its field.
Word encode(const Instruction& i);

/// `offset` is only used in diagnostics.
Instruction decode(std::span<const std::uint8_t> bytes, std::size_t offset = 0);

std::vector<std::uint8_t> encode_all(std::span<const Instruction> code);
std::vector<Instruction> decode_all(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0);

}  // namespace puma::isa
