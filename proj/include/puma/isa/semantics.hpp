#pragma once

#include <cstdint>
#include <span>

#include "puma/isa/instruction.hpp"
#include "puma/numerics/lut.hpp"

namespace puma::isa {

/// Element semantics shared by the reference interpreter and the simulator.
/// The second operand is a raw Fixed16 for every op; for shifts and subsample it is read as an integer.
std::int16_t alu_scalar(AluOp op, std::int16_t a, std::int16_t b, int frac_bits, const num::LutSet& luts);

/// out[i] = op(a[i], b[i]); subsample reads a[i * b[0]]. `b` may be empty for unary ops.
/// When `b_scalar` is set every element uses b[0] (immediate form).
void alu_vector(AluOp op, std::span<const std::int16_t> a, std::span<const std::int16_t> b, bool b_scalar,
                std::span<std::int16_t> out, int frac_bits, const num::LutSet& luts);

/// Number of src1 elements an instruction of width w reads.
int alu_source_width(AluOp op, int width, std::int16_t stride);

std::int16_t alu_int(AluIntOp op, std::int16_t a, std::int16_t b);
bool branch_taken(BrnOp op, std::int16_t a, std::int16_t b);

}  // namespace puma::isa
