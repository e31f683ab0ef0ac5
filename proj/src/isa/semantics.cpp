#include "puma/isa/semantics.hpp"

#include <algorithm>

#include "puma/error.hpp"

namespace puma::isa {

namespace {

std::int16_t hash_unit(std::int16_t a, int frac_bits) {
  if (frac_bits == 0) return 0;
  std::uint64_t z = static_cast<std::uint16_t>(a) + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<std::int16_t>(z >> (64 - std::min(frac_bits, 14)));
}

}  // namespace

std::int16_t alu_scalar(AluOp op, std::int16_t a, std::int16_t b, int frac_bits, const num::LutSet& luts) {
  using num::LutFunction;
  switch (op) {
    case AluOp::Add: return num::add_sat(a, b);
    case AluOp::Sub: return num::sub_sat(a, b);
    case AluOp::Mul: return num::mul_fixed(a, b, frac_bits);
    case AluOp::Div: return num::div_fixed(a, b, frac_bits);
    case AluOp::Shl: return num::shl_sat(a, b);
    case AluOp::Shr: return num::shr_arith(a, b);
    case AluOp::And: return static_cast<std::int16_t>(a & b);
    case AluOp::Or: return static_cast<std::int16_t>(a | b);
    case AluOp::Not: return static_cast<std::int16_t>(~a);
    case AluOp::Relu: return std::max<std::int16_t>(a, 0);
    case AluOp::Sigmoid: return luts[LutFunction::Sigmoid].eval(a);
    case AluOp::Tanh: return luts[LutFunction::Tanh].eval(a);
    case AluOp::Log: return luts[LutFunction::Log].eval(a);
    case AluOp::Exp: return luts[LutFunction::Exp].eval(a);
    case AluOp::Rand: return hash_unit(a, frac_bits);
    case AluOp::Subsample: return a;
    case AluOp::Min: return std::min(a, b);
    case AluOp::Max: return std::max(a, b);
  }
  return 0;
}

int alu_source_width(AluOp op, int width, std::int16_t stride) {
  if (op != AluOp::Subsample) return width;
  return (width - 1) * std::max<int>(stride, 1) + 1;
}

void alu_vector(AluOp op, std::span<const std::int16_t> a, std::span<const std::int16_t> b, bool b_scalar,
                std::span<std::int16_t> out, int frac_bits, const num::LutSet& luts) {
  const std::size_t w = out.size();
  if (op == AluOp::Subsample) {
    const int k = std::max<int>(b.empty() ? 1 : b[0], 1);
    if (a.size() < static_cast<std::size_t>(alu_source_width(op, static_cast<int>(w), static_cast<std::int16_t>(k))))
      throw ShapeError("subsample source too short");
    for (std::size_t i = 0; i < w; ++i) out[i] = a[i * k];
    return;
  }
  if (a.size() < w) throw ShapeError("alu source shorter than destination");
  const bool unary = is_unary(op);
  if (!unary && b.size() < (b_scalar ? 1 : w)) throw ShapeError("alu second operand too short");
  for (std::size_t i = 0; i < w; ++i) {
    const std::int16_t rhs = unary ? 0 : (b_scalar ? b[0] : b[i]);
    out[i] = alu_scalar(op, a[i], rhs, frac_bits, luts);
  }
}

std::int16_t alu_int(AluIntOp op, std::int16_t a, std::int16_t b) {
  switch (op) {
    case AluIntOp::Add: return static_cast<std::int16_t>(static_cast<std::uint16_t>(a) + static_cast<std::uint16_t>(b));
    case AluIntOp::Sub: return static_cast<std::int16_t>(static_cast<std::uint16_t>(a) - static_cast<std::uint16_t>(b));
    case AluIntOp::Eq: return a == b ? 1 : 0;
    case AluIntOp::Gt: return a > b ? 1 : 0;
    case AluIntOp::Ne: return a != b ? 1 : 0;
  }
  return 0;
}

bool branch_taken(BrnOp op, std::int16_t a, std::int16_t b) {
  switch (op) {
    case BrnOp::Eq: return a == b;
    case BrnOp::Ne: return a != b;
    case BrnOp::Lt: return a < b;
    case BrnOp::Gt: return a > b;
  }
  return false;
}

}  // namespace puma::isa
