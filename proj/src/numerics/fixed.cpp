#include "puma/numerics/fixed.hpp"

#include <cfenv>

#include "puma/error.hpp"

namespace puma::num {

std::int64_t round_shift(std::int64_t v, int shift) {
  if (shift <= 0) return v << -shift;
  const std::int64_t floor_q = v >> shift;  // arithmetic shift floors
  const std::int64_t rem = v - (floor_q << shift);
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  if (rem > half) return floor_q + 1;
  if (rem < half) return floor_q;
  return (floor_q & 1) ? floor_q + 1 : floor_q;
}

Fixed16 quantize(double x, int frac_bits) {
  if (frac_bits < 0 || frac_bits > 15) throw Error("frac_bits must lie in [0, 15]");
  Fixed16 out;
  out.frac_bits = frac_bits;
  if (std::isnan(x)) return out;
  const double scaled = std::ldexp(x, frac_bits);
  if (scaled >= static_cast<double>(kRawMax)) {
    out.raw = kRawMax;
  } else if (scaled <= static_cast<double>(kRawMin)) {
    out.raw = kRawMin;
  } else {
    // nearbyint honours the current rounding mode; the default is ties-to-even.
    out.raw = static_cast<std::int16_t>(std::nearbyint(scaled));
  }
  return out;
}

double max_real(int frac_bits) { return to_real(kRawMax, frac_bits); }
double min_real(int frac_bits) { return to_real(kRawMin, frac_bits); }

std::int16_t mul_fixed(std::int16_t a, std::int16_t b, int frac_bits) {
  return saturate(round_shift(std::int64_t{a} * b, frac_bits));
}

std::int16_t div_fixed(std::int16_t a, std::int16_t b, int frac_bits) {
  if (b == 0) {
    if (a > 0) return kRawMax;
    if (a < 0) return kRawMin;
    return 0;
  }
  // Round-half-even division of a * 2^frac by b.
  std::int64_t num = std::int64_t{a} * (std::int64_t{1} << frac_bits);
  std::int64_t den = b;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  std::int64_t q = num / den;
  std::int64_t r = num % den;
  if (r < 0) {
    q -= 1;
    r += den;
  }
  if (2 * r > den || (2 * r == den && (q & 1))) q += 1;
  return saturate(q);
}

std::int16_t shl_sat(std::int16_t a, int amount) {
  if (amount <= 0) return a;
  if (amount > 16) amount = 16;
  return saturate(std::int64_t{a} * (std::int64_t{1} << amount));
}

std::int16_t shr_arith(std::int16_t a, int amount) {
  if (amount <= 0) return a;
  if (amount > 15) amount = 15;
  return static_cast<std::int16_t>(a >> amount);
}

RawVector ideal_mvm(const RawMatrix& weights, const RawVector& x, int frac_bits) {
  if (weights.rows() != x.size()) throw ShapeError("ideal_mvm: input length does not match matrix rows");
  RawVector out(weights.cols());
  for (Eigen::Index c = 0; c < weights.cols(); ++c) {
    std::int64_t acc = 0;
    for (Eigen::Index r = 0; r < weights.rows(); ++r) acc += std::int64_t{weights(r, c)} * x(r);
    out(c) = saturate(round_shift(acc, frac_bits));
  }
  return out;
}

}  // namespace puma::num
