#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>

namespace puma::num {

inline constexpr int kDefaultFracBits = 12;
inline constexpr std::int16_t kRawMax = std::numeric_limits<std::int16_t>::max();
inline constexpr std::int16_t kRawMin = std::numeric_limits<std::int16_t>::min();

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RawMatrix = Matrix<std::int16_t>;
using RawVector = Vector<std::int16_t>;

/// 16-bit two's-complement fixed-point value with `frac_bits` fractional bits.
struct Fixed16 {
  std::int16_t raw = 0;
  int frac_bits = kDefaultFracBits;

  double to_double() const { return std::ldexp(static_cast<double>(raw), -frac_bits); }
  friend bool operator==(const Fixed16&, const Fixed16&) = default;
};

inline std::int16_t saturate(std::int64_t v) {
  if (v > kRawMax) return kRawMax;
  if (v < kRawMin) return kRawMin;
  return static_cast<std::int16_t>(v);
}

/// v / 2^shift rounded to nearest, ties to even.
std::int64_t round_shift(std::int64_t v, int shift);

/// Round-to-nearest-even, saturating. frac_bits must lie in [0, 15].
Fixed16 quantize(double x, int frac_bits = kDefaultFracBits);
inline std::int16_t quantize_raw(double x, int frac_bits = kDefaultFracBits) { return quantize(x, frac_bits).raw; }
inline double to_real(std::int16_t raw, int frac_bits = kDefaultFracBits) {
  return std::ldexp(static_cast<double>(raw), -frac_bits);
}

double max_real(int frac_bits);
double min_real(int frac_bits);

// Saturating datapath primitives on raw values.
inline std::int16_t add_sat(std::int16_t a, std::int16_t b) { return saturate(std::int64_t{a} + b); }
inline std::int16_t sub_sat(std::int16_t a, std::int16_t b) { return saturate(std::int64_t{a} - b); }
std::int16_t mul_fixed(std::int16_t a, std::int16_t b, int frac_bits);
std::int16_t div_fixed(std::int16_t a, std::int16_t b, int frac_bits);
std::int16_t shl_sat(std::int16_t a, int amount);
std::int16_t shr_arith(std::int16_t a, int amount);

template <typename Derived>
RawMatrix quantize(const Eigen::MatrixBase<Derived>& x, int frac_bits = kDefaultFracBits) {
  return x.derived().unaryExpr([frac_bits](auto v) { return quantize_raw(static_cast<double>(v), frac_bits); });
}

template <typename Derived>
Matrix<double> dequantize(const Eigen::MatrixBase<Derived>& raw, int frac_bits = kDefaultFracBits) {
  return raw.derived().template cast<double>() * std::ldexp(1.0, -frac_bits);
}

/// Exact blockless weighted sum: out[c] = sat(round(sum_r W[r][c] * x[r] / 2^frac)).
/// Rows of W index inputs, columns index outputs.
RawVector ideal_mvm(const RawMatrix& weights, const RawVector& x, int frac_bits);

}  // namespace puma::num
