#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "puma/numerics/fixed.hpp"

namespace puma::num {

enum class LutFunction : std::uint8_t { Sigmoid, Tanh, Log, Exp };

std::string_view to_string(LutFunction f);
double lut_reference(LutFunction f, double x);

/// ROM contents for one transcendental function: 2^k samples at bin midpoints.
class LutTable {
 public:
  LutTable(LutFunction fn, int frac_bits = kDefaultFracBits, int index_bits = 8);

  LutFunction function() const { return fn_; }
  int frac_bits() const { return frac_bits_; }
  std::int16_t lo_raw() const { return lo_; }
  std::int16_t hi_raw() const { return hi_; }
  const std::vector<std::int16_t>& entries() const { return entries_; }

  std::size_t bin_of(std::int16_t x) const;
  std::int16_t eval(std::int16_t x) const { return entries_[bin_of(x)]; }

  /// Worst-case |eval(x) - clamp(f(x))| over all inputs in the domain, derived per bin
  /// from the slope bound and the output rounding step.
  double error_bound() const { return error_bound_; }

 private:
  std::int64_t bin_start(std::size_t i) const;

  LutFunction fn_;
  int frac_bits_;
  std::int16_t lo_;
  std::int16_t hi_;
  std::vector<std::int16_t> entries_;
  double error_bound_ = 0.0;
};

/// Reference value clamped to the representable range (what a perfect ROM could hold).
double lut_target(LutFunction f, std::int16_t x, int frac_bits);

/// Whether raw input x lies in the function's mathematical domain.
bool lut_in_domain(LutFunction f, std::int16_t x);

inline std::int16_t lut_eval(const LutTable& t, std::int16_t x) { return t.eval(x); }

/// The four tables a core's ROM-embedded register file carries.
class LutSet {
 public:
  explicit LutSet(int frac_bits = kDefaultFracBits, int index_bits = 8);
  const LutTable& operator[](LutFunction f) const { return tables_[static_cast<std::size_t>(f)]; }

 private:
  std::vector<LutTable> tables_;
};

}  // namespace puma::num
