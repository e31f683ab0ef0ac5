#include "puma/numerics/lut.hpp"

#include <algorithm>
#include <cmath>

#include "puma/error.hpp"

namespace puma::num {

namespace {

// Largest |f'| over the real interval [a, b].
double max_slope(LutFunction f, double a, double b) {
  switch (f) {
    case LutFunction::Sigmoid: {
      const double t = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
      const double s = 1.0 / (1.0 + std::exp(-t));
      return s * (1.0 - s);
    }
    case LutFunction::Tanh: {
      const double t = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
      const double th = std::tanh(t);
      return 1.0 - th * th;
    }
    case LutFunction::Exp:
      return std::exp(b);
    case LutFunction::Log:
      return 1.0 / a;
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(LutFunction f) {
  switch (f) {
    case LutFunction::Sigmoid: return "sigmoid";
    case LutFunction::Tanh: return "tanh";
    case LutFunction::Log: return "log";
    case LutFunction::Exp: return "exp";
  }
  return "?";
}

double lut_reference(LutFunction f, double x) {
  switch (f) {
    case LutFunction::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case LutFunction::Tanh: return std::tanh(x);
    case LutFunction::Log: return std::log(x);
    case LutFunction::Exp: return std::exp(x);
  }
  return 0.0;
}

bool lut_in_domain(LutFunction f, std::int16_t x) { return f != LutFunction::Log || x > 0; }

double lut_target(LutFunction f, std::int16_t x, int frac_bits) {
  const double y = lut_reference(f, to_real(x, frac_bits));
  return std::clamp(y, min_real(frac_bits), max_real(frac_bits));
}

LutTable::LutTable(LutFunction fn, int frac_bits, int index_bits) : fn_(fn), frac_bits_(frac_bits) {
  if (index_bits < 1 || index_bits > 16) throw Error("LUT index bits must lie in [1, 16]");
  switch (fn) {
    case LutFunction::Sigmoid:
      lo_ = kRawMin;
      hi_ = kRawMax;
      break;
    case LutFunction::Tanh:
      lo_ = quantize_raw(-4.0, frac_bits);
      hi_ = quantize_raw(4.0, frac_bits);
      break;
    case LutFunction::Exp:
      lo_ = kRawMin;
      hi_ = quantize_raw(std::log(max_real(frac_bits)), frac_bits);
      break;
    case LutFunction::Log:
      lo_ = 1;
      hi_ = kRawMax;
      break;
  }

  const std::size_t n = std::size_t{1} << index_bits;
  const double q = std::ldexp(1.0, -frac_bits);
  entries_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t s = bin_start(i);
    const std::int64_t e = std::max(s, bin_start(i + 1) - 1);
    const std::int64_t m = round_shift(s + e, 1);
    entries_[i] = quantize_raw(lut_reference(fn, to_real(static_cast<std::int16_t>(m), frac_bits)), frac_bits);
    if (bin_start(i + 1) <= s) continue;  // empty bin, never selected
    const double reach = static_cast<double>(std::max(m - s, e - m)) * q;
    const double slope = max_slope(fn, to_real(static_cast<std::int16_t>(s), frac_bits),
                                   to_real(static_cast<std::int16_t>(e), frac_bits));
    error_bound_ = std::max(error_bound_, slope * reach + q / 2.0);
  }

  // Inputs outside [lo, hi] read an end entry; f is monotone, so the worst case sits at an endpoint.
  const double front = to_real(entries_.front(), frac_bits);
  const double back = to_real(entries_.back(), frac_bits);
  if (lo_ > kRawMin && fn != LutFunction::Log) {
    error_bound_ = std::max({error_bound_, std::abs(lut_target(fn, kRawMin, frac_bits) - front),
                             std::abs(lut_target(fn, lo_, frac_bits) - front)});
  }
  if (hi_ < kRawMax) {
    error_bound_ = std::max({error_bound_, std::abs(lut_target(fn, kRawMax, frac_bits) - back),
                             std::abs(lut_target(fn, hi_, frac_bits) - back)});
  }
}

std::int64_t LutTable::bin_start(std::size_t i) const {
  const std::int64_t span = std::int64_t{hi_} - lo_ + 1;
  const std::int64_t n = static_cast<std::int64_t>(entries_.size());
  return lo_ + (static_cast<std::int64_t>(i) * span + n - 1) / n;
}

std::size_t LutTable::bin_of(std::int16_t x) const {
  const std::int64_t c = std::clamp<std::int64_t>(x, lo_, hi_);
  const std::int64_t span = std::int64_t{hi_} - lo_ + 1;
  return static_cast<std::size_t>((c - lo_) * static_cast<std::int64_t>(entries_.size()) / span);
}

LutSet::LutSet(int frac_bits, int index_bits) {
  for (auto f : {LutFunction::Sigmoid, LutFunction::Tanh, LutFunction::Log, LutFunction::Exp})
    tables_.emplace_back(f, frac_bits, index_bits);
}

}  // namespace puma::num
