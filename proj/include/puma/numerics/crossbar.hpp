#pragma once

#include <cstdint>
#include <vector>

#include "puma/numerics/fixed.hpp"

namespace puma::num {

inline constexpr int kDefaultBitsPerDevice = 2;
inline constexpr int kDefaultCrossbarDim = 128;
inline constexpr int kDefaultAdcBits = 9;
inline constexpr std::int64_t kWeightBias = 1 << 15;

inline int slice_count(int bits_per_device) { return (16 + bits_per_device - 1) / bits_per_device; }

/// Weight matrix decomposed into unsigned digit planes, least significant plane first.
/// Planes hold conductances: exact integer digits until write noise is applied.
struct SlicedMatrix {
  int bits_per_device = kDefaultBitsPerDevice;
  double noise_sigma = 0.0;
  std::vector<Eigen::MatrixXd> slices;

  Eigen::Index rows() const { return slices.empty() ? 0 : slices.front().rows(); }
  Eigen::Index cols() const { return slices.empty() ? 0 : slices.front().cols(); }
  double digit_max() const { return static_cast<double>((1 << bits_per_device) - 1); }
};

SlicedMatrix slice_weights(const RawMatrix& w, int bits_per_device = kDefaultBitsPerDevice,
                           int max_dim = kDefaultCrossbarDim);

/// Positional recombination of the planes, bias removed. Identity after slice_weights.
RawMatrix reconstruct(const SlicedMatrix& m);

SlicedMatrix apply_write_noise(const SlicedMatrix& m, double sigma, std::uint64_t seed);

/// adc_bits <= 0 selects the ideal converter.
RawVector crossbar_mvm(const SlicedMatrix& m, const RawVector& x, int adc_bits, int frac_bits = kDefaultFracBits);

/// Mid-rise uniform quantizer with 2^bits levels over [-full_scale, full_scale].
double adc_quantize(double v, double full_scale, int bits);

}  // namespace puma::num
