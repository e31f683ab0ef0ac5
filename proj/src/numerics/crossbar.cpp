#include "puma/numerics/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "puma/error.hpp"

namespace puma::num {

SlicedMatrix slice_weights(const RawMatrix& w, int bits_per_device, int max_dim) {
  if (bits_per_device < 1 || bits_per_device > 8) throw Error("bits per device must lie in [1, 8]");
  if (w.rows() > max_dim || w.cols() > max_dim)
    throw ShapeError("matrix " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                     " exceeds crossbar dimension " + std::to_string(max_dim));
  SlicedMatrix out;
  out.bits_per_device = bits_per_device;
  const int n = slice_count(bits_per_device);
  const std::int64_t radix_mask = (std::int64_t{1} << bits_per_device) - 1;
  const Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> biased =
      w.cast<std::int64_t>().array() + kWeightBias;
  out.slices.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int shift = i * bits_per_device;
    out.slices.push_back(biased.unaryExpr([=](std::int64_t v) { return (v >> shift) & radix_mask; }).cast<double>());
  }
  return out;
}

RawMatrix reconstruct(const SlicedMatrix& m) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.slices.size(); ++i)
    acc += m.slices[i] * std::ldexp(1.0, static_cast<int>(i) * m.bits_per_device);
  return acc.unaryExpr([](double v) { return saturate(std::llround(v) - kWeightBias); });
}

SlicedMatrix apply_write_noise(const SlicedMatrix& m, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw Error("noise sigma must be nonnegative");
  SlicedMatrix out = m;
  out.noise_sigma = sigma;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  const double dmax = m.digit_max();
  std::normal_distribution<double> eps(0.0, sigma * dmax);
  for (auto& s : out.slices)
    for (Eigen::Index c = 0; c < s.cols(); ++c)
      for (Eigen::Index r = 0; r < s.rows(); ++r) s(r, c) = std::clamp(s(r, c) + eps(rng), 0.0, dmax);
  return out;
}

double adc_quantize(double v, double full_scale, int bits) {
  const double levels = std::ldexp(1.0, bits);
  const double step = 2.0 * full_scale / levels;
  const double k = std::clamp(std::floor((v + full_scale) / step), 0.0, levels - 1.0);
  return -full_scale + (k + 0.5) * step;
}

RawVector crossbar_mvm(const SlicedMatrix& m, const RawVector& x, int adc_bits, int frac_bits) {
  if (x.size() != m.rows())
    throw ShapeError("crossbar_mvm: input length " + std::to_string(x.size()) + " does not match " +
                     std::to_string(m.rows()) + " rows");
  const Eigen::RowVectorXd xd = x.cast<double>().transpose();
  const double full_scale = static_cast<double>(m.rows()) * m.digit_max() * static_cast<double>(kWeightBias);
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m.cols());
  for (std::size_t i = 0; i < m.slices.size(); ++i) {
    Eigen::RowVectorXd col = xd * m.slices[i];
    if (adc_bits > 0) col = col.unaryExpr([&](double v) { return adc_quantize(v, full_scale, adc_bits); });
    acc += col * std::ldexp(1.0, static_cast<int>(i) * m.bits_per_device);
  }
  acc.array() -= static_cast<double>(kWeightBias) * xd.sum();
  RawVector out(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out(c) = saturate(round_shift(std::llround(acc(c)), frac_bits));
  return out;
}

}  // namespace puma::num
