#include <cfenv>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "puma/numerics/crossbar.hpp"
#include "puma/numerics/fixed.hpp"
#include "puma/numerics/lut.hpp"

using namespace puma::num;

namespace {

// Oracle: round-half-even through the C library, then clamp.
std::int16_t oracle_quantize(double x, int frac) {
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(std::ldexp(x, frac));
  return static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
}

RawMatrix random_raw(int rows, int cols, std::mt19937& rng, int lo = -32768, int hi = 32767) {
  std::uniform_int_distribution<int> d(lo, hi);
  RawMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = static_cast<std::int16_t>(d(rng));
  return m;
}

}  // namespace

namespace puma::num {
void PrintTo(LutFunction f, std::ostream* os) { *os << to_string(f); }
}  // namespace puma::num

TEST(Fixed, QuantizeMatchesRoundHalfEven) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-9.0, 9.0);
  for (int k = 0; k < 20000; ++k) {
    const double x = d(rng);
    EXPECT_EQ(quantize_raw(x, 12), oracle_quantize(x, 12)) << x;
  }
  // Exact ties go to the even neighbour.
  EXPECT_EQ(quantize_raw(0.5 / 4096, 12), 0);
  EXPECT_EQ(quantize_raw(1.5 / 4096, 12), 2);
  EXPECT_EQ(quantize_raw(-2.5 / 4096, 12), -2);
}

TEST(Fixed, Saturates) {
  EXPECT_EQ(quantize_raw(100.0, 12), kRawMax);
  EXPECT_EQ(quantize_raw(-100.0, 12), kRawMin);
  EXPECT_EQ(add_sat(30000, 30000), kRawMax);
  EXPECT_EQ(sub_sat(-30000, 30000), kRawMin);
  EXPECT_DOUBLE_EQ(max_real(12), 32767.0 / 4096);
  EXPECT_DOUBLE_EQ(min_real(12), -8.0);
}

TEST(Fixed, RoundShiftTies) {
  EXPECT_EQ(round_shift(6, 2), 2);   // 1.5 -> 2
  EXPECT_EQ(round_shift(10, 2), 2);  // 2.5 -> 2
  EXPECT_EQ(round_shift(-6, 2), -2);
  EXPECT_EQ(round_shift(7, 2), 2);
}

TEST(Fixed, MultiplyMatchesOracle) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> d(-32768, 32767);
  std::fesetround(FE_TONEAREST);
  for (int k = 0; k < 20000; ++k) {
    const auto a = static_cast<std::int16_t>(d(rng)), b = static_cast<std::int16_t>(d(rng));
    const double exact = std::nearbyint(static_cast<double>(a) * b / 4096.0);
    EXPECT_EQ(mul_fixed(a, b, 12), static_cast<std::int16_t>(std::clamp(exact, -32768.0, 32767.0)));
  }
}

TEST(Fixed, IdealMvmMatchesIntegerOracle) {
  std::mt19937 rng(11);
  const RawMatrix w = random_raw(40, 7, rng, -3000, 3000);
  const RawVector x = random_raw(40, 1, rng, -3000, 3000);
  const RawVector y = ideal_mvm(w, x, 12);
  std::fesetround(FE_TONEAREST);
  for (int c = 0; c < 7; ++c) {
    std::int64_t acc = 0;
    for (int r = 0; r < 40; ++r) acc += std::int64_t{w(r, c)} * x(r);
    const double v = std::nearbyint(static_cast<double>(acc) / 4096.0);
    EXPECT_EQ(y(c), static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0)));
  }
}

class Slicing : public ::testing::TestWithParam<int> {};

TEST_P(Slicing, RoundTripsEveryValue) {
  const int bits = GetParam();
  RawMatrix w(256, 256);
  for (int k = 0; k < 65536; ++k) w(k / 256, k % 256) = static_cast<std::int16_t>(k - 32768);
  for (int b = 0; b < 4; ++b) {
    const RawMatrix block = w.block(b / 2 * 128, b % 2 * 128, 128, 128);
    const auto s = slice_weights(block, bits, 128);
    ASSERT_EQ(static_cast<int>(s.slices.size()), slice_count(bits));
    for (const auto& p : s.slices) {
      EXPECT_GE(p.minCoeff(), 0.0);
      EXPECT_LE(p.maxCoeff(), s.digit_max());
    }
    EXPECT_EQ(reconstruct(s), block);
  }
}

INSTANTIATE_TEST_SUITE_P(Bits, Slicing, ::testing::Values(1, 2, 4));

TEST(Crossbar, IdealConverterEqualsIdealMvm) {
  std::mt19937 rng(17);
  const RawMatrix w = random_raw(128, 128, rng);
  const RawVector x = random_raw(128, 1, rng);
  const auto s = slice_weights(w, 2, 128);
  EXPECT_EQ(crossbar_mvm(s, x, 0), ideal_mvm(w, x, 12));
}

TEST(Crossbar, RejectsOversizedBlock) {
  const RawMatrix w = RawMatrix::Zero(129, 4);
  EXPECT_ANY_THROW(slice_weights(w, 2, 128));
}

TEST(Crossbar, NoiseErrorGrowsWithSigma) {
  std::mt19937 rng(23);
  const RawMatrix w = random_raw(64, 64, rng, -4096, 4096);
  const RawVector x = random_raw(64, 1, rng, -4096, 4096);
  const auto s = slice_weights(w, 2, 128);
  const RawVector clean = crossbar_mvm(s, x, 0);
  auto err = [&](double sigma) {
    double e = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const RawVector y = crossbar_mvm(apply_write_noise(s, sigma, seed), x, 0);
      e += (y.cast<double>() - clean.cast<double>()).cwiseAbs().sum();
    }
    return e;
  };
  EXPECT_EQ(err(0.0), 0.0);
  const double e1 = err(0.005), e2 = err(0.05);
  EXPECT_GT(e1, 0.0);
  EXPECT_GT(e2, e1);
}

TEST(Crossbar, NoiseIsDeterministicPerSeed) {
  std::mt19937 rng(29);
  const auto s = slice_weights(random_raw(16, 16, rng), 2, 128);
  const auto a = apply_write_noise(s, 0.02, 9), b = apply_write_noise(s, 0.02, 9), c = apply_write_noise(s, 0.02, 10);
  EXPECT_EQ(a.slices[3], b.slices[3]);
  EXPECT_NE(a.slices[3], c.slices[3]);
}

TEST(Crossbar, AdcQuantizerLevels) {
  EXPECT_DOUBLE_EQ(adc_quantize(0.0, 1.0, 1), 0.5);
  EXPECT_DOUBLE_EQ(adc_quantize(-0.1, 1.0, 1), -0.5);
  EXPECT_DOUBLE_EQ(adc_quantize(5.0, 1.0, 2), 0.75);
}

class Lut : public ::testing::TestWithParam<LutFunction> {};

TEST_P(Lut, EveryInputWithinDerivedBound) {
  const LutTable t(GetParam(), 12, 8);
  ASSERT_EQ(t.entries().size(), 256u);
  for (int x = -32768; x <= 32767; ++x) {
    const auto raw = static_cast<std::int16_t>(x);
    if (!lut_in_domain(GetParam(), raw)) continue;
    const double got = to_real(t.eval(raw), 12);
    ASSERT_LE(std::abs(got - lut_target(GetParam(), raw, 12)), t.error_bound() + 1e-12) << x;
  }
}

INSTANTIATE_TEST_SUITE_P(Functions, Lut,
                         ::testing::Values(LutFunction::Sigmoid, LutFunction::Tanh, LutFunction::Log, LutFunction::Exp),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Lut, SigmoidIsMonotone) {
  const LutTable t(LutFunction::Sigmoid);
  for (std::size_t k = 1; k < t.entries().size(); ++k) EXPECT_GE(t.entries()[k], t.entries()[k - 1]);
}
