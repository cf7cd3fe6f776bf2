#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "motionduet/numkit/fft.hpp"

namespace nk = motionduet::numkit;
using nk::Complex;

namespace {

std::vector<Complex> naiveDft(const std::vector<Complex>& x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * j % n) / static_cast<double>(n);
      out[k] += x[j] * Complex(std::cos(ang), std::sin(ang));
    }
  return out;
}

}  // namespace

class FftLength : public ::testing::TestWithParam<std::size_t> {};

TEST_P(FftLength, MatchesNaiveDft) {
  const std::size_t n = GetParam();
  nk::Rng rng(n);
  std::vector<Complex> x(n);
  for (auto& v : x) v = {rng.normal(), rng.normal()};
  for (bool inverse : {false, true}) {
    auto y = x;
    nk::fft(y, inverse);
    const auto ref = naiveDft(x, inverse);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(y[k] - ref[k]), 1e-9 * static_cast<double>(n)) << k;
  }
}

TEST_P(FftLength, RealRoundTrip) {
  const std::size_t n = GetParam();
  nk::Rng rng(100 + n);
  const nk::Tensor x = nk::randomNormal({n, 3}, rng);
  const nk::Tensor back = nk::irfft(nk::rfft(x), n);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Lengths, FftLength, ::testing::Values(1, 2, 3, 4, 5, 7, 8, 9, 12, 16, 17, 31, 64, 100));

TEST(Fft, ParsevalHolds) {
  nk::Rng rng(5);
  std::vector<double> x(20);
  for (auto& v : x) v = rng.normal();
  const auto bins = nk::rfft1(x);
  double time = 0.0, freq = 0.0;
  for (double v : x) time += v * v;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double w = (k == 0 || k == 10) ? 1.0 : 2.0;
    freq += w * std::norm(bins[k]);
  }
  EXPECT_NEAR(time, freq / 20.0, 1e-9);
}

TEST(Fft, ImpulseHasFlatSpectrum) {
  std::vector<double> x(8, 0.0);
  x[0] = 1.0;
  for (const auto& b : nk::rfft1(x)) EXPECT_NEAR(std::abs(b - Complex(1.0, 0.0)), 0.0, 1e-12);
}

TEST(Fft, ErrorsOnEmptyAndBinMismatch) {
  EXPECT_THROW(nk::rfft(nk::Tensor()), std::invalid_argument);
  std::vector<Complex> bins(3);
  EXPECT_THROW(nk::irfft1(bins, 8), std::invalid_argument);
}
