#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "motionduet/numkit/tensor.hpp"

namespace motionduet::numkit {

using Complex = std::complex<double>;

/// In-place complex DFT of arbitrary length. Powers of two use iterative
/// radix-2; other lengths go through Bluestein's chirp-z.
/// Forward uses e^{-2πi kn/N}; inverse uses e^{+2πi kn/N} and is unscaled.
void fft(std::vector<Complex>& data, bool inverse);

/// One-sided spectrum of a real T×D signal along the temporal (row) axis.
struct Spectrum {
  std::size_t frames = 0;    // T of the originating signal
  std::size_t channels = 0;  // D
  std::vector<Complex> bins;  // (T/2+1) × D, row-major

  std::size_t binCount() const noexcept { return frames / 2 + 1; }
  Complex& at(std::size_t k, std::size_t d) { return bins[k * channels + d]; }
  const Complex& at(std::size_t k, std::size_t d) const { return bins[k * channels + d]; }
};

Spectrum rfft(const Tensor& signal);
Tensor irfft(const Spectrum& spectrum, std::size_t frames);

std::vector<Complex> rfft1(std::span<const double> x);
std::vector<double> irfft1(std::span<const Complex> bins, std::size_t n);

}  // namespace motionduet::numkit
