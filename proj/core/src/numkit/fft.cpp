#include "motionduet/numkit/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace motionduet::numkit {
namespace {

bool isPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void radix2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles evaluated directly rather than by recurrence to keep
        // round-off flat for long transforms.
        const double a_k = ang * static_cast<double>(k);
        const Complex w(std::cos(a_k), std::sin(a_k));
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

void bluestein(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  const double sign = inverse ? 1.0 : -1.0;

  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k² mod 2n keeps the angle argument small for large k.
    const auto k2 = static_cast<double>((k * k) % (2 * n));
    const double ang = sign * std::numbers::pi * k2 / static_cast<double>(n);
    chirp[k] = Complex(std::cos(ang), std::sin(ang));
  }

  std::vector<Complex> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    y[k] = std::conj(chirp[k]);
    y[m - k] = std::conj(chirp[k]);
  }
  radix2(x, false);
  radix2(y, false);
  for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
  radix2(x, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace

void fft(std::vector<Complex>& data, bool inverse) {
  if (data.size() <= 1) return;
  if (isPowerOfTwo(data.size())) radix2(data, inverse);
  else bluestein(data, inverse);
}

std::vector<Complex> rfft1(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("rfft: empty input");
  std::vector<Complex> buf(x.begin(), x.end());
  fft(buf, false);
  buf.resize(x.size() / 2 + 1);
  return buf;
}

std::vector<double> irfft1(std::span<const Complex> bins, std::size_t n) {
  if (n == 0) throw std::invalid_argument("irfft: zero length");
  if (bins.size() != n / 2 + 1) {
    throw std::invalid_argument("irfft: expected " + std::to_string(n / 2 + 1) + " bins, got " +
                                std::to_string(bins.size()));
  }
  std::vector<Complex> full(n);
  for (std::size_t k = 0; k < bins.size(); ++k) full[k] = bins[k];
  for (std::size_t k = bins.size(); k < n; ++k) full[k] = std::conj(bins[n - k]);
  fft(full, true);
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = full[t].real() * scale;
  return out;
}

Spectrum rfft(const Tensor& signal) {
  if (signal.empty()) throw std::invalid_argument("rfft: empty input");
  const std::size_t frames = signal.rows();
  const std::size_t channels = signal.cols();
  Spectrum spec{frames, channels, std::vector<Complex>((frames / 2 + 1) * channels)};
  std::vector<double> column(frames);
  for (std::size_t d = 0; d < channels; ++d) {
    for (std::size_t t = 0; t < frames; ++t) column[t] = signal(t, d);
    const auto bins = rfft1(column);
    for (std::size_t k = 0; k < bins.size(); ++k) spec.at(k, d) = bins[k];
  }
  return spec;
}

Tensor irfft(const Spectrum& spectrum, std::size_t frames) {
  if (frames / 2 + 1 != spectrum.binCount()) {
    throw std::invalid_argument("irfft: spectrum has " + std::to_string(spectrum.binCount()) +
                                " bins, incompatible with " + std::to_string(frames) + " frames");
  }
  Tensor out({frames, spectrum.channels});
  std::vector<Complex> column(spectrum.binCount());
  for (std::size_t d = 0; d < spectrum.channels; ++d) {
    for (std::size_t k = 0; k < column.size(); ++k) column[k] = spectrum.at(k, d);
    const auto x = irfft1(column, frames);
    for (std::size_t t = 0; t < frames; ++t) out(t, d) = x[t];
  }
  return out;
}

}  // namespace motionduet::numkit
