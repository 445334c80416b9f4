#include "ademi/fft.hpp"

#include <cmath>

namespace ademi {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> t = a[i + k + len / 2] * w;
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

std::vector<std::complex<double>> convolve(std::span<const std::complex<double>> x,
                                           std::span<const double> kernel) {
  const std::size_t out_len = x.size() + kernel.size() - 1;
  // Direct form is cheaper for small products.
  if (x.size() * kernel.size() <= 16384) {
    std::vector<std::complex<double>> out(out_len, {0.0, 0.0});
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < kernel.size(); ++j) out[i + j] += x[i] * kernel[j];
    return out;
  }
  const std::size_t n = next_pow2(out_len);
  std::vector<std::complex<double>> fx(n, {0.0, 0.0});
  std::vector<std::complex<double>> fk(n, {0.0, 0.0});
  for (std::size_t i = 0; i < x.size(); ++i) fx[i] = x[i];
  for (std::size_t j = 0; j < kernel.size(); ++j) fk[j] = {kernel[j], 0.0};
  fft_inplace(fx, false);
  fft_inplace(fk, false);
  for (std::size_t i = 0; i < n; ++i) fx[i] *= fk[i];
  fft_inplace(fx, true);
  fx.resize(out_len);
  return fx;
}

}  // namespace ademi
