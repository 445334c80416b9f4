#pragma once

#include <complex>
#include <span>
#include <vector>

namespace ademi {

/// In-place radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

std::size_t next_pow2(std::size_t n);

/// Full linear convolution of a complex signal with a real kernel,
/// output length x.size() + kernel.size() - 1. FFT-based for large sizes.
std::vector<std::complex<double>> convolve(std::span<const std::complex<double>> x,
                                           std::span<const double> kernel);

}  // namespace ademi
