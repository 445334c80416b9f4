#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "ademi/csi_synth.hpp"
#include "ademi/tensor.hpp"

namespace ademi {

/// Conjugate-multiplied CSI, shape (time, (antennas-1) * subcarriers).
/// Columns are antenna-pair-major, subcarrier-minor: column (a, m) holds
/// h(t, a, m) * conj(h(t, ref, m)) for the non-reference antennas in
/// increasing antenna order.
struct CsiMatrix {
  CTensor data;
  double sample_rate_hz = 0.0;
};

/// Leading principal component series c = F v1 and its singular value.
struct PrincipalSeries {
  std::vector<std::complex<double>> data;
  double sigma1 = 0.0;
};

struct StftConfig {
  int window_len = 256;
  int hop = 16;
  int num_freq_bins = 121;   // odd; bin (num_freq_bins-1)/2 is 0 Hz
  double max_freq_hz = 60.0;

  void validate(double sample_rate_hz) const;
};

struct DfsSpectrogram {
  Tensor power;  // (frames, bins), magnitude-squared, >= 0
  std::vector<double> freq_axis_hz;
  std::vector<double> time_axis_s;
};

struct BandpassSpec {
  double low_hz = 2.0;
  double high_hz = 60.0;
  int taps = 0;  // 0 selects the band-derived length
};

CsiMatrix conjugate_multiply(const CsiTensor& csi, double sample_rate_hz, int ref_antenna);

/// Kernel length that keeps the double-pass response within 1 dB at
/// 1.5*f_low and f_high/1.5 (Kaiser window, 30 dB single-pass stopband).
int bandpass_auto_taps(double sample_rate_hz, double low_hz, double high_hz);

/// Odd-length windowed-sinc band-pass kernel with exactly zero DC gain.
std::vector<double> design_bandpass(double sample_rate_hz, double low_hz, double high_hz,
                                    int taps = 0);

/// Single-pass amplitude response |H(f)| of a kernel.
double fir_response(std::span<const double> kernel, double sample_rate_hz, double freq_hz);

/// Zero-phase band-pass: forward convolution with the kernel, then a
/// time-reversed pass. Edges are extended by odd reflection.
std::vector<std::complex<double>> bandpass_filter(std::span<const std::complex<double>> x,
                                                  double sample_rate_hz, double low_hz,
                                                  double high_hz, int taps = 0);
std::vector<double> bandpass_filter(std::span<const double> x, double sample_rate_hz,
                                    double low_hz, double high_hz, int taps = 0);

/// Applies the zero-phase band-pass to every column of the matrix in place.
void bandpass_filter_matrix(CsiMatrix& matrix, const BandpassSpec& band);

/// Power iteration on F^H F. The phase ambiguity of v1 is fixed by rotating
/// its largest-modulus entry to the positive real axis.
PrincipalSeries first_principal_component(const CsiMatrix& matrix, double tol = 1e-10,
                                          int max_iter = 5000,
                                          std::uint64_t seed = 0x9e3779b9ULL);

/// ceil((samples - window) / hop); zero when samples == window.
int num_frames(int samples, int window_len, int hop);

/// Hann-windowed short-time transform sampled on the uniform grid
/// [-max_freq, +max_freq] (unitary 1/sqrt(W) scaling), magnitude squared.
DfsSpectrogram stft_spectrogram(const PrincipalSeries& series, const StftConfig& cfg,
                                double sample_rate_hz);

struct PipelineConfig {
  int ref_antenna = 0;
  BandpassSpec band;
  StftConfig stft;
  double pca_tol = 1e-12;
  int pca_max_iter = 5000;
  bool normalize = true;  // divide by the per-sample max power
};

/// Full chain: conjugate multiplication, band-pass, first principal
/// component, spectrogram, optional max-normalization.
DfsSpectrogram csi_to_spectrogram(const CsiTensor& csi, double sample_rate_hz,
                                  const PipelineConfig& cfg);

}  // namespace ademi
