#include "ademi/dfs_pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ademi/errors.hpp"
#include "ademi/fft.hpp"
#include "ademi/rng.hpp"

namespace ademi {
namespace {

constexpr double kKaiserBeta = 2.1165;  // 30 dB single-pass stopband

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

/// Unit-DC low-pass prototype, Kaiser window.
std::vector<double> lowpass_kernel(double f_s, double cutoff_hz, int taps) {
  std::vector<double> k(static_cast<std::size_t>(taps));
  const double fc = cutoff_hz / f_s;
  const int c = (taps - 1) / 2;
  const double denom = bessel_i0(kKaiserBeta);
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    double t = taps > 1 ? (2.0 * n / (taps - 1) - 1.0) : 0.0;
    double w = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - t * t))) / denom;
    double val = 2.0 * fc * sinc(2.0 * fc * (n - c)) * w;
    k[static_cast<std::size_t>(n)] = val;
    sum += val;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Odd reflection about the end samples, pad entries each side.
std::vector<std::complex<double>> pad_odd_reflect(std::span<const std::complex<double>> x,
                                                  int pad) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n + 2 * pad));
  for (int i = 0; i < pad; ++i) {
    int j = std::min(n - 1, pad - i);
    out[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[static_cast<std::size_t>(j)];
  }
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(pad + i)] = x[static_cast<std::size_t>(i)];
  for (int i = 0; i < pad; ++i) {
    int j = std::max(0, n - 2 - i);
    out[static_cast<std::size_t>(pad + n + i)] =
        2.0 * x[static_cast<std::size_t>(n - 1)] - x[static_cast<std::size_t>(j)];
  }
  return out;
}

/// Frequency-domain convolution plan reused across matrix columns.
struct FilterPlan {
  int taps = 0;
  int half = 0;
  std::size_t fft_len = 0;
  std::vector<std::complex<double>> kernel_fft;

  FilterPlan(std::span<const double> kernel, int padded_len) {
    taps = static_cast<int>(kernel.size());
    half = (taps - 1) / 2;
    fft_len = next_pow2(static_cast<std::size_t>(padded_len + taps - 1));
    kernel_fft.assign(fft_len, {0.0, 0.0});
    for (int i = 0; i < taps; ++i) kernel_fft[static_cast<std::size_t>(i)] = {kernel[static_cast<std::size_t>(i)], 0.0};
    fft_inplace(kernel_fft, false);
  }

  /// Centered same-length convolution of `x` with the planned kernel.
  std::vector<std::complex<double>> conv_same(std::span<const std::complex<double>> x) const {
    std::vector<std::complex<double>> buf(fft_len, {0.0, 0.0});
    std::copy(x.begin(), x.end(), buf.begin());
    fft_inplace(buf, false);
    for (std::size_t i = 0; i < fft_len; ++i) buf[i] *= kernel_fft[i];
    fft_inplace(buf, true);
    std::vector<std::complex<double>> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = buf[i + static_cast<std::size_t>(half)];
    return out;
  }

  std::vector<std::complex<double>> zero_phase(std::span<const std::complex<double>> x) const {
    auto padded = pad_odd_reflect(x, half);
    auto fwd = conv_same(padded);
    std::reverse(fwd.begin(), fwd.end());
    auto rev = conv_same(fwd);
    std::reverse(rev.begin(), rev.end());
    return {rev.begin() + half, rev.begin() + half + static_cast<std::ptrdiff_t>(x.size())};
  }
};

void validate_band(double f_s, double low, double high) {
  if (!(0.0 < low && low < high && high < 0.5 * f_s))
    throw DomainError("bandpass: need 0 < low < high < sample_rate/2");
}

}  // namespace

CsiMatrix conjugate_multiply(const CsiTensor& csi, double sample_rate_hz, int ref_antenna) {
  if (csi.data.ndim() != 3) throw DomainError("conjugate_multiply: CSI must be (S, N, M)");
  const std::int64_t S = csi.data.dim(0);
  const std::int64_t N = csi.data.dim(1);
  const std::int64_t M = csi.data.dim(2);
  if (N < 2) throw DomainError("conjugate_multiply: need at least two antennas");
  if (ref_antenna < 0 || ref_antenna >= N)
    throw DomainError("conjugate_multiply: reference antenna out of range");

  CsiMatrix out;
  out.sample_rate_hz = sample_rate_hz;
  out.data = CTensor({S, (N - 1) * M});
  for (std::int64_t t = 0; t < S; ++t) {
    std::int64_t col = 0;
    for (std::int64_t a = 0; a < N; ++a) {
      if (a == ref_antenna) continue;
      for (std::int64_t m = 0; m < M; ++m) {
        out.data.at2(t, col * M + m) =
            csi.data.at3(t, a, m) * std::conj(csi.data.at3(t, ref_antenna, m));
      }
      ++col;
    }
  }
  return out;
}

int bandpass_auto_taps(double sample_rate_hz, double low_hz, double high_hz) {
  validate_band(sample_rate_hz, low_hz, high_hz);
  // Transition budget: half the low-edge margin to 1.5*f_low, and the
  // high-edge margin down to f_high/1.5.
  double transition = std::min(low_hz, 2.0 * high_hz / 3.0);
  // Kaiser estimate for 30 dB: N ~= (A - 7.95) / (2.285 * 2*pi*df/fs).
  int taps = static_cast<int>(std::ceil(1.536 * sample_rate_hz / transition));
  taps = std::clamp(taps, 127, 32767);
  if (taps % 2 == 0) ++taps;
  return taps;
}

std::vector<double> design_bandpass(double sample_rate_hz, double low_hz, double high_hz,
                                    int taps) {
  validate_band(sample_rate_hz, low_hz, high_hz);
  if (taps <= 0) taps = bandpass_auto_taps(sample_rate_hz, low_hz, high_hz);
  if (taps % 2 == 0) throw DomainError("design_bandpass: kernel length must be odd");
  auto high = lowpass_kernel(sample_rate_hz, high_hz, taps);
  auto low = lowpass_kernel(sample_rate_hz, low_hz, taps);
  // Difference of unit-DC low-pass kernels: DC gain is exactly zero.
  for (std::size_t i = 0; i < high.size(); ++i) high[i] -= low[i];
  return high;
}

double fir_response(std::span<const double> kernel, double sample_rate_hz, double freq_hz) {
  std::complex<double> acc{0.0, 0.0};
  const double w = 2.0 * M_PI * freq_hz / sample_rate_hz;
  for (std::size_t n = 0; n < kernel.size(); ++n)
    acc += kernel[n] * std::complex<double>(std::cos(w * static_cast<double>(n)),
                                            -std::sin(w * static_cast<double>(n)));
  return std::abs(acc);
}

std::vector<std::complex<double>> bandpass_filter(std::span<const std::complex<double>> x,
                                                  double sample_rate_hz, double low_hz,
                                                  double high_hz, int taps) {
  if (x.empty()) return {};
  auto kernel = design_bandpass(sample_rate_hz, low_hz, high_hz, taps);
  FilterPlan plan(kernel, static_cast<int>(x.size()) + static_cast<int>(kernel.size()) - 1);
  return plan.zero_phase(x);
}

std::vector<double> bandpass_filter(std::span<const double> x, double sample_rate_hz,
                                    double low_hz, double high_hz, int taps) {
  std::vector<std::complex<double>> cx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) cx[i] = {x[i], 0.0};
  auto cy = bandpass_filter(std::span<const std::complex<double>>(cx), sample_rate_hz, low_hz,
                            high_hz, taps);
  std::vector<double> y(cy.size());
  for (std::size_t i = 0; i < cy.size(); ++i) y[i] = cy[i].real();
  return y;
}

void bandpass_filter_matrix(CsiMatrix& matrix, const BandpassSpec& band) {
  const std::int64_t S = matrix.data.dim(0);
  const std::int64_t cols = matrix.data.dim(1);
  auto kernel = design_bandpass(matrix.sample_rate_hz, band.low_hz, band.high_hz, band.taps);
  const int half = (static_cast<int>(kernel.size()) - 1) / 2;
  FilterPlan plan(kernel, static_cast<int>(S) + 2 * half);

  std::vector<std::complex<double>> column(static_cast<std::size_t>(S));
  for (std::int64_t c = 0; c < cols; ++c) {
    for (std::int64_t t = 0; t < S; ++t) column[static_cast<std::size_t>(t)] = matrix.data.at2(t, c);
    auto filtered = plan.zero_phase(column);
    for (std::int64_t t = 0; t < S; ++t) matrix.data.at2(t, c) = filtered[static_cast<std::size_t>(t)];
  }
}

PrincipalSeries first_principal_component(const CsiMatrix& matrix, double tol, int max_iter,
                                          std::uint64_t seed) {
  const std::int64_t S = matrix.data.dim(0);
  const std::int64_t D = matrix.data.dim(1);
  double norm2 = 0.0;
  for (const auto& z : matrix.data.v) norm2 += std::norm(z);
  if (norm2 == 0.0) throw DomainError("first_principal_component: matrix is zero");

  Rng rng(seed);
  std::vector<std::complex<double>> v(static_cast<std::size_t>(D));
  for (auto& z : v) z = rng.cnormal();
  auto normalize = [](std::vector<std::complex<double>>& vec) {
    double n = 0.0;
    for (const auto& z : vec) n += std::norm(z);
    n = std::sqrt(n);
    for (auto& z : vec) z /= n;
    return n;
  };
  normalize(v);

  std::vector<std::complex<double>> fv(static_cast<std::size_t>(S));
  std::vector<std::complex<double>> w(static_cast<std::size_t>(D));
  double residual = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    // w = F^H (F v)
    for (std::int64_t t = 0; t < S; ++t) {
      std::complex<double> acc{0.0, 0.0};
      const std::complex<double>* row = &matrix.data.v[static_cast<std::size_t>(t * D)];
      for (std::int64_t j = 0; j < D; ++j) acc += row[j] * v[static_cast<std::size_t>(j)];
      fv[static_cast<std::size_t>(t)] = acc;
    }
    for (std::int64_t j = 0; j < D; ++j) w[static_cast<std::size_t>(j)] = {0.0, 0.0};
    for (std::int64_t t = 0; t < S; ++t) {
      const std::complex<double>* row = &matrix.data.v[static_cast<std::size_t>(t * D)];
      const std::complex<double> f = fv[static_cast<std::size_t>(t)];
      for (std::int64_t j = 0; j < D; ++j) w[static_cast<std::size_t>(j)] += std::conj(row[j]) * f;
    }
    // Rayleigh quotient (real for the Hermitian product).
    double lambda = 0.0;
    for (std::int64_t j = 0; j < D; ++j)
      lambda += (std::conj(v[static_cast<std::size_t>(j)]) * w[static_cast<std::size_t>(j)]).real();
    double diff2 = 0.0;
    for (std::int64_t j = 0; j < D; ++j)
      diff2 += std::norm(w[static_cast<std::size_t>(j)] - lambda * v[static_cast<std::size_t>(j)]);
    residual = lambda > 0 ? std::sqrt(diff2) / lambda : 1.0;
    v = w;
    normalize(v);
    if (residual <= tol) {
      // Phase convention: rotate the largest-modulus entry onto the positive
      // real axis so repeated runs agree bitwise.
      std::size_t best = 0;
      double best_mod = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        double mod = std::abs(v[j]);
        if (mod > best_mod) {
          best_mod = mod;
          best = j;
        }
      }
      std::complex<double> rot = std::conj(v[best]) / best_mod;
      for (auto& z : v) z *= rot;

      PrincipalSeries out;
      out.data.resize(static_cast<std::size_t>(S));
      double sigma2 = 0.0;
      for (std::int64_t t = 0; t < S; ++t) {
        std::complex<double> acc{0.0, 0.0};
        const std::complex<double>* row = &matrix.data.v[static_cast<std::size_t>(t * D)];
        for (std::int64_t j = 0; j < D; ++j) acc += row[j] * v[static_cast<std::size_t>(j)];
        out.data[static_cast<std::size_t>(t)] = acc;
        sigma2 += std::norm(acc);
      }
      out.sigma1 = std::sqrt(sigma2);
      return out;
    }
  }
  throw ConvergenceError("first_principal_component: no convergence after " +
                             std::to_string(max_iter) + " iterations (residual " +
                             std::to_string(residual) + ")",
                         residual);
}

int num_frames(int samples, int window_len, int hop) {
  if (window_len > samples) throw DomainError("num_frames: window longer than the series");
  if (hop < 1 || window_len < 1) throw DomainError("num_frames: window and hop must be positive");
  return static_cast<int>((static_cast<std::int64_t>(samples) - window_len + hop - 1) / hop);
}

void StftConfig::validate(double sample_rate_hz) const {
  if (window_len < 1) throw DomainError("stft: window length must be positive");
  if (hop < 1 || hop > window_len) throw DomainError("stft: need 0 < hop <= window");
  if (num_freq_bins < 1 || num_freq_bins % 2 == 0)
    throw DomainError("stft: frequency bin count must be odd");
  if (!(max_freq_hz > 0.0) || max_freq_hz > 0.5 * sample_rate_hz)
    throw DomainError("stft: max frequency must be in (0, sample_rate/2]");
}

DfsSpectrogram stft_spectrogram(const PrincipalSeries& series, const StftConfig& cfg,
                                double sample_rate_hz) {
  cfg.validate(sample_rate_hz);
  const int S = static_cast<int>(series.data.size());
  if (S < cfg.window_len) throw DomainError("stft: series shorter than the window");
  const int W = cfg.window_len;
  const int SF = cfg.num_freq_bins;
  const int frames = num_frames(S, W, cfg.hop);

  DfsSpectrogram out;
  out.power = Tensor({frames, SF});
  out.freq_axis_hz.resize(static_cast<std::size_t>(SF));
  for (int j = 0; j < SF; ++j)
    out.freq_axis_hz[static_cast<std::size_t>(j)] =
        SF == 1 ? 0.0 : -cfg.max_freq_hz + 2.0 * cfg.max_freq_hz * j / (SF - 1);
  out.time_axis_s.resize(static_cast<std::size_t>(frames));

  std::vector<double> window(static_cast<std::size_t>(W));
  for (int n = 0; n < W; ++n)
    window[static_cast<std::size_t>(n)] =
        W > 1 ? 0.5 * (1.0 - std::cos(2.0 * M_PI * n / (W - 1))) : 1.0;

  // Transform basis sampled on the requested frequency grid, unitary scale.
  const double scale = 1.0 / std::sqrt(static_cast<double>(W));
  std::vector<std::complex<double>> basis(static_cast<std::size_t>(SF) * W);
  for (int j = 0; j < SF; ++j) {
    const double w = 2.0 * M_PI * out.freq_axis_hz[static_cast<std::size_t>(j)] / sample_rate_hz;
    for (int n = 0; n < W; ++n)
      basis[static_cast<std::size_t>(j) * W + n] =
          scale * std::complex<double>(std::cos(w * n), -std::sin(w * n));
  }

  std::vector<std::complex<double>> frame(static_cast<std::size_t>(W));
  for (int i = 0; i < frames; ++i) {
    const int start = i * cfg.hop;
    for (int n = 0; n < W; ++n)
      frame[static_cast<std::size_t>(n)] =
          window[static_cast<std::size_t>(n)] * series.data[static_cast<std::size_t>(start + n)];
    for (int j = 0; j < SF; ++j) {
      std::complex<double> acc{0.0, 0.0};
      const std::complex<double>* b = &basis[static_cast<std::size_t>(j) * W];
      for (int n = 0; n < W; ++n) acc += frame[static_cast<std::size_t>(n)] * b[n];
      out.power.at2(i, j) = std::norm(acc);
    }
    out.time_axis_s[static_cast<std::size_t>(i)] = (start + 0.5 * W) / sample_rate_hz;
  }
  return out;
}

DfsSpectrogram csi_to_spectrogram(const CsiTensor& csi, double sample_rate_hz,
                                  const PipelineConfig& cfg) {
  CsiMatrix matrix = conjugate_multiply(csi, sample_rate_hz, cfg.ref_antenna);
  bandpass_filter_matrix(matrix, cfg.band);
  PrincipalSeries pc = first_principal_component(matrix, cfg.pca_tol, cfg.pca_max_iter);
  DfsSpectrogram spec = stft_spectrogram(pc, cfg.stft, sample_rate_hz);
  if (cfg.normalize) {
    double peak = 0.0;
    for (double p : spec.power.v) peak = std::max(peak, p);
    if (peak > 0.0)
      for (double& p : spec.power.v) p /= peak;
  }
  check_finite(spec.power, "spectrogram");
  return spec;
}

}  // namespace ademi
