#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ademi {

/// Link-level parameters shared by all devices. Bandwidth is split equally
/// across the K devices; the single-view baseline occupies the full band.
struct ChannelSpec {
  double total_bandwidth_hz = 40e6;
  int num_devices = 3;
  std::vector<double> snr_db = {10.0, 10.0, 10.0};  // per device
  int bits_per_element = 64;                         // n_k
  int samples_per_transmission = 64;                 // L
  double per_sample_time_s = 1.44e-5;                // t_s; budget = L * t_s

  void validate() const;
  double device_bandwidth_hz() const;
  double snr_for(int device) const;
  double time_budget_s() const {
    return samples_per_transmission * per_sample_time_s;
  }
};

struct LinkBudget {
  double capacity_bps = 0.0;  // C_k
  int dim = 0;                // d_k
  std::int64_t payload_bits = 0;
  double latency_s = 0.0;
};

/// C = B * log2(1 + 10^(snr_db/10)).
double shannon_capacity(double bandwidth_hz, double snr_db);

double equal_split(double total_bandwidth_hz, int num_devices);

/// d = floor(C * t_budget / (n * L)); throws CapacityError when the result
/// would be zero rather than silently clamping.
int encoded_dim(double capacity_bps, int bits_per_element, int samples_per_transmission,
                double time_budget_s);

std::int64_t raw_payload_bits(std::int64_t frames, std::int64_t bins, int bits_per_value);

double upload_latency(double payload_bits, double capacity_bps);

/// Per-device budget: capacity on the equal split, adaptive dimension, and
/// the one-sample upload latency dim * n / C.
LinkBudget link_budget(const ChannelSpec& spec, int device);

/// Latency comparison across an SNR sweep. Single-view ships the raw
/// spectrogram over the full band; multi-view ships K raw spectrograms on
/// simultaneous B/K subchannels; the encoded scheme ships dim * n bits per
/// device on B/K, and its latency is the slowest device.
struct LatencyTable {
  std::vector<double> snr_db;
  std::vector<double> single_view_s;
  std::vector<double> multi_view_s;
  std::vector<double> encoded_s;
  std::vector<int> dims;

  std::string formatted() const;
  std::string csv() const;
};

LatencyTable latency_table(const ChannelSpec& spec, std::int64_t frames, std::int64_t bins,
                           const std::vector<double>& snr_sweep_db);

}  // namespace ademi
