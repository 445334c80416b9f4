#include "ademi/channel_model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ademi/errors.hpp"

namespace ademi {

void ChannelSpec::validate() const {
  if (total_bandwidth_hz <= 0) throw ConfigError("channel: total bandwidth must be positive");
  if (num_devices < 1) throw ConfigError("channel: need at least one device");
  if (bits_per_element < 1) throw ConfigError("channel: bits per element must be >= 1");
  if (samples_per_transmission < 1) throw ConfigError("channel: samples per transmission must be >= 1");
  if (per_sample_time_s <= 0) throw ConfigError("channel: per-sample time must be positive");
  if (snr_db.empty()) throw ConfigError("channel: snr list is empty");
  if (snr_db.size() != 1 && snr_db.size() != static_cast<std::size_t>(num_devices))
    throw ConfigError("channel: snr list must have one entry or one per device");
}

double ChannelSpec::device_bandwidth_hz() const {
  return equal_split(total_bandwidth_hz, num_devices);
}

double ChannelSpec::snr_for(int device) const {
  if (snr_db.size() == 1) return snr_db[0];
  return snr_db[static_cast<std::size_t>(device)];
}

double shannon_capacity(double bandwidth_hz, double snr_db) {
  if (bandwidth_hz <= 0) throw DomainError("shannon_capacity: bandwidth must be positive");
  double snr_linear = std::pow(10.0, snr_db / 10.0);
  return bandwidth_hz * std::log2(1.0 + snr_linear);
}

double equal_split(double total_bandwidth_hz, int num_devices) {
  if (num_devices < 1) throw DomainError("equal_split: need at least one device");
  return total_bandwidth_hz / num_devices;
}

int encoded_dim(double capacity_bps, int bits_per_element, int samples_per_transmission,
                double time_budget_s) {
  if (capacity_bps <= 0 || bits_per_element <= 0 || samples_per_transmission <= 0 ||
      time_budget_s <= 0)
    throw DomainError("encoded_dim: all inputs must be positive");
  double per_element = capacity_bps * time_budget_s /
                       (static_cast<double>(bits_per_element) * samples_per_transmission);
  int d = static_cast<int>(std::floor(per_element));
  if (d < 1)
    throw CapacityError("channel cannot carry one encoded element per sample (budget " +
                        std::to_string(per_element) + " elements)");
  return d;
}

std::int64_t raw_payload_bits(std::int64_t frames, std::int64_t bins, int bits_per_value) {
  if (frames < 1 || bins < 1 || bits_per_value < 1)
    throw DomainError("raw_payload_bits: all inputs must be positive");
  return frames * bins * bits_per_value;
}

double upload_latency(double payload_bits, double capacity_bps) {
  if (capacity_bps <= 0) throw DomainError("upload_latency: capacity must be positive");
  if (payload_bits < 0) throw DomainError("upload_latency: payload must be non-negative");
  return payload_bits / capacity_bps;
}

LinkBudget link_budget(const ChannelSpec& spec, int device) {
  spec.validate();
  if (device < 0 || device >= spec.num_devices)
    throw DomainError("link_budget: device index out of range");
  LinkBudget out;
  out.capacity_bps = shannon_capacity(spec.device_bandwidth_hz(), spec.snr_for(device));
  out.dim = encoded_dim(out.capacity_bps, spec.bits_per_element, spec.samples_per_transmission,
                        spec.time_budget_s());
  out.payload_bits = static_cast<std::int64_t>(out.dim) * spec.bits_per_element;
  out.latency_s = upload_latency(static_cast<double>(out.payload_bits), out.capacity_bps);
  return out;
}

LatencyTable latency_table(const ChannelSpec& spec, std::int64_t frames, std::int64_t bins,
                           const std::vector<double>& snr_sweep_db) {
  spec.validate();
  LatencyTable table;
  table.snr_db = snr_sweep_db;
  const std::int64_t raw_bits = raw_payload_bits(frames, bins, spec.bits_per_element);
  for (double snr : snr_sweep_db) {
    const double full_band = shannon_capacity(spec.total_bandwidth_hz, snr);
    const double per_device = shannon_capacity(spec.device_bandwidth_hz(), snr);
    table.single_view_s.push_back(upload_latency(static_cast<double>(raw_bits), full_band));
    // All devices transmit their raw view simultaneously on B/K, so the
    // multi-view time equals one raw view over the split band.
    table.multi_view_s.push_back(upload_latency(static_cast<double>(raw_bits), per_device));
    const int d = encoded_dim(per_device, spec.bits_per_element, spec.samples_per_transmission,
                              spec.time_budget_s());
    table.dims.push_back(d);
    table.encoded_s.push_back(
        upload_latency(static_cast<double>(d) * spec.bits_per_element, per_device));
  }
  return table;
}

std::string LatencyTable::formatted() const {
  std::ostringstream os;
  char buf[64];
  os << "scheme        ";
  for (double s : snr_db) {
    std::snprintf(buf, sizeof buf, " %9.0f dB", s);
    os << buf;
  }
  os << "\n";
  auto row = [&](const char* name, const std::vector<double>& vals) {
    os << name;
    for (double v : vals) {
      std::snprintf(buf, sizeof buf, " %12.4g", v);
      os << buf;
    }
    os << "\n";
  };
  row("single-view s ", single_view_s);
  row("multi-view  s ", multi_view_s);
  row("ade-mi      s ", encoded_s);
  os << "d_k           ";
  for (int d : dims) {
    std::snprintf(buf, sizeof buf, " %12d", d);
    os << buf;
  }
  os << "\n";
  return os.str();
}

std::string LatencyTable::csv() const {
  std::ostringstream os;
  os << "snr_db,single_view_s,multi_view_s,ade_mi_s,d_k\n";
  char buf[128];
  for (std::size_t i = 0; i < snr_db.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%g,%.17g,%.17g,%.17g,%d\n", snr_db[i], single_view_s[i],
                  multi_view_s[i], encoded_s[i], dims[i]);
    os << buf;
  }
  return os.str();
}

}  // namespace ademi
