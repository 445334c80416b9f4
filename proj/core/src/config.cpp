#include "ademi/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ademi/errors.hpp"

namespace ademi {
namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  auto end = s.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double d = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long long i = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long i = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an unsigned integer, got '" + value + "'");
  }
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config: " + key + " expects a list of numbers");
  return out;
}

void apply_train(nn::TrainConfig& train, const std::string& field, const std::string& key,
                 const std::string& value) {
  if (field == "learning_rate")
    train.learning_rate = to_double(key, value);
  else if (field == "epochs")
    train.epochs = static_cast<int>(to_int(key, value));
  else if (field == "batch_size")
    train.batch_size = static_cast<int>(to_int(key, value));
  else if (field == "optimizer") {
    if (value == "adam")
      train.method = nn::TrainConfig::Method::kAdam;
    else if (value == "sgd")
      train.method = nn::TrainConfig::Method::kSgd;
    else
      throw ConfigError("config: " + key + " must be 'adam' or 'sgd'");
  } else
    throw ConfigError("config: unknown key " + key);
}

std::string format_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

}  // namespace

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
    kv[key] = value;
  }
  return kv;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse_config_text(buffer.str());
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must be key=value, got '" + assignment + "'");
  kv[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

ExperimentConfig config_from_kv(const KeyValues& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "scene.num_devices")
      cfg.scene.num_devices = static_cast<int>(to_int(key, value));
    else if (key == "scene.num_antennas")
      cfg.scene.num_antennas = static_cast<int>(to_int(key, value));
    else if (key == "scene.num_subcarriers")
      cfg.scene.num_subcarriers = static_cast<int>(to_int(key, value));
    else if (key == "scene.num_paths")
      cfg.scene.num_paths = static_cast<int>(to_int(key, value));
    else if (key == "scene.sample_interval_s")
      cfg.scene.sample_interval_s = to_double(key, value);
    else if (key == "scene.duration_s")
      cfg.scene.duration_s = to_double(key, value);
    else if (key == "scene.carrier_freq_hz")
      cfg.scene.carrier_freq_hz = to_double(key, value);
    else if (key == "scene.static_path_gain")
      cfg.scene.static_path_gain = to_double(key, value);
    else if (key == "scene.dynamic_path_gain")
      cfg.scene.dynamic_path_gain = to_double(key, value);
    else if (key == "scene.phase_error_std_rad")
      cfg.scene.phase_error_std_rad = to_double(key, value);
    else if (key == "scene.noise_std")
      cfg.scene.noise_std = to_double(key, value);
    else if (key == "band.low_hz")
      cfg.band.low_hz = to_double(key, value);
    else if (key == "band.high_hz")
      cfg.band.high_hz = to_double(key, value);
    else if (key == "band.taps")
      cfg.band.taps = static_cast<int>(to_int(key, value));
    else if (key == "stft.window_len")
      cfg.stft.window_len = static_cast<int>(to_int(key, value));
    else if (key == "stft.hop")
      cfg.stft.hop = static_cast<int>(to_int(key, value));
    else if (key == "stft.num_freq_bins")
      cfg.stft.num_freq_bins = static_cast<int>(to_int(key, value));
    else if (key == "stft.max_freq_hz")
      cfg.stft.max_freq_hz = to_double(key, value);
    else if (key == "channel.total_bandwidth_hz")
      cfg.channel.total_bandwidth_hz = to_double(key, value);
    else if (key == "channel.snr_db")
      cfg.channel.snr_db = to_double_list(key, value);
    else if (key == "channel.bits_per_element")
      cfg.channel.bits_per_element = static_cast<int>(to_int(key, value));
    else if (key == "channel.samples_per_transmission")
      cfg.channel.samples_per_transmission = static_cast<int>(to_int(key, value));
    else if (key == "channel.per_sample_time_s")
      cfg.channel.per_sample_time_s = to_double(key, value);
    else if (key.rfind("train_device.", 0) == 0)
      apply_train(cfg.train_device, key.substr(13), key, value);
    else if (key.rfind("train_server.", 0) == 0)
      apply_train(cfg.train_server, key.substr(13), key, value);
    else if (key == "split_ratio")
      cfg.split_ratio = to_double(key, value);
    else if (key == "n_events")
      cfg.n_events = static_cast<int>(to_int(key, value));
    else if (key == "base_seed")
      cfg.base_seed = to_u64(key, value);
    else if (key == "ref_antenna")
      cfg.ref_antenna = static_cast<int>(to_int(key, value));
    else if (key == "quantizer_clip")
      cfg.quantizer_clip = to_double(key, value);
    else if (key == "pca_tol")
      cfg.pca_tol = to_double(key, value);
    else if (key == "pca_max_iter")
      cfg.pca_max_iter = static_cast<int>(to_int(key, value));
    else
      throw ConfigError("config: unknown key " + key);
  }
  // The channel always serves the scene's devices.
  cfg.channel.num_devices = cfg.scene.num_devices;
  cfg.validate();
  return cfg;
}

KeyValues config_to_kv(const ExperimentConfig& cfg) {
  KeyValues kv;
  kv["scene.num_devices"] = std::to_string(cfg.scene.num_devices);
  kv["scene.num_antennas"] = std::to_string(cfg.scene.num_antennas);
  kv["scene.num_subcarriers"] = std::to_string(cfg.scene.num_subcarriers);
  kv["scene.num_paths"] = std::to_string(cfg.scene.num_paths);
  kv["scene.sample_interval_s"] = format_double(cfg.scene.sample_interval_s);
  kv["scene.duration_s"] = format_double(cfg.scene.duration_s);
  kv["scene.carrier_freq_hz"] = format_double(cfg.scene.carrier_freq_hz);
  kv["scene.static_path_gain"] = format_double(cfg.scene.static_path_gain);
  kv["scene.dynamic_path_gain"] = format_double(cfg.scene.dynamic_path_gain);
  kv["scene.phase_error_std_rad"] = format_double(cfg.scene.phase_error_std_rad);
  kv["scene.noise_std"] = format_double(cfg.scene.noise_std);
  kv["band.low_hz"] = format_double(cfg.band.low_hz);
  kv["band.high_hz"] = format_double(cfg.band.high_hz);
  kv["band.taps"] = std::to_string(cfg.band.taps);
  kv["stft.window_len"] = std::to_string(cfg.stft.window_len);
  kv["stft.hop"] = std::to_string(cfg.stft.hop);
  kv["stft.num_freq_bins"] = std::to_string(cfg.stft.num_freq_bins);
  kv["stft.max_freq_hz"] = format_double(cfg.stft.max_freq_hz);
  kv["channel.total_bandwidth_hz"] = format_double(cfg.channel.total_bandwidth_hz);
  std::string snr;
  for (std::size_t i = 0; i < cfg.channel.snr_db.size(); ++i) {
    if (i) snr += ",";
    snr += format_double(cfg.channel.snr_db[i]);
  }
  kv["channel.snr_db"] = snr;
  kv["channel.bits_per_element"] = std::to_string(cfg.channel.bits_per_element);
  kv["channel.samples_per_transmission"] = std::to_string(cfg.channel.samples_per_transmission);
  kv["channel.per_sample_time_s"] = format_double(cfg.channel.per_sample_time_s);
  auto dump_train = [&](const std::string& prefix, const nn::TrainConfig& train) {
    kv[prefix + ".learning_rate"] = format_double(train.learning_rate);
    kv[prefix + ".epochs"] = std::to_string(train.epochs);
    kv[prefix + ".batch_size"] = std::to_string(train.batch_size);
    kv[prefix + ".optimizer"] =
        train.method == nn::TrainConfig::Method::kAdam ? "adam" : "sgd";
  };
  dump_train("train_device", cfg.train_device);
  dump_train("train_server", cfg.train_server);
  kv["split_ratio"] = format_double(cfg.split_ratio);
  kv["n_events"] = std::to_string(cfg.n_events);
  kv["base_seed"] = std::to_string(cfg.base_seed);
  kv["ref_antenna"] = std::to_string(cfg.ref_antenna);
  kv["quantizer_clip"] = format_double(cfg.quantizer_clip);
  kv["pca_tol"] = format_double(cfg.pca_tol);
  kv["pca_max_iter"] = std::to_string(cfg.pca_max_iter);
  return kv;
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, v] : config_to_kv(cfg)) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace ademi
