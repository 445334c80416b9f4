#include "ademi/harness.hpp"
#include <cstdarg>
#include <fstream>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ademi/config.hpp"
#include "ademi/errors.hpp"
#include "ademi/tensor_io.hpp"

namespace ademi {
namespace {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return Rng(base).fork(tag).seed();
}

// Seed tags for the independent streams of one run.
constexpr std::uint64_t kTagDataset = 1;
constexpr std::uint64_t kTagSplit = 2;
constexpr std::uint64_t kTagDeviceEncoder = 10;   // + device
constexpr std::uint64_t kTagDeviceDecoder = 30;   // + device
constexpr std::uint64_t kTagDeviceTrain = 50;     // + device
constexpr std::uint64_t kTagServerModel = 70;
constexpr std::uint64_t kTagServerTrain = 71;
constexpr std::uint64_t kTagSingleModel = 80;     // + device
constexpr std::uint64_t kTagSingleTrain = 100;    // + device
constexpr std::uint64_t kTagMultiModel = 120;
constexpr std::uint64_t kTagMultiTrain = 121;

void progress(bool verbose, const char* fmt, ...) {
  if (!verbose) return;
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  std::fprintf(stderr, "\n");
  va_end(args);
}

int argmax(std::span<const double> xs) {
  int best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

EncoderConfig encoder_config_for(const ExperimentConfig& cfg, int latent_dim) {
  EncoderConfig enc;
  enc.input_rows = cfg.spectrogram_rows();
  enc.input_cols = cfg.spectrogram_cols();
  enc.latent_dim = latent_dim;
  return enc;
}

nlohmann::json epoch_row_json(const std::string& scheme, const EpochRow& row) {
  return nlohmann::json{{"scheme", scheme},
                        {"epoch", row.epoch},
                        {"loss", row.loss},
                        {"accuracy", row.accuracy}};
}

std::string confusion_csv(const ITensor& confusion) {
  std::ostringstream os;
  os << "true\\pred";
  for (std::int64_t c = 0; c < confusion.dim(1); ++c) os << "," << c;
  os << "\n";
  for (std::int64_t r = 0; r < confusion.dim(0); ++r) {
    os << r;
    for (std::int64_t c = 0; c < confusion.dim(1); ++c) os << "," << confusion.at2(r, c);
    os << "\n";
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << text;
}

}  // namespace

void ExperimentConfig::validate() const {
  scene.validate();
  channel.validate();
  if (channel.num_devices != scene.num_devices)
    throw ConfigError("config: channel and scene device counts differ");
  stft.validate(scene.sample_rate_hz());
  if (!(0.0 < band.low_hz && band.low_hz < band.high_hz &&
        band.high_hz < 0.5 * scene.sample_rate_hz()))
    throw ConfigError("config: band edges must satisfy 0 < low < high < sample_rate/2");
  if (band.taps != 0 && (band.taps < 3 || band.taps % 2 == 0))
    throw ConfigError("config: filter taps must be 0 (auto) or an odd count >= 3");
  train_device.validate();
  train_server.validate();
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    throw ConfigError("config: split ratio must be in (0, 1)");
  if (n_events < 2 * kNumClasses || n_events % kNumClasses != 0)
    throw ConfigError("config: need a positive multiple of 6 events, at least 12");
  if (ref_antenna < 0 || ref_antenna >= scene.num_antennas)
    throw ConfigError("config: reference antenna out of range");
  if (!(quantizer_clip > 0.0)) throw ConfigError("config: quantizer clip must be positive");
  const int frames = spectrogram_rows();
  if (frames < 1) throw ConfigError("config: the scene yields an empty spectrogram (S == W)");
  EncoderConfig enc = encoder_config_for(*this, 1);
  try {
    enc.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: encoder cannot consume the spectrogram: ") + e.what());
  }
  for (int k = 0; k < scene.num_devices; ++k) link_budget(channel, k);  // throws on no capacity
}

PipelineConfig ExperimentConfig::pipeline() const {
  PipelineConfig p;
  p.ref_antenna = ref_antenna;
  p.band = band;
  p.stft = stft;
  p.pca_tol = pca_tol;
  p.pca_max_iter = pca_max_iter;
  p.normalize = true;
  return p;
}

int ExperimentConfig::spectrogram_rows() const {
  return num_frames(scene.sample_count(), stft.window_len, stft.hop);
}

double MetricsReport::accuracy(const std::string& scheme) const {
  auto it = schemes.find(scheme);
  if (it == schemes.end()) throw DomainError("metrics: unknown scheme " + scheme);
  return it->second.accuracy;
}

std::string MetricsReport::to_json_lines() const {
  std::ostringstream os;
  for (const auto& [scheme, m] : schemes)
    for (const auto& row : m.curve) os << epoch_row_json(scheme, row).dump() << "\n";
  for (const auto& [scheme, m] : schemes) {
    nlohmann::json summary{{"scheme", scheme},
                           {"accuracy", m.accuracy},
                           {"upload_latency_s", m.upload_latency_s},
                           {"payload_bits", m.payload_bits}};
    if (m.confusion.size() > 0) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::int64_t r = 0; r < m.confusion.dim(0); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::int64_t c = 0; c < m.confusion.dim(1); ++c) row.push_back(m.confusion.at2(r, c));
        rows.push_back(row);
      }
      summary["confusion"] = rows;
    }
    os << summary.dump() << "\n";
  }
  return os.str();
}

SplitIndices split_dataset(std::span<const int> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("split: ratio must be in (0, 1)");
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));

  Rng rng(seed);
  SplitIndices out;
  for (auto& [label, indices] : by_class) {
    if (indices.size() < 2)
      throw DomainError("split: class " + std::to_string(label) + " has fewer than 2 events");
    Rng class_rng = rng.fork(static_cast<std::uint64_t>(label));
    class_rng.shuffle(indices);
    std::size_t n_train = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(indices.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, indices.size() - 1);
    for (std::size_t i = 0; i < indices.size(); ++i)
      (i < n_train ? out.train : out.test).push_back(indices[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitIndices split_dataset(const LabeledCsiSet& set, double ratio, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(set.events.size());
  for (const auto& e : set.events) labels.push_back(e.label);
  return split_dataset(labels, ratio, seed);
}

ITensor confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                         int classes) {
  if (predictions.size() != labels.size())
    throw DomainError("confusion_matrix: prediction and label counts differ");
  ITensor m({classes, classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes || predictions[i] < 0 || predictions[i] >= classes)
      throw DomainError("confusion_matrix: label or prediction out of range");
    ++m.at2(labels[i], predictions[i]);
  }
  return m;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const int K = cfg.scene.num_devices;
  const int n = cfg.n_events;
  const std::uint64_t dataset_seed = derive_seed(cfg.base_seed, kTagDataset);
  const PipelineConfig pipe = cfg.pipeline();
  const double f_s = cfg.scene.sample_rate_hz();

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) labels[static_cast<std::size_t>(e)] = e % kNumClasses;
  SplitIndices split = split_dataset(labels, cfg.split_ratio, derive_seed(cfg.base_seed, kTagSplit));

  // All spectrograms, event-major; CSI is synthesized and dropped per event.
  std::vector<std::vector<Tensor>> specs(static_cast<std::size_t>(K),
                                         std::vector<Tensor>(static_cast<std::size_t>(n)));
#pragma omp parallel for schedule(dynamic)
  for (int e = 0; e < n; ++e) {
    CsiEvent event = synth_event(cfg.scene, e, dataset_seed);
    for (int k = 0; k < K; ++k) {
      DfsSpectrogram spec =
          csi_to_spectrogram(event.views[static_cast<std::size_t>(k)], f_s, pipe);
      specs[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)] = std::move(spec.power);
    }
  }

  PreparedData data;
  data.rows = cfg.spectrogram_rows();
  data.cols = cfg.spectrogram_cols();
  data.train_specs.resize(static_cast<std::size_t>(K));
  data.test_specs.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    for (int e : split.train)
      data.train_specs[static_cast<std::size_t>(k)].push_back(
          std::move(specs[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)]));
    // Test views are copied after the moves above only touch train indices.
  }
  for (int k = 0; k < K; ++k)
    for (int e : split.test)
      data.test_specs[static_cast<std::size_t>(k)].push_back(
          std::move(specs[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)]));
  for (int e : split.train) data.train_labels.push_back(labels[static_cast<std::size_t>(e)]);
  for (int e : split.test) data.test_labels.push_back(labels[static_cast<std::size_t>(e)]);
  return data;
}

RunContext run_full(const ExperimentConfig& cfg, const std::string& out_dir, bool verbose) {
  RunContext ctx;
  ctx.cfg = cfg;
  cfg.validate();
  const int K = cfg.scene.num_devices;

  if (!out_dir.empty()) {
    ensure_directory(out_dir);
    write_text(out_dir + "/run_config.cfg", config_text(cfg));
  }

  progress(verbose, "[synth] %d events x %d devices", cfg.n_events, K);
  ctx.data = prepare_data(cfg);
  const std::size_t n_train = ctx.data.train_labels.size();
  const std::size_t n_test = ctx.data.test_labels.size();
  progress(verbose, "[synth] done: %zu train / %zu test events (%dx%d spectrograms)", n_train,
           n_test, ctx.data.rows, ctx.data.cols);

  ctx.quant = QuantizerSpec{cfg.channel.bits_per_element, cfg.quantizer_clip};

  int total_dim = 0;
  for (int k = 0; k < K; ++k) {
    DeviceOutputs out;
    out.budget = link_budget(cfg.channel, k);
    total_dim += out.budget.dim;
    EncoderConfig enc_cfg = encoder_config_for(cfg, out.budget.dim);
    out.model = std::make_unique<DeviceModel>(
        enc_cfg, derive_seed(cfg.base_seed, kTagDeviceEncoder + static_cast<std::uint64_t>(k)),
        derive_seed(cfg.base_seed, kTagDeviceDecoder + static_cast<std::uint64_t>(k)));
    nn::TrainConfig train_cfg = cfg.train_device;
    train_cfg.seed = derive_seed(cfg.base_seed, kTagDeviceTrain + static_cast<std::uint64_t>(k));
    progress(verbose, "[train-device %d] d_k=%d, %d epochs", k, out.budget.dim, train_cfg.epochs);
    out.train = train_device(*out.model, ctx.data.train_specs[static_cast<std::size_t>(k)],
                             ctx.data.train_labels, out.budget, ctx.quant, train_cfg);
    out.local_test_accuracy =
        local_decoder_accuracy(*out.model, ctx.data.test_specs[static_cast<std::size_t>(k)],
                               ctx.data.test_labels, ctx.quant);
    progress(verbose, "[train-device %d] local test accuracy %.3f", k, out.local_test_accuracy);
    ctx.devices.push_back(std::move(out));
  }

  if (!out_dir.empty()) {
    for (int k = 0; k < K; ++k)
      write_latent_files(out_dir, k, ctx.devices[static_cast<std::size_t>(k)].train.train_latents,
                         cfg.base_seed);
    write_labels_file(out_dir, ctx.data.train_labels);
  }

  // Server stage: the uploaded latents and labels are its only inputs.
  MultiViewBatch upload;
  upload.labels = ctx.data.train_labels;
  for (int k = 0; k < K; ++k)
    upload.per_device.push_back(ctx.devices[static_cast<std::size_t>(k)].train.train_latents);
  upload.validate();

  ctx.server =
      std::make_unique<ServerModel>(total_dim, derive_seed(cfg.base_seed, kTagServerModel));
  nn::TrainConfig server_cfg = cfg.train_server;
  server_cfg.seed = derive_seed(cfg.base_seed, kTagServerTrain);
  progress(verbose, "[train-server] fused width %d, %d epochs", total_dim, server_cfg.epochs);
  ctx.server_curve = train_server(*ctx.server, upload, server_cfg);

  // Zero-noise test-time encodings.
  ctx.test_latents.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    ctx.test_latents[static_cast<std::size_t>(k)] = encode_latents(
        *ctx.devices[static_cast<std::size_t>(k)].model,
        ctx.data.test_specs[static_cast<std::size_t>(k)], ctx.quant, nullptr);

  std::vector<int> ade_predictions(n_test);
  for (std::size_t e = 0; e < n_test; ++e) {
    std::vector<DeviceLatent> views;
    views.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      views.push_back({k, ctx.test_latents[static_cast<std::size_t>(k)][e]});
    ade_predictions[e] = argmax(predict(*ctx.server, views, K));
  }

  // Raw baselines share the trunk architecture.
  EncoderConfig base_cfg = encoder_config_for(cfg, ctx.devices.front().budget.dim);
  for (int k = 0; k < K; ++k) {
    auto model = std::make_unique<SingleViewModel>(
        base_cfg, derive_seed(cfg.base_seed, kTagSingleModel + static_cast<std::uint64_t>(k)));
    nn::TrainConfig train_cfg = cfg.train_server;
    train_cfg.seed = derive_seed(cfg.base_seed, kTagSingleTrain + static_cast<std::uint64_t>(k));
    progress(verbose, "[baseline single %d] %d epochs", k, train_cfg.epochs);
    train_single_view(*model, ctx.data.train_specs[static_cast<std::size_t>(k)],
                      ctx.data.train_labels, train_cfg);
    ctx.single_accuracies.push_back(single_view_accuracy(
        *model, ctx.data.test_specs[static_cast<std::size_t>(k)], ctx.data.test_labels));
    progress(verbose, "[baseline single %d] test accuracy %.3f", k, ctx.single_accuracies.back());
    ctx.single_baselines.push_back(std::move(model));
  }
  ctx.multi_baseline = std::make_unique<MultiViewRawModel>(
      base_cfg, K, derive_seed(cfg.base_seed, kTagMultiModel));
  {
    nn::TrainConfig train_cfg = cfg.train_server;
    train_cfg.seed = derive_seed(cfg.base_seed, kTagMultiTrain);
    progress(verbose, "[baseline multi] %d epochs", train_cfg.epochs);
    train_multi_view(*ctx.multi_baseline, ctx.data.train_specs, ctx.data.train_labels, train_cfg);
  }
  const double multi_accuracy_value =
      multi_view_accuracy(*ctx.multi_baseline, ctx.data.test_specs, ctx.data.test_labels);
  progress(verbose, "[baseline multi] test accuracy %.3f", multi_accuracy_value);

  // Metrics.
  const std::int64_t raw_bits =
      raw_payload_bits(ctx.data.rows, ctx.data.cols, cfg.channel.bits_per_element);
  MetricsReport report;
  {
    SchemeMetrics m;
    std::int64_t correct = 0;
    for (std::size_t e = 0; e < n_test; ++e)
      if (ade_predictions[e] == ctx.data.test_labels[e]) ++correct;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n_test);
    m.confusion = confusion_matrix(ade_predictions, ctx.data.test_labels);
    double latency = 0.0;
    std::int64_t payload = 0;
    for (const auto& dev : ctx.devices) {
      latency = std::max(latency, dev.budget.latency_s);
      payload += dev.budget.payload_bits;
    }
    m.upload_latency_s = latency;
    m.payload_bits = payload;
    m.curve = ctx.server_curve;
    report.schemes["ade-mi"] = std::move(m);
    progress(verbose, "[eval] ade-mi test accuracy %.3f", report.schemes["ade-mi"].accuracy);
  }
  for (int k = 0; k < K; ++k) {
    const auto& dev = ctx.devices[static_cast<std::size_t>(k)];
    SchemeMetrics m;
    m.accuracy = dev.local_test_accuracy;
    m.upload_latency_s = dev.budget.latency_s;
    m.payload_bits = dev.budget.payload_bits;
    m.curve = dev.train.curve;
    report.schemes["local-" + std::to_string(k)] = std::move(m);
  }
  for (int k = 0; k < K; ++k) {
    SchemeMetrics m;
    m.accuracy = ctx.single_accuracies[static_cast<std::size_t>(k)];
    m.upload_latency_s = upload_latency(
        static_cast<double>(raw_bits),
        shannon_capacity(cfg.channel.total_bandwidth_hz, cfg.channel.snr_for(k)));
    m.payload_bits = raw_bits;
    report.schemes["single-view-" + std::to_string(k)] = std::move(m);
  }
  {
    SchemeMetrics m;
    m.accuracy = multi_accuracy_value;
    double latency = 0.0;
    for (int k = 0; k < K; ++k)
      latency = std::max(latency, upload_latency(static_cast<double>(raw_bits),
                                                 shannon_capacity(cfg.channel.device_bandwidth_hz(),
                                                                  cfg.channel.snr_for(k))));
    m.upload_latency_s = latency;
    m.payload_bits = raw_bits * K;
    report.schemes["multi-view"] = std::move(m);
  }
  ctx.report = std::move(report);

  if (!out_dir.empty()) {
    for (int k = 0; k < K; ++k) {
      const auto& dev = ctx.devices[static_cast<std::size_t>(k)];
      NamedTensors enc = dev.model->encoder_store.to_named();
      NamedTensors dec = dev.model->decoder_store.to_named();
      save_named_tensors(out_dir + "/encoder_" + std::to_string(k), enc);
      save_named_tensors(out_dir + "/local_decoder_" + std::to_string(k), dec);
    }
    save_named_tensors(out_dir + "/server_model", ctx.server->store.to_named());
    write_text(out_dir + "/metrics.jsonl", ctx.report.to_json_lines());
    for (const auto& [scheme, m] : ctx.report.schemes)
      if (m.confusion.size() > 0)
        write_text(out_dir + "/confusion_" + scheme + ".csv", confusion_csv(m.confusion));

    std::map<std::string, std::string> sums;
    std::vector<std::string> artifacts = {"run_config.cfg", "labels.bin", "metrics.jsonl",
                                          "server_model.bin", "server_model.manifest"};
    for (int k = 0; k < K; ++k) {
      artifacts.push_back("latents_" + std::to_string(k) + ".bin");
      artifacts.push_back("latents_" + std::to_string(k) + ".manifest");
      artifacts.push_back("encoder_" + std::to_string(k) + ".bin");
      artifacts.push_back("local_decoder_" + std::to_string(k) + ".bin");
    }
    for (const auto& name : artifacts) sums[name] = file_checksum(out_dir + "/" + name);
    save_manifest(out_dir + "/checksums.txt", sums);
  }
  return ctx;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                             bool verbose) {
  return run_full(cfg, out_dir, verbose).report;
}

void validate_run_dir(const std::string& dir) {
  auto sums = load_manifest(dir + "/checksums.txt");
  for (const auto& [name, expected] : sums) {
    std::string actual = file_checksum(dir + "/" + name);
    if (actual != expected)
      throw ConfigError("artifact checksum mismatch for " + name + ": expected " + expected +
                        ", got " + actual);
  }
}

std::string SweepCurve::csv() const {
  std::ostringstream os;
  os << x_name << ",scheme,admitted_samples,accuracy\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%lld,%.17g\n", row.x, row.scheme.c_str(),
                  static_cast<long long>(row.admitted_samples), row.accuracy);
    os << buf;
  }
  return os.str();
}

SweepCurve sweep_interval(const ExperimentConfig& cfg, const std::vector<double>& intervals_s,
                          const std::string& out_dir, bool verbose) {
  if (intervals_s.empty()) throw DomainError("sweep_interval: no intervals");
  SweepCurve curve;
  curve.x_name = "interval_s";
  for (double dt : intervals_s) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.scene.sample_interval_s = dt;
    point_cfg.validate();  // rejects intervals that collapse the spectrogram
    std::string point_dir;
    if (!out_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "interval_%g", dt);
      point_dir = out_dir + "/" + name;
    }
    progress(verbose, "[sweep-interval] dt=%g s", dt);
    RunContext ctx = run_full(point_cfg, point_dir, verbose);
    const std::int64_t n_train = static_cast<std::int64_t>(ctx.data.train_labels.size());
    double single_mean = 0.0;
    for (double a : ctx.single_accuracies) single_mean += a;
    single_mean /= static_cast<double>(ctx.single_accuracies.size());
    curve.rows.push_back({dt, "single", single_mean, n_train});
    curve.rows.push_back({dt, "multi", ctx.report.accuracy("multi-view"), n_train});
    curve.rows.push_back({dt, "ade-mi", ctx.report.accuracy("ade-mi"), n_train});
  }
  if (!out_dir.empty()) {
    ensure_directory(out_dir);
    write_text(out_dir + "/sweep_interval.csv", curve.csv());
  }
  return curve;
}

SweepCurve sweep_upload_time(const ExperimentConfig& cfg, const std::vector<double>& budgets_s,
                             const std::string& out_dir, bool verbose) {
  RunContext base = run_full(cfg, "", verbose);
  return sweep_upload_time(base, budgets_s, out_dir, verbose);
}

SweepCurve sweep_upload_time(RunContext& base, const std::vector<double>& budgets_s,
                             const std::string& out_dir, bool verbose) {
  if (budgets_s.empty()) throw DomainError("sweep_upload_time: no budgets");
  for (double b : budgets_s)
    if (!(b > 0.0)) throw DomainError("sweep_upload_time: budgets must be positive");

  const ExperimentConfig& cfg = base.cfg;
  const int K = cfg.scene.num_devices;
  const std::int64_t n_train = static_cast<std::int64_t>(base.data.train_labels.size());
  const std::int64_t raw_bits =
      raw_payload_bits(base.data.rows, base.data.cols, cfg.channel.bits_per_element);

  // Seconds to upload one training sample (all devices transmit in parallel,
  // the slowest link gates the time).
  double t_encoded = 0.0;
  double t_multi = 0.0;
  double t_single = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& budget = base.devices[static_cast<std::size_t>(k)].budget;
    t_encoded = std::max(t_encoded, budget.latency_s);
    t_multi = std::max(t_multi, upload_latency(static_cast<double>(raw_bits), budget.capacity_bps));
    t_single = std::max(t_single,
                        upload_latency(static_cast<double>(raw_bits),
                                       shannon_capacity(cfg.channel.total_bandwidth_hz,
                                                        cfg.channel.snr_for(k))));
  }

  auto admitted = [n_train](double budget, double per_sample) {
    double count = std::floor(budget / per_sample + 1e-12);
    return std::min<std::int64_t>(n_train, static_cast<std::int64_t>(std::max(0.0, count)));
  };

  const double chance = 1.0 / static_cast<double>(kNumClasses);
  std::map<std::pair<std::string, std::int64_t>, double> cache;

  auto encoded_accuracy = [&](std::int64_t n) -> double {
    if (n == 0) return chance;
    if (n == n_train) return base.report.accuracy("ade-mi");
    auto key = std::make_pair(std::string("ade-mi"), n);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    MultiViewBatch upload;
    upload.labels.assign(base.data.train_labels.begin(), base.data.train_labels.begin() + n);
    for (int k = 0; k < K; ++k) {
      const auto& latents = base.devices[static_cast<std::size_t>(k)].train.train_latents;
      upload.per_device.emplace_back(latents.begin(), latents.begin() + n);
    }
    int total_dim = 0;
    for (const auto& dev : base.devices) total_dim += dev.budget.dim;
    ServerModel server(total_dim, derive_seed(cfg.base_seed, kTagServerModel));
    nn::TrainConfig train_cfg = cfg.train_server;
    train_cfg.seed = derive_seed(cfg.base_seed, kTagServerTrain);
    train_server(server, upload, train_cfg);
    std::int64_t correct = 0;
    const std::size_t n_test = base.data.test_labels.size();
    for (std::size_t e = 0; e < n_test; ++e) {
      std::vector<DeviceLatent> views;
      for (int k = 0; k < K; ++k)
        views.push_back({k, base.test_latents[static_cast<std::size_t>(k)][e]});
      if (argmax(predict(server, views, K)) == base.data.test_labels[e]) ++correct;
    }
    double acc = static_cast<double>(correct) / static_cast<double>(n_test);
    cache[key] = acc;
    return acc;
  };

  auto multi_accuracy_at = [&](std::int64_t n) -> double {
    if (n == 0) return chance;
    if (n == n_train) return base.report.accuracy("multi-view");
    auto key = std::make_pair(std::string("multi"), n);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    std::vector<std::vector<Tensor>> prefix(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      prefix[static_cast<std::size_t>(k)].assign(
          base.data.train_specs[static_cast<std::size_t>(k)].begin(),
          base.data.train_specs[static_cast<std::size_t>(k)].begin() + n);
    std::vector<int> labels(base.data.train_labels.begin(), base.data.train_labels.begin() + n);
    EncoderConfig enc_cfg = encoder_config_for(cfg, base.devices.front().budget.dim);
    MultiViewRawModel model(enc_cfg, K, derive_seed(cfg.base_seed, kTagMultiModel));
    nn::TrainConfig train_cfg = cfg.train_server;
    train_cfg.seed = derive_seed(cfg.base_seed, kTagMultiTrain);
    train_multi_view(model, prefix, labels, train_cfg);
    double acc = multi_view_accuracy(model, base.data.test_specs, base.data.test_labels);
    cache[key] = acc;
    return acc;
  };

  auto single_accuracy_at = [&](std::int64_t n) -> double {
    if (n == 0) return chance;
    if (n == n_train) {
      double mean = 0.0;
      for (double a : base.single_accuracies) mean += a;
      return mean / static_cast<double>(base.single_accuracies.size());
    }
    auto key = std::make_pair(std::string("single"), n);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    EncoderConfig enc_cfg = encoder_config_for(cfg, base.devices.front().budget.dim);
    std::vector<int> labels(base.data.train_labels.begin(), base.data.train_labels.begin() + n);
    double mean = 0.0;
    for (int k = 0; k < K; ++k) {
      std::vector<Tensor> prefix(base.data.train_specs[static_cast<std::size_t>(k)].begin(),
                                 base.data.train_specs[static_cast<std::size_t>(k)].begin() + n);
      SingleViewModel model(enc_cfg,
                            derive_seed(cfg.base_seed, kTagSingleModel + static_cast<std::uint64_t>(k)));
      nn::TrainConfig train_cfg = cfg.train_server;
      train_cfg.seed = derive_seed(cfg.base_seed, kTagSingleTrain + static_cast<std::uint64_t>(k));
      train_single_view(model, prefix, labels, train_cfg);
      mean += single_view_accuracy(model, base.data.test_specs[static_cast<std::size_t>(k)],
                                   base.data.test_labels);
    }
    mean /= static_cast<double>(K);
    cache[key] = mean;
    return mean;
  };

  SweepCurve curve;
  curve.x_name = "budget_s";
  for (double b : budgets_s) {
    const std::int64_t n_single = admitted(b, t_single);
    const std::int64_t n_multi = admitted(b, t_multi);
    const std::int64_t n_encoded = admitted(b, t_encoded);
    progress(verbose, "[sweep-upload] budget %g s: single %lld, multi %lld, ade-mi %lld samples",
             b, static_cast<long long>(n_single), static_cast<long long>(n_multi),
             static_cast<long long>(n_encoded));
    curve.rows.push_back({b, "single", single_accuracy_at(n_single), n_single});
    curve.rows.push_back({b, "multi", multi_accuracy_at(n_multi), n_multi});
    curve.rows.push_back({b, "ade-mi", encoded_accuracy(n_encoded), n_encoded});
  }
  if (!out_dir.empty()) {
    ensure_directory(out_dir);
    write_text(out_dir + "/sweep_upload.csv", curve.csv());
  }
  return curve;
}

}  // namespace ademi
