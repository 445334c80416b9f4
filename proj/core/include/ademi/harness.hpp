#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ademi/channel_model.hpp"
#include "ademi/csi_synth.hpp"
#include "ademi/dfs_pipeline.hpp"
#include "ademi/encoder.hpp"
#include "ademi/nn.hpp"
#include "ademi/server.hpp"

namespace ademi {

/// Everything a full run depends on. A MetricsReport is a pure function of
/// this structure (including base_seed).
struct ExperimentConfig {
  SceneSpec scene;
  BandpassSpec band;
  StftConfig stft;
  ChannelSpec channel;
  nn::TrainConfig train_device;
  nn::TrainConfig train_server;
  double split_ratio = 0.9;
  int n_events = 600;
  std::uint64_t base_seed = 1;
  int ref_antenna = 0;
  double quantizer_clip = 3.0;
  double pca_tol = 1e-12;
  int pca_max_iter = 5000;

  void validate() const;
  PipelineConfig pipeline() const;
  int spectrogram_rows() const;  // STFT frame count for the scene
  int spectrogram_cols() const { return stft.num_freq_bins; }
};

struct SchemeMetrics {
  double accuracy = 0.0;
  ITensor confusion;  // (classes, classes): rows true, columns predicted
  double upload_latency_s = 0.0;
  std::int64_t payload_bits = 0;
  std::vector<EpochRow> curve;
};

struct MetricsReport {
  std::map<std::string, SchemeMetrics> schemes;

  double accuracy(const std::string& scheme) const;
  /// Deterministic JSON-lines rendering: per-epoch rows then summaries.
  std::string to_json_lines() const;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Stratified event-level split; every class keeps at least one event on
/// each side. Index lists are ascending.
SplitIndices split_dataset(std::span<const int> labels, double ratio, std::uint64_t seed);
SplitIndices split_dataset(const LabeledCsiSet& set, double ratio, std::uint64_t seed);

ITensor confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                         int classes = kNumClasses);

/// Synthesized and preprocessed spectrograms, already split.
struct PreparedData {
  std::vector<std::vector<Tensor>> train_specs;  // [device][event] (rows, cols)
  std::vector<std::vector<Tensor>> test_specs;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
  int rows = 0;
  int cols = 0;
};

/// Synthesizes per event, runs the preprocessing chain, and keeps only the
/// spectrograms (raw CSI is produced and dropped streamingly).
PreparedData prepare_data(const ExperimentConfig& cfg);

struct DeviceOutputs {
  std::unique_ptr<DeviceModel> model;
  DeviceTrainResult train;
  LinkBudget budget;
  double local_test_accuracy = 0.0;
};

/// All state of a completed run, reused by the sweeps.
struct RunContext {
  ExperimentConfig cfg;
  PreparedData data;
  QuantizerSpec quant;
  std::vector<DeviceOutputs> devices;
  std::unique_ptr<ServerModel> server;
  std::vector<EpochRow> server_curve;
  std::vector<std::vector<LatentVector>> test_latents;  // [device][event], zero-noise
  std::vector<std::unique_ptr<SingleViewModel>> single_baselines;
  std::vector<double> single_accuracies;
  std::unique_ptr<MultiViewRawModel> multi_baseline;
  MetricsReport report;
};

/// Full pipeline: synth, preprocessing, per-device local training, one-shot
/// upload, server training, baselines, evaluation. When out_dir is set every
/// artifact (config snapshot, latents, checkpoints, metrics, checksums) is
/// persisted there.
RunContext run_full(const ExperimentConfig& cfg, const std::string& out_dir = "",
                    bool verbose = false);
MetricsReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "",
                             bool verbose = false);

/// Recomputes the checksums recorded in a run directory.
void validate_run_dir(const std::string& dir);

struct SweepRow {
  double x = 0.0;
  std::string scheme;  // "single", "multi", "ade-mi"
  double accuracy = 0.0;
  std::int64_t admitted_samples = 0;
};

struct SweepCurve {
  std::string x_name;
  std::vector<SweepRow> rows;
  std::string csv() const;
};

/// One full run per packet interval; accuracy per scheme at each interval.
SweepCurve sweep_interval(const ExperimentConfig& cfg, const std::vector<double>& intervals_s,
                          const std::string& out_dir = "", bool verbose = false);

/// Server-side training-data budget sweep: for each upload-time budget the
/// transmittable prefix of the training set is kept and the server (or raw
/// baseline) is retrained. Budgets admitting zero samples score 1/6.
SweepCurve sweep_upload_time(const ExperimentConfig& cfg, const std::vector<double>& budgets_s,
                             const std::string& out_dir = "", bool verbose = false);
SweepCurve sweep_upload_time(RunContext& base, const std::vector<double>& budgets_s,
                             const std::string& out_dir = "", bool verbose = false);

}  // namespace ademi
