#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ademi/encoder.hpp"
#include "ademi/nn.hpp"
#include "ademi/tensor.hpp"

namespace ademi {

/// Latents for one event with the device id each came from; arrival order is
/// irrelevant, fusion always sorts by device id.
struct DeviceLatent {
  int device_id = 0;
  LatentVector latent;
};

/// Aligned multi-view training data: per device, one latent per event.
struct MultiViewBatch {
  std::vector<std::vector<LatentVector>> per_device;  // [device][event]
  std::vector<int> labels;                            // [event]

  void validate() const;
  int total_dim() const;
};

/// Dequantized values concatenated in device-id order. Every expected device
/// id must appear exactly once.
std::vector<double> concat_latents(std::span<const DeviceLatent> views, int num_devices);

/// Joint classifier on the fused latent: dense (sum d_k) -> 64 -> 6.
class ServerDecoder {
 public:
  ServerDecoder(nn::ParamStore& store, int input_dim, int hidden = 64, int classes = 6);
  Tensor forward(const Tensor& z);
  Tensor backward(const Tensor& dlogits);
  int input_dim() const { return input_dim_; }
  int classes() const { return classes_; }

 private:
  nn::Dense fc1_;
  nn::Relu relu_;
  nn::Dense fc2_;
  int input_dim_;
  int classes_;
};

struct ServerModel {
  nn::ParamStore store;
  ServerDecoder decoder;
  ServerModel(int input_dim, std::uint64_t seed);
};

struct ServerLossResult {
  double loss = 0.0;
  Tensor probs;
};

ServerLossResult server_loss(ServerModel& model, const Tensor& z_batch,
                             std::span<const int> labels, bool with_grad = true);

/// Minibatch training of the joint decoder on the uploaded latents.
std::vector<EpochRow> train_server(ServerModel& model, const MultiViewBatch& batch,
                                   const nn::TrainConfig& cfg);

/// Softmax class probabilities for one fused event.
std::vector<double> predict(ServerModel& model, std::span<const DeviceLatent> views,
                            int num_devices);

// ---------------------------------------------------------------------------
// Raw-spectrogram baselines. Both share the encoder trunk architecture and
// the decoder head shape; the multi-view variant fuses the per-view features
// before the head.

class SingleViewModel {
 public:
  SingleViewModel(const EncoderConfig& cfg, std::uint64_t seed);
  Tensor forward(const Tensor& x);  // (B, rows, cols) -> logits
  void backward(const Tensor& dlogits);
  nn::ParamStore& store() { return store_; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  nn::ParamStore store_;
  nn::Conv2D conv_;
  nn::Relu conv_relu_;
  nn::MaxPool2D pool_;
  nn::Flatten flatten_;
  nn::Dense fc_;
  nn::Relu fc_relu_;
  nn::Dense head1_;
  nn::Relu head_relu_;
  nn::Dense head2_;
};

class MultiViewRawModel {
 public:
  MultiViewRawModel(const EncoderConfig& cfg, int num_views, std::uint64_t seed);
  /// views: one (B, rows, cols) tensor per view.
  Tensor forward(const std::vector<Tensor>& views);
  void backward(const Tensor& dlogits);
  nn::ParamStore& store() { return store_; }
  int num_views() const { return num_views_; }

 private:
  struct Trunk {
    nn::Conv2D conv;
    nn::Relu conv_relu;
    nn::MaxPool2D pool;
    nn::Flatten flatten;
    nn::Dense fc;
    nn::Relu fc_relu;
    Trunk(nn::ParamStore& store, const std::string& prefix, const EncoderConfig& cfg);
  };
  EncoderConfig cfg_;
  int num_views_;
  nn::ParamStore store_;
  std::vector<Trunk> trunks_;
  nn::Dense head1_;
  nn::Relu head_relu_;
  nn::Dense head2_;
};

struct BaselineTrainResult {
  std::vector<EpochRow> curve;
};

BaselineTrainResult train_single_view(SingleViewModel& model, const std::vector<Tensor>& samples,
                                      std::span<const int> labels, const nn::TrainConfig& cfg);

BaselineTrainResult train_multi_view(MultiViewRawModel& model,
                                     const std::vector<std::vector<Tensor>>& per_view_samples,
                                     std::span<const int> labels, const nn::TrainConfig& cfg);

double single_view_accuracy(SingleViewModel& model, const std::vector<Tensor>& samples,
                            std::span<const int> labels);
double multi_view_accuracy(MultiViewRawModel& model,
                           const std::vector<std::vector<Tensor>>& per_view_samples,
                           std::span<const int> labels);

// ---------------------------------------------------------------------------
// One-shot transmission artifacts. Each device contributes
// `latents_<k>.bin` + `latents_<k>.manifest`; labels live in `labels.bin`.
// The server trains from these files alone.

void write_latent_files(const std::string& dir, int device_id,
                        const std::vector<LatentVector>& latents, std::uint64_t seed);
std::vector<LatentVector> read_latent_files(const std::string& dir, int device_id,
                                            int* device_id_out = nullptr);
void write_labels_file(const std::string& dir, std::span<const int> labels);
std::vector<int> read_labels_file(const std::string& dir);

/// Assembles the server training batch from the uploaded files of
/// `num_devices` devices.
MultiViewBatch load_upload_dir(const std::string& dir, int num_devices);

}  // namespace ademi
