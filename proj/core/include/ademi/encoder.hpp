#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ademi/channel_model.hpp"
#include "ademi/nn.hpp"
#include "ademi/rng.hpp"
#include "ademi/tensor.hpp"

namespace ademi {

/// Uniform quantizer over [-clip, clip]. Widths of 32 bits or more run in
/// pass-through mode (values are transmitted verbatim at that bit width).
struct QuantizerSpec {
  int bits = 64;
  double clip = 3.0;

  bool passthrough() const { return bits >= 32; }
  /// Quantized-mode quantities; meaningless (and rejected) in pass-through.
  std::int64_t levels() const {
    if (passthrough()) throw DomainError("quantizer: no levels in pass-through mode");
    return std::int64_t{1} << bits;
  }
  double step() const { return 2.0 * clip / static_cast<double>(levels()); }
  void validate() const;
};

/// Encoded feature vector: representative (dequantized) values plus the
/// integer codes when quantization is active.
struct LatentVector {
  std::vector<double> values;
  std::vector<std::int64_t> indices;  // empty in pass-through mode
  QuantizerSpec spec;

  std::int64_t bit_cost() const {
    return static_cast<std::int64_t>(values.size()) * spec.bits;
  }
};

LatentVector quantize(std::span<const double> z, const QuantizerSpec& spec);
std::vector<double> dequantize(const LatentVector& latent);

/// z~ = mu + sigma .* eps, elementwise.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> eps);

struct EncoderConfig {
  int input_rows = 0;
  int input_cols = 0;
  int conv_filters = 8;
  int conv_kernel = 5;
  int conv_stride = 2;
  int pool_window = 2;
  int feature_dim = 256;
  int latent_dim = 0;

  void validate() const;
  int flattened_dim() const;
};

/// Convolutional trunk to a fixed-width feature, followed by mean and spread
/// heads. The spread is softplus(head) + 1e-6, strictly positive.
class DeviceEncoder {
 public:
  DeviceEncoder(nn::ParamStore& store, const EncoderConfig& cfg);

  /// x: (B, rows, cols) -> (mu, sigma), both (B, latent_dim).
  std::pair<Tensor, Tensor> forward(const Tensor& x);
  void backward(const Tensor& dmu, const Tensor& dsigma);

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  nn::Conv2D conv_;
  nn::Relu conv_relu_;
  nn::MaxPool2D pool_;
  nn::Flatten flatten_;
  nn::Dense fc_;
  nn::Relu fc_relu_;
  nn::Dense mu_head_;
  nn::Dense spread_head_;
  nn::Softplus softplus_;
};

/// Auxiliary classifier on one device's latent: dense latent -> 64 -> 6.
class LocalDecoder {
 public:
  LocalDecoder(nn::ParamStore& store, int latent_dim, int hidden = 64, int classes = 6);
  Tensor forward(const Tensor& z);
  Tensor backward(const Tensor& dlogits);
  int classes() const { return classes_; }

 private:
  nn::Dense fc1_;
  nn::Relu relu_;
  nn::Dense fc2_;
  int classes_;
};

/// Encoder plus local decoder with their parameter stores.
struct DeviceModel {
  EncoderConfig cfg;
  nn::ParamStore encoder_store;
  nn::ParamStore decoder_store;
  DeviceEncoder encoder;
  LocalDecoder decoder;

  DeviceModel(const EncoderConfig& config, std::uint64_t encoder_seed, std::uint64_t decoder_seed);
};

struct DeviceLossResult {
  double loss = 0.0;
  Tensor probs;  // (B, classes)
};

/// Monte Carlo device loss: mean cross-entropy of the local decoder on the
/// quantized latents, one fresh noise row per sample. Gradients flow through
/// the straight-through quantizer and the reparameterization into both
/// stores.
DeviceLossResult device_loss(DeviceModel& model, const Tensor& batch /*(B, rows, cols)*/,
                             std::span<const int> labels, const Tensor& noise /*(B, d)*/,
                             const QuantizerSpec& quant, bool with_grad = true);

struct EpochRow {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct DeviceTrainResult {
  std::vector<LatentVector> train_latents;  // final-encoder encodings, one per sample
  std::vector<EpochRow> curve;
};

/// Local training loop: per epoch, visit the shuffled dataset in minibatches,
/// sampling fresh noise for every sample visit, and update both stores after
/// each batch. Afterwards the trained encoder emits one sampled latent per
/// training sample for the one-shot upload.
DeviceTrainResult train_device(DeviceModel& model, const std::vector<Tensor>& samples,
                               std::span<const int> labels, const LinkBudget& budget,
                               const QuantizerSpec& quant, const nn::TrainConfig& cfg);

/// Deterministic encodings: z~ = mu (zero noise) when noise_rng is null,
/// otherwise sampled; quantized per spec.
std::vector<LatentVector> encode_latents(DeviceModel& model, const std::vector<Tensor>& samples,
                                         const QuantizerSpec& quant, Rng* noise_rng = nullptr);

/// Fraction of samples the local decoder classifies correctly (zero-noise
/// latents).
double local_decoder_accuracy(DeviceModel& model, const std::vector<Tensor>& samples,
                              std::span<const int> labels, const QuantizerSpec& quant);

}  // namespace ademi
