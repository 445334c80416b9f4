#include "ademi/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ademi/errors.hpp"

namespace ademi {
namespace {

constexpr double kSpreadFloor = 1e-6;

Tensor stack_batch(const std::vector<Tensor>& samples, std::span<const std::size_t> idx, int rows,
                   int cols) {
  Tensor batch({static_cast<std::int64_t>(idx.size()), rows, cols});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor& s = samples[idx[b]];
    if (s.ndim() != 2 || s.dim(0) != rows || s.dim(1) != cols)
      throw DomainError("sample shape " + shape_string(s.shape) + " does not match encoder input");
    std::copy(s.v.begin(), s.v.end(),
              batch.v.begin() + static_cast<std::ptrdiff_t>(b * s.v.size()));
  }
  return batch;
}

}  // namespace

void QuantizerSpec::validate() const {
  if (bits < 1) throw DomainError("quantizer: bits must be >= 1");
  if (!(clip > 0.0)) throw DomainError("quantizer: clip must be positive");
}

LatentVector quantize(std::span<const double> z, const QuantizerSpec& spec) {
  spec.validate();
  LatentVector out;
  out.spec = spec;
  out.values.resize(z.size());
  if (spec.passthrough()) {
    std::copy(z.begin(), z.end(), out.values.begin());
    return out;
  }
  const double c = spec.clip;
  const double delta = spec.step();
  out.indices.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double clamped = std::clamp(z[i], -c, c - 1e-12);
    const std::int64_t index = static_cast<std::int64_t>(std::floor((clamped + c) / delta));
    out.indices[i] = std::clamp<std::int64_t>(index, 0, spec.levels() - 1);
    out.values[i] = -c + (static_cast<double>(out.indices[i]) + 0.5) * delta;
  }
  return out;
}

std::vector<double> dequantize(const LatentVector& latent) { return latent.values; }

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> eps) {
  if (mu.size() != sigma.size() || mu.size() != eps.size())
    throw DomainError("reparameterize: mu, sigma and eps must have equal length");
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + sigma[i] * eps[i];
  return z;
}

void EncoderConfig::validate() const {
  if (input_rows < conv_kernel || input_cols < conv_kernel)
    throw DomainError("encoder: input smaller than the convolution kernel");
  if (conv_filters < 1 || conv_kernel < 1 || conv_stride < 1 || pool_window < 1)
    throw DomainError("encoder: convolution parameters must be positive");
  if (feature_dim < 1) throw DomainError("encoder: feature width must be positive");
  if (latent_dim < 1) throw DomainError("encoder: latent width must be positive");
  if (flattened_dim() < 1) throw DomainError("encoder: input collapses to nothing");
}

int EncoderConfig::flattened_dim() const {
  auto [ho, wo] = nn::Conv2D::output_hw(input_rows, input_cols, conv_kernel, conv_stride);
  const int ph = ho / pool_window;
  const int pw = wo / pool_window;
  return conv_filters * ph * pw;
}

DeviceEncoder::DeviceEncoder(nn::ParamStore& store, const EncoderConfig& cfg)
    : cfg_(cfg),
      conv_(store, "trunk.conv", 1, cfg.conv_filters, cfg.conv_kernel, cfg.conv_stride),
      pool_(cfg.pool_window),
      fc_(store, "trunk.fc", cfg.flattened_dim(), cfg.feature_dim),
      mu_head_(store, "head.mu", cfg.feature_dim, cfg.latent_dim),
      spread_head_(store, "head.spread", cfg.feature_dim, cfg.latent_dim) {
  cfg_.validate();
}

std::pair<Tensor, Tensor> DeviceEncoder::forward(const Tensor& x) {
  if (x.ndim() != 3 || x.dim(1) != cfg_.input_rows || x.dim(2) != cfg_.input_cols)
    throw DomainError("encoder: input shape " + shape_string(x.shape) + " does not match config");
  Tensor imgs = x;
  imgs.shape = {x.dim(0), 1, cfg_.input_rows, cfg_.input_cols};
  Tensor h = conv_.forward(imgs);
  h = conv_relu_.forward(h);
  h = pool_.forward(h);
  h = flatten_.forward(h);
  h = fc_.forward(h);
  h = fc_relu_.forward(h);
  Tensor mu = mu_head_.forward(h);
  Tensor spread = softplus_.forward(spread_head_.forward(h));
  for (auto& s : spread.v) s += kSpreadFloor;
  return {std::move(mu), std::move(spread)};
}

void DeviceEncoder::backward(const Tensor& dmu, const Tensor& dsigma) {
  Tensor dh = mu_head_.backward(dmu);
  Tensor dh2 = spread_head_.backward(softplus_.backward(dsigma));
  for (std::int64_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
  dh = fc_relu_.backward(dh);
  dh = fc_.backward(dh);
  dh = flatten_.backward(dh);
  dh = pool_.backward(dh);
  dh = conv_relu_.backward(dh);
  conv_.backward(dh, /*need_input_grad=*/false);
}

LocalDecoder::LocalDecoder(nn::ParamStore& store, int latent_dim, int hidden, int classes)
    : fc1_(store, "dec.fc1", latent_dim, hidden),
      fc2_(store, "dec.fc2", hidden, classes),
      classes_(classes) {}

Tensor LocalDecoder::forward(const Tensor& z) {
  Tensor h = fc1_.forward(z);
  h = relu_.forward(h);
  return fc2_.forward(h);
}

Tensor LocalDecoder::backward(const Tensor& dlogits) {
  Tensor dh = fc2_.backward(dlogits);
  dh = relu_.backward(dh);
  return fc1_.backward(dh);
}

DeviceModel::DeviceModel(const EncoderConfig& config, std::uint64_t encoder_seed,
                         std::uint64_t decoder_seed)
    : cfg(config),
      encoder_store(encoder_seed),
      decoder_store(decoder_seed),
      encoder(encoder_store, config),
      decoder(decoder_store, config.latent_dim) {}

DeviceLossResult device_loss(DeviceModel& model, const Tensor& batch, std::span<const int> labels,
                             const Tensor& noise, const QuantizerSpec& quant, bool with_grad) {
  const std::int64_t B = batch.dim(0);
  const int d = model.cfg.latent_dim;
  if (B < 1) throw DomainError("device_loss: batch is empty");
  if (noise.ndim() != 2 || noise.dim(0) != B || noise.dim(1) != d)
    throw DomainError("device_loss: noise must be (batch, latent_dim)");

  auto [mu, sigma] = model.encoder.forward(batch);

  Tensor z({B, d});
  // Straight-through mask: identity inside the clip range, zero outside.
  // Pass-through mode never clips, so the mask is all ones there.
  std::vector<char> ste(static_cast<std::size_t>(B * d), 1);
  std::vector<double> row(static_cast<std::size_t>(d));
  for (std::int64_t b = 0; b < B; ++b) {
    for (int i = 0; i < d; ++i)
      row[static_cast<std::size_t>(i)] = mu.at2(b, i) + sigma.at2(b, i) * noise.at2(b, i);
    LatentVector latent = quantize(row, quant);
    for (int i = 0; i < d; ++i) {
      z.at2(b, i) = latent.values[static_cast<std::size_t>(i)];
      if (!quant.passthrough() &&
          (row[static_cast<std::size_t>(i)] < -quant.clip ||
           row[static_cast<std::size_t>(i)] > quant.clip))
        ste[static_cast<std::size_t>(b * d + i)] = 0;
    }
  }

  Tensor logits = model.decoder.forward(z);
  nn::SoftmaxLoss loss = nn::softmax_cross_entropy(logits, labels);

  if (with_grad) {
    Tensor dz = model.decoder.backward(loss.dlogits);
    Tensor dmu({B, d});
    Tensor dsigma({B, d});
    for (std::int64_t i = 0; i < dz.size(); ++i) {
      const double g = ste[static_cast<std::size_t>(i)] ? dz[i] : 0.0;
      dmu[i] = g;
      dsigma[i] = g * noise[i];
    }
    model.encoder.backward(dmu, dsigma);
  }

  DeviceLossResult out;
  out.loss = loss.loss;
  out.probs = std::move(loss.probs);
  return out;
}

DeviceTrainResult train_device(DeviceModel& model, const std::vector<Tensor>& samples,
                               std::span<const int> labels, const LinkBudget& budget,
                               const QuantizerSpec& quant, const nn::TrainConfig& cfg) {
  cfg.validate();
  quant.validate();
  if (samples.empty()) throw DomainError("train_device: dataset is empty");
  if (samples.size() != labels.size())
    throw DomainError("train_device: labels do not match the dataset");
  if (budget.dim != model.cfg.latent_dim)
    throw DomainError("train_device: channel dimension " + std::to_string(budget.dim) +
                      " does not match the encoder latent width " +
                      std::to_string(model.cfg.latent_dim));

  Rng rng(cfg.seed);
  Rng shuffle_rng = rng.fork(1);
  Rng noise_rng = rng.fork(2);

  nn::Optimizer enc_opt(model.encoder_store, cfg);
  nn::Optimizer dec_opt(model.decoder_store, cfg);

  const int rows = model.cfg.input_rows;
  const int cols = model.cfg.input_cols;
  const int d = model.cfg.latent_dim;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  DeviceTrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t seen = 0;
    std::int64_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(order.size() - start,
                                         static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> idx(order.data() + start, count);
      Tensor batch = stack_batch(samples, idx, rows, cols);
      std::vector<int> batch_labels(count);
      for (std::size_t b = 0; b < count; ++b) batch_labels[b] = labels[idx[b]];

      Tensor noise({static_cast<std::int64_t>(count), d});
      for (auto& n : noise.v) n = noise_rng.normal();

      DeviceLossResult r = device_loss(model, batch, batch_labels, noise, quant, true);
      enc_opt.step();
      dec_opt.step();

      loss_sum += r.loss * static_cast<double>(count);
      seen += static_cast<std::int64_t>(count);
      for (std::size_t b = 0; b < count; ++b) {
        int best = 0;
        for (int c = 1; c < model.decoder.classes(); ++c)
          if (r.probs.at2(static_cast<std::int64_t>(b), c) >
              r.probs.at2(static_cast<std::int64_t>(b), best))
            best = c;
        if (best == batch_labels[b]) ++correct;
      }
    }
    result.curve.push_back({epoch, loss_sum / static_cast<double>(seen),
                            static_cast<double>(correct) / static_cast<double>(seen)});
  }

  // One-shot upload payload: one sampled encoding per training sample from
  // the final encoder.
  Rng upload_rng = rng.fork(3);
  result.train_latents = encode_latents(model, samples, quant, &upload_rng);
  return result;
}

std::vector<LatentVector> encode_latents(DeviceModel& model, const std::vector<Tensor>& samples,
                                         const QuantizerSpec& quant, Rng* noise_rng) {
  const int rows = model.cfg.input_rows;
  const int cols = model.cfg.input_cols;
  const int d = model.cfg.latent_dim;
  std::vector<LatentVector> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  constexpr std::size_t kChunk = 64;
  std::vector<double> row(static_cast<std::size_t>(d));
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t count = std::min(samples.size() - start, kChunk);
    Tensor batch = stack_batch(samples, {idx.data() + start, count}, rows, cols);
    auto [mu, sigma] = model.encoder.forward(batch);
    for (std::size_t b = 0; b < count; ++b) {
      for (int i = 0; i < d; ++i) {
        const double eps = noise_rng ? noise_rng->normal() : 0.0;
        row[static_cast<std::size_t>(i)] =
            mu.at2(static_cast<std::int64_t>(b), i) +
            sigma.at2(static_cast<std::int64_t>(b), i) * eps;
      }
      out.push_back(quantize(row, quant));
    }
  }
  return out;
}

double local_decoder_accuracy(DeviceModel& model, const std::vector<Tensor>& samples,
                              std::span<const int> labels, const QuantizerSpec& quant) {
  if (samples.size() != labels.size())
    throw DomainError("local_decoder_accuracy: labels do not match the dataset");
  auto latents = encode_latents(model, samples, quant, nullptr);
  const int d = model.cfg.latent_dim;
  std::int64_t correct = 0;
  Tensor z({1, d});
  for (std::size_t s = 0; s < latents.size(); ++s) {
    const auto values = dequantize(latents[s]);
    std::copy(values.begin(), values.end(), z.v.begin());
    Tensor logits = model.decoder.forward(z);
    int best = 0;
    for (int c = 1; c < model.decoder.classes(); ++c)
      if (logits.at2(0, c) > logits.at2(0, best)) best = c;
    if (best == labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace ademi
