#include "ademi/server.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ademi/csi_synth.hpp"
#include "ademi/errors.hpp"
#include "ademi/tensor_io.hpp"

namespace ademi {
namespace {

int argmax_row(const Tensor& t, std::int64_t row) {
  int best = 0;
  for (std::int64_t c = 1; c < t.dim(1); ++c)
    if (t.at2(row, c) > t.at2(row, best)) best = static_cast<int>(c);
  return best;
}

}  // namespace

void MultiViewBatch::validate() const {
  if (per_device.empty()) throw DomainError("multi-view batch: no devices");
  const std::size_t events = labels.size();
  for (std::size_t k = 0; k < per_device.size(); ++k) {
    if (per_device[k].size() != events)
      throw DomainError("multi-view batch: device " + std::to_string(k) + " has " +
                        std::to_string(per_device[k].size()) + " events, expected " +
                        std::to_string(events));
    for (const auto& latent : per_device[k])
      if (latent.values.size() != per_device[k].front().values.size())
        throw DomainError("multi-view batch: inconsistent latent width on device " +
                          std::to_string(k));
  }
}

int MultiViewBatch::total_dim() const {
  int total = 0;
  for (const auto& dev : per_device) {
    if (dev.empty()) throw DomainError("multi-view batch: device with no events");
    total += static_cast<int>(dev.front().values.size());
  }
  return total;
}

std::vector<double> concat_latents(std::span<const DeviceLatent> views, int num_devices) {
  if (static_cast<int>(views.size()) != num_devices)
    throw DomainError("concat_latents: expected " + std::to_string(num_devices) +
                      " views, got " + std::to_string(views.size()));
  std::vector<const DeviceLatent*> by_id(static_cast<std::size_t>(num_devices), nullptr);
  for (const auto& view : views) {
    if (view.device_id < 0 || view.device_id >= num_devices)
      throw DomainError("concat_latents: device id out of range");
    if (by_id[static_cast<std::size_t>(view.device_id)])
      throw DomainError("concat_latents: duplicate device id " + std::to_string(view.device_id));
    by_id[static_cast<std::size_t>(view.device_id)] = &view;
  }
  std::vector<double> out;
  for (int k = 0; k < num_devices; ++k) {
    const auto values = dequantize(by_id[static_cast<std::size_t>(k)]->latent);
    out.insert(out.end(), values.begin(), values.end());
  }
  return out;
}

ServerDecoder::ServerDecoder(nn::ParamStore& store, int input_dim, int hidden, int classes)
    : fc1_(store, "server.fc1", input_dim, hidden),
      fc2_(store, "server.fc2", hidden, classes),
      input_dim_(input_dim),
      classes_(classes) {}

Tensor ServerDecoder::forward(const Tensor& z) {
  Tensor h = fc1_.forward(z);
  h = relu_.forward(h);
  return fc2_.forward(h);
}

Tensor ServerDecoder::backward(const Tensor& dlogits) {
  Tensor dh = fc2_.backward(dlogits);
  dh = relu_.backward(dh);
  return fc1_.backward(dh);
}

ServerModel::ServerModel(int input_dim, std::uint64_t seed)
    : store(seed), decoder(store, input_dim) {}

ServerLossResult server_loss(ServerModel& model, const Tensor& z_batch,
                             std::span<const int> labels, bool with_grad) {
  if (z_batch.dim(0) < 1) throw DomainError("server_loss: batch is empty");
  Tensor logits = model.decoder.forward(z_batch);
  nn::SoftmaxLoss loss = nn::softmax_cross_entropy(logits, labels);
  if (with_grad) model.decoder.backward(loss.dlogits);
  ServerLossResult out;
  out.loss = loss.loss;
  out.probs = std::move(loss.probs);
  return out;
}

std::vector<EpochRow> train_server(ServerModel& model, const MultiViewBatch& batch,
                                   const nn::TrainConfig& cfg) {
  cfg.validate();
  batch.validate();
  const int total_dim = batch.total_dim();
  if (total_dim != model.decoder.input_dim())
    throw DomainError("train_server: fused width " + std::to_string(total_dim) +
                      " does not match the decoder input " +
                      std::to_string(model.decoder.input_dim()));

  // Fuse once: (events, sum d_k) in device-id order.
  const std::size_t events = batch.labels.size();
  Tensor fused({static_cast<std::int64_t>(events), total_dim});
  for (std::size_t e = 0; e < events; ++e) {
    int offset = 0;
    for (const auto& dev : batch.per_device) {
      const auto values = dequantize(dev[e]);
      for (std::size_t i = 0; i < values.size(); ++i)
        fused.at2(static_cast<std::int64_t>(e), offset + static_cast<int>(i)) = values[i];
      offset += static_cast<int>(values.size());
    }
  }

  Rng shuffle_rng = Rng(cfg.seed).fork(1);
  nn::Optimizer opt(model.store, cfg);
  std::vector<std::size_t> order(events);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochRow> curve;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (std::size_t start = 0; start < events; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min(events - start, static_cast<std::size_t>(cfg.batch_size));
      Tensor z({static_cast<std::int64_t>(count), total_dim});
      std::vector<int> batch_labels(count);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t e = order[start + b];
        std::copy_n(fused.v.begin() + static_cast<std::ptrdiff_t>(e * total_dim), total_dim,
                    z.v.begin() + static_cast<std::ptrdiff_t>(b * total_dim));
        batch_labels[b] = batch.labels[e];
      }
      ServerLossResult r = server_loss(model, z, batch_labels, true);
      opt.step();
      loss_sum += r.loss * static_cast<double>(count);
      for (std::size_t b = 0; b < count; ++b)
        if (argmax_row(r.probs, static_cast<std::int64_t>(b)) == batch_labels[b]) ++correct;
    }
    curve.push_back({epoch, loss_sum / static_cast<double>(events),
                     static_cast<double>(correct) / static_cast<double>(events)});
  }
  return curve;
}

std::vector<double> predict(ServerModel& model, std::span<const DeviceLatent> views,
                            int num_devices) {
  const std::vector<double> fused = concat_latents(views, num_devices);
  if (static_cast<int>(fused.size()) != model.decoder.input_dim())
    throw DomainError("predict: fused width does not match the decoder input");
  Tensor z({1, static_cast<std::int64_t>(fused.size())});
  std::copy(fused.begin(), fused.end(), z.v.begin());
  Tensor logits = model.decoder.forward(z);
  double max_logit = logits.at2(0, 0);
  for (int c = 1; c < model.decoder.classes(); ++c)
    max_logit = std::max(max_logit, logits.at2(0, c));
  std::vector<double> probs(static_cast<std::size_t>(model.decoder.classes()));
  double denom = 0.0;
  for (int c = 0; c < model.decoder.classes(); ++c) {
    probs[static_cast<std::size_t>(c)] = std::exp(logits.at2(0, c) - max_logit);
    denom += probs[static_cast<std::size_t>(c)];
  }
  for (auto& p : probs) p /= denom;
  return probs;
}

// ---------------------------------------------------------------------------

SingleViewModel::SingleViewModel(const EncoderConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      store_(seed),
      conv_(store_, "trunk.conv", 1, cfg.conv_filters, cfg.conv_kernel, cfg.conv_stride),
      pool_(cfg.pool_window),
      fc_(store_, "trunk.fc", cfg.flattened_dim(), cfg.feature_dim),
      head1_(store_, "head.fc1", cfg.feature_dim, 64),
      head2_(store_, "head.fc2", 64, kNumClasses) {}

Tensor SingleViewModel::forward(const Tensor& x) {
  if (x.ndim() != 3) throw DomainError("single-view: input must be (B, rows, cols)");
  Tensor imgs = x;
  imgs.shape = {x.dim(0), 1, cfg_.input_rows, cfg_.input_cols};
  Tensor h = conv_.forward(imgs);
  h = conv_relu_.forward(h);
  h = pool_.forward(h);
  h = flatten_.forward(h);
  h = fc_.forward(h);
  h = fc_relu_.forward(h);
  h = head1_.forward(h);
  h = head_relu_.forward(h);
  return head2_.forward(h);
}

void SingleViewModel::backward(const Tensor& dlogits) {
  Tensor dh = head2_.backward(dlogits);
  dh = head_relu_.backward(dh);
  dh = head1_.backward(dh);
  dh = fc_relu_.backward(dh);
  dh = fc_.backward(dh);
  dh = flatten_.backward(dh);
  dh = pool_.backward(dh);
  dh = conv_relu_.backward(dh);
  conv_.backward(dh, /*need_input_grad=*/false);
}

MultiViewRawModel::Trunk::Trunk(nn::ParamStore& store, const std::string& prefix,
                                const EncoderConfig& cfg)
    : conv(store, prefix + ".conv", 1, cfg.conv_filters, cfg.conv_kernel, cfg.conv_stride),
      pool(cfg.pool_window),
      fc(store, prefix + ".fc", cfg.flattened_dim(), cfg.feature_dim) {}

MultiViewRawModel::MultiViewRawModel(const EncoderConfig& cfg, int num_views, std::uint64_t seed)
    : cfg_(cfg),
      num_views_(num_views),
      store_(seed),
      head1_(store_, "head.fc1", cfg.feature_dim * num_views, 64),
      head2_(store_, "head.fc2", 64, kNumClasses) {
  if (num_views < 1) throw DomainError("multi-view: need at least one view");
  trunks_.reserve(static_cast<std::size_t>(num_views));
  for (int k = 0; k < num_views; ++k)
    trunks_.emplace_back(store_, "trunk" + std::to_string(k), cfg);
}

Tensor MultiViewRawModel::forward(const std::vector<Tensor>& views) {
  if (static_cast<int>(views.size()) != num_views_)
    throw DomainError("multi-view: expected " + std::to_string(num_views_) + " views");
  const std::int64_t B = views.front().dim(0);
  Tensor fused({B, cfg_.feature_dim * num_views_});
  for (int k = 0; k < num_views_; ++k) {
    Tensor imgs = views[static_cast<std::size_t>(k)];
    imgs.shape = {B, 1, cfg_.input_rows, cfg_.input_cols};
    Trunk& trunk = trunks_[static_cast<std::size_t>(k)];
    Tensor h = trunk.conv.forward(imgs);
    h = trunk.conv_relu.forward(h);
    h = trunk.pool.forward(h);
    h = trunk.flatten.forward(h);
    h = trunk.fc.forward(h);
    h = trunk.fc_relu.forward(h);
    for (std::int64_t b = 0; b < B; ++b)
      std::copy_n(h.v.begin() + static_cast<std::ptrdiff_t>(b * cfg_.feature_dim),
                  cfg_.feature_dim,
                  fused.v.begin() +
                      static_cast<std::ptrdiff_t>(b * fused.dim(1) + k * cfg_.feature_dim));
  }
  Tensor h = head1_.forward(fused);
  h = head_relu_.forward(h);
  return head2_.forward(h);
}

void MultiViewRawModel::backward(const Tensor& dlogits) {
  Tensor dh = head2_.backward(dlogits);
  dh = head_relu_.backward(dh);
  Tensor dfused = head1_.backward(dh);
  const std::int64_t B = dfused.dim(0);
  for (int k = 0; k < num_views_; ++k) {
    Tensor dv({B, cfg_.feature_dim});
    for (std::int64_t b = 0; b < B; ++b)
      std::copy_n(dfused.v.begin() +
                      static_cast<std::ptrdiff_t>(b * dfused.dim(1) + k * cfg_.feature_dim),
                  cfg_.feature_dim, dv.v.begin() + static_cast<std::ptrdiff_t>(b * cfg_.feature_dim));
    Trunk& trunk = trunks_[static_cast<std::size_t>(k)];
    Tensor g = trunk.fc_relu.backward(dv);
    g = trunk.fc.backward(g);
    g = trunk.flatten.backward(g);
    g = trunk.pool.backward(g);
    g = trunk.conv_relu.backward(g);
    trunk.conv.backward(g, /*need_input_grad=*/false);
  }
}

namespace {

template <typename Forward, typename Backward>
BaselineTrainResult train_classifier(std::size_t n, std::span<const int> labels,
                                     nn::ParamStore& store, const nn::TrainConfig& cfg,
                                     Forward&& forward, Backward&& backward) {
  cfg.validate();
  if (n == 0) throw DomainError("baseline training: dataset is empty");
  Rng shuffle_rng = Rng(cfg.seed).fork(1);
  nn::Optimizer opt(store, cfg);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  BaselineTrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(n - start, static_cast<std::size_t>(cfg.batch_size));
      std::span<const std::size_t> idx(order.data() + start, count);
      std::vector<int> batch_labels(count);
      for (std::size_t b = 0; b < count; ++b) batch_labels[b] = labels[idx[b]];
      Tensor logits = forward(idx);
      nn::SoftmaxLoss loss = nn::softmax_cross_entropy(logits, batch_labels);
      backward(loss.dlogits);
      opt.step();
      loss_sum += loss.loss * static_cast<double>(count);
      for (std::size_t b = 0; b < count; ++b)
        if (argmax_row(loss.probs, static_cast<std::int64_t>(b)) == batch_labels[b]) ++correct;
    }
    result.curve.push_back({epoch, loss_sum / static_cast<double>(n),
                            static_cast<double>(correct) / static_cast<double>(n)});
  }
  return result;
}

Tensor gather_batch(const std::vector<Tensor>& samples, std::span<const std::size_t> idx) {
  const std::int64_t rows = samples.front().dim(0);
  const std::int64_t cols = samples.front().dim(1);
  Tensor batch({static_cast<std::int64_t>(idx.size()), rows, cols});
  for (std::size_t b = 0; b < idx.size(); ++b)
    std::copy(samples[idx[b]].v.begin(), samples[idx[b]].v.end(),
              batch.v.begin() + static_cast<std::ptrdiff_t>(b * rows * cols));
  return batch;
}

}  // namespace

BaselineTrainResult train_single_view(SingleViewModel& model, const std::vector<Tensor>& samples,
                                      std::span<const int> labels, const nn::TrainConfig& cfg) {
  if (samples.size() != labels.size())
    throw DomainError("train_single_view: labels do not match the dataset");
  return train_classifier(
      samples.size(), labels, model.store(), cfg,
      [&](std::span<const std::size_t> idx) { return model.forward(gather_batch(samples, idx)); },
      [&](const Tensor& dlogits) { model.backward(dlogits); });
}

BaselineTrainResult train_multi_view(MultiViewRawModel& model,
                                     const std::vector<std::vector<Tensor>>& per_view_samples,
                                     std::span<const int> labels, const nn::TrainConfig& cfg) {
  if (per_view_samples.empty()) throw DomainError("train_multi_view: no views");
  for (const auto& view : per_view_samples)
    if (view.size() != labels.size())
      throw DomainError("train_multi_view: labels do not match the dataset");
  return train_classifier(
      labels.size(), labels, model.store(), cfg,
      [&](std::span<const std::size_t> idx) {
        std::vector<Tensor> views;
        views.reserve(per_view_samples.size());
        for (const auto& view : per_view_samples) views.push_back(gather_batch(view, idx));
        return model.forward(views);
      },
      [&](const Tensor& dlogits) { model.backward(dlogits); });
}

double single_view_accuracy(SingleViewModel& model, const std::vector<Tensor>& samples,
                            std::span<const int> labels) {
  std::int64_t correct = 0;
  std::vector<std::size_t> idx(1);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    idx[0] = s;
    Tensor logits = model.forward(gather_batch(samples, idx));
    if (argmax_row(logits, 0) == labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double multi_view_accuracy(MultiViewRawModel& model,
                           const std::vector<std::vector<Tensor>>& per_view_samples,
                           std::span<const int> labels) {
  std::int64_t correct = 0;
  std::vector<std::size_t> idx(1);
  const std::size_t n = labels.size();
  for (std::size_t s = 0; s < n; ++s) {
    idx[0] = s;
    std::vector<Tensor> views;
    views.reserve(per_view_samples.size());
    for (const auto& view : per_view_samples) views.push_back(gather_batch(view, idx));
    Tensor logits = model.forward(views);
    if (argmax_row(logits, 0) == labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

void write_latent_files(const std::string& dir, int device_id,
                        const std::vector<LatentVector>& latents, std::uint64_t seed) {
  if (latents.empty()) throw DomainError("write_latent_files: no latents");
  const QuantizerSpec& spec = latents.front().spec;
  const std::int64_t d = static_cast<std::int64_t>(latents.front().values.size());
  Tensor values({static_cast<std::int64_t>(latents.size()), d});
  for (std::size_t e = 0; e < latents.size(); ++e) {
    if (static_cast<std::int64_t>(latents[e].values.size()) != d)
      throw DomainError("write_latent_files: inconsistent latent width");
    std::copy(latents[e].values.begin(), latents[e].values.end(),
              values.v.begin() + static_cast<std::ptrdiff_t>(e * static_cast<std::size_t>(d)));
  }
  const std::string stem = dir + "/latents_" + std::to_string(device_id);
  save_tensor(stem + ".bin", values);
  std::map<std::string, std::string> manifest;
  manifest["device_id"] = std::to_string(device_id);
  manifest["dim"] = std::to_string(d);
  manifest["bits_per_element"] = std::to_string(spec.bits);
  manifest["quantizer_clip"] = std::to_string(spec.clip);
  manifest["quantizer_mode"] = spec.passthrough() ? "passthrough" : "uniform";
  manifest["count"] = std::to_string(latents.size());
  manifest["seed"] = std::to_string(seed);
  save_manifest(stem + ".manifest", manifest);
}

std::vector<LatentVector> read_latent_files(const std::string& dir, int device_id,
                                            int* device_id_out) {
  const std::string stem = dir + "/latents_" + std::to_string(device_id);
  auto manifest = load_manifest(stem + ".manifest");
  QuantizerSpec spec;
  spec.bits = std::stoi(manifest.at("bits_per_element"));
  spec.clip = std::stod(manifest.at("quantizer_clip"));
  if (device_id_out) *device_id_out = std::stoi(manifest.at("device_id"));
  Tensor values = load_tensor_f64(stem + ".bin");
  if (values.ndim() != 2) throw ConfigError("latent tensor must be two-dimensional");
  std::vector<LatentVector> out(static_cast<std::size_t>(values.dim(0)));
  const std::int64_t d = values.dim(1);
  for (std::int64_t e = 0; e < values.dim(0); ++e) {
    out[static_cast<std::size_t>(e)].spec = spec;
    out[static_cast<std::size_t>(e)].values.assign(
        values.v.begin() + static_cast<std::ptrdiff_t>(e * d),
        values.v.begin() + static_cast<std::ptrdiff_t>((e + 1) * d));
  }
  return out;
}

void write_labels_file(const std::string& dir, std::span<const int> labels) {
  ITensor t({static_cast<std::int64_t>(labels.size())});
  for (std::size_t i = 0; i < labels.size(); ++i) t[static_cast<std::int64_t>(i)] = labels[i];
  save_tensor(dir + "/labels.bin", t);
}

std::vector<int> read_labels_file(const std::string& dir) {
  ITensor t = load_tensor_i64(dir + "/labels.bin");
  std::vector<int> labels(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(t[i]);
  return labels;
}

MultiViewBatch load_upload_dir(const std::string& dir, int num_devices) {
  MultiViewBatch batch;
  batch.labels = read_labels_file(dir);
  batch.per_device.resize(static_cast<std::size_t>(num_devices));
  for (int k = 0; k < num_devices; ++k) {
    int stored_id = -1;
    batch.per_device[static_cast<std::size_t>(k)] = read_latent_files(dir, k, &stored_id);
    if (stored_id != k)
      throw ConfigError("latent manifest device id mismatch for device " + std::to_string(k));
  }
  batch.validate();
  return batch;
}

}  // namespace ademi
