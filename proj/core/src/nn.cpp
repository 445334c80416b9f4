#include "ademi/nn.hpp"

#include <algorithm>
#include <cmath>

#include "ademi/errors.hpp"
#include "ademi/rng.hpp"

namespace ademi::nn {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
}

}  // namespace

ParamStore::ParamStore(std::uint64_t init_seed) : init_seed_(init_seed) {}

Tensor& ParamStore::create(const std::string& name, std::vector<std::int64_t> shape,
                           double bound) {
  if (index_.count(name)) throw DomainError("parameter already exists: " + name);
  Tensor t(shape);
  if (bound != 0.0) {
    Rng rng = Rng(init_seed_).fork(fnv1a(name));
    for (auto& x : t.v) x = rng.uniform(-bound, bound);
  }
  index_[name] = params_.size();
  order_.push_back(name);
  params_.push_back(std::move(t));
  grads_.emplace_back(shape);
  return params_.back();
}

Tensor& ParamStore::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter: " + name);
  return params_[it->second];
}

const Tensor& ParamStore::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter: " + name);
  return params_[it->second];
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter: " + name);
  return grads_[it->second];
}

const Tensor& ParamStore::grad(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter: " + name);
  return grads_[it->second];
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

void ParamStore::zero_grads() {
  for (auto& g : grads_) g.fill(0.0);
}

std::int64_t ParamStore::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

NamedTensors ParamStore::to_named() const {
  NamedTensors out;
  out.meta["init_seed"] = std::to_string(init_seed_);
  for (std::size_t i = 0; i < order_.size(); ++i) out.tensors.emplace_back(order_[i], params_[i]);
  return out;
}

void ParamStore::load_named(const NamedTensors& bundle) {
  for (const auto& [name, tensor] : bundle.tensors) {
    Tensor& p = param(name);
    if (!p.same_shape(tensor))
      throw ConfigError("checkpoint shape mismatch for " + name + ": stored " +
                        shape_string(tensor.shape) + ", model " + shape_string(p.shape));
    p = tensor;
  }
}

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw ConfigError("train: learning rate must be positive");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
}

Optimizer::Optimizer(ParamStore& store, const TrainConfig& cfg) : store_(store), cfg_(cfg) {
  cfg_.validate();
  if (cfg_.method == TrainConfig::Method::kAdam) {
    for (const auto& name : store_.names()) {
      m_.emplace_back(store_.param(name).shape);
      v_.emplace_back(store_.param(name).shape);
    }
  }
}

void Optimizer::step() {
  ++t_;
  const auto& names = store_.names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    Tensor& p = store_.param(names[i]);
    Tensor& g = store_.grad(names[i]);
    if (cfg_.method == TrainConfig::Method::kSgd) {
      for (std::int64_t j = 0; j < p.size(); ++j) p[j] -= cfg_.learning_rate * g[j];
    } else {
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      const double b1 = cfg_.adam_beta1;
      const double b2 = cfg_.adam_beta2;
      const double bc1 = 1.0 - std::pow(b1, t_);
      const double bc2 = 1.0 - std::pow(b2, t_);
      for (std::int64_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
        p[j] -= cfg_.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.adam_eps);
      }
    }
    for (std::int64_t j = 0; j < p.size(); ++j)
      if (!std::isfinite(p[j])) throw NumericalError("non-finite update in " + names[i]);
    g.fill(0.0);
  }
}

// ---------------------------------------------------------------------------

Dense::Dense(ParamStore& store, std::string prefix, int in, int out, bool zero_init)
    : store_(&store), w_name_(prefix + ".weight"), b_name_(prefix + ".bias"), in_(in), out_(out) {
  store.create(w_name_, {out, in}, zero_init ? 0.0 : glorot_bound(in, out));
  store.create(b_name_, {out}, 0.0);
}

Tensor Dense::forward(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != in_)
    throw DomainError("dense: input shape " + shape_string(x.shape) + " does not match in=" +
                      std::to_string(in_));
  x_ = x;
  const std::int64_t B = x.dim(0);
  const Tensor& w = store_->param(w_name_);
  const Tensor& b = store_->param(b_name_);
  Tensor y({B, out_});
#pragma omp parallel for schedule(static)
  for (std::int64_t bi = 0; bi < B; ++bi) {
    const double* xr = &x.v[static_cast<std::size_t>(bi * in_)];
    double* yr = &y.v[static_cast<std::size_t>(bi * out_)];
    for (int o = 0; o < out_; ++o) {
      const double* wr = &w.v[static_cast<std::size_t>(o) * in_];
      double acc = b[o];
      for (int i = 0; i < in_; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

Tensor Dense::backward(const Tensor& grad_out, bool need_input_grad) {
  const std::int64_t B = x_.dim(0);
  if (grad_out.ndim() != 2 || grad_out.dim(0) != B || grad_out.dim(1) != out_)
    throw DomainError("dense: bad gradient shape " + shape_string(grad_out.shape));
  Tensor& dw = store_->grad(w_name_);
  Tensor& db = store_->grad(b_name_);
  const Tensor& w = store_->param(w_name_);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_; ++o) {
    double* dwr = &dw.v[static_cast<std::size_t>(o) * in_];
    double dbo = 0.0;
    for (std::int64_t bi = 0; bi < B; ++bi) {
      const double g = grad_out.at2(bi, o);
      dbo += g;
      const double* xr = &x_.v[static_cast<std::size_t>(bi * in_)];
      for (int i = 0; i < in_; ++i) dwr[i] += g * xr[i];
    }
    db[o] += dbo;
  }
  Tensor dx;
  if (need_input_grad) {
    dx = Tensor({B, in_});
#pragma omp parallel for schedule(static)
    for (std::int64_t bi = 0; bi < B; ++bi) {
      double* dxr = &dx.v[static_cast<std::size_t>(bi * in_)];
      for (int o = 0; o < out_; ++o) {
        const double g = grad_out.at2(bi, o);
        const double* wr = &w.v[static_cast<std::size_t>(o) * in_];
        for (int i = 0; i < in_; ++i) dxr[i] += g * wr[i];
      }
    }
  }
  return dx;
}

Conv2D::Conv2D(ParamStore& store, std::string prefix, int in_channels, int out_channels,
               int kernel, int stride)
    : store_(&store),
      w_name_(prefix + ".weight"),
      b_name_(prefix + ".bias"),
      in_ch_(in_channels),
      out_ch_(out_channels),
      kernel_(kernel),
      stride_(stride) {
  if (kernel < 1 || stride < 1) throw DomainError("conv2d: kernel and stride must be positive");
  const int fan_in = in_channels * kernel * kernel;
  const int fan_out = out_channels * kernel * kernel;
  store.create(w_name_, {out_channels, in_channels, kernel, kernel},
               glorot_bound(fan_in, fan_out));
  store.create(b_name_, {out_channels}, 0.0);
}

std::pair<int, int> Conv2D::output_hw(int h, int w, int kernel, int stride) {
  if (h < kernel || w < kernel) throw DomainError("conv2d: input smaller than the kernel");
  return {(h - kernel) / stride + 1, (w - kernel) / stride + 1};
}

Tensor Conv2D::forward(const Tensor& x) {
  if (x.ndim() != 4 || x.dim(1) != in_ch_)
    throw DomainError("conv2d: input shape " + shape_string(x.shape) + " does not match channels=" +
                      std::to_string(in_ch_));
  x_ = x;
  const std::int64_t B = x.dim(0);
  const std::int64_t H = x.dim(2);
  const std::int64_t W = x.dim(3);
  auto [ho, wo] = output_hw(static_cast<int>(H), static_cast<int>(W), kernel_, stride_);
  const Tensor& weight = store_->param(w_name_);
  const Tensor& bias = store_->param(b_name_);
  Tensor y({B, out_ch_, ho, wo});
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t bi = 0; bi < B; ++bi) {
    for (int f = 0; f < out_ch_; ++f) {
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          double acc = bias[f];
          for (int c = 0; c < in_ch_; ++c) {
            for (int kh = 0; kh < kernel_; ++kh) {
              const double* xr = &x.v[static_cast<std::size_t>(
                  ((bi * in_ch_ + c) * H + i * stride_ + kh) * W + j * stride_)];
              const double* wr =
                  &weight.v[static_cast<std::size_t>(((f * in_ch_ + c) * kernel_ + kh) * kernel_)];
              for (int kw = 0; kw < kernel_; ++kw) acc += wr[kw] * xr[kw];
            }
          }
          y.at4(bi, f, i, j) = acc;
        }
      }
    }
  }
  return y;
}

Tensor Conv2D::backward(const Tensor& grad_out, bool need_input_grad) {
  const std::int64_t B = x_.dim(0);
  const std::int64_t H = x_.dim(2);
  const std::int64_t W = x_.dim(3);
  auto [ho, wo] = output_hw(static_cast<int>(H), static_cast<int>(W), kernel_, stride_);
  if (grad_out.ndim() != 4 || grad_out.dim(0) != B || grad_out.dim(1) != out_ch_ ||
      grad_out.dim(2) != ho || grad_out.dim(3) != wo)
    throw DomainError("conv2d: bad gradient shape " + shape_string(grad_out.shape));
  Tensor& dw = store_->grad(w_name_);
  Tensor& db = store_->grad(b_name_);
  const Tensor& weight = store_->param(w_name_);
#pragma omp parallel for schedule(static)
  for (int f = 0; f < out_ch_; ++f) {
    double dbf = 0.0;
    for (std::int64_t bi = 0; bi < B; ++bi) {
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          const double g = grad_out.at4(bi, f, i, j);
          dbf += g;
          for (int c = 0; c < in_ch_; ++c) {
            for (int kh = 0; kh < kernel_; ++kh) {
              const double* xr = &x_.v[static_cast<std::size_t>(
                  ((bi * in_ch_ + c) * H + i * stride_ + kh) * W + j * stride_)];
              double* dwr =
                  &dw.v[static_cast<std::size_t>(((f * in_ch_ + c) * kernel_ + kh) * kernel_)];
              for (int kw = 0; kw < kernel_; ++kw) dwr[kw] += g * xr[kw];
            }
          }
        }
      }
    }
    db[f] += dbf;
  }
  Tensor dx;
  if (need_input_grad) {
    dx = Tensor(x_.shape);
#pragma omp parallel for schedule(static)
    for (std::int64_t bi = 0; bi < B; ++bi) {
      for (int f = 0; f < out_ch_; ++f) {
        for (int i = 0; i < ho; ++i) {
          for (int j = 0; j < wo; ++j) {
            const double g = grad_out.at4(bi, f, i, j);
            for (int c = 0; c < in_ch_; ++c) {
              for (int kh = 0; kh < kernel_; ++kh) {
                double* dxr = &dx.v[static_cast<std::size_t>(
                    ((bi * in_ch_ + c) * H + i * stride_ + kh) * W + j * stride_)];
                const double* wr = &weight.v[static_cast<std::size_t>(
                    ((f * in_ch_ + c) * kernel_ + kh) * kernel_)];
                for (int kw = 0; kw < kernel_; ++kw) dxr[kw] += g * wr[kw];
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

MaxPool2D::MaxPool2D(int window) : window_(window) {
  if (window < 1) throw DomainError("maxpool2d: window must be positive");
}

Tensor MaxPool2D::forward(const Tensor& x) {
  if (x.ndim() != 4) throw DomainError("maxpool2d: input must be (B, C, H, W)");
  in_shape_ = x.shape;
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t ho = H / window_;
  const std::int64_t wo = W / window_;
  if (ho < 1 || wo < 1) throw DomainError("maxpool2d: input smaller than the window");
  Tensor y({B, C, ho, wo});
  argmax_.assign(static_cast<std::size_t>(y.size()), 0);
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const double* xp = &x.v[static_cast<std::size_t>(bc * H * W)];
    for (std::int64_t i = 0; i < ho; ++i) {
      for (std::int64_t j = 0; j < wo; ++j) {
        std::int64_t best = (i * window_) * W + j * window_;
        double best_val = xp[best];
        for (int di = 0; di < window_; ++di) {
          for (int dj = 0; dj < window_; ++dj) {
            std::int64_t idx = (i * window_ + di) * W + (j * window_ + dj);
            if (xp[idx] > best_val) {
              best_val = xp[idx];
              best = idx;
            }
          }
        }
        std::int64_t out_idx = (bc * ho + i) * wo + j;
        y[out_idx] = best_val;
        argmax_[static_cast<std::size_t>(out_idx)] = bc * H * W + best;
      }
    }
  }
  return y;
}

Tensor MaxPool2D::backward(const Tensor& grad_out) {
  if (static_cast<std::size_t>(grad_out.size()) != argmax_.size())
    throw DomainError("maxpool2d: gradient does not match the last forward");
  Tensor dx(in_shape_);
  for (std::int64_t i = 0; i < grad_out.size(); ++i)
    dx[argmax_[static_cast<std::size_t>(i)]] += grad_out[i];
  return dx;
}

Tensor Relu::forward(const Tensor& x) {
  Tensor y = x;
  mask_.assign(static_cast<std::size_t>(x.size()), 0);
  for (std::int64_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0)
      mask_[static_cast<std::size_t>(i)] = 1;
    else
      y[i] = 0.0;
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) {
  if (static_cast<std::size_t>(grad_out.size()) != mask_.size())
    throw DomainError("relu: gradient does not match the last forward");
  Tensor dx = grad_out;
  for (std::int64_t i = 0; i < dx.size(); ++i)
    if (!mask_[static_cast<std::size_t>(i)]) dx[i] = 0.0;
  return dx;
}

Tensor Softplus::forward(const Tensor& x) {
  x_ = x;
  Tensor y = x;
  for (auto& v : y.v) v = v > 30.0 ? v : std::log1p(std::exp(v));
  return y;
}

Tensor Softplus::backward(const Tensor& grad_out) {
  if (!grad_out.same_shape(x_)) throw DomainError("softplus: gradient shape mismatch");
  Tensor dx = grad_out;
  for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 / (1.0 + std::exp(-x_[i]));
  return dx;
}

Tensor Flatten::forward(const Tensor& x) {
  if (x.ndim() < 2) throw DomainError("flatten: input must have a batch dimension");
  in_shape_ = x.shape;
  Tensor y = x;
  std::int64_t rest = 1;
  for (int i = 1; i < x.ndim(); ++i) rest *= x.dim(i);
  y.shape = {x.dim(0), rest};
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  dx.shape = in_shape_;
  return dx;
}

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.ndim() != 2) throw DomainError("softmax_cross_entropy: logits must be (B, classes)");
  const std::int64_t B = logits.dim(0);
  const std::int64_t C = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != B)
    throw DomainError("softmax_cross_entropy: label count does not match the batch");
  SoftmaxLoss out;
  out.dlogits = Tensor({B, C});
  out.probs = Tensor({B, C});
  double total = 0.0;
  for (std::int64_t b = 0; b < B; ++b) {
    const int label = labels[static_cast<std::size_t>(b)];
    if (label < 0 || label >= C)
      throw DomainError("softmax_cross_entropy: label out of range: " + std::to_string(label));
    double max_logit = logits.at2(b, 0);
    for (std::int64_t c = 1; c < C; ++c) max_logit = std::max(max_logit, logits.at2(b, c));
    double denom = 0.0;
    for (std::int64_t c = 0; c < C; ++c) denom += std::exp(logits.at2(b, c) - max_logit);
    const double log_denom = std::log(denom);
    total += log_denom - (logits.at2(b, label) - max_logit);
    for (std::int64_t c = 0; c < C; ++c) {
      double p = std::exp(logits.at2(b, c) - max_logit) / denom;
      out.probs.at2(b, c) = p;
      out.dlogits.at2(b, c) = (p - (c == label ? 1.0 : 0.0)) / static_cast<double>(B);
    }
  }
  out.loss = total / static_cast<double>(B);
  if (!std::isfinite(out.loss)) throw NumericalError("softmax_cross_entropy: non-finite loss");
  return out;
}

GradCheckReport grad_check(ParamStore& store, const std::function<double(bool)>& loss_fn,
                           double step, double abs_floor) {
  store.zero_grads();
  loss_fn(true);
  std::vector<Tensor> analytic;
  for (const auto& name : store.names()) analytic.push_back(store.grad(name));

  GradCheckReport report;
  const auto& names = store.names();
  for (std::size_t ti = 0; ti < names.size(); ++ti) {
    Tensor& p = store.param(names[ti]);
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + step;
      const double up = loss_fn(false);
      p[i] = orig - step;
      const double down = loss_fn(false);
      p[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[ti][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = names[ti] + "[" + std::to_string(i) + "]";
      }
    }
  }
  store.zero_grads();
  return report;
}

}  // namespace ademi::nn
