#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ademi/tensor.hpp"
#include "ademi/tensor_io.hpp"

namespace ademi::nn {

/// Named parameters with matching gradient buffers. Initialization of each
/// tensor is seeded by (init_seed, name), so a store's contents do not depend
/// on creation order. double precision throughout.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t init_seed);

  /// Uniform init in [-bound, bound]; bound 0 gives zeros.
  Tensor& create(const std::string& name, std::vector<std::int64_t> shape, double bound);

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::uint64_t init_seed() const { return init_seed_; }

  void zero_grads();
  std::int64_t parameter_count() const;

  NamedTensors to_named() const;
  void load_named(const NamedTensors& bundle);

 private:
  std::uint64_t init_seed_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Tensor> params_;
  std::vector<Tensor> grads_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 64;
  enum class Method { kSgd, kAdam } method = Method::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// SGD or Adam over every tensor of one store. step() applies the update in
/// creation order, verifies finiteness, and zeroes the gradients.
class Optimizer {
 public:
  Optimizer(ParamStore& store, const TrainConfig& cfg);
  void step();
  int steps_taken() const { return t_; }

 private:
  ParamStore& store_;
  TrainConfig cfg_;
  int t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// ---------------------------------------------------------------------------
// Layers. Batched row-major tensors; each instance caches what its backward
// pass needs, so one forward/backward pair may be in flight per instance.
// backward() accumulates parameter gradients and returns the input gradient.

class Dense {
 public:
  Dense(ParamStore& store, std::string prefix, int in, int out, bool zero_init = false);
  Tensor forward(const Tensor& x);  // (B, in) -> (B, out)
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  int input_dim() const { return in_; }
  int output_dim() const { return out_; }

 private:
  ParamStore* store_;
  std::string w_name_, b_name_;
  int in_, out_;
  Tensor x_;
};

class Conv2D {
 public:
  Conv2D(ParamStore& store, std::string prefix, int in_channels, int out_channels, int kernel,
         int stride);
  Tensor forward(const Tensor& x);  // (B, C, H, W) -> (B, F, Ho, Wo)
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  static std::pair<int, int> output_hw(int h, int w, int kernel, int stride);

 private:
  ParamStore* store_;
  std::string w_name_, b_name_;
  int in_ch_, out_ch_, kernel_, stride_;
  Tensor x_;
};

class MaxPool2D {
 public:
  explicit MaxPool2D(int window);
  Tensor forward(const Tensor& x);  // (B, C, H, W) -> (B, C, H/w, W/w)
  Tensor backward(const Tensor& grad_out);

 private:
  int window_;
  std::vector<std::int64_t> in_shape_;
  std::vector<std::int64_t> argmax_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  std::vector<char> mask_;
};

class Softplus {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  Tensor x_;
};

class Flatten {
 public:
  Tensor forward(const Tensor& x);  // (B, ...) -> (B, prod)
  Tensor backward(const Tensor& grad_out);

 private:
  std::vector<std::int64_t> in_shape_;
};

// ---------------------------------------------------------------------------

struct SoftmaxLoss {
  double loss = 0.0;   // mean over the batch
  Tensor dlogits;      // (softmax - onehot) / batch
  Tensor probs;        // (B, classes)
};

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Compares the analytic gradient in `store` (filled by loss_fn(true))
/// against central differences of loss_fn(false) for every parameter entry.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  bool ok(double tol) const { return max_rel_error <= tol; }
};

GradCheckReport grad_check(ParamStore& store, const std::function<double(bool)>& loss_fn,
                           double step = 1e-5, double abs_floor = 1e-6);

}  // namespace ademi::nn
