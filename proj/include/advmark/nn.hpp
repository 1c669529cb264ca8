#pragma once

#include <memory>
#include <string>
#include <vector>

#include "advmark/rng.hpp"
#include "advmark/tensor.hpp"

namespace advmark::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Layers cache whatever their backward pass needs during forward and
// accumulate parameter gradients on backward. Single-writer semantics:
// one forward/backward pair in flight per layer instance.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<Param*>& out) {}
  virtual void init(Rng& rng) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int c_in, int c_out, int k, int stride, int pad);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  Param weight;  // (c_out, c_in*k*k)
  Param bias;    // (c_out)

 private:
  int c_in_, c_out_, k_, stride_, pad_;
  Tensor x_;
  std::vector<double> cols_;
};

// Stride-2 upsampler (transposed convolution). Kernel 4, pad 1 doubles the
// spatial dimensions exactly.
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(int c_in, int c_out, int k = 4, int stride = 2, int pad = 1);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  Param weight;  // (c_in, c_out*k*k)
  Param bias;    // (c_out)

 private:
  int c_in_, c_out_, k_, stride_, pad_;
  Tensor x_;
  std::vector<double> cols_;
};

// Per-sample, per-channel normalization. Batch-independent so that batch
// size 1 inference matches training statistics.
class InstanceNorm : public Layer {
 public:
  explicit InstanceNorm(int channels, double eps = 1e-5);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  Param gamma, beta;

 private:
  int channels_;
  double eps_;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<std::uint8_t> mask_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double slope_;
  std::vector<std::uint8_t> mask_;
};

class Tanh : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_;
};

class Linear : public Layer {
 public:
  Linear(int in, int out);
  Tensor forward(const Tensor& x) override;  // (N, in) -> (N, out)
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  Param weight;  // (out, in)
  Param bias;    // (out)

 private:
  int in_, out_;
  Tensor x_;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x) override;  // (N,C,H,W) -> (N,C)
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x) override;  // (N,...) -> (N, prod)
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  template <typename L, typename... Args>
  L* add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Channel-axis concatenation for multi-branch graphs.
Tensor concat_channels(const std::vector<const Tensor*>& parts);
std::vector<Tensor> split_channels(const Tensor& x, const std::vector<int>& widths);

void zero_grads(const std::vector<Param*>& params);

// Adaptive-moment stochastic gradient descent. One instance per training
// phase so the min-max roles do not share moment estimates.
class Adam {
 public:
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step();  // descend along stored gradients
  void zero_grad();

  // Moment state round-trips through checkpoints so a resumed run continues
  // the same trajectory.
  std::vector<std::pair<std::string, const Tensor*>> state_arrays() const;
  void load_state(const std::string& name, const Tensor& t);
  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace advmark::nn
