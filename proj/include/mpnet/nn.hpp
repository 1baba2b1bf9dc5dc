#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpnet/rng.hpp"
#include "mpnet/tensor.hpp"

namespace mp::nn {

// Learnable tensor paired with its gradient accumulator. lr_scale lets a
// parameter group train at a fraction of the step learning rate.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  T lr_scale = T(1);

  void init(std::string n, std::vector<int> shape) {
    name = std::move(n);
    value = Tensor<T>(shape);
    grad = Tensor<T>(std::move(shape));
  }
  void zero_grad() { grad.zero(); }
};

enum class Mode { train, infer };

void kaiming_fill(Tensor<float>& t, int fan_in, Rng& rng);
void kaiming_fill(Tensor<double>& t, int fan_in, Rng& rng);

// ---------------------------------------------------------------------------
// Conv2d: NHWC, stride 1, SAME zero padding (even kernels pad extra at the
// bottom/right). Output spatial size always equals input spatial size.
// ---------------------------------------------------------------------------
template <class T>
struct Conv2d {
  int kh = 0, kw = 0, in_c = 0, out_c = 0;
  Param<T> kernels;  // {kh, kw, in_c, out_c}
  Param<T> bias;     // {out_c}

  void configure(const std::string& name, int kh_, int kw_, int in_c_, int out_c_);
  void init_params(Rng& rng);
  std::vector<Param<T>*> params() { return {&kernels, &bias}; }

  Tensor<T> forward(const Tensor<T>& x);
  // Accumulates kernel/bias grads; returns grad w.r.t. the forward input.
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  void build_plan(int h, int w);

  // im2col gather plan: per (h*w, kh*kw) the source spatial index, -1 = padding.
  std::vector<std::int32_t> gather_;
  int plan_h = 0, plan_w = 0;
  // forward cache
  Tensor<T> cols_, dcols_;
  int cache_b = 0, cache_h = 0, cache_w = 0;
};

// ---------------------------------------------------------------------------
// Non-overlapping max pooling, stride = pool size, remainder rows/cols dropped.
// Gradient routes to the first maximum in window scan order.
// ---------------------------------------------------------------------------
template <class T>
struct MaxPool2d {
  int ph = 0, pw = 0;

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  std::vector<std::int32_t> argmax_;  // input spatial index per output element
  std::vector<int> in_shape_;
};

// ---------------------------------------------------------------------------
// Per-channel batch normalization over (B, H, W) of an NHWC tensor.
// ---------------------------------------------------------------------------
template <class T>
struct BatchNorm {
  Param<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  T momentum = T(0.1);  // running += momentum * (batch_stat - running)
  T epsilon = T(1e-5);

  void configure(const std::string& name, int channels);
  std::vector<Param<T>*> params() { return {&gamma, &beta}; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  Mode cache_mode_ = Mode::train;
};

// ---------------------------------------------------------------------------
// Dense (fully connected) layer on (B, in) tensors.
// ---------------------------------------------------------------------------
template <class T>
struct Dense {
  int in_w = 0, out_w = 0;
  Param<T> weight;  // {in, out}
  Param<T> bias;    // {out}

  void configure(const std::string& name, int in_w_, int out_w_);
  void init_params(Rng& rng);
  std::vector<Param<T>*> params() { return {&weight, &bias}; }

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  Tensor<T> x_;
};

template <class T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <class T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& y);

// (B, H, W, C) -> (B, H*W*C)
template <class T>
Tensor<T> flatten(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Losses. Both reject non-finite logits.
// ---------------------------------------------------------------------------

// Elementwise weighted binary cross-entropy on logits, numerically stable
// softplus form. Returns sum_i w_i * bce_i; grad_i = w_i * (sigmoid(z_i) - y_i).
// A zero weight contributes exactly zero loss and zero gradient.
template <class T>
T sigmoid_bce(const Tensor<T>& logits, const Tensor<T>& targets, const Tensor<T>& weights,
              Tensor<T>* grad);

// Row-wise softmax cross-entropy against one-hot targets, mean over rows.
template <class T>
T softmax_ce(const Tensor<T>& logits, const Tensor<T>& one_hot, Tensor<T>* grad);

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------
template <class T>
struct AdamState {
  T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
  long long t = 0;
  std::vector<Tensor<T>> m, v;  // parallel to the param list

  void reset() {
    t = 0;
    m.clear();
    v.clear();
  }
};

template <class T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& state, T lr);

// ---------------------------------------------------------------------------
// Learning-rate schedules.
// ---------------------------------------------------------------------------
struct LrSchedule {
  enum class Kind { constant, cyclic_triangular, cosine_warm_restarts };
  Kind kind = Kind::constant;
  // constant / cyclic
  double base_lr = 1e-4;
  double max_lr = 1e-3;
  long long step_size = 1;
  // warm restarts
  double lr_max = 1e-3;
  long long t0 = 1;
  double t_mult = 2.0;

  void validate() const;
};

double lr_at(const LrSchedule& s, long long step);

}  // namespace mp::nn
