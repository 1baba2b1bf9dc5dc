#include "mpnet/nn.hpp"

#include <cmath>
#include <cstring>

#include "mpnet/common.hpp"

namespace mp::nn {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

template <class T>
void check_finite(const Tensor<T>& t, const char* what) {
  if (!t.all_finite()) fail(Errc::numeric, "non-finite values in ", what);
}

}  // namespace

void kaiming_fill(Tensor<float>& t, int fan_in, Rng& rng) {
  if (fan_in <= 0) fail(Errc::invalid_argument, "kaiming_fill: fan_in must be positive");
  const double sd = std::sqrt(2.0 / fan_in);
  for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, sd));
}

void kaiming_fill(Tensor<double>& t, int fan_in, Rng& rng) {
  if (fan_in <= 0) fail(Errc::invalid_argument, "kaiming_fill: fan_in must be positive");
  const double sd = std::sqrt(2.0 / fan_in);
  for (auto& v : t.data) v = rng.normal(0.0, sd);
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

template <class T>
void Conv2d<T>::configure(const std::string& name, int kh_, int kw_, int in_c_, int out_c_) {
  if (kh_ <= 0 || kw_ <= 0 || in_c_ <= 0 || out_c_ <= 0)
    fail(Errc::invalid_argument, "Conv2d ", name, ": all sizes must be positive");
  kh = kh_;
  kw = kw_;
  in_c = in_c_;
  out_c = out_c_;
  kernels.init(name + ".kernels", {kh, kw, in_c, out_c});
  bias.init(name + ".bias", {out_c});
  plan_h = plan_w = 0;
}

template <class T>
void Conv2d<T>::init_params(Rng& rng) {
  kaiming_fill(kernels.value, kh * kw * in_c, rng);
  bias.value.zero();
}

template <class T>
void Conv2d<T>::build_plan(int h, int w) {
  if (plan_h == h && plan_w == w) return;
  const int pad_top = (kh - 1) / 2;
  const int pad_left = (kw - 1) / 2;
  gather_.assign(static_cast<std::size_t>(h) * w * kh * kw, -1);
  std::size_t g = 0;
  for (int oy = 0; oy < h; ++oy)
    for (int ox = 0; ox < w; ++ox)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          const int iy = oy - pad_top + ky;
          const int ix = ox - pad_left + kx;
          gather_[g++] =
              (iy >= 0 && iy < h && ix >= 0 && ix < w) ? static_cast<std::int32_t>(iy * w + ix) : -1;
        }
  plan_h = h;
  plan_w = w;
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4 || x.shape[3] != in_c)
    fail(Errc::invalid_argument, "Conv2d ", kernels.name, ": input shape ", shape_str(x),
         " incompatible with in_c=", in_c);
  const int b = x.shape[0], h = x.shape[1], w = x.shape[2];
  build_plan(h, w);

  const int k = kh * kw;
  const std::int64_t rows = static_cast<std::int64_t>(b) * h * w;
  if (cols_.shape != std::vector<int>{static_cast<int>(rows), k * in_c})
    cols_ = Tensor<T>({static_cast<int>(rows), k * in_c});
  cache_b = b;
  cache_h = h;
  cache_w = w;

  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  parallel_for(b, [&](std::int64_t bi) {
    const T* xb = x.ptr() + bi * plane * in_c;
    T* row = cols_.ptr() + bi * plane * k * in_c;
    const std::int32_t* gp = gather_.data();
    for (std::int64_t p = 0; p < plane; ++p) {
      for (int ki = 0; ki < k; ++ki) {
        const std::int32_t src = gp[p * k + ki];
        if (src >= 0)
          std::memcpy(row, xb + static_cast<std::int64_t>(src) * in_c, sizeof(T) * in_c);
        else
          std::memset(row, 0, sizeof(T) * in_c);
        row += in_c;
      }
    }
  });

  Tensor<T> y({b, h, w, out_c});
  // kernels laid out (kh,kw,in,out) row-major == a (k*in_c, out_c) matrix.
  gemm(cols_.ptr(), kernels.value.ptr(), y.ptr(), static_cast<int>(rows), k * in_c, out_c, false);
  T* yp = y.ptr();
  const T* bp = bias.value.ptr();
  for (std::int64_t r = 0; r < rows; ++r)
    for (int c = 0; c < out_c; ++c) yp[r * out_c + c] += bp[c];
  if (debug_checks_enabled()) check_finite(y, kernels.name.c_str());
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  if (dy.rank() != 4 || dy.shape[0] != cache_b || dy.shape[1] != cache_h ||
      dy.shape[2] != cache_w || dy.shape[3] != out_c)
    fail(Errc::invalid_argument, "Conv2d ", kernels.name, ": backward shape mismatch");
  const int b = cache_b, h = cache_h, w = cache_w, k = kh * kw;
  const std::int64_t rows = static_cast<std::int64_t>(b) * h * w;

  const T* dyp = dy.ptr();
  T* bg = bias.grad.ptr();
  for (std::int64_t r = 0; r < rows; ++r)
    for (int c = 0; c < out_c; ++c) bg[c] += dyp[r * out_c + c];

  gemm_at_b(cols_.ptr(), dy.ptr(), kernels.grad.ptr(), static_cast<int>(rows), k * in_c, out_c,
            true);

  if (dcols_.shape != cols_.shape) dcols_ = Tensor<T>(cols_.shape);
  Tensor<T>& dcols = dcols_;
  gemm_a_bt(dy.ptr(), kernels.value.ptr(), dcols.ptr(), static_cast<int>(rows), k * in_c, out_c,
            false);

  Tensor<T> dx({b, h, w, in_c});
  dx.zero();
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  parallel_for(b, [&](std::int64_t bi) {
    T* dxb = dx.ptr() + bi * plane * in_c;
    const T* row = dcols.ptr() + bi * plane * k * in_c;
    const std::int32_t* gp = gather_.data();
    for (std::int64_t p = 0; p < plane; ++p) {
      for (int ki = 0; ki < k; ++ki) {
        const std::int32_t src = gp[p * k + ki];
        if (src >= 0) {
          T* dst = dxb + static_cast<std::int64_t>(src) * in_c;
          for (int c = 0; c < in_c; ++c) dst[c] += row[c];
        }
        row += in_c;
      }
    }
  });
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x) {
  if (ph <= 0 || pw <= 0) fail(Errc::invalid_argument, "MaxPool2d: pool sizes must be positive");
  if (x.rank() != 4) fail(Errc::invalid_argument, "MaxPool2d: expected rank-4 input");
  const int b = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
  const int ho = h / ph, wo = w / pw;
  if (ho == 0 || wo == 0)
    fail(Errc::invalid_argument, "MaxPool2d: input ", shape_str(x), " smaller than pool ", ph, "x",
         pw);
  in_shape_ = x.shape;
  Tensor<T> y({b, ho, wo, c});
  argmax_.assign(y.numel(), -1);

  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t oplane = static_cast<std::int64_t>(ho) * wo;
  parallel_for(b, [&](std::int64_t bi) {
    const T* xb = x.ptr() + bi * plane * c;
    T* yb = y.ptr() + bi * oplane * c;
    std::int32_t* ab = argmax_.data() + bi * oplane * c;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          T best = -std::numeric_limits<T>::infinity();
          std::int32_t best_idx = -1;
          for (int py = 0; py < ph; ++py)
            for (int px = 0; px < pw; ++px) {
              const int iy = oy * ph + py, ix = ox * pw + px;
              const T v = xb[(static_cast<std::int64_t>(iy) * w + ix) * c + ch];
              if (v > best) {  // strict: ties keep the first element seen
                best = v;
                best_idx = iy * w + ix;
              }
            }
          yb[(static_cast<std::int64_t>(oy) * wo + ox) * c + ch] = best;
          ab[(static_cast<std::int64_t>(oy) * wo + ox) * c + ch] = best_idx;
        }
  });
  return y;
}

template <class T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& dy) {
  if (in_shape_.empty()) fail(Errc::internal, "MaxPool2d: backward before forward");
  if (dy.numel() != static_cast<std::int64_t>(argmax_.size()))
    fail(Errc::invalid_argument, "MaxPool2d: backward shape mismatch");
  Tensor<T> dx(in_shape_);
  dx.zero();
  const int b = in_shape_[0], w = in_shape_[2], c = in_shape_[3];
  const std::int64_t plane = static_cast<std::int64_t>(in_shape_[1]) * w;
  const std::int64_t oplane = dy.numel() / (static_cast<std::int64_t>(b) * c);
  const T* dyp = dy.ptr();
  parallel_for(b, [&](std::int64_t bi) {
    T* dxb = dx.ptr() + bi * plane * c;
    const T* dyb = dyp + bi * oplane * c;
    const std::int32_t* ab = argmax_.data() + bi * oplane * c;
    for (std::int64_t i = 0; i < oplane * c; ++i)
      dxb[static_cast<std::int64_t>(ab[i]) * c + i % c] += dyb[i];
  });
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm
// ---------------------------------------------------------------------------

template <class T>
void BatchNorm<T>::configure(const std::string& name, int channels) {
  if (channels <= 0) fail(Errc::invalid_argument, "BatchNorm ", name, ": channels must be positive");
  gamma.init(name + ".gamma", {channels});
  beta.init(name + ".beta", {channels});
  gamma.value.fill(T(1));
  beta.value.zero();
  running_mean = Tensor<T>({channels});
  running_mean.zero();
  running_var = Tensor<T>({channels});
  running_var.fill(T(1));
}

template <class T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  const int c = gamma.value.shape[0];
  if (x.rank() != 4 || x.shape[3] != c)
    fail(Errc::invalid_argument, "BatchNorm ", gamma.name, ": bad input shape ", shape_str(x));
  const std::int64_t m = x.numel() / c;
  if (mode == Mode::train && m < 2)
    fail(Errc::invalid_argument, "BatchNorm ", gamma.name,
         ": training requires at least 2 elements per channel");
  cache_mode_ = mode;

  xhat_ = Tensor<T>(x.shape);
  inv_std_.assign(c, T(0));
  const T* xp = x.ptr();
  T* hp = xhat_.ptr();

  std::vector<T> mean(c, T(0)), var(c, T(0));
  if (mode == Mode::train) {
    std::vector<double> acc(c, 0.0);
    for (std::int64_t i = 0; i < m; ++i)
      for (int ch = 0; ch < c; ++ch) acc[ch] += xp[i * c + ch];
    for (int ch = 0; ch < c; ++ch) mean[ch] = static_cast<T>(acc[ch] / m);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::int64_t i = 0; i < m; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const double d = xp[i * c + ch] - mean[ch];
        acc[ch] += d * d;
      }
    for (int ch = 0; ch < c; ++ch) var[ch] = static_cast<T>(acc[ch] / m);
    for (int ch = 0; ch < c; ++ch) {
      running_mean.data[ch] += momentum * (mean[ch] - running_mean.data[ch]);
      running_var.data[ch] += momentum * (var[ch] - running_var.data[ch]);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean.data[ch];
      var[ch] = running_var.data[ch];
    }
  }
  for (int ch = 0; ch < c; ++ch) inv_std_[ch] = T(1) / std::sqrt(var[ch] + epsilon);

  Tensor<T> y(x.shape);
  T* yp = y.ptr();
  const T* gp = gamma.value.ptr();
  const T* bp = beta.value.ptr();
  for (std::int64_t i = 0; i < m; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const T xh = (xp[i * c + ch] - mean[ch]) * inv_std_[ch];
      hp[i * c + ch] = xh;
      yp[i * c + ch] = gp[ch] * xh + bp[ch];
    }
  if (debug_checks_enabled()) check_finite(y, gamma.name.c_str());
  return y;
}

template <class T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& dy) {
  if (!dy.same_shape(xhat_)) fail(Errc::invalid_argument, "BatchNorm: backward shape mismatch");
  const int c = gamma.value.shape[0];
  const std::int64_t m = dy.numel() / c;
  const T* dyp = dy.ptr();
  const T* hp = xhat_.ptr();
  const T* gp = gamma.value.ptr();

  std::vector<double> s1(c, 0.0), s2(c, 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (int ch = 0; ch < c; ++ch) {
      s1[ch] += dyp[i * c + ch];
      s2[ch] += static_cast<double>(dyp[i * c + ch]) * hp[i * c + ch];
    }
  for (int ch = 0; ch < c; ++ch) {
    beta.grad.data[ch] += static_cast<T>(s1[ch]);
    gamma.grad.data[ch] += static_cast<T>(s2[ch]);
  }

  Tensor<T> dx(dy.shape);
  T* dxp = dx.ptr();
  if (cache_mode_ == Mode::infer) {
    // Running statistics are constants: dx = dy * gamma * inv_std.
    for (std::int64_t i = 0; i < m; ++i)
      for (int ch = 0; ch < c; ++ch) dxp[i * c + ch] = dyp[i * c + ch] * gp[ch] * inv_std_[ch];
    return dx;
  }
  for (std::int64_t i = 0; i < m; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const T dxh = dyp[i * c + ch] * gp[ch];
      dxp[i * c + ch] =
          inv_std_[ch] * (dxh - static_cast<T>(s1[ch] / m) * gp[ch] -
                          hp[i * c + ch] * static_cast<T>(s2[ch] / m) * gp[ch]);
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

template <class T>
void Dense<T>::configure(const std::string& name, int in_w_, int out_w_) {
  if (in_w_ <= 0 || out_w_ <= 0)
    fail(Errc::invalid_argument, "Dense ", name, ": widths must be positive");
  in_w = in_w_;
  out_w = out_w_;
  weight.init(name + ".weight", {in_w, out_w});
  bias.init(name + ".bias", {out_w});
}

template <class T>
void Dense<T>::init_params(Rng& rng) {
  kaiming_fill(weight.value, in_w, rng);
  bias.value.zero();
}

template <class T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 2 || x.shape[1] != in_w)
    fail(Errc::invalid_argument, "Dense ", weight.name, ": input shape ", shape_str(x),
         " incompatible with in=", in_w);
  x_ = x;
  const int b = x.shape[0];
  Tensor<T> y({b, out_w});
  gemm(x.ptr(), weight.value.ptr(), y.ptr(), b, in_w, out_w, false);
  T* yp = y.ptr();
  const T* bp = bias.value.ptr();
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < out_w; ++c) yp[r * out_w + c] += bp[c];
  if (debug_checks_enabled()) check_finite(y, weight.name.c_str());
  return y;
}

template <class T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy) {
  if (dy.rank() != 2 || dy.shape[0] != x_.shape[0] || dy.shape[1] != out_w)
    fail(Errc::invalid_argument, "Dense ", weight.name, ": backward shape mismatch");
  const int b = dy.shape[0];
  const T* dyp = dy.ptr();
  T* bg = bias.grad.ptr();
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < out_w; ++c) bg[c] += dyp[r * out_w + c];
  gemm_at_b(x_.ptr(), dy.ptr(), weight.grad.ptr(), b, in_w, out_w, true);
  Tensor<T> dx({b, in_w});
  gemm_a_bt(dy.ptr(), weight.value.ptr(), dx.ptr(), b, in_w, out_w, false);
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& y) {
  if (!dy.same_shape(y)) fail(Errc::invalid_argument, "relu_backward: shape mismatch");
  Tensor<T> dx(dy.shape);
  for (std::int64_t i = 0; i < dy.numel(); ++i) dx.data[i] = y.data[i] > T(0) ? dy.data[i] : T(0);
  return dx;
}

template <class T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 2) fail(Errc::invalid_argument, "flatten: rank must be >= 2");
  const int b = x.shape[0];
  return x.reshaped({b, static_cast<int>(x.numel() / b)});
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <class T>
T sigmoid_bce(const Tensor<T>& logits, const Tensor<T>& targets, const Tensor<T>& weights,
              Tensor<T>* grad) {
  if (!logits.same_shape(targets) || !logits.same_shape(weights))
    fail(Errc::invalid_argument, "sigmoid_bce: shape mismatch");
  if (grad && !grad->same_shape(logits)) *grad = Tensor<T>(logits.shape);
  double total = 0.0;
  for (std::int64_t i = 0; i < logits.numel(); ++i) {
    const T z = logits.data[i];
    if (!std::isfinite(static_cast<double>(z)))
      fail(Errc::numeric, "sigmoid_bce: non-finite logit at index ", i);
    const T y = targets.data[i];
    const T w = weights.data[i];
    if (w == T(0)) {
      if (grad) grad->data[i] = T(0);
      continue;
    }
    const double zd = z;
    const double loss = std::max(zd, 0.0) - zd * y + std::log1p(std::exp(-std::abs(zd)));
    total += static_cast<double>(w) * loss;
    if (grad) {
      const double sig = zd >= 0 ? 1.0 / (1.0 + std::exp(-zd)) : std::exp(zd) / (1.0 + std::exp(zd));
      grad->data[i] = static_cast<T>(w * (sig - y));
    }
  }
  return static_cast<T>(total);
}

template <class T>
T softmax_ce(const Tensor<T>& logits, const Tensor<T>& one_hot, Tensor<T>* grad) {
  if (logits.rank() != 2 || !logits.same_shape(one_hot))
    fail(Errc::invalid_argument, "softmax_ce: expected matching rank-2 tensors");
  const int b = logits.shape[0], n = logits.shape[1];
  if (grad && !grad->same_shape(logits)) *grad = Tensor<T>(logits.shape);
  double total = 0.0;
  for (int r = 0; r < b; ++r) {
    const T* z = logits.ptr() + static_cast<std::int64_t>(r) * n;
    const T* t = one_hot.ptr() + static_cast<std::int64_t>(r) * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
      if (!std::isfinite(static_cast<double>(z[c])))
        fail(Errc::numeric, "softmax_ce: non-finite logit in row ", r);
      mx = std::max(mx, static_cast<double>(z[c]));
    }
    double sum = 0.0;
    for (int c = 0; c < n; ++c) sum += std::exp(z[c] - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < n; ++c) {
      total += t[c] * (lse - z[c]);
      if (grad)
        grad->data[static_cast<std::int64_t>(r) * n + c] =
            static_cast<T>((std::exp(z[c] - mx) / sum - t[c]) / b);
    }
  }
  return static_cast<T>(total / b);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <class T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& state, T lr) {
  if (!(lr > T(0))) fail(Errc::invalid_argument, "adam_step: learning rate must be positive");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape);
      state.m.back().zero();
      state.v.emplace_back(p->value.shape);
      state.v.back().zero();
    }
  }
  if (state.m.size() != params.size())
    fail(Errc::invalid_argument, "adam_step: parameter list changed size");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.t);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param<T>& p = *params[pi];
    if (!p.value.same_shape(state.m[pi]))
      fail(Errc::invalid_argument, "adam_step: shape changed for ", p.name);
    const T step_lr = lr * p.lr_scale;
    T* m = state.m[pi].ptr();
    T* v = state.v[pi].ptr();
    T* w = p.value.ptr();
    const T* g = p.grad.ptr();
    for (std::int64_t i = 0; i < p.value.numel(); ++i) {
      if (!std::isfinite(static_cast<double>(g[i])))
        fail(Errc::numeric, "adam_step: non-finite gradient in ", p.name);
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= static_cast<T>(step_lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

void LrSchedule::validate() const {
  switch (kind) {
    case Kind::constant:
      if (!(base_lr > 0)) fail(Errc::config, "lr schedule: base_lr must be positive");
      break;
    case Kind::cyclic_triangular:
      if (!(base_lr > 0) || !(max_lr >= base_lr))
        fail(Errc::config, "lr schedule: require 0 < base_lr <= max_lr");
      if (step_size < 1) fail(Errc::config, "lr schedule: step_size must be >= 1");
      break;
    case Kind::cosine_warm_restarts:
      if (!(lr_max > 0)) fail(Errc::config, "lr schedule: lr_max must be positive");
      if (t0 < 1) fail(Errc::config, "lr schedule: t0 must be >= 1");
      if (!(t_mult >= 1.0)) fail(Errc::config, "lr schedule: t_mult must be >= 1");
      break;
  }
}

double lr_at(const LrSchedule& s, long long step) {
  if (step < 0) fail(Errc::invalid_argument, "lr_at: step must be >= 0");
  s.validate();
  switch (s.kind) {
    case LrSchedule::Kind::constant:
      return s.base_lr;
    case LrSchedule::Kind::cyclic_triangular: {
      const double cycle = std::floor(1.0 + static_cast<double>(step) / (2.0 * s.step_size));
      const double x = std::abs(static_cast<double>(step) / s.step_size - 2.0 * cycle + 1.0);
      return s.base_lr + (s.max_lr - s.base_lr) * std::max(0.0, 1.0 - x);
    }
    case LrSchedule::Kind::cosine_warm_restarts: {
      double t_cur = static_cast<double>(step);
      double ti = static_cast<double>(s.t0);
      while (t_cur >= ti) {
        t_cur -= ti;
        ti *= s.t_mult;
      }
      return s.lr_max * 0.5 * (1.0 + std::cos(kPi * t_cur / ti));
    }
  }
  fail(Errc::internal, "lr_at: unknown schedule kind");
}

// ---------------------------------------------------------------------------

#define MP_NN_INSTANTIATE(T)                                                                  \
  template struct Conv2d<T>;                                                                  \
  template struct MaxPool2d<T>;                                                               \
  template struct BatchNorm<T>;                                                               \
  template struct Dense<T>;                                                                   \
  template Tensor<T> relu_forward<T>(const Tensor<T>&);                                       \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> flatten<T>(const Tensor<T>&);                                            \
  template T sigmoid_bce<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*); \
  template T softmax_ce<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);                   \
  template void adam_step<T>(const std::vector<Param<T>*>&, AdamState<T>&, T);

MP_NN_INSTANTIATE(float)
MP_NN_INSTANTIATE(double)

#undef MP_NN_INSTANTIATE

}  // namespace mp::nn
