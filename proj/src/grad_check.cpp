#include "mpnet/grad_check.hpp"

#include <cmath>
#include <sstream>

#include "mpnet/common.hpp"
#include "mpnet/nn.hpp"
#include "mpnet/rng.hpp"
#include "mpnet/tensor.hpp"

namespace mp::nn {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
  return worst;
}

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  for (const auto& g : groups)
    os << g.name << ": max_rel_error=" << g.max_rel_error << " over " << g.count << " elements\n";
  return os.str();
}

GradCheckReport grad_check(const std::vector<GradCheckTarget>& targets,
                           const std::function<double()>& loss,
                           const std::function<void()>& backward, double h) {
  if (!(h > 0)) fail(Errc::invalid_argument, "grad_check: h must be positive");
  backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(targets.size());
  for (const auto& t : targets) analytic.emplace_back(t.grad, t.grad + t.size);

  GradCheckReport report;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    const auto& t = targets[ti];
    GradCheckReport::Group group{t.name, 0.0, t.size};
    for (std::int64_t i = 0; i < t.size; ++i) {
      const double saved = t.value[i];
      t.value[i] = saved + h;
      const double lp = loss();
      t.value[i] = saved - h;
      const double lm = loss();
      t.value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double ana = analytic[ti][i];
      const double scale = std::max(std::abs(numeric), std::abs(ana));
      if (scale < 1e-8) continue;
      group.max_rel_error = std::max(group.max_rel_error, std::abs(numeric - ana) / scale);
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

namespace {

void fill_normal(Tensor<double>& t, Rng& rng, double sd = 1.0) {
  for (auto& v : t.data) v = rng.normal(0.0, sd);
}

GradCheckTarget param_target(Param<double>& p) {
  return {p.name, p.value.ptr(), p.grad.ptr(), p.value.numel()};
}

// Targets hold raw pointers, so input-gradient storage must keep its address
// across repeated backward calls.
void copy_into(Tensor<double>& dst, const Tensor<double>& src) {
  if (!dst.same_shape(src)) fail(Errc::internal, "grad_check: input grad shape changed");
  std::copy(src.data.begin(), src.data.end(), dst.data.begin());
}

// Applied after the genuine backward pass when running the negative control.
void maybe_corrupt(bool corrupt, Param<double>& p) {
  if (!corrupt) return;
  for (auto& g : p.grad.data) g = g * 1.5 + 0.05;
}

}  // namespace

GradCheckReport check_dense(std::uint64_t seed, bool corrupt) {
  Rng rng(seed);
  Dense<double> layer;
  layer.configure("dense", 7, 5);
  layer.init_params(rng);
  Tensor<double> x({4, 7}), dgrad({4, 7});
  fill_normal(x, rng);
  Tensor<double> targets({4, 5}), weights({4, 5});
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  weights.fill(1.0);

  auto loss = [&] {
    auto y = layer.forward(x);
    return sigmoid_bce<double>(y, targets, weights, nullptr);
  };
  auto backward = [&] {
    layer.weight.zero_grad();
    layer.bias.zero_grad();
    auto y = layer.forward(x);
    Tensor<double> dy;
    sigmoid_bce<double>(y, targets, weights, &dy);
    copy_into(dgrad, layer.backward(dy));
    maybe_corrupt(corrupt, layer.weight);
  };
  std::vector<GradCheckTarget> t{param_target(layer.weight), param_target(layer.bias),
                                 {"input", x.ptr(), dgrad.ptr(), x.numel()}};
  return grad_check(t, loss, backward);
}

GradCheckReport check_conv(std::uint64_t seed, int kh, int kw, bool corrupt) {
  Rng rng(seed);
  Conv2d<double> conv;
  conv.configure("conv", kh, kw, 3, 4);
  conv.init_params(rng);
  Tensor<double> x({2, 9, 6, 3}), dgrad({2, 9, 6, 3});
  fill_normal(x, rng);
  Tensor<double> targets({2, 9, 6, 4}), weights({2, 9, 6, 4});
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  for (auto& v : weights.data) v = rng.uniform(0.5, 1.5);

  auto loss = [&] {
    auto y = conv.forward(x);
    return sigmoid_bce<double>(y, targets, weights, nullptr);
  };
  auto backward = [&] {
    conv.kernels.zero_grad();
    conv.bias.zero_grad();
    auto y = conv.forward(x);
    Tensor<double> dy;
    sigmoid_bce<double>(y, targets, weights, &dy);
    copy_into(dgrad, conv.backward(dy));
    maybe_corrupt(corrupt, conv.kernels);
  };
  std::vector<GradCheckTarget> t{param_target(conv.kernels), param_target(conv.bias),
                                 {"input", x.ptr(), dgrad.ptr(), x.numel()}};
  return grad_check(t, loss, backward);
}

GradCheckReport check_batchnorm(std::uint64_t seed, bool corrupt) {
  Rng rng(seed);
  BatchNorm<double> bn;
  bn.configure("bn", 5);
  Tensor<double> x({3, 4, 2, 5}), dgrad({3, 4, 2, 5});
  fill_normal(x, rng, 2.0);
  for (auto& v : bn.gamma.value.data) v = rng.uniform(0.5, 1.5);
  for (auto& v : bn.beta.value.data) v = rng.normal(0.0, 0.2);
  Tensor<double> targets(x.shape), weights(x.shape);
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  weights.fill(1.0);

  // Keep running statistics out of the loss: snapshot and restore around the
  // training-mode forward so repeated evaluations stay pure.
  auto rm = bn.running_mean, rv = bn.running_var;
  auto loss = [&] {
    bn.running_mean = rm;
    bn.running_var = rv;
    auto y = bn.forward(x, Mode::train);
    return sigmoid_bce<double>(y, targets, weights, nullptr);
  };
  auto backward = [&] {
    bn.gamma.zero_grad();
    bn.beta.zero_grad();
    bn.running_mean = rm;
    bn.running_var = rv;
    auto y = bn.forward(x, Mode::train);
    Tensor<double> dy;
    sigmoid_bce<double>(y, targets, weights, &dy);
    copy_into(dgrad, bn.backward(dy));
    maybe_corrupt(corrupt, bn.gamma);
  };
  std::vector<GradCheckTarget> t{param_target(bn.gamma), param_target(bn.beta),
                                 {"input", x.ptr(), dgrad.ptr(), x.numel()}};
  return grad_check(t, loss, backward);
}

GradCheckReport check_maxpool(std::uint64_t seed) {
  Rng rng(seed);
  MaxPool2d<double> pool;
  pool.ph = 2;
  pool.pw = 3;
  Tensor<double> x({2, 6, 9, 4}), dgrad(x.shape);
  fill_normal(x, rng);
  Tensor<double> targets({2, 3, 3, 4}), weights({2, 3, 3, 4});
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  weights.fill(1.0);

  auto loss = [&] {
    auto y = pool.forward(x);
    return sigmoid_bce<double>(y, targets, weights, nullptr);
  };
  auto backward = [&] {
    auto y = pool.forward(x);
    Tensor<double> dy;
    sigmoid_bce<double>(y, targets, weights, &dy);
    copy_into(dgrad, pool.backward(dy));
  };
  std::vector<GradCheckTarget> t{{"input", x.ptr(), dgrad.ptr(), x.numel()}};
  return grad_check(t, loss, backward);
}

GradCheckReport check_relu(std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> x({5, 40}), dgrad(x.shape), y;
  fill_normal(x, rng);
  Tensor<double> targets(x.shape), weights(x.shape);
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  weights.fill(1.0);

  auto loss = [&] {
    auto a = relu_forward(x);
    return sigmoid_bce<double>(a, targets, weights, nullptr);
  };
  auto backward = [&] {
    y = relu_forward(x);
    Tensor<double> dy;
    sigmoid_bce<double>(y, targets, weights, &dy);
    copy_into(dgrad, relu_backward(dy, y));
  };
  std::vector<GradCheckTarget> t{{"input", x.ptr(), dgrad.ptr(), x.numel()}};
  return grad_check(t, loss, backward);
}

GradCheckReport check_sigmoid_bce(std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> z({6, 11}), dgrad;
  fill_normal(z, rng, 3.0);
  Tensor<double> targets(z.shape), weights(z.shape);
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  for (std::int64_t i = 0; i < weights.numel(); ++i)
    weights.data[i] = (i % 5 == 0) ? 0.0 : rng.uniform(0.25, 2.0);

  auto loss = [&] { return sigmoid_bce<double>(z, targets, weights, nullptr); };
  auto backward = [&] { sigmoid_bce<double>(z, targets, weights, &dgrad); };
  std::vector<GradCheckTarget> t{{"logits", z.ptr(), nullptr, 0}};
  backward();
  t[0].grad = dgrad.ptr();
  t[0].size = z.numel();
  return grad_check(t, loss, backward);
}

GradCheckReport check_softmax_ce(std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> z({7, 9}), dgrad;
  fill_normal(z, rng, 2.0);
  Tensor<double> one_hot(z.shape);
  one_hot.zero();
  for (int r = 0; r < 7; ++r) one_hot.at(r, rng.uniform_int(9)) = 1.0;

  auto loss = [&] { return softmax_ce<double>(z, one_hot, nullptr); };
  auto backward = [&] { softmax_ce<double>(z, one_hot, &dgrad); };
  backward();
  std::vector<GradCheckTarget> t{{"logits", z.ptr(), dgrad.ptr(), z.numel()}};
  return grad_check(t, loss, backward);
}

GradCheckReport check_composed_branch(std::uint64_t seed) {
  Rng rng(seed);
  Conv2d<double> conv1, conv2;
  conv1.configure("conv1", 3, 2, 2, 4);
  conv1.init_params(rng);
  conv2.configure("conv2", 2, 2, 4, 6);
  conv2.init_params(rng);
  BatchNorm<double> bn1;
  bn1.configure("bn1", 4);
  MaxPool2d<double> pool1, pool2;
  pool1.ph = 2;
  pool1.pw = 2;
  pool2.ph = 3;
  pool2.pw = 2;
  Dense<double> head;
  head.configure("head", 2 * 2 * 6, 3);
  head.init_params(rng);

  Tensor<double> x({2, 12, 8, 2}), dgrad(x.shape);
  fill_normal(x, rng);
  Tensor<double> targets({2, 3}), weights({2, 3});
  for (auto& v : targets.data) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
  for (auto& v : weights.data) v = rng.uniform(0.5, 1.5);

  auto rm = bn1.running_mean, rv = bn1.running_var;
  auto fwd = [&](Tensor<double>* dy_out) {
    bn1.running_mean = rm;
    bn1.running_var = rv;
    auto a = conv1.forward(x);
    auto b = bn1.forward(a, Mode::train);
    auto r = relu_forward(b);
    auto p = pool1.forward(r);          // (2,6,4,4)
    auto c = conv2.forward(p);          // (2,6,4,6)
    auto q = pool2.forward(c);          // (2,2,2,6)
    auto f = flatten(q);                // (2,24)
    auto z = head.forward(f);           // (2,3)
    const double l = sigmoid_bce<double>(z, targets, weights, dy_out);
    if (!dy_out) return l;
    auto df = head.backward(*dy_out);
    auto dq = df.reshaped(q.shape);
    auto dc = pool2.backward(dq);
    auto dp = conv2.backward(dc);
    auto dr = pool1.backward(dp);
    auto db = relu_backward(dr, r);
    auto da = bn1.backward(db);
    copy_into(dgrad, conv1.backward(da));
    return l;
  };
  auto loss = [&] { return fwd(nullptr); };
  auto backward = [&] {
    for (auto* p : {&conv1.kernels, &conv1.bias, &conv2.kernels, &conv2.bias, &bn1.gamma, &bn1.beta,
                    &head.weight, &head.bias})
      p->zero_grad();
    Tensor<double> dy;
    fwd(&dy);
  };
  std::vector<GradCheckTarget> t{param_target(conv1.kernels), param_target(conv1.bias),
                                 param_target(bn1.gamma),     param_target(bn1.beta),
                                 param_target(conv2.kernels), param_target(conv2.bias),
                                 param_target(head.weight),   param_target(head.bias),
                                 {"input", x.ptr(), dgrad.ptr(), x.numel()}};
  return grad_check(t, loss, backward);
}

}  // namespace mp::nn
