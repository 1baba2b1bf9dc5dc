#include <cmath>
#include <vector>

#include "doctest.h"
#include "mpnet/common.hpp"
#include "mpnet/grad_check.hpp"
#include "mpnet/nn.hpp"
#include "mpnet/rng.hpp"
#include "mpnet/tensor.hpp"
#include "oracles.hpp"

using namespace mp;
using namespace mp::nn;

namespace {

template <class T>
Tensor<T> random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("tensor_nn");

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t({2, 3});
  CHECK(t.numel() == 6);
  t.at(1, 2) = 5.0f;
  CHECK(t[5] == 5.0f);
  Tensor<float> r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 5.0f);
  CHECK_THROWS_AS(t.reshaped({4, 2}), Error);
  CHECK_THROWS_AS(Tensor<float>({0, 3}), Error);
  Tensor<double> d = t.cast<double>();
  CHECK(d.at(1, 2) == 5.0);
}

TEST_CASE("gemm variants match the naive triple loop") {
  Rng rng(31);
  for (int rep = 0; rep < 25; ++rep) {
    const int m = 1 + static_cast<int>(rng.uniform01() * 12);
    const int k = 1 + static_cast<int>(rng.uniform01() * 12);
    const int n = 1 + static_cast<int>(rng.uniform01() * 12);
    Tensor<double> a = random_tensor<double>(rng, {m, k});
    Tensor<double> b = random_tensor<double>(rng, {k, n});
    Tensor<double> want = oracle::matmul_ref(a, b);

    Tensor<double> c({m, n});
    gemm(a.ptr(), b.ptr(), c.ptr(), m, k, n, false);
    for (std::int64_t i = 0; i < c.numel(); ++i)
      CHECK(oracle::rel_diff(c[i], want[i]) < 1e-13);

    // accumulate adds on top of existing contents
    gemm(a.ptr(), b.ptr(), c.ptr(), m, k, n, true);
    for (std::int64_t i = 0; i < c.numel(); ++i)
      CHECK(oracle::rel_diff(c[i], 2.0 * want[i]) < 1e-13);

    // A^T * B with A (m,k) treated as (rows=m, cols=k): result (k,n) from A^T(k,m) * B(m,n)
    Tensor<double> bb = random_tensor<double>(rng, {m, n});
    Tensor<double> atb({k, n});
    gemm_at_b(a.ptr(), bb.ptr(), atb.ptr(), m, k, n, false);
    Tensor<double> at({k, m});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) at.at(j, i) = a.at(i, j);
    Tensor<double> atb_want = oracle::matmul_ref(at, bb);
    for (std::int64_t i = 0; i < atb.numel(); ++i)
      CHECK(oracle::rel_diff(atb[i], atb_want[i]) < 1e-13);
  }
}

TEST_CASE("gemm_a_bt matches the naive loop") {
  Rng rng(32);
  for (int rep = 0; rep < 25; ++rep) {
    const int m = 1 + static_cast<int>(rng.uniform01() * 10);
    const int k = 1 + static_cast<int>(rng.uniform01() * 10);
    const int n = 1 + static_cast<int>(rng.uniform01() * 10);
    Tensor<double> a = random_tensor<double>(rng, {m, n});
    Tensor<double> b = random_tensor<double>(rng, {k, n});
    Tensor<double> c({m, k});
    gemm_a_bt(a.ptr(), b.ptr(), c.ptr(), m, k, n, false);
    Tensor<double> bt({n, k});
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) bt.at(j, i) = b.at(i, j);
    Tensor<double> want = oracle::matmul_ref(a, bt);
    for (std::int64_t i = 0; i < c.numel(); ++i)
      CHECK(oracle::rel_diff(c[i], want[i]) < 1e-13);
  }
}

TEST_CASE("conv output matches a hand-rolled cross-correlation with SAME padding") {
  Rng rng(7);
  Conv2d<double> conv;
  conv.configure("t.conv", 3, 2, 2, 3);
  conv.init_params(rng);
  Tensor<double> x = random_tensor<double>(rng, {2, 5, 4, 2});
  Tensor<double> y = conv.forward(x);
  REQUIRE(y.shape == std::vector<int>{2, 5, 4, 3});

  // SAME padding for odd kh=3: one row each side; even kw=2: extra at right.
  const int pad_top = 1, pad_left = 0;
  for (int b = 0; b < 2; ++b)
    for (int oh = 0; oh < 5; ++oh)
      for (int ow = 0; ow < 4; ++ow)
        for (int oc = 0; oc < 3; ++oc) {
          long double acc = conv.bias.value[oc];
          for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 2; ++kw)
              for (int ic = 0; ic < 2; ++ic) {
                const int ih = oh + kh - pad_top, iw = ow + kw - pad_left;
                if (ih < 0 || ih >= 5 || iw < 0 || iw >= 4) continue;
                const double kval =
                    conv.kernels.value[((static_cast<std::int64_t>(kh) * 2 + kw) * 2 + ic) * 3 + oc];
                acc += x.at(b, ih, iw, ic) * kval;
              }
          CHECK(oracle::rel_diff(y.at(b, oh, ow, oc), static_cast<double>(acc)) < 1e-12);
        }
}

TEST_CASE("one-by-one conv with identity kernel is a passthrough") {
  Conv2d<float> conv;
  conv.configure("t.id", 1, 1, 2, 2);
  conv.kernels.value.zero();
  conv.kernels.value[0 * 2 + 0] = 1.0f;  // in 0 -> out 0
  conv.kernels.value[1 * 2 + 1] = 1.0f;  // in 1 -> out 1
  conv.bias.value.zero();
  Rng rng(3);
  Tensor<float> x = random_tensor<float>(rng, {1, 4, 3, 2});
  Tensor<float> y = conv.forward(x);
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("max pool drops remainders and selects window maxima") {
  Tensor<float> x({1, 5, 4, 1});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);
  MaxPool2d<float> pool;
  pool.ph = 2;
  pool.pw = 2;
  Tensor<float> y = pool.forward(x);
  REQUIRE(y.shape == std::vector<int>{1, 2, 2, 1});  // 5/2 -> 2, last row dropped
  CHECK(y.at(0, 0, 0, 0) == 5.0f);
  CHECK(y.at(0, 0, 1, 0) == 7.0f);
  CHECK(y.at(0, 1, 0, 0) == 13.0f);
  CHECK(y.at(0, 1, 1, 0) == 15.0f);
}

TEST_CASE("max pool ties route gradient to the first maximum in scan order") {
  Tensor<float> x({1, 2, 2, 1});
  x.fill(3.0f);  // all tied
  MaxPool2d<float> pool;
  pool.ph = 2;
  pool.pw = 2;
  Tensor<float> y = pool.forward(x);
  CHECK(y[0] == 3.0f);
  Tensor<float> dy({1, 1, 1, 1});
  dy[0] = 2.5f;
  Tensor<float> dx = pool.backward(dy);
  CHECK(dx[0] == 2.5f);
  CHECK(dx[1] == 0.0f);
  CHECK(dx[2] == 0.0f);
  CHECK(dx[3] == 0.0f);
}

TEST_CASE("batch norm normalizes per channel and tracks running stats") {
  Rng rng(11);
  BatchNorm<float> bn;
  bn.configure("t.bn", 3);
  Tensor<float> x = random_tensor<float>(rng, {4, 3, 2, 3}, -2.0, 5.0);
  Tensor<float> y = bn.forward(x, Mode::train);

  const std::int64_t per_c = 4 * 3 * 2;
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0, batch_mean = 0, batch_var = 0;
    for (int b = 0; b < 4; ++b)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 2; ++w) {
          mean += y.at(b, h, w, c);
          batch_mean += x.at(b, h, w, c);
        }
    mean /= static_cast<double>(per_c);
    batch_mean /= static_cast<double>(per_c);
    for (int b = 0; b < 4; ++b)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 2; ++w) {
          var += std::pow(y.at(b, h, w, c) - mean, 2);
          batch_var += std::pow(x.at(b, h, w, c) - batch_mean, 2);
        }
    var /= static_cast<double>(per_c);
    batch_var /= static_cast<double>(per_c);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-3);
    // running stats move toward the batch stats by the momentum fraction
    CHECK(std::abs(bn.running_mean[c] - 0.1 * batch_mean) < 1e-5);
    CHECK(std::abs(bn.running_var[c] - (0.9 * 1.0 + 0.1 * batch_var)) < 1e-3);
  }

  // inference uses the running stats, not the batch
  Tensor<float> x2({1, 1, 1, 3});
  x2[0] = bn.running_mean[0];
  x2[1] = bn.running_mean[1];
  x2[2] = bn.running_mean[2];
  Tensor<float> y2 = bn.forward(x2, Mode::infer);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(y2[c] - bn.beta.value[c]) < 1e-5);
}

TEST_CASE("relu and flatten behave elementwise") {
  Tensor<float> x({1, 1, 2, 3});
  x.data = {-1.0f, 0.0f, 2.0f, -0.5f, 3.0f, 0.25f};
  Tensor<float> y = relu_forward(x);
  CHECK(y.data == std::vector<float>{0, 0, 2.0f, 0, 3.0f, 0.25f});
  Tensor<float> dy(x.shape);
  dy.fill(1.0f);
  Tensor<float> dx = relu_backward(dy, y);
  CHECK(dx.data == std::vector<float>{0, 0, 1.0f, 0, 1.0f, 1.0f});
  Tensor<float> flat = flatten(x);
  CHECK(flat.shape == std::vector<int>{1, 6});
  CHECK(flat.data == x.data);
}

TEST_CASE("single-layer gradient checks stay under 1e-5") {
  CHECK(check_dense(1).max_rel_error() < 1e-5);
  CHECK(check_conv(2, 3, 3).max_rel_error() < 1e-5);
  CHECK(check_conv(3, 1, 1).max_rel_error() < 1e-5);
  CHECK(check_conv(4, 4, 2).max_rel_error() < 1e-5);
  CHECK(check_batchnorm(5).max_rel_error() < 1e-5);
  CHECK(check_maxpool(6).max_rel_error() < 1e-5);
  CHECK(check_relu(7).max_rel_error() < 1e-5);
  CHECK(check_sigmoid_bce(8).max_rel_error() < 1e-5);
  CHECK(check_softmax_ce(9).max_rel_error() < 1e-5);
}

TEST_CASE("composed branch gradient check stays under 1e-4") {
  GradCheckReport report = check_composed_branch(12);
  INFO(report.to_string());
  CHECK(report.max_rel_error() < 1e-4);
}

TEST_CASE("corrupted analytic gradients are caught (negative control)") {
  CHECK(check_dense(1, /*corrupt=*/true).max_rel_error() > 1e-2);
  CHECK(check_conv(2, 3, 3, /*corrupt=*/true).max_rel_error() > 1e-2);
  CHECK(check_batchnorm(5, /*corrupt=*/true).max_rel_error() > 1e-2);
}

TEST_CASE("sigmoid bce honors weights exactly") {
  Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 16);
    Tensor<double> z = random_tensor<double>(rng, {1, n}, -6.0, 6.0);
    Tensor<double> y({1, n});
    Tensor<double> w({1, n});
    for (int i = 0; i < n; ++i) {
      y[i] = rng.uniform01() < 0.5 ? 0.0 : 1.0;
      w[i] = rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0.1, 2.0);
    }
    Tensor<double> grad;
    const double got = sigmoid_bce(z, y, w, &grad);
    long double want = 0;
    for (int i = 0; i < n; ++i) want += w[i] * oracle::bce_logit(z[i], y[i]);
    CHECK(oracle::rel_diff(got, static_cast<double>(want)) < 1e-12);
    for (int i = 0; i < n; ++i)
      if (w[i] == 0.0) CHECK(grad[i] == 0.0);
  }
  Tensor<double> bad({1, 1});
  bad[0] = std::numeric_limits<double>::infinity();
  Tensor<double> one({1, 1});
  one[0] = 1.0;
  CHECK_THROWS_AS(sigmoid_bce<double>(bad, one, one, nullptr), Error);
}

TEST_CASE("softmax cross-entropy is shift invariant and matches a hand case") {
  Tensor<double> z({1, 3});
  z.data = {1.0, 2.0, 3.0};
  Tensor<double> onehot({1, 3});
  onehot.data = {0.0, 0.0, 1.0};
  const double loss = softmax_ce(z, onehot, nullptr);
  // -log(e^3 / (e^1 + e^2 + e^3))
  const double want = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  CHECK(oracle::rel_diff(loss, want) < 1e-14);

  for (double shift : {-50.0, 0.0, 123.0}) {
    Tensor<double> zs = z;
    for (auto& v : zs.data) v += shift;
    CHECK(oracle::rel_diff(softmax_ce(zs, onehot, nullptr), want) < 1e-12);
  }
}

TEST_CASE("adam matches the closed-form scalar reference") {
  Param<double> p;
  p.init("t.p", {1});
  p.value[0] = 0.7;
  AdamState<double> state;
  oracle::AdamScalarRef ref;

  double x_ref = 0.7;
  for (int t = 1; t <= 5; ++t) {
    const double g = 0.3 * t - 0.5;
    p.grad[0] = g;
    adam_step<double>({&p}, state, 0.01);
    x_ref = ref.step(x_ref, g, 0.01);
    CHECK(oracle::rel_diff(p.value[0], x_ref) < 1e-14);
  }
}

TEST_CASE("adam respects per-parameter lr scaling") {
  Param<double> full, scaled;
  full.init("t.full", {1});
  scaled.init("t.scaled", {1});
  full.value[0] = scaled.value[0] = 1.0;
  scaled.lr_scale = 0.1;
  AdamState<double> s1, s2;
  for (int t = 0; t < 3; ++t) {
    full.grad[0] = scaled.grad[0] = 1.0;
    adam_step<double>({&full}, s1, 0.01);
    adam_step<double>({&scaled}, s2, 0.01);
  }
  const double full_move = 1.0 - full.value[0];
  const double scaled_move = 1.0 - scaled.value[0];
  CHECK(oracle::rel_diff(scaled_move, 0.1 * full_move) < 1e-10);
}

TEST_CASE("cyclic triangular schedule matches the closed form") {
  LrSchedule s;
  s.kind = LrSchedule::Kind::cyclic_triangular;
  s.base_lr = 1e-4;
  s.max_lr = 1e-3;
  s.step_size = 4;
  for (long long t = 0; t <= 40; ++t)
    CHECK(oracle::rel_diff(lr_at(s, t), oracle::lr_cyclic_triangular(1e-4, 1e-3, 4, t)) < 1e-12);
  // peak at step_size, trough at cycle ends
  CHECK(lr_at(s, 0) == doctest::Approx(1e-4));
  CHECK(lr_at(s, 4) == doctest::Approx(1e-3));
  CHECK(lr_at(s, 8) == doctest::Approx(1e-4));
}

TEST_CASE("cosine warm restarts schedule matches the closed form") {
  LrSchedule s;
  s.kind = LrSchedule::Kind::cosine_warm_restarts;
  s.lr_max = 2e-3;
  s.t0 = 3;
  s.t_mult = 2.0;
  for (long long t = 0; t <= 60; ++t)
    CHECK(oracle::rel_diff(lr_at(s, t), oracle::lr_cosine_warm_restarts(2e-3, 3, 2.0, t)) < 1e-12);
  // restarts land at 3, 9, 21, 45
  for (long long r : {3LL, 9LL, 21LL, 45LL}) CHECK(lr_at(s, r) == doctest::Approx(2e-3));
  CHECK(lr_at(s, 0) == doctest::Approx(2e-3));

  LrSchedule c;
  c.kind = LrSchedule::Kind::constant;
  c.base_lr = 5e-4;
  CHECK(lr_at(c, 0) == 5e-4);
  CHECK(lr_at(c, 1000) == 5e-4);

  LrSchedule bad = s;
  bad.t0 = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("kaiming init is seed deterministic with near-zero mean") {
  Rng r1(77), r2(77);
  Tensor<float> a({64, 128}), b({64, 128});
  kaiming_fill(a, 64, r1);
  kaiming_fill(b, 64, r2);
  CHECK(a.data == b.data);
  double mean = 0;
  for (float v : a.data) mean += v;
  mean /= static_cast<double>(a.numel());
  CHECK(std::abs(mean) < 0.01);
}

TEST_SUITE_END();
