#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mpnet/checkpoint.hpp"
#include "mpnet/common.hpp"
#include "mpnet/profile_net.hpp"
#include "mpnet/rng.hpp"
#include "mpnet/synth.hpp"
#include "oracles.hpp"

using namespace mp;

namespace {

// Small but realistic cohort shared across the suite (built once).
const Cohort& shared_cohort() {
  static const Cohort cohort = [] {
    CohortConfig cfg;
    cfg.num_users = 120;
    cfg.num_ood_users = 20;
    cfg.num_archetypes = 10;
    cfg.ood_archetype_ids = {8, 9};
    cfg.num_source_tasks = 9;
    cfg.num_target_tasks = 4;
    cfg.seed = 17;
    cfg.mean_events_shopping = 60;
    cfg.mean_events_points = 25;
    return generate_cohort(cfg);
  }();
  return cohort;
}

const UserTensorBank& shared_bank() {
  static const UserTensorBank bank = build_tensor_bank(shared_cohort());
  return bank;
}

ProfileNetShape small_shape() {
  NetworkConfig net;
  net.demo_hidden = 16;
  net.demo_out = 24;
  net.profile_width = 64;
  return ProfileNetShape::make(net, 4, 2, 9);
}

bool states_equal(const std::vector<CheckpointEntry>& a, const std::vector<CheckpointEntry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].value.shape != b[i].value.shape ||
        a[i].value.data != b[i].value.data)
      return false;
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("profile_net");

TEST_CASE("conv stack walks the documented shape chain down to a 512 vector") {
  Rng r1(5), r2(5);
  BranchCnn<float> manual, full;
  manual.configure("m", 4);
  full.configure("m", 4);
  manual.init_params(r1);
  full.init_params(r2);

  Rng xr(9);
  Tensor<float> x({2, 365, 24, 4});
  for (auto& v : x.data) v = static_cast<float>(xr.uniform(0.0, 2.0));

  const std::vector<std::vector<int>> after_conv = {
      {2, 365, 24, 64}, {2, 52, 12, 128}, {2, 13, 6, 256}, {2, 4, 3, 512}};
  const std::vector<std::vector<int>> after_pool = {
      {2, 52, 12, 64}, {2, 13, 6, 128}, {2, 4, 3, 256}, {2, 1, 1, 512}};

  Tensor<float> h = x;
  for (int i = 0; i < 4; ++i) {
    h = manual.conv[i].forward(h);
    REQUIRE(h.shape == after_conv[static_cast<std::size_t>(i)]);
    h = manual.bn[i].forward(h, nn::Mode::train);
    h = nn::relu_forward(h);
    h = manual.pool[i].forward(h);
    REQUIRE(h.shape == after_pool[static_cast<std::size_t>(i)]);
  }
  Tensor<float> manual_out = nn::flatten(h);
  REQUIRE(manual_out.shape == std::vector<int>{2, kBranchWidth});

  Tensor<float> full_out = full.forward(x, nn::Mode::train);
  REQUIRE(full_out.shape == std::vector<int>{2, kBranchWidth});
  CHECK(full_out.data == manual_out.data);

  // wrong spatial dims are rejected outright
  Tensor<float> bad({1, 364, 24, 4});
  CHECK_THROWS_AS(full.forward(bad, nn::Mode::infer), Error);
}

TEST_CASE("parameter count matches hand arithmetic") {
  ProfileNet<float> net;
  net.configure(ProfileNetShape::make(NetworkConfig{}, 4, 2, 9));

  auto branch_params = [](std::int64_t c) {
    std::int64_t n = 0;
    n += 7 * 2 * c * 64 + 64 + 2 * 64;        // conv1 + bn1
    n += 4 * 2 * 64 * 128 + 128 + 2 * 128;    // conv2 + bn2
    n += 3 * 2 * 128 * 256 + 256 + 2 * 256;   // conv3 + bn3
    n += 1 * 1 * 256 * 512 + 512 + 2 * 512;   // conv4 + bn4
    return n;
  };
  const std::int64_t demo = 13 * 32 + 32 + 32 * 64 + 64;
  const std::int64_t fusion = (512 + 512 + 64) * 512 + 512;
  const std::int64_t heads = 512 * 9 + 9;
  const std::int64_t want = branch_params(4) + branch_params(2) + demo + fusion + heads;
  CHECK(net.param_count() == want);
  CHECK(net.param_count() == 1362313);
}

TEST_CASE("shape validation and derived demo width") {
  const ProfileNetShape s = small_shape();
  CHECK(s.demo_in == 13);  // 2 numerics + 5 + 3 one-hot + 3 presence flags
  CHECK(s.num_tasks == 9);
  ProfileNetShape bad = s;
  bad.profile_width = 0;
  CHECK_THROWS_AS(bad.validate(), Error);

  NetworkConfig nc;
  nc.demo_hidden = -1;
  CHECK_THROWS_AS(ProfileNetShape::make(nc, 4, 2, 9), Error);
}

TEST_CASE("init is seed deterministic") {
  ProfileNet<float> a, b, c;
  a.configure(small_shape());
  b.configure(small_shape());
  c.configure(small_shape());
  a.init_params(101);
  b.init_params(101);
  c.init_params(102);
  CHECK(states_equal(a.state(), b.state()));
  CHECK_FALSE(states_equal(a.state(), c.state()));
}

TEST_CASE("multitask loss matches an independent reference") {
  Rng rng(55);
  for (int rep = 0; rep < 1000; ++rep) {
    const int b = 1 + static_cast<int>(rng.uniform01() * 8);
    const int n = 1 + static_cast<int>(rng.uniform01() * 6);
    Tensor<double> z({b, n}), y({b, n}), w({b, n});
    for (std::int64_t i = 0; i < z.numel(); ++i) {
      z[i] = rng.uniform(-8.0, 8.0);
      y[i] = rng.uniform01() < 0.4 ? 1.0 : 0.0;
      const double u = rng.uniform01();
      w[i] = u < 0.35 ? 0.0 : rng.uniform(0.2, 3.0);
    }
    Tensor<double> grad;
    const double got = multitask_loss(z, y, w, &grad);
    const double want = oracle::multitask_loss_ref(z, y, w);
    CHECK(oracle::rel_diff(got, want) < 1e-12);

    // analytic gradient: per-task normalized sigmoid residual
    for (int i = 0; i < b; ++i)
      for (int t = 0; t < n; ++t) {
        long double wsum = 0;
        for (int k = 0; k < b; ++k) wsum += w.at(k, t);
        if (w.at(i, t) == 0.0) {
          CHECK(grad.at(i, t) == 0.0);
          continue;
        }
        const long double sig = 1.0L / (1.0L + std::exp(static_cast<long double>(-z.at(i, t))));
        const long double g = (w.at(i, t) / wsum) * (sig - y.at(i, t));
        CHECK(oracle::rel_diff(grad.at(i, t), static_cast<double>(g)) < 1e-10);
      }
  }
}

TEST_CASE("a fully masked task contributes exactly zero") {
  Rng rng(66);
  Tensor<double> z({6, 4}), y({6, 4}), w({6, 4});
  for (std::int64_t i = 0; i < z.numel(); ++i) {
    z[i] = rng.uniform(-4.0, 4.0);
    y[i] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    w[i] = 1.0;
  }
  for (int i = 0; i < 6; ++i) w.at(i, 2) = 0.0;  // mask out task 2 entirely

  Tensor<double> grad;
  const double with_mask = multitask_loss(z, y, w, &grad);
  for (int i = 0; i < 6; ++i) CHECK(grad.at(i, 2) == 0.0);

  // perturbing the masked task's logits must not change anything
  Tensor<double> z2 = z;
  for (int i = 0; i < 6; ++i) z2.at(i, 2) += 1000.0 * (i + 1);
  CHECK(multitask_loss(z2, y, w, nullptr) == with_mask);

  // and the remaining tasks alone reproduce the total
  Tensor<double> z3({6, 3}), y3({6, 3}), w3({6, 3});
  for (int i = 0; i < 6; ++i) {
    int col = 0;
    for (int t = 0; t < 4; ++t) {
      if (t == 2) continue;
      z3.at(i, col) = z.at(i, t);
      y3.at(i, col) = y.at(i, t);
      w3.at(i, col) = w.at(i, t);
      ++col;
    }
  }
  CHECK(oracle::rel_diff(multitask_loss(z3, y3, w3, nullptr), with_mask) < 1e-15);
}

TEST_CASE("multitask loss rejects bad inputs") {
  Tensor<double> z({2, 2}), y({2, 2}), w({2, 2});
  w.fill(1.0);
  z[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(multitask_loss(z, y, w, nullptr), Error);
  try {
    multitask_loss(z, y, w, nullptr);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::numeric);
  }
  z[0] = 0.0;
  w[1] = -0.5;
  try {
    multitask_loss(z, y, w, nullptr);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
  }
  Tensor<double> y_bad({2, 3});
  w[1] = 1.0;
  CHECK_THROWS_AS(multitask_loss(z, y_bad, w, nullptr), Error);
}

TEST_CASE("masking a task zeroes its head gradients but not the others") {
  const UserTensorBank& bank = shared_bank();
  ProfileNet<float> net;
  net.configure(small_shape());
  net.init_params(7);

  std::vector<int> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  Tensor<float> ha, hb, dm;
  fill_batch(bank, rows, &ha, &hb, &dm);
  const Tensor<float> emb = net.forward_embedding(ha, hb, dm, nn::Mode::train);
  const Tensor<float> logits = net.forward_heads(emb);

  const int b = 8, n = 9, masked = 4;
  Tensor<float> lab({b, n}), w({b, n});
  Rng rng(3);
  for (std::int64_t i = 0; i < lab.numel(); ++i) {
    lab[i] = rng.uniform01() < 0.3 ? 1.0f : 0.0f;
    w[i] = 1.0f;
  }
  for (int i = 0; i < b; ++i) w.at(i, masked) = 0.0f;

  net.zero_grads();
  Tensor<float> dlogits;
  multitask_loss(logits, lab, w, &dlogits);
  const Tensor<float> demb = net.backward_heads(dlogits);
  net.backward_embedding(demb);

  double other_mass = 0;
  for (int k = 0; k < net.shape.profile_width; ++k) {
    CHECK(net.heads.weight.grad.at(k, masked) == 0.0f);
    for (int t = 0; t < n; ++t)
      if (t != masked) other_mass += std::abs(net.heads.weight.grad.at(k, t));
  }
  CHECK(net.heads.bias.grad[masked] == 0.0f);
  CHECK(other_mass > 0.0);
}

TEST_CASE("state round trips through a checkpoint file") {
  const UserTensorBank& bank = shared_bank();
  ProfileNet<float> net;
  net.configure(small_shape());
  net.init_params(42);

  // run one training-mode forward so BN running stats are non-trivial
  std::vector<int> rows = {3, 11, 19, 27};
  Tensor<float> ha, hb, dm;
  fill_batch(bank, rows, &ha, &hb, &dm);
  net.forward_embedding(ha, hb, dm, nn::Mode::train);

  const auto state = net.state();
  CHECK(find_entry(state, "branch_a.bn1.running_mean") != nullptr);
  CHECK(find_entry(state, "branch_b.bn4.running_var") != nullptr);
  CHECK(find_entry(state, "heads.fc.weight") != nullptr);
  CHECK(find_entry(state, "no.such.tensor") == nullptr);

  const auto path =
      (std::filesystem::temp_directory_path() / "mpnet_profile_ckpt_test.bin").string();
  write_checkpoint(path, state);
  const auto loaded = read_checkpoint(path);
  CHECK(states_equal(state, loaded));

  ProfileNet<float> restored;
  restored.configure(small_shape());
  restored.init_params(999);  // different init, then overwritten
  restored.load_state(loaded);

  const Tensor<float> logits_a = net.forward_heads(net.forward_embedding(ha, hb, dm, nn::Mode::infer));
  const Tensor<float> logits_b =
      restored.forward_heads(restored.forward_embedding(ha, hb, dm, nn::Mode::infer));
  CHECK(logits_a.data == logits_b.data);
  std::remove(path.c_str());

  // shape mismatch on load is rejected
  ProfileNet<float> widened;
  NetworkConfig nc;
  nc.profile_width = 32;
  widened.configure(ProfileNetShape::make(nc, 4, 2, 9));
  CHECK_THROWS_AS(widened.load_state(loaded), Error);
}

TEST_CASE("demo rows standardize numerics and one-hot the categoricals") {
  const Cohort& cohort = shared_cohort();
  const UserTensorBank& bank = shared_bank();
  const int n = static_cast<int>(cohort.users.size());

  for (int f = 0; f < kDemoNumericCount; ++f) {
    long double mean = 0;
    for (const auto& u : cohort.users) mean += u.demo.numeric_features[static_cast<std::size_t>(f)];
    mean /= n;
    long double var = 0;
    for (const auto& u : cohort.users) {
      const long double d = u.demo.numeric_features[static_cast<std::size_t>(f)] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(static_cast<double>(var / n));
    CHECK(oracle::rel_diff(bank.demo_mean[static_cast<std::size_t>(f)], static_cast<double>(mean)) <
          1e-12);
    CHECK(oracle::rel_diff(bank.demo_sd[static_cast<std::size_t>(f)], sd) < 1e-12);
  }

  Tensor<float> ha, hb, dm;
  const int r = 5;
  fill_batch(bank, {r}, &ha, &hb, &dm);
  const auto& user = cohort.users[static_cast<std::size_t>(r)];
  REQUIRE(dm.shape == std::vector<int>{1, 13});
  for (int f = 0; f < kDemoNumericCount; ++f) {
    const float want = static_cast<float>(
        (user.demo.numeric_features[static_cast<std::size_t>(f)] - bank.demo_mean[static_cast<std::size_t>(f)]) /
        bank.demo_sd[static_cast<std::size_t>(f)]);
    CHECK(dm[f] == want);
  }
  int off = kDemoNumericCount;
  for (std::size_t c = 0; c < kDemoCardinalities.size(); ++c) {
    const int card = kDemoCardinalities[c];
    const int v = user.demo.categorical_features[c];
    for (int k = 0; k < card; ++k) CHECK(dm[off + k] == (k == v ? 1.0f : 0.0f));
    off += card;
  }
  CHECK(dm[off] == 1.0f);
  CHECK(dm[off + 1] == 1.0f);
  CHECK(dm[off + 2] == 1.0f);
}

TEST_CASE("fill_batch densifies sparse cells with the per-channel transform") {
  const Cohort& cohort = shared_cohort();
  const UserTensorBank& bank = shared_bank();

  // find a user with points activity; channel 0 is a count (identity),
  // channel 1 an amount (log-compressed)
  int r = -1;
  for (std::size_t i = 0; i < bank.heat_b.size(); ++i)
    if (!bank.heat_b[i].cells.empty()) {
      r = static_cast<int>(i);
      break;
    }
  REQUIRE(r >= 0);

  Tensor<float> ha, hb, dm;
  fill_batch(bank, {r, r}, &ha, &hb, &dm);
  REQUIRE(hb.shape == std::vector<int>{2, 365, 24, 2});

  double placed = 0;
  for (const auto& cell : bank.heat_b[static_cast<std::size_t>(r)].cells) {
    const float want = cell.channel == 1 ? static_cast<float>(std::log1p(cell.value))
                                         : static_cast<float>(cell.value);
    CHECK(hb.at(0, cell.day, cell.hour, cell.channel) == want);
    CHECK(hb.at(1, cell.day, cell.hour, cell.channel) == want);
    placed += std::abs(want);
  }
  CHECK(placed > 0);

  // everything off the sparse support stays zero
  double total = 0;
  for (float v : hb.data) total += std::abs(v);
  CHECK(total == doctest::Approx(2 * placed).epsilon(1e-6));

  // shopping channels are all amounts -> all log-compressed
  const auto& sh = bank.heat_a[static_cast<std::size_t>(r)];
  for (const auto& cell : sh.cells)
    CHECK(ha.at(0, cell.day, cell.hour, cell.channel) ==
          static_cast<float>(std::log1p(cell.value)));

  CHECK_THROWS_AS(fill_batch(bank, {}, &ha, &hb, &dm), Error);
  CHECK_THROWS_AS(fill_batch(bank, {static_cast<int>(bank.user_ids.size())}, &ha, &hb, &dm),
                  Error);
  (void)cohort;
}

TEST_CASE("assembling a bank from artifacts matches building it directly") {
  const Cohort& cohort = shared_cohort();
  UserTensorBank direct = build_tensor_bank(cohort);
  append_users(direct, cohort.ood_users);

  std::vector<std::int64_t> ids;
  std::vector<SparseHeatmap> ha, hb;
  std::vector<DemographicRecord> demos;
  for (const auto& u : cohort.users) {
    ids.push_back(u.user_id);
    ha.push_back(encode_events(u.shopping, cohort.shopping_spec, nullptr));
    hb.push_back(encode_events(u.points, cohort.points_spec, nullptr));
    demos.push_back(u.demo);
  }
  for (const auto& u : cohort.ood_users) {
    ids.push_back(u.user_id);
    ha.push_back(encode_events(u.shopping, cohort.shopping_spec, nullptr));
    hb.push_back(encode_events(u.points, cohort.points_spec, nullptr));
    demos.push_back(u.demo);
  }
  UserTensorBank assembled =
      assemble_tensor_bank(cohort.shopping_spec, cohort.points_spec, ids, std::move(ha),
                           std::move(hb), demos, static_cast<int>(cohort.users.size()));

  CHECK(assembled.user_ids == direct.user_ids);
  CHECK(assembled.demo_mean == direct.demo_mean);
  CHECK(assembled.demo_sd == direct.demo_sd);
  CHECK(assembled.demo_rows == direct.demo_rows);
  REQUIRE(assembled.heat_a.size() == direct.heat_a.size());
  for (std::size_t i = 0; i < direct.heat_a.size(); ++i) {
    CHECK(assembled.heat_a[i] == direct.heat_a[i]);
    CHECK(assembled.heat_b[i] == direct.heat_b[i]);
  }
  CHECK(assembled.row(ids.front()) == 0);
  CHECK_THROWS_AS(assembled.row(-555), Error);

  // mismatched demo order is rejected
  std::swap(demos[0], demos[1]);
  std::vector<SparseHeatmap> ha2(ids.size()), hb2(ids.size());
  for (auto& h : ha2) h.num_channels = cohort.shopping_spec.num_channels;
  for (auto& h : hb2) h.num_channels = cohort.points_spec.num_channels;
  CHECK_THROWS_AS(assemble_tensor_bank(cohort.shopping_spec, cohort.points_spec, ids,
                                       std::move(ha2), std::move(hb2), demos, 10),
                  Error);
}

TEST_CASE("pretraining reduces the loss and is bit-identical on rerun") {
  const Cohort& cohort = shared_cohort();
  const UserTensorBank& bank = shared_bank();

  std::vector<int> train_rows(64);
  std::iota(train_rows.begin(), train_rows.end(), 0);

  PretrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 16;
  cfg.schedule = "constant";
  cfg.base_lr = 1e-3;

  auto run_once = [&](ProfileNet<float>& net) {
    net.configure(small_shape());
    net.init_params(77);
    return train_multitask(net, bank, cohort.labels, train_rows, cfg, 123);
  };

  ProfileNet<float> net1, net2;
  const PretrainResult r1 = run_once(net1);
  const PretrainResult r2 = run_once(net2);

  const std::size_t per_epoch = 4;  // 64 / 16
  REQUIRE(r1.log.size() == per_epoch * 5);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < per_epoch; ++i) {
    first += r1.log[i].loss;
    last += r1.log[r1.log.size() - 1 - i].loss;
  }
  INFO("first epoch mean " << first / per_epoch << " last epoch mean " << last / per_epoch);
  CHECK(last < first);

  REQUIRE(r2.log.size() == r1.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].step == r2.log[i].step);
    CHECK(r1.log[i].lr == r2.log[i].lr);
    CHECK(r1.log[i].loss == r2.log[i].loss);
  }
  CHECK(states_equal(net1.state(), net2.state()));

  // the schedule's auto step size follows the batch count
  PretrainConfig cyc = cfg;
  cyc.schedule = "cyclic_triangular";
  cyc.base_lr = 1e-4;
  cyc.max_lr = 1e-3;
  cyc.step_size = 0;  // auto: 2 * (64 / 16) = 8
  ProfileNet<float> net3;
  net3.configure(small_shape());
  net3.init_params(77);
  const PretrainResult r3 = train_multitask(net3, bank, cohort.labels, train_rows, cyc, 123);
  for (const auto& row : r3.log)
    CHECK(oracle::rel_diff(row.lr, oracle::lr_cyclic_triangular(1e-4, 1e-3, 8, row.step)) < 1e-12);

  CHECK_THROWS_AS(train_multitask(net3, bank, cohort.labels, {}, cfg, 1), Error);
  std::vector<int> bad_rows = {100000};
  CHECK_THROWS_AS(train_multitask(net3, bank, cohort.labels, bad_rows, cfg, 1), Error);
}

TEST_CASE("schedule factory maps names and rejects unknown kinds") {
  const nn::LrSchedule c = make_schedule("constant", 2e-4, 1e-3, 5, 10, 2.0);
  CHECK(c.kind == nn::LrSchedule::Kind::constant);
  CHECK(nn::lr_at(c, 50) == 2e-4);
  const nn::LrSchedule t = make_schedule("cyclic_triangular", 1e-4, 1e-3, 6, 10, 2.0);
  CHECK(t.kind == nn::LrSchedule::Kind::cyclic_triangular);
  const nn::LrSchedule w = make_schedule("cosine_warm_restarts", 1e-4, 3e-3, 6, 12, 2.0);
  CHECK(w.kind == nn::LrSchedule::Kind::cosine_warm_restarts);
  CHECK(w.lr_max == 3e-3);
  CHECK(w.t0 == 12);
  CHECK_THROWS_AS(make_schedule("linear", 1e-4, 1e-3, 5, 10, 2.0), Error);
}

TEST_SUITE_END();
