#include "mpnet/profile_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mpnet/common.hpp"
#include "mpnet/events.hpp"

namespace mp {

namespace {

enum : std::uint64_t {
  kTagInit = 21,
  kTagEpoch = 22,
};

}  // namespace

ProfileNetShape ProfileNetShape::make(const NetworkConfig& net, int channels_a, int channels_b,
                                      int num_source_tasks) {
  ProfileNetShape s;
  s.channels_a = channels_a;
  s.channels_b = channels_b;
  int cards = 0;
  for (int c : kDemoCardinalities) cards += c;
  s.demo_in = kDemoNumericCount + cards + 3;  // + presence flags
  s.demo_hidden = net.demo_hidden;
  s.demo_out = net.demo_out;
  s.profile_width = net.profile_width;
  s.num_tasks = num_source_tasks;
  s.validate();
  return s;
}

void ProfileNetShape::validate() const {
  if (channels_a < 1 || channels_b < 1 || demo_in < 1 || demo_hidden < 1 || demo_out < 1 ||
      profile_width < 1 || num_tasks < 1)
    fail(Errc::invalid_argument, "profile net shape: all dimensions must be >= 1");
}

// ---------------------------------------------------------------------------
// BranchCnn
// ---------------------------------------------------------------------------

namespace {

struct ConvCfg {
  int kh, kw, out_c;
};
constexpr ConvCfg kConvCfg[4] = {{7, 2, 64}, {4, 2, 128}, {3, 2, 256}, {1, 1, 512}};
constexpr int kPoolCfg[4][2] = {{7, 2}, {4, 2}, {3, 2}, {4, 3}};

}  // namespace

template <class T>
void BranchCnn<T>::configure(const std::string& prefix, int in_channels) {
  int in_c = in_channels;
  for (int i = 0; i < 4; ++i) {
    const std::string n = std::to_string(i + 1);
    conv[i].configure(prefix + ".conv" + n, kConvCfg[i].kh, kConvCfg[i].kw, in_c,
                      kConvCfg[i].out_c);
    bn[i].configure(prefix + ".bn" + n, kConvCfg[i].out_c);
    pool[i].ph = kPoolCfg[i][0];
    pool[i].pw = kPoolCfg[i][1];
    in_c = kConvCfg[i].out_c;
  }
}

template <class T>
void BranchCnn<T>::init_params(Rng& rng) {
  for (int i = 0; i < 4; ++i) conv[i].init_params(rng);
}

template <class T>
std::vector<nn::Param<T>*> BranchCnn<T>::params() {
  std::vector<nn::Param<T>*> out;
  for (int i = 0; i < 4; ++i) {
    for (auto* p : conv[i].params()) out.push_back(p);
    for (auto* p : bn[i].params()) out.push_back(p);
  }
  return out;
}

template <class T>
Tensor<T> BranchCnn<T>::forward(const Tensor<T>& x, nn::Mode mode) {
  if (x.rank() != 4 || x.shape[1] != kDays || x.shape[2] != kHours ||
      x.shape[3] != conv[0].in_c)
    fail(Errc::invalid_argument, "branch: expected (B, ", kDays, ", ", kHours, ", ",
         conv[0].in_c, "), got ", shape_str(x));
  Tensor<T> h = x;
  for (int i = 0; i < 4; ++i) {
    h = conv[i].forward(h);
    h = bn[i].forward(h, mode);
    relu_y_[i] = nn::relu_forward(h);
    h = pool[i].forward(relu_y_[i]);
  }
  pre_flatten_shape_ = h.shape;
  return nn::flatten(h);
}

template <class T>
Tensor<T> BranchCnn<T>::backward(const Tensor<T>& dy) {
  if (pre_flatten_shape_.empty()) fail(Errc::internal, "branch backward before forward");
  Tensor<T> dh = dy.reshaped(pre_flatten_shape_);
  for (int i = 3; i >= 0; --i) {
    dh = pool[i].backward(dh);
    dh = nn::relu_backward(dh, relu_y_[i]);
    dh = bn[i].backward(dh);
    dh = conv[i].backward(dh);
  }
  return dh;
}

namespace {

std::string bn_stat_name(const std::string& gamma_name, const char* stat) {
  // "<prefix>.bnK.gamma" -> "<prefix>.bnK.<stat>"
  const auto dot = gamma_name.rfind('.');
  return gamma_name.substr(0, dot + 1) + stat;
}

}  // namespace

template <class T>
void BranchCnn<T>::collect_bn_stats(std::vector<CheckpointEntry>& out) const {
  for (int i = 0; i < 4; ++i) {
    out.push_back({bn_stat_name(bn[i].gamma.name, "running_mean"),
                   bn[i].running_mean.template cast<float>()});
    out.push_back({bn_stat_name(bn[i].gamma.name, "running_var"),
                   bn[i].running_var.template cast<float>()});
  }
}

template <class T>
void BranchCnn<T>::load_bn_stats(const std::vector<CheckpointEntry>& entries) {
  for (int i = 0; i < 4; ++i) {
    for (const char* stat : {"running_mean", "running_var"}) {
      const std::string name = bn_stat_name(bn[i].gamma.name, stat);
      const Tensor<float>* t = find_entry(entries, name);
      if (!t) fail(Errc::invalid_argument, "checkpoint missing tensor: ", name);
      Tensor<T>& dst = stat[8] == 'm' ? bn[i].running_mean : bn[i].running_var;
      if (t->shape != dst.shape)
        fail(Errc::invalid_argument, "checkpoint tensor ", name, " has shape ", shape_str(*t),
             ", expected ", shape_str(dst));
      dst = t->template cast<T>();
    }
  }
}

// ---------------------------------------------------------------------------
// ProfileNet
// ---------------------------------------------------------------------------

template <class T>
void ProfileNet<T>::configure(const ProfileNetShape& s) {
  s.validate();
  shape = s;
  branch_a.configure("branch_a", s.channels_a);
  branch_b.configure("branch_b", s.channels_b);
  demo1.configure("demo.fc1", s.demo_in, s.demo_hidden);
  demo2.configure("demo.fc2", s.demo_hidden, s.demo_out);
  fusion.configure("fusion.fc", 2 * kBranchWidth + s.demo_out, s.profile_width);
  heads.configure("heads.fc", s.profile_width, s.num_tasks);
}

template <class T>
void ProfileNet<T>::init_params(std::uint64_t seed) {
  Rng rng(derive_seed(seed, kTagInit));
  branch_a.init_params(rng);
  branch_b.init_params(rng);
  demo1.init_params(rng);
  demo2.init_params(rng);
  fusion.init_params(rng);
  heads.init_params(rng);
}

template <class T>
std::vector<nn::Param<T>*> ProfileNet<T>::backbone_params() {
  std::vector<nn::Param<T>*> out = branch_a.params();
  for (auto* p : branch_b.params()) out.push_back(p);
  for (auto* p : demo1.params()) out.push_back(p);
  for (auto* p : demo2.params()) out.push_back(p);
  for (auto* p : fusion.params()) out.push_back(p);
  return out;
}

template <class T>
std::vector<nn::Param<T>*> ProfileNet<T>::params() {
  std::vector<nn::Param<T>*> out = backbone_params();
  for (auto* p : heads.params()) out.push_back(p);
  return out;
}

template <class T>
std::int64_t ProfileNet<T>::param_count() {
  std::int64_t n = 0;
  for (auto* p : params()) n += p->value.numel();
  return n;
}

template <class T>
void ProfileNet<T>::set_backbone_lr_scale(T scale) {
  for (auto* p : backbone_params()) p->lr_scale = scale;
}

template <class T>
void ProfileNet<T>::zero_grads() {
  for (auto* p : params()) p->zero_grad();
}

template <class T>
Tensor<T> ProfileNet<T>::forward_embedding(const Tensor<T>& heat_a, const Tensor<T>& heat_b,
                                           const Tensor<T>& demo, nn::Mode mode) {
  if (heat_a.rank() != 4 || heat_b.rank() != 4 || demo.rank() != 2)
    fail(Errc::invalid_argument, "profile forward: bad input ranks");
  const int b = heat_a.shape[0];
  if (heat_b.shape[0] != b || demo.shape[0] != b)
    fail(Errc::invalid_argument, "profile forward: batch mismatch across modalities (", b, ", ",
         heat_b.shape[0], ", ", demo.shape[0], ")");
  if (demo.shape[1] != shape.demo_in)
    fail(Errc::invalid_argument, "profile forward: demo width ", demo.shape[1], ", expected ",
         shape.demo_in);

  Tensor<T> ea = branch_a.forward(heat_a, mode);
  Tensor<T> eb = branch_b.forward(heat_b, mode);
  demo_y1_ = nn::relu_forward(demo1.forward(demo));
  demo_y2_ = nn::relu_forward(demo2.forward(demo_y1_));

  const int wa = kBranchWidth, wb = kBranchWidth, wd = shape.demo_out;
  concat_ = Tensor<T>({b, wa + wb + wd});
  for (int i = 0; i < b; ++i) {
    T* row = concat_.ptr() + static_cast<std::int64_t>(i) * (wa + wb + wd);
    std::memcpy(row, ea.ptr() + static_cast<std::int64_t>(i) * wa, sizeof(T) * wa);
    std::memcpy(row + wa, eb.ptr() + static_cast<std::int64_t>(i) * wb, sizeof(T) * wb);
    std::memcpy(row + wa + wb, demo_y2_.ptr() + static_cast<std::int64_t>(i) * wd,
                sizeof(T) * wd);
  }
  fus_y_ = nn::relu_forward(fusion.forward(concat_));
  return fus_y_;
}

template <class T>
Tensor<T> ProfileNet<T>::forward_heads(const Tensor<T>& embedding) {
  return heads.forward(embedding);
}

template <class T>
Tensor<T> ProfileNet<T>::backward_heads(const Tensor<T>& dlogits) {
  return heads.backward(dlogits);
}

template <class T>
void ProfileNet<T>::backward_embedding(const Tensor<T>& demb) {
  if (!demb.same_shape(fus_y_))
    fail(Errc::invalid_argument, "profile backward: embedding grad shape ", shape_str(demb),
         " != ", shape_str(fus_y_));
  Tensor<T> dpre = nn::relu_backward(demb, fus_y_);
  Tensor<T> dcat = fusion.backward(dpre);

  const int b = dcat.shape[0];
  const int wa = kBranchWidth, wb = kBranchWidth, wd = shape.demo_out;
  Tensor<T> dea({b, wa}), deb({b, wb}), dd2({b, wd});
  for (int i = 0; i < b; ++i) {
    const T* row = dcat.ptr() + static_cast<std::int64_t>(i) * (wa + wb + wd);
    std::memcpy(dea.ptr() + static_cast<std::int64_t>(i) * wa, row, sizeof(T) * wa);
    std::memcpy(deb.ptr() + static_cast<std::int64_t>(i) * wb, row + wa, sizeof(T) * wb);
    std::memcpy(dd2.ptr() + static_cast<std::int64_t>(i) * wd, row + wa + wb, sizeof(T) * wd);
  }
  branch_a.backward(dea);
  branch_b.backward(deb);
  Tensor<T> dd2y = nn::relu_backward(dd2, demo_y2_);
  Tensor<T> dd1 = demo2.backward(dd2y);
  Tensor<T> dd1y = nn::relu_backward(dd1, demo_y1_);
  demo1.backward(dd1y);
}

template <class T>
std::vector<CheckpointEntry> ProfileNet<T>::state() {
  std::vector<CheckpointEntry> out;
  for (auto* p : params()) out.push_back({p->name, p->value.template cast<float>()});
  branch_a.collect_bn_stats(out);
  branch_b.collect_bn_stats(out);
  return out;
}

template <class T>
void ProfileNet<T>::load_state(const std::vector<CheckpointEntry>& entries) {
  for (auto* p : params()) {
    const Tensor<float>* t = find_entry(entries, p->name);
    if (!t) fail(Errc::invalid_argument, "checkpoint missing tensor: ", p->name);
    if (t->shape != p->value.shape)
      fail(Errc::invalid_argument, "checkpoint tensor ", p->name, " has shape ", shape_str(*t),
           ", expected ", shape_str(p->value));
    p->value = t->template cast<T>();
  }
  branch_a.load_bn_stats(entries);
  branch_b.load_bn_stats(entries);
}

// ---------------------------------------------------------------------------
// Eq.-style multi-task loss
// ---------------------------------------------------------------------------

template <class T>
T multitask_loss(const Tensor<T>& logits, const Tensor<T>& labels, const Tensor<T>& weights,
                 Tensor<T>* grad) {
  if (logits.rank() != 2 || !logits.same_shape(labels) || !logits.same_shape(weights))
    fail(Errc::invalid_argument, "multitask_loss: shapes must match, got ", shape_str(logits),
         " / ", shape_str(labels), " / ", shape_str(weights));
  const int b = logits.shape[0], n = logits.shape[1];
  if (grad && !grad->same_shape(logits)) *grad = Tensor<T>(logits.shape);
  if (grad) grad->zero();

  std::vector<double> wsum(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < b; ++i)
    for (int t = 0; t < n; ++t) {
      const double w = weights.at(i, t);
      if (w < 0) fail(Errc::invalid_argument, "multitask_loss: negative weight at (", i, ",", t, ")");
      wsum[static_cast<std::size_t>(t)] += w;
    }

  double total = 0;
  for (int i = 0; i < b; ++i)
    for (int t = 0; t < n; ++t) {
      const double w = weights.at(i, t);
      if (w == 0) continue;  // zero weight: exactly zero contribution
      const double z = logits.at(i, t);
      if (!std::isfinite(z)) fail(Errc::numeric, "multitask_loss: non-finite logit");
      const double y = labels.at(i, t);
      const double bce = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      const double scale = w / wsum[static_cast<std::size_t>(t)];
      total += scale * bce;
      if (grad) {
        const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        grad->at(i, t) = static_cast<T>(scale * (sig - y));
      }
    }
  return static_cast<T>(total);
}

// ---------------------------------------------------------------------------
// UserTensorBank
// ---------------------------------------------------------------------------

int UserTensorBank::demo_width() const {
  int cards = 0;
  for (int c : kDemoCardinalities) cards += c;
  return kDemoNumericCount + cards + 3;
}

int UserTensorBank::row(std::int64_t user_id) const {
  auto it = row_of.find(user_id);
  if (it == row_of.end()) fail(Errc::invalid_argument, "unknown user id ", user_id);
  return it->second;
}

namespace {

std::vector<bool> log1p_flags(const ChannelSpec& spec) {
  std::vector<bool> flags(static_cast<std::size_t>(spec.num_channels));
  for (int c = 0; c < spec.num_channels; ++c)
    flags[static_cast<std::size_t>(c)] = spec.transform_for(c) == CellTransform::log1p;
  return flags;
}

std::vector<float> make_demo_row(const DemographicRecord& d, const std::vector<double>& mean,
                                 const std::vector<double>& sd, int width) {
  if (static_cast<int>(d.numeric_features.size()) != kDemoNumericCount ||
      d.categorical_features.size() != kDemoCardinalities.size())
    fail(Errc::invalid_argument, "demographics for user ", d.user_id, " have wrong arity");
  std::vector<float> row;
  row.reserve(static_cast<std::size_t>(width));
  for (int i = 0; i < kDemoNumericCount; ++i)
    row.push_back(static_cast<float>((d.numeric_features[static_cast<std::size_t>(i)] -
                                      mean[static_cast<std::size_t>(i)]) /
                                     sd[static_cast<std::size_t>(i)]));
  for (std::size_t i = 0; i < kDemoCardinalities.size(); ++i) {
    const int card = kDemoCardinalities[i];
    const int v = d.categorical_features[i];
    if (v < 0 || v >= card)
      fail(Errc::invalid_argument, "demographics for user ", d.user_id, ": category out of range");
    for (int c = 0; c < card; ++c) row.push_back(c == v ? 1.0f : 0.0f);
  }
  // presence flags: shopping heatmap, points heatmap, demographics
  row.push_back(1.0f);
  row.push_back(1.0f);
  row.push_back(1.0f);
  return row;
}

void append_one(UserTensorBank& bank, const UserData& u) {
  if (bank.row_of.count(u.user_id))
    fail(Errc::invalid_argument, "duplicate user id ", u.user_id, " in tensor bank");
  bank.heat_a.push_back(encode_events(u.shopping, bank.spec_a, nullptr));
  bank.heat_b.push_back(encode_events(u.points, bank.spec_b, nullptr));
  bank.demo_rows.push_back(
      make_demo_row(u.demo, bank.demo_mean, bank.demo_sd, bank.demo_width()));
  bank.row_of[u.user_id] = static_cast<int>(bank.user_ids.size());
  bank.user_ids.push_back(u.user_id);
}

}  // namespace

UserTensorBank build_tensor_bank(const Cohort& cohort) {
  if (cohort.users.empty()) fail(Errc::invalid_argument, "tensor bank: empty cohort");
  UserTensorBank bank;
  bank.spec_a = cohort.shopping_spec;
  bank.spec_b = cohort.points_spec;
  bank.log1p_a = log1p_flags(bank.spec_a);
  bank.log1p_b = log1p_flags(bank.spec_b);

  bank.demo_mean.assign(kDemoNumericCount, 0.0);
  bank.demo_sd.assign(kDemoNumericCount, 0.0);
  for (const auto& u : cohort.users)
    for (int i = 0; i < kDemoNumericCount; ++i)
      bank.demo_mean[static_cast<std::size_t>(i)] +=
          u.demo.numeric_features[static_cast<std::size_t>(i)];
  for (auto& m : bank.demo_mean) m /= static_cast<double>(cohort.users.size());
  for (const auto& u : cohort.users)
    for (int i = 0; i < kDemoNumericCount; ++i) {
      const double d = u.demo.numeric_features[static_cast<std::size_t>(i)] -
                       bank.demo_mean[static_cast<std::size_t>(i)];
      bank.demo_sd[static_cast<std::size_t>(i)] += d * d;
    }
  for (auto& s : bank.demo_sd)
    s = std::max(std::sqrt(s / static_cast<double>(cohort.users.size())), 1e-9);

  for (const auto& u : cohort.users) append_one(bank, u);
  return bank;
}

void append_users(UserTensorBank& bank, const std::vector<UserData>& users) {
  if (bank.demo_mean.empty()) fail(Errc::invalid_argument, "tensor bank not built yet");
  for (const auto& u : users) append_one(bank, u);
}

UserTensorBank assemble_tensor_bank(const ChannelSpec& spec_a, const ChannelSpec& spec_b,
                                    const std::vector<std::int64_t>& user_ids,
                                    std::vector<SparseHeatmap> heat_a,
                                    std::vector<SparseHeatmap> heat_b,
                                    const std::vector<DemographicRecord>& demos, int stats_rows) {
  const std::size_t n = user_ids.size();
  if (n == 0) fail(Errc::invalid_argument, "tensor bank: no users");
  if (heat_a.size() != n || heat_b.size() != n || demos.size() != n)
    fail(Errc::invalid_argument, "tensor bank: ", n, " user ids vs ", heat_a.size(), "/",
         heat_b.size(), " heatmaps and ", demos.size(), " demo rows");
  if (stats_rows < 1 || static_cast<std::size_t>(stats_rows) > n)
    fail(Errc::invalid_argument, "tensor bank: stats_rows ", stats_rows, " outside 1..", n);

  UserTensorBank bank;
  bank.spec_a = spec_a;
  bank.spec_b = spec_b;
  bank.log1p_a = log1p_flags(bank.spec_a);
  bank.log1p_b = log1p_flags(bank.spec_b);

  bank.demo_mean.assign(kDemoNumericCount, 0.0);
  bank.demo_sd.assign(kDemoNumericCount, 0.0);
  for (int r = 0; r < stats_rows; ++r)
    for (int i = 0; i < kDemoNumericCount; ++i)
      bank.demo_mean[static_cast<std::size_t>(i)] +=
          demos[static_cast<std::size_t>(r)].numeric_features[static_cast<std::size_t>(i)];
  for (auto& m : bank.demo_mean) m /= static_cast<double>(stats_rows);
  for (int r = 0; r < stats_rows; ++r)
    for (int i = 0; i < kDemoNumericCount; ++i) {
      const double d =
          demos[static_cast<std::size_t>(r)].numeric_features[static_cast<std::size_t>(i)] -
          bank.demo_mean[static_cast<std::size_t>(i)];
      bank.demo_sd[static_cast<std::size_t>(i)] += d * d;
    }
  for (auto& s : bank.demo_sd)
    s = std::max(std::sqrt(s / static_cast<double>(stats_rows)), 1e-9);

  for (std::size_t i = 0; i < n; ++i) {
    if (demos[i].user_id != user_ids[i])
      fail(Errc::invalid_argument, "tensor bank: demo row ", i, " is user ", demos[i].user_id,
           ", expected ", user_ids[i]);
    if (heat_a[i].num_channels != spec_a.num_channels ||
        heat_b[i].num_channels != spec_b.num_channels)
      fail(Errc::invalid_argument, "tensor bank: heatmap channel mismatch for user ",
           user_ids[i]);
    if (bank.row_of.count(user_ids[i]))
      fail(Errc::invalid_argument, "duplicate user id ", user_ids[i], " in tensor bank");
    bank.heat_a.push_back(std::move(heat_a[i]));
    bank.heat_b.push_back(std::move(heat_b[i]));
    bank.demo_rows.push_back(
        make_demo_row(demos[i], bank.demo_mean, bank.demo_sd, bank.demo_width()));
    bank.row_of[user_ids[i]] = static_cast<int>(i);
    bank.user_ids.push_back(user_ids[i]);
  }
  return bank;
}

void fill_batch(const UserTensorBank& bank, const std::vector<int>& rows, Tensor<float>* heat_a,
                Tensor<float>* heat_b, Tensor<float>* demo) {
  if (rows.empty()) fail(Errc::invalid_argument, "fill_batch: empty row list");
  const int b = static_cast<int>(rows.size());
  const int ca = bank.spec_a.num_channels, cb = bank.spec_b.num_channels;
  const int dw = bank.demo_width();

  auto prepare = [](Tensor<float>* t, std::vector<int> shape) {
    if (t->shape != shape)
      *t = Tensor<float>(std::move(shape));
    else
      t->zero();
  };
  prepare(heat_a, {b, kDays, kHours, ca});
  prepare(heat_b, {b, kDays, kHours, cb});
  prepare(demo, {b, dw});

  auto scatter = [](Tensor<float>& t, const SparseHeatmap& hm, const std::vector<bool>& log1p_c,
                    int row, int channels) {
    float* base = t.ptr() + static_cast<std::int64_t>(row) * kDays * kHours * channels;
    for (const auto& cell : hm.cells) {
      const std::int64_t idx =
          (static_cast<std::int64_t>(cell.day) * kHours + cell.hour) * channels + cell.channel;
      base[idx] = log1p_c[static_cast<std::size_t>(cell.channel)] ? std::log1p(cell.value)
                                                                  : cell.value;
    }
  };
  for (int i = 0; i < b; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= static_cast<int>(bank.user_ids.size()))
      fail(Errc::invalid_argument, "fill_batch: row ", r, " out of range");
    scatter(*heat_a, bank.heat_a[static_cast<std::size_t>(r)], bank.log1p_a, i, ca);
    scatter(*heat_b, bank.heat_b[static_cast<std::size_t>(r)], bank.log1p_b, i, cb);
    std::memcpy(demo->ptr() + static_cast<std::int64_t>(i) * dw,
                bank.demo_rows[static_cast<std::size_t>(r)].data(), sizeof(float) * dw);
  }
}

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

nn::LrSchedule make_schedule(const std::string& kind, double base_lr, double max_lr,
                             long long step_size, long long t0, double t_mult) {
  nn::LrSchedule s;
  if (kind == "constant")
    s.kind = nn::LrSchedule::Kind::constant;
  else if (kind == "cyclic_triangular")
    s.kind = nn::LrSchedule::Kind::cyclic_triangular;
  else if (kind == "cosine_warm_restarts")
    s.kind = nn::LrSchedule::Kind::cosine_warm_restarts;
  else
    fail(Errc::config, "unknown schedule kind '", kind, "'");
  s.base_lr = base_lr;
  s.max_lr = max_lr;
  s.lr_max = max_lr;
  s.step_size = std::max<long long>(1, step_size);
  s.t0 = std::max<long long>(1, t0);
  s.t_mult = t_mult;
  s.validate();
  return s;
}

PretrainResult train_multitask(ProfileNet<float>& net, const UserTensorBank& bank,
                               const LabelMatrix& labels, const std::vector<int>& train_rows,
                               const PretrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (train_rows.empty()) fail(Errc::invalid_argument, "pretrain: empty training set");
  if (labels.num_tasks < net.shape.num_tasks)
    fail(Errc::invalid_argument, "pretrain: label matrix has ", labels.num_tasks,
         " tasks, network expects ", net.shape.num_tasks);
  for (int r : train_rows)
    if (r < 0 || r >= labels.num_users)
      fail(Errc::invalid_argument, "pretrain: train row ", r, " outside label matrix");

  const int n_tasks = net.shape.num_tasks;
  const long long bpe =
      (static_cast<long long>(train_rows.size()) + cfg.batch - 1) / cfg.batch;
  const nn::LrSchedule sched =
      make_schedule(cfg.schedule, cfg.base_lr, cfg.max_lr,
                    cfg.step_size > 0 ? cfg.step_size : 2 * bpe, 10 * bpe, 2.0);

  PretrainResult result;
  nn::AdamState<float> adam;
  Tensor<float> ha, hb, dm, dlogits;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = train_rows;
    Rng erng(derive_seed(seed, kTagEpoch, static_cast<std::uint64_t>(epoch)));
    erng.shuffle(order);
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), off + static_cast<std::size_t>(cfg.batch));
      const std::vector<int> chunk(order.begin() + static_cast<std::ptrdiff_t>(off),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      fill_batch(bank, chunk, &ha, &hb, &dm);
      const Tensor<float> emb = net.forward_embedding(ha, hb, dm, nn::Mode::train);
      const Tensor<float> logits = net.forward_heads(emb);

      const int b = static_cast<int>(chunk.size());
      Tensor<float> lab({b, n_tasks}), w({b, n_tasks});
      for (int i = 0; i < b; ++i)
        for (int t = 0; t < n_tasks; ++t) {
          lab.at(i, t) = static_cast<float>(labels.label(chunk[static_cast<std::size_t>(i)], t));
          w.at(i, t) = static_cast<float>(labels.mask_at(chunk[static_cast<std::size_t>(i)], t));
        }

      net.zero_grads();
      const double loss = multitask_loss(logits, lab, w, &dlogits);
      const Tensor<float> demb = net.backward_heads(dlogits);
      net.backward_embedding(demb);
      const double lr = nn::lr_at(sched, step);
      nn::adam_step(net.params(), adam, static_cast<float>(lr));
      result.log.push_back({step, lr, loss});
      ++step;
    }
  }
  return result;
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << "step,lr,loss\n";
  for (const auto& r : rows)
    out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.loss) << '\n';
  if (!out) fail(Errc::io, "write failed: ", path);
}

// ---------------------------------------------------------------------------

template struct BranchCnn<float>;
template struct BranchCnn<double>;
template struct ProfileNet<float>;
template struct ProfileNet<double>;
template float multitask_loss<float>(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, Tensor<float>*);
template double multitask_loss<double>(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, Tensor<double>*);

}  // namespace mp
