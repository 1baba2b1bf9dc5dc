#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mp::nn {

struct GradCheckReport {
  struct Group {
    std::string name;
    double max_rel_error = 0.0;
    std::int64_t count = 0;
  };
  std::vector<Group> groups;

  double max_rel_error() const;
  std::string to_string() const;
};

// One contiguous block of scalars to perturb, with the matching analytic
// gradient storage.
struct GradCheckTarget {
  std::string name;
  double* value = nullptr;
  const double* grad = nullptr;
  std::int64_t size = 0;
};

// Central-difference verification. `backward` must zero gradients, run the
// forward and backward passes, and leave analytic gradients in the target
// grad buffers; `loss` must recompute the scalar loss from current values
// without touching gradients. Relative error uses max(|analytic|, |numeric|)
// as the denominator; pairs below 1e-8 in magnitude count as exact.
GradCheckReport grad_check(const std::vector<GradCheckTarget>& targets,
                           const std::function<double()>& loss,
                           const std::function<void()>& backward, double h = 1e-5);

// Prebuilt randomized single-layer instances (double precision). When
// `corrupt` is set the analytic gradient is deliberately damaged so the
// reported error must blow up; used as the harness negative control.
GradCheckReport check_dense(std::uint64_t seed, bool corrupt = false);
GradCheckReport check_conv(std::uint64_t seed, int kh, int kw, bool corrupt = false);
GradCheckReport check_batchnorm(std::uint64_t seed, bool corrupt = false);
GradCheckReport check_maxpool(std::uint64_t seed);
GradCheckReport check_relu(std::uint64_t seed);
GradCheckReport check_sigmoid_bce(std::uint64_t seed);
GradCheckReport check_softmax_ce(std::uint64_t seed);
// Conv -> batch norm -> ReLU -> pool -> conv -> pool -> flatten -> dense ->
// weighted BCE, all parameters and the input checked together.
GradCheckReport check_composed_branch(std::uint64_t seed);

}  // namespace mp::nn
