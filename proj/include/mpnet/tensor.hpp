#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "mpnet/common.hpp"

namespace mp {

// Shape-tagged row-major array. float for training, double for gradient checks.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  }

  Tensor(std::initializer_list<int> s) : Tensor(std::vector<int>(s)) {}

  static std::int64_t numel_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) fail(Errc::invalid_argument, "tensor dims must be positive, got ", d);
      n *= d;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  // 2-d and 4-d accessors for the common layouts (rows, cols) and (B, H, W, C).
  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

  T& at(int b, int h, int w, int c) {
    return data[((static_cast<std::size_t>(b) * shape[1] + h) * shape[2] + w) * shape[3] + c];
  }
  const T& at(int b, int h, int w, int c) const {
    return data[((static_cast<std::size_t>(b) * shape[1] + h) * shape[2] + w) * shape[3] + c];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<int> s) const {
    if (numel_of(s) != numel())
      fail(Errc::invalid_argument, "reshape: element count mismatch (", numel_of(s), " vs ",
           numel(), ")");
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <class T>
std::string shape_str(const Tensor<T>& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

// C (M,N) = or += A (M,K) * B (K,N), all row-major contiguous. Eigen-backed.
template <class T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

// C (K,N) accumulate A^T * B with A (M,K), B (M,N).
template <class T>
void gemm_at_b(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

// C (M,K) = or += A (M,N) * B^T with B (K,N).
template <class T>
void gemm_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);

}  // namespace mp
