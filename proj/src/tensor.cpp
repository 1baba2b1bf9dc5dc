#include "mpnet/tensor.hpp"

#include <Eigen/Dense>

namespace mp {

namespace {
template <class T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

template <class T>
void gemm(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  CMatMap<T> ma(a, m, k), mb(b, k, n);
  MatMap<T> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb;
  else
    mc.noalias() = ma * mb;
}

template <class T>
void gemm_at_b(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  CMatMap<T> ma(a, m, k), mb(b, m, n);
  MatMap<T> mc(c, k, n);
  if (accumulate)
    mc.noalias() += ma.transpose() * mb;
  else
    mc.noalias() = ma.transpose() * mb;
}

template <class T>
void gemm_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  CMatMap<T> ma(a, m, n), mb(b, k, n);
  MatMap<T> mc(c, m, k);
  if (accumulate)
    mc.noalias() += ma * mb.transpose();
  else
    mc.noalias() = ma * mb.transpose();
}

template void gemm<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_at_b<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_at_b<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_a_bt<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_a_bt<double>(const double*, const double*, double*, int, int, int, bool);

}  // namespace mp
