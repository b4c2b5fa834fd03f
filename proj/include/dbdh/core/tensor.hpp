#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "dbdh/core/error.hpp"

namespace dbdh {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Dense NCHW tensor over a contiguous buffer. Images are tensors with
/// n == 1 and c in {1, 3, 4}; feature maps carry the batch in n.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  Tensor(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w),
        data_(static_cast<std::size_t>(n) * c * h * w, T(0)) {}

  static Tensor image(int c, int h, int w) { return Tensor(1, c, h, w); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator()(int n, int c, int y, int x) {
    return data_[((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x];
  }
  const T& operator()(int n, int c, int y, int x) const {
    return data_[((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x];
  }

  /// h x w view of one (n, c) plane.
  Eigen::Map<RowMat<T>> plane(int n, int c) {
    return Eigen::Map<RowMat<T>>(
        data_.data() + (static_cast<std::size_t>(n) * c_ + c) * h_ * w_, h_, w_);
  }
  Eigen::Map<const RowMat<T>> plane(int n, int c) const {
    return Eigen::Map<const RowMat<T>>(
        data_.data() + (static_cast<std::size_t>(n) * c_ + c) * h_ * w_, h_, w_);
  }

  /// c x (h*w) view of one batch element.
  Eigen::Map<RowMat<T>> chw(int n) {
    return Eigen::Map<RowMat<T>>(
        data_.data() + static_cast<std::size_t>(n) * c_ * h_ * w_, c_,
        static_cast<Eigen::Index>(h_) * w_);
  }
  Eigen::Map<const RowMat<T>> chw(int n) const {
    return Eigen::Map<const RowMat<T>>(
        data_.data() + static_cast<std::size_t>(n) * c_ * h_ * w_, c_,
        static_cast<Eigen::Index>(h_) * w_);
  }

  /// Flat vector view of the whole buffer.
  Eigen::Map<VecX<T>> vec() {
    return Eigen::Map<VecX<T>>(data_.data(),
                               static_cast<Eigen::Index>(data_.size()));
  }
  Eigen::Map<const VecX<T>> vec() const {
    return Eigen::Map<const VecX<T>>(data_.data(),
                                     static_cast<Eigen::Index>(data_.size()));
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), T(0)); }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, c_, h_, w_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.n(), t.c(), t.h(), t.w());
}

template <typename T>
void require_shape(const Tensor<T>& t, int n, int c, int h, int w,
                   const char* what) {
  if (t.n() != n || t.c() != c || t.h() != h || t.w() != w)
    throw ShapeError(std::string(what) + ": unexpected tensor shape");
}

}  // namespace dbdh
