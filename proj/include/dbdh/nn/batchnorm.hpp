#pragma once

#include <cmath>

#include "dbdh/nn/param.hpp"

namespace dbdh::nn {

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::string name, int c)
      : name_(std::move(name)), c_(c) {
    gamma_.name = name_ + ".gamma";
    gamma_.decay = false;
    gamma_.init_shape(1, c, 1, 1);
    gamma_.value.fill(T(1));
    beta_.name = name_ + ".beta";
    beta_.decay = false;
    beta_.init_shape(1, c, 1, 1);
    running_mean_ = Tensor<T>(1, c, 1, 1);
    running_var_ = Tensor<T>(1, c, 1, 1);
    running_var_.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, bool cache) {
    const int n = x.n(), h = x.h(), w = x.w();
    const double count = static_cast<double>(n) * h * w;
    Tensor<T> y = zeros_like(x);
    if (train) {
      mean_ = Tensor<T>(1, c_, 1, 1);
      invstd_ = Tensor<T>(1, c_, 1, 1);
      for (int c = 0; c < c_; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int b = 0; b < n; ++b) {
          const T* p = &x(b, c, 0, 0);
          for (int i = 0; i < h * w; ++i) {
            sum += p[i];
            sq += static_cast<double>(p[i]) * p[i];
          }
        }
        const double mean = sum / count;
        const double var = std::max(sq / count - mean * mean, 0.0);
        mean_.data()[c] = static_cast<T>(mean);
        invstd_.data()[c] = static_cast<T>(1.0 / std::sqrt(var + kEps));
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        running_mean_.data()[c] = static_cast<T>(
            (1 - kMomentum) * running_mean_.data()[c] + kMomentum * mean);
        running_var_.data()[c] = static_cast<T>(
            (1 - kMomentum) * running_var_.data()[c] + kMomentum * unbiased);
      }
      if (cache) xhat_ = zeros_like(x);
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < c_; ++c) {
          const T m = mean_.data()[c], is = invstd_.data()[c];
          const T g = gamma_.value.data()[c], bt = beta_.value.data()[c];
          const T* px = &x(b, c, 0, 0);
          T* py = &y(b, c, 0, 0);
          T* ph = cache ? &xhat_(b, c, 0, 0) : nullptr;
          for (int i = 0; i < h * w; ++i) {
            const T xh = (px[i] - m) * is;
            if (ph) ph[i] = xh;
            py[i] = g * xh + bt;
          }
        }
    } else {
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < c_; ++c) {
          const T m = running_mean_.data()[c];
          const T is = static_cast<T>(
              1.0 / std::sqrt(static_cast<double>(running_var_.data()[c]) + kEps));
          const T g = gamma_.value.data()[c], bt = beta_.value.data()[c];
          const T* px = &x(b, c, 0, 0);
          T* py = &y(b, c, 0, 0);
          for (int i = 0; i < h * w; ++i) py[i] = g * (px[i] - m) * is + bt;
        }
    }
    return y;
  }

  /// Backward for the train-mode (batch statistics) path.
  Tensor<T> backward(const Tensor<T>& dy) {
    const int n = dy.n(), h = dy.h(), w = dy.w();
    const double count = static_cast<double>(n) * h * w;
    Tensor<T> dx = zeros_like(dy);
    for (int c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < n; ++b) {
        const T* pdy = &dy(b, c, 0, 0);
        const T* ph = &xhat_(b, c, 0, 0);
        for (int i = 0; i < h * w; ++i) {
          sum_dy += pdy[i];
          sum_dy_xhat += static_cast<double>(pdy[i]) * ph[i];
        }
      }
      gamma_.grad.data()[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad.data()[c] += static_cast<T>(sum_dy);
      const double g_is = static_cast<double>(gamma_.value.data()[c]) *
                          invstd_.data()[c];
      const double mean_dy = sum_dy / count;
      const double mean_dy_xhat = sum_dy_xhat / count;
      for (int b = 0; b < n; ++b) {
        const T* pdy = &dy(b, c, 0, 0);
        const T* ph = &xhat_(b, c, 0, 0);
        T* pdx = &dx(b, c, 0, 0);
        for (int i = 0; i < h * w; ++i)
          pdx[i] = static_cast<T>(g_is * (pdy[i] - mean_dy - ph[i] * mean_dy_xhat));
      }
    }
    return dx;
  }

  void collect_params(ParamRefs<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_buffers(BufferRefs<T>& out) {
    out.emplace_back(name_ + ".running_mean", &running_mean_);
    out.emplace_back(name_ + ".running_var", &running_var_);
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  std::string name_;
  int c_ = 0;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> mean_, invstd_, xhat_;
};

}  // namespace dbdh::nn
