#pragma once

#include <limits>
#include <vector>

#include "dbdh/nn/param.hpp"

namespace dbdh::nn {

/// Max pooling with argmax cache for the backward pass.
template <typename T>
class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(int k, int stride, int pad) : k_(k), stride_(stride), pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    const int h = x.h(), w = x.w();
    const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
    Tensor<T> y(x.n(), x.c(), oh, ow);
    if (cache) {
      in_h_ = h; in_w_ = w;
      argmax_.assign(y.size(), 0);
    }
    std::size_t o = 0;
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c) {
        const T* src = &x(n, c, 0, 0);
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++o) {
            T best = std::numeric_limits<T>::lowest();
            int best_idx = 0;
            for (int ky = 0; ky < k_; ++ky) {
              const int sy = oy * stride_ - pad_ + ky;
              if (sy < 0 || sy >= h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int sx = ox * stride_ - pad_ + kx;
                if (sx < 0 || sx >= w) continue;
                const T v = src[sy * w + sx];
                if (v > best) {
                  best = v;
                  best_idx = sy * w + sx;
                }
              }
            }
            y.data()[o] = best;
            if (cache) argmax_[o] = best_idx;
          }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n(), dy.c(), in_h_, in_w_);
    std::size_t o = 0;
    for (int n = 0; n < dy.n(); ++n)
      for (int c = 0; c < dy.c(); ++c) {
        T* dst = &dx(n, c, 0, 0);
        const std::size_t plane = static_cast<std::size_t>(dy.h()) * dy.w();
        for (std::size_t i = 0; i < plane; ++i, ++o)
          dst[argmax_[o]] += dy.data()[o];
      }
    return dx;
  }

 private:
  int k_ = 3, stride_ = 2, pad_ = 1;
  int in_h_ = 0, in_w_ = 0;
  std::vector<int> argmax_;
};

/// Mean over the spatial dimensions: (n, c, h, w) -> (n, c, 1, 1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  Tensor<T> y(x.n(), x.c(), 1, 1);
  const double scale = 1.0 / (static_cast<double>(x.h()) * x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      double sum = 0.0;
      const T* p = &x(n, c, 0, 0);
      for (int i = 0; i < x.h() * x.w(); ++i) sum += p[i];
      y(n, c, 0, 0) = static_cast<T>(sum * scale);
    }
  return y;
}

/// Backward of global_avg_pool: broadcast dv / (h*w) over the plane.
template <typename T>
void global_avg_pool_backward(const Tensor<T>& dv, int h, int w,
                              Tensor<T>& dx_accum) {
  const T scale = static_cast<T>(1.0 / (static_cast<double>(h) * w));
  for (int n = 0; n < dv.n(); ++n)
    for (int c = 0; c < dv.c(); ++c) {
      const T g = dv(n, c, 0, 0) * scale;
      T* p = &dx_accum(n, c, 0, 0);
      for (int i = 0; i < h * w; ++i) p[i] += g;
    }
}

}  // namespace dbdh::nn
