#pragma once

#include <cmath>
#include <vector>

#include "dbdh/nn/param.hpp"

namespace dbdh::nn {

/// Bilinear upsampling by an integer factor, align_corners=false:
/// src = (dst + 0.5) / factor - 0.5 with border clamping.
template <typename T>
class BilinearUpsample {
 public:
  BilinearUpsample() = default;
  explicit BilinearUpsample(int factor) : factor_(factor) {}

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    const int h = x.h(), w = x.w();
    const int oh = h * factor_, ow = w * factor_;
    build_taps(h, w);
    Tensor<T> y(x.n(), x.c(), oh, ow);
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c) {
        const T* src = &x(n, c, 0, 0);
        T* dst = &y(n, c, 0, 0);
        for (int oy = 0; oy < oh; ++oy) {
          const Tap& ty = ytaps_[oy];
          for (int ox = 0; ox < ow; ++ox) {
            const Tap& tx = xtaps_[ox];
            dst[static_cast<std::size_t>(oy) * ow + ox] = static_cast<T>(
                ty.w0 * (tx.w0 * src[ty.i0 * w + tx.i0] + tx.w1 * src[ty.i0 * w + tx.i1]) +
                ty.w1 * (tx.w0 * src[ty.i1 * w + tx.i0] + tx.w1 * src[ty.i1 * w + tx.i1]));
          }
        }
      }
    if (cache) { in_h_ = h; in_w_ = w; }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int oh = dy.h(), ow = dy.w();
    Tensor<T> dx(dy.n(), dy.c(), in_h_, in_w_);
    for (int n = 0; n < dy.n(); ++n)
      for (int c = 0; c < dy.c(); ++c) {
        const T* g = &dy(n, c, 0, 0);
        T* dst = &dx(n, c, 0, 0);
        for (int oy = 0; oy < oh; ++oy) {
          const Tap& ty = ytaps_[oy];
          for (int ox = 0; ox < ow; ++ox) {
            const Tap& tx = xtaps_[ox];
            const double v = g[static_cast<std::size_t>(oy) * ow + ox];
            dst[ty.i0 * in_w_ + tx.i0] += static_cast<T>(ty.w0 * tx.w0 * v);
            dst[ty.i0 * in_w_ + tx.i1] += static_cast<T>(ty.w0 * tx.w1 * v);
            dst[ty.i1 * in_w_ + tx.i0] += static_cast<T>(ty.w1 * tx.w0 * v);
            dst[ty.i1 * in_w_ + tx.i1] += static_cast<T>(ty.w1 * tx.w1 * v);
          }
        }
      }
    return dx;
  }

 private:
  struct Tap {
    int i0 = 0, i1 = 0;
    double w0 = 1.0, w1 = 0.0;
  };

  void build_taps(int h, int w) {
    ytaps_.resize(static_cast<std::size_t>(h) * factor_);
    xtaps_.resize(static_cast<std::size_t>(w) * factor_);
    auto fill = [&](std::vector<Tap>& taps, int in) {
      for (std::size_t d = 0; d < taps.size(); ++d) {
        double s = (d + 0.5) / factor_ - 0.5;
        s = std::min(std::max(s, 0.0), static_cast<double>(in - 1));
        Tap t;
        t.i0 = static_cast<int>(std::floor(s));
        t.i1 = std::min(t.i0 + 1, in - 1);
        t.w1 = s - t.i0;
        t.w0 = 1.0 - t.w1;
        taps[d] = t;
      }
    };
    fill(ytaps_, h);
    fill(xtaps_, w);
  }

  int factor_ = 2;
  int in_h_ = 0, in_w_ = 0;
  std::vector<Tap> ytaps_, xtaps_;
};

}  // namespace dbdh::nn
