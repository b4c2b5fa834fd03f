#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "dbdh/core/tensor.hpp"

namespace dbdh {

template <typename T>
T clamp01(T v) {
  return std::min(T(1), std::max(T(0), v));
}

template <typename T>
void clamp01_inplace(Tensor<T>& t) {
  T* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = clamp01(p[i]);
}

/// Reflect index into [0, n) without repeating the border sample
/// (NumPy "reflect" / OpenCV BORDER_REFLECT_101). Requires n >= 2 for
/// out-of-range access.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

/// Bilinear fetch at real coordinates (x, y); out-of-frame contributions
/// are treated as black. Integer coordinates return the pixel exactly.
template <typename T>
T bilinear_at(const Tensor<T>& img, int ch, double x, double y) {
  const int h = img.h(), w = img.w();
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double ax = x - fx0, ay = y - fy0;
  auto fetch = [&](int yy, int xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return static_cast<double>(img(0, ch, yy, xx));
  };
  double v = 0.0;
  const double w00 = (1.0 - ax) * (1.0 - ay);
  const double w01 = ax * (1.0 - ay);
  const double w10 = (1.0 - ax) * ay;
  const double w11 = ax * ay;
  if (w00 != 0.0) v += w00 * fetch(y0, x0);
  if (w01 != 0.0) v += w01 * fetch(y0, x0 + 1);
  if (w10 != 0.0) v += w10 * fetch(y0 + 1, x0);
  if (w11 != 0.0) v += w11 * fetch(y0 + 1, x0 + 1);
  return static_cast<T>(v);
}

/// Bilinear resize with the align_corners=false convention:
/// src = (dst + 0.5) * (in / out) - 0.5, with source samples clamped to the
/// frame. The same convention is used by the in-network upsampling layers.
namespace detail {

struct ResizeTap {
  int i0 = 0, i1 = 0;
  double frac = 0.0;
};

inline std::vector<ResizeTap> resize_taps(int in, int out) {
  std::vector<ResizeTap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
    taps[o].i0 = static_cast<int>(std::floor(src));
    taps[o].i1 = std::min(taps[o].i0 + 1, in - 1);
    taps[o].frac = src - taps[o].i0;
  }
  return taps;
}

}  // namespace detail

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& img, int out_h, int out_w) {
  const int h = img.h(), w = img.w(), c = img.c();
  Tensor<T> out(img.n(), c, out_h, out_w);
  const auto ytaps = detail::resize_taps(h, out_h);
  const auto xtaps = detail::resize_taps(w, out_w);
  for (int n = 0; n < img.n(); ++n) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = &img(n, ch, 0, 0);
      T* dst = &out(n, ch, 0, 0);
#pragma omp parallel for
      for (int oy = 0; oy < out_h; ++oy) {
        const auto& ty = ytaps[oy];
        const T* r0 = src + static_cast<std::size_t>(ty.i0) * w;
        const T* r1 = src + static_cast<std::size_t>(ty.i1) * w;
        T* orow = dst + static_cast<std::size_t>(oy) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
          const auto& tx = xtaps[ox];
          const double top = (1 - tx.frac) * r0[tx.i0] + tx.frac * r0[tx.i1];
          const double bot = (1 - tx.frac) * r1[tx.i0] + tx.frac * r1[tx.i1];
          orow[ox] = static_cast<T>((1 - ty.frac) * top + ty.frac * bot);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.h() || x0 + w > img.w())
    throw BoundsError("crop: rectangle outside image");
  Tensor<T> out(img.n(), img.c(), h, w);
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      out.plane(n, c) = img.plane(n, c).block(y0, x0, h, w);
  return out;
}

/// Symmetric reflect padding (border-101).
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& img, int top, int bottom, int left,
                      int right) {
  const int h = img.h(), w = img.w();
  Tensor<T> out(img.n(), img.c(), h + top + bottom, w + left + right);
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < out.h(); ++y) {
        const int sy = reflect_index(y - top, h);
        for (int x = 0; x < out.w(); ++x)
          out(n, c, y, x) = img(n, c, sy, reflect_index(x - left, w));
      }
  return out;
}

/// Dense 2D cross-correlation of every channel with one small kernel,
/// reflect-padded to preserve the frame. Used by the blur stages.
template <typename T>
Tensor<T> correlate_reflect(const Tensor<T>& img, const RowMat<double>& kernel) {
  const int kh = static_cast<int>(kernel.rows());
  const int kw = static_cast<int>(kernel.cols());
  const int ry = kh / 2, rx = kw / 2;
  const int h = img.h(), w = img.w();
  Tensor<T> out(img.n(), img.c(), h, w);
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < kh; ++ky) {
            const int sy = reflect_index(y + ky - ry, h);
            for (int kx = 0; kx < kw; ++kx)
              acc += kernel(ky, kx) * img(n, c, sy, reflect_index(x + kx - rx, w));
          }
          out(n, c, y, x) = static_cast<T>(acc);
        }
  return out;
}

/// BT.601 luma.
template <typename T>
double luma(T r, T g, T b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

/// RGB [0,1] -> HSV with h in [0,1) turns.
inline void rgb_to_hsv(double r, double g, double b, double& h, double& s,
                       double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g,
                       double& b) {
  h = h - std::floor(h);
  const double hh = h * 6.0;
  const int i = std::min(5, static_cast<int>(hh));
  const double f = hh - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace dbdh
