#pragma once

#include <cmath>
#include <optional>

#include "dbdh/core/tensor.hpp"
#include "dbdh/geometry.hpp"

namespace dbdh {

/// 4 x H x W Gaussian vertex targets; one exact 1.0 peak per channel.
template <typename T>
struct Heatmap {
  Tensor<T> data;
  double sigma = 5.0;
};

/// H x W region target in [0, 1]; binary after rendering, fractional only
/// after warping.
template <typename T>
using RegionMask = Tensor<T>;

struct LossWeights {
  double lambda_det = 1.0;
  double lambda_seg = 10.0;
  double alpha = 2.0;
  double beta = 4.0;
};

inline constexpr double kProbClamp = 1e-6;

/// Render the 4-channel Gaussian heatmap. The Gaussian of each channel is
/// centered on the nearest integer pixel of its vertex so that pixel holds
/// exactly 1; channel order TL, TR, BR, BL.
template <typename T>
Heatmap<T> render_heatmaps(const VertexSet& vertices, int frame_h, int frame_w,
                           double sigma = 5.0) {
  for (const auto& p : vertices.points)
    if (p.x < 0 || p.x >= frame_w || p.y < 0 || p.y >= frame_h)
      throw OutOfFrameError("render_heatmaps: vertex outside frame");
  Heatmap<T> hm;
  hm.sigma = sigma;
  hm.data = Tensor<T>(1, 4, frame_h, frame_w);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int c = 0; c < 4; ++c) {
    const double cx = std::round(vertices.points[c].x);
    const double cy = std::round(vertices.points[c].y);
    for (int y = 0; y < frame_h; ++y) {
      const double dy2 = (y - cy) * (y - cy);
      for (int x = 0; x < frame_w; ++x) {
        const double d2 = (x - cx) * (x - cx) + dy2;
        hm.data(0, c, y, x) = static_cast<T>(std::exp(-d2 * inv));
      }
    }
  }
  return hm;
}

/// Rasterize the quadrilateral interior (pixel-center test, half-open
/// boundary rule).
template <typename T>
RegionMask<T> render_mask(const VertexSet& vertices, int frame_h, int frame_w) {
  const auto& pts = vertices.points;
  if (!quad_is_simple(pts))
    throw DegenerateRegionError("render_mask: self-intersecting quadrilateral");
  if (std::abs(shoelace_area(pts)) < 1e-12)
    throw DegenerateRegionError("render_mask: zero-area quadrilateral");
  Tensor<T> mask(1, 1, frame_h, frame_w);
  for (int y = 0; y < frame_h; ++y)
    for (int x = 0; x < frame_w; ++x) {
      bool inside = false;
      for (int i = 0, j = 3; i < 4; j = i++) {
        const Vec2& a = pts[i];
        const Vec2& b = pts[j];
        if ((a.y > y) != (b.y > y) &&
            x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x)
          inside = !inside;
      }
      mask(0, 0, y, x) = inside ? T(1) : T(0);
    }
  return mask;
}

template <typename T>
T clamp_prob(T p) {
  if (std::isnan(p)) return p;  // keep NaN visible to the non-finite guard
  return std::min(static_cast<T>(1.0 - kProbClamp),
                  std::max(static_cast<T>(kProbClamp), p));
}

/// Penalty-reduced focal loss over Gaussian heatmaps, SUM reduction:
///   gt == 1:  -(1-p)^alpha * log p
///   else:     -(1-g)^beta * p^alpha * log(1-p)
/// Predictions are clamped to [1e-6, 1-1e-6] before the logs.
/// When `grad` is given, accumulates d(loss)/d(pred) into it.
template <typename T>
double focal_heatmap_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                          double alpha = 2.0, double beta = 4.0,
                          Tensor<T>* grad = nullptr) {
  if (!pred.same_shape(gt))
    throw ShapeError("focal_heatmap_loss: shape mismatch");
  const T* pp = pred.data();
  const T* gp = gt.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = static_cast<double>(clamp_prob(pp[i]));
    const double g = static_cast<double>(gp[i]);
    if (g == 1.0) {
      const double om = 1.0 - p;
      loss -= std::pow(om, alpha) * std::log(p);
      if (grad)
        grad->data()[i] += static_cast<T>(alpha * std::pow(om, alpha - 1.0) *
                                              std::log(p) -
                                          std::pow(om, alpha) / p);
    } else {
      const double pen = std::pow(1.0 - g, beta);
      loss -= pen * std::pow(p, alpha) * std::log(1.0 - p);
      if (grad)
        grad->data()[i] += static_cast<T>(
            -pen * (alpha * std::pow(p, alpha - 1.0) * std::log(1.0 - p) -
                    std::pow(p, alpha) / (1.0 - p)));
    }
  }
  return loss;
}

/// Binary cross entropy, MEAN reduction over H*W (and batch when present).
template <typename T>
double bce_mask_loss(const Tensor<T>& pred, const Tensor<T>& gt,
                     Tensor<T>* grad = nullptr) {
  if (!pred.same_shape(gt)) throw ShapeError("bce_mask_loss: shape mismatch");
  const T* pp = pred.data();
  const T* gp = gt.data();
  const double scale = 1.0 / static_cast<double>(pred.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = static_cast<double>(clamp_prob(pp[i]));
    const double m = static_cast<double>(gp[i]);
    loss -= m * std::log(p) + (1.0 - m) * std::log(1.0 - p);
    if (grad)
      grad->data()[i] +=
          static_cast<T>(scale * (-m / p + (1.0 - m) / (1.0 - p)));
  }
  return loss * scale;
}

inline double total_loss(double det, double seg, const LossWeights& w = {}) {
  return w.lambda_det * det + w.lambda_seg * seg;
}

}  // namespace dbdh
