#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "dbdh/core/image_ops.hpp"
#include "dbdh/core/tensor.hpp"

namespace dbdh {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Four ordered corner points, semantic order TL, TR, BR, BL of the
/// unwarped region. Image coordinates are y-down; in that convention this
/// order has positive shoelace area.
struct VertexSet {
  std::array<Vec2, 4> points;
  int frame_h = 0;
  int frame_w = 0;
};

struct Quadrilateral {
  std::array<Vec2, 4> points;  // TL, TR, BR, BL semantic order
};

inline Quadrilateral quad_of(const VertexSet& v) { return {v.points}; }

/// 3x3 projective map, normalized so matrix(2,2) == 1.
struct Homography {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();

  Vec2 apply(Vec2 p) const {
    const Eigen::Vector3d q = matrix * Eigen::Vector3d(p.x, p.y, 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
  }
  Homography inverse() const {
    Eigen::Matrix3d inv = matrix.inverse();
    return {inv / inv(2, 2)};
  }
};

double shoelace_area(const std::array<Vec2, 4>& pts);
bool quad_is_simple(const std::array<Vec2, 4>& pts);
bool quad_is_convex(const std::array<Vec2, 4>& pts);

/// Per-channel argmax decode, ties broken by smallest row-major index.
/// Channel k maps to semantic corner k (TL, TR, BR, BL).
template <typename T>
VertexSet decode_vertices(const Tensor<T>& heatmaps) {
  if (heatmaps.c() != 4) throw ShapeError("decode_vertices: expected 4 channels");
  VertexSet v;
  v.frame_h = heatmaps.h();
  v.frame_w = heatmaps.w();
  for (int c = 0; c < 4; ++c) {
    T best = heatmaps(0, c, 0, 0);
    int by = 0, bx = 0;
    for (int y = 0; y < heatmaps.h(); ++y)
      for (int x = 0; x < heatmaps.w(); ++x) {
        const T val = heatmaps(0, c, y, x);
        if (val > best) {
          best = val;
          by = y;
          bx = x;
        }
      }
    v.points[c] = {static_cast<double>(bx), static_cast<double>(by)};
  }
  return v;
}

/// Exact 4-point DLT solution mapping src[i] -> dst[i].
Homography estimate_homography(const std::array<Vec2, 4>& src,
                               const std::array<Vec2, 4>& dst);

struct IouResult {
  double iou = 0.0;
  bool rasterized_fallback = false;
};

/// Quadrilateral IoU via convex clipping and shoelace areas; falls back to
/// a 2x-supersampled rasterized IoU when an input is non-convex or
/// self-intersecting (flagged in the result).
IouResult quad_iou(const Quadrilateral& a, const Quadrilateral& b);

/// Warp so the quad corners land on the output rectangle corners
/// (TL->(0,0), TR->(w-1,0), BR->(w-1,h-1), BL->(0,h-1)), bilinear sampling.
template <typename T>
Tensor<T> rectify(const Tensor<T>& image, const Quadrilateral& quad, int out_h,
                  int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ConfigError("rectify: out_size must be positive");
  if (!quad_is_simple(quad.points) || std::abs(shoelace_area(quad.points)) < 1e-9)
    throw DegenerateRegionError("rectify: degenerate quadrilateral");
  const std::array<Vec2, 4> rect = {
      Vec2{0.0, 0.0}, Vec2{static_cast<double>(out_w - 1), 0.0},
      Vec2{static_cast<double>(out_w - 1), static_cast<double>(out_h - 1)},
      Vec2{0.0, static_cast<double>(out_h - 1)}};
  const Homography out_to_in = estimate_homography(rect, quad.points);
  Tensor<T> out(image.n(), image.c(), out_h, out_w);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const Vec2 src = out_to_in.apply({static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < image.c(); ++c)
        out(0, c, y, x) = bilinear_at(image, c, src.x, src.y);
    }
  return out;
}

}  // namespace dbdh
