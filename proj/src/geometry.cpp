#include "dbdh/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "dbdh/core/error.hpp"

namespace dbdh {

double shoelace_area(const std::array<Vec2, 4>& pts) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % 4];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

namespace {

double polygon_area(const std::vector<Vec2>& pts) {
  double s = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

bool segments_properly_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const double d1 = cross(p2 - p1, q1 - p1);
  const double d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1);
  const double d4 = cross(q2 - q1, p2 - q1);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

// Even-odd point-in-polygon with half-open boundary behaviour.
bool point_in_polygon(double x, double y, const std::array<Vec2, 4>& pts) {
  bool inside = false;
  for (int i = 0, j = 3; i < 4; j = i++) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[j];
    if ((a.y > y) != (b.y > y) &&
        x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return inside;
}

// Sutherland-Hodgman clip of polygon `subject` by the convex polygon
// `clip` (positive shoelace orientation assumed for `clip`).
std::vector<Vec2> clip_convex(std::vector<Vec2> subject,
                              const std::array<Vec2, 4>& clip) {
  for (int e = 0; e < 4 && !subject.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % 4];
    std::vector<Vec2> out;
    out.reserve(subject.size() + 4);
    const std::size_t n = subject.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 cur = subject[i];
      const Vec2 nxt = subject[(i + 1) % n];
      const double dc = cross(b - a, cur - a);
      const double dn = cross(b - a, nxt - a);
      // Positive orientation: inside is the non-negative side.
      if (dc >= 0) out.push_back(cur);
      if ((dc > 0 && dn < 0) || (dc < 0 && dn > 0)) {
        const double t = dc / (dc - dn);
        out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
      }
    }
    subject = std::move(out);
  }
  return subject;
}

std::array<Vec2, 4> oriented_positive(const std::array<Vec2, 4>& pts) {
  if (shoelace_area(pts) >= 0) return pts;
  return {pts[0], pts[3], pts[2], pts[1]};
}

double rasterized_iou(const Quadrilateral& a, const Quadrilateral& b) {
  double x0 = a.points[0].x, x1 = x0, y0 = a.points[0].y, y1 = y0;
  for (const auto& q : {a, b})
    for (const auto& p : q.points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  // 2x supersampling: sample at half-pixel steps over the joint bbox.
  const double step = 0.5;
  long long inter = 0, uni = 0;
  for (double y = y0 + step / 2; y < y1; y += step)
    for (double x = x0 + step / 2; x < x1; x += step) {
      const bool ia = point_in_polygon(x, y, a.points);
      const bool ib = point_in_polygon(x, y, b.points);
      inter += (ia && ib);
      uni += (ia || ib);
    }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

bool quad_is_simple(const std::array<Vec2, 4>& pts) {
  return !segments_properly_intersect(pts[0], pts[1], pts[2], pts[3]) &&
         !segments_properly_intersect(pts[1], pts[2], pts[3], pts[0]);
}

bool quad_is_convex(const std::array<Vec2, 4>& pts) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2 e1 = pts[(i + 1) % 4] - pts[i];
    const Vec2 e2 = pts[(i + 2) % 4] - pts[(i + 1) % 4];
    const double c = cross(e1, e2);
    if (c == 0.0) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return sign != 0;
}

Homography estimate_homography(const std::array<Vec2, 4>& src,
                               const std::array<Vec2, 4>& dst) {
  for (const auto& pts : {src, dst}) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int k = j + 1; k < 4; ++k) {
          const double a = std::abs(cross(pts[j] - pts[i], pts[k] - pts[i]));
          if (a < 1e-9)
            throw DegenerateRegionError(
                "estimate_homography: three points are collinear");
        }
  }
  Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x, y = src[i].y;
    const double u = dst[i].x, v = dst[i].y;
    A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    rhs(2 * i) = u;
    rhs(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = A.colPivHouseholderQr().solve(rhs);
  Homography out;
  out.matrix << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;

  for (int i = 0; i < 4; ++i) {
    const Vec2 mapped = out.apply(src[i]);
    if (dist(mapped, dst[i]) > 1e-6)
      throw DegenerateRegionError("estimate_homography: degenerate configuration");
  }
  return out;
}

IouResult quad_iou(const Quadrilateral& a, const Quadrilateral& b) {
  const bool clean = quad_is_simple(a.points) && quad_is_simple(b.points) &&
                     quad_is_convex(a.points) && quad_is_convex(b.points);
  if (!clean) return {rasterized_iou(a, b), true};

  const auto pa = oriented_positive(a.points);
  const auto pb = oriented_positive(b.points);
  const double area_a = shoelace_area(pa);
  const double area_b = shoelace_area(pb);
  const auto inter_poly =
      clip_convex(std::vector<Vec2>(pa.begin(), pa.end()), pb);
  const double inter =
      inter_poly.size() >= 3 ? std::abs(polygon_area(inter_poly)) : 0.0;
  const double uni = area_a + area_b - inter;
  return {uni > 0 ? inter / uni : 0.0, false};
}

}  // namespace dbdh
