#include "dbdh/distortion.hpp"

#include <cmath>

#include "dbdh/core/error.hpp"
#include "dbdh/core/image_ops.hpp"
#include "dbdh/io/image_io.hpp"
#include "json.hpp"

namespace dbdh {

namespace {

nlohmann::json range_to_json(const Range& r) { return {r.lo, r.hi}; }

Range range_from_json(const nlohmann::json& j) {
  Range r{j.at(0).get<double>(), j.at(1).get<double>()};
  if (r.hi < r.lo) throw ConfigError("aug config: empty range");
  return r;
}

}  // namespace

std::string aug_ss_to_json(const AugConfigSS& cfg) {
  nlohmann::json j;
  j["blur_kernels"] = cfg.blur_kernels;
  j["brightness"] = range_to_json(cfg.brightness);
  j["contrast"] = range_to_json(cfg.contrast);
  j["saturation"] = range_to_json(cfg.saturation);
  j["hue"] = range_to_json(cfg.hue);
  j["noise_sigma"] = range_to_json(cfg.noise_sigma);
  j["jpeg_quality"] = range_to_json(cfg.jpeg_quality);
  j["perspective_scale"] = cfg.perspective_scale;
  j["enable_blur"] = cfg.enable_blur;
  j["enable_color_jitter"] = cfg.enable_color_jitter;
  j["enable_noise"] = cfg.enable_noise;
  j["enable_jpeg"] = cfg.enable_jpeg;
  return j.dump();
}

AugConfigSS aug_ss_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  AugConfigSS cfg;
  if (j.contains("blur_kernels"))
    cfg.blur_kernels = j.at("blur_kernels").get<std::vector<int>>();
  if (cfg.blur_kernels.empty()) throw ConfigError("aug config: no blur kernels");
  if (j.contains("brightness")) cfg.brightness = range_from_json(j.at("brightness"));
  if (j.contains("contrast")) cfg.contrast = range_from_json(j.at("contrast"));
  if (j.contains("saturation")) cfg.saturation = range_from_json(j.at("saturation"));
  if (j.contains("hue")) cfg.hue = range_from_json(j.at("hue"));
  if (j.contains("noise_sigma")) cfg.noise_sigma = range_from_json(j.at("noise_sigma"));
  if (j.contains("jpeg_quality")) cfg.jpeg_quality = range_from_json(j.at("jpeg_quality"));
  if (j.contains("perspective_scale"))
    cfg.perspective_scale = j.at("perspective_scale").get<double>();
  if (j.contains("enable_blur")) cfg.enable_blur = j.at("enable_blur").get<bool>();
  if (j.contains("enable_color_jitter"))
    cfg.enable_color_jitter = j.at("enable_color_jitter").get<bool>();
  if (j.contains("enable_noise")) cfg.enable_noise = j.at("enable_noise").get<bool>();
  if (j.contains("enable_jpeg")) cfg.enable_jpeg = j.at("enable_jpeg").get<bool>();
  return cfg;
}

std::string aug_pimog_to_json(const AugConfigPIMoG& cfg) {
  nlohmann::json j;
  j["perspective_scale"] = cfg.perspective_scale;
  j["illum"] = range_to_json(cfg.illum);
  j["moire_amplitude"] = range_to_json(cfg.moire_amplitude);
  j["moire_freq"] = range_to_json(cfg.moire_freq);
  j["noise_sigma"] = range_to_json(cfg.noise_sigma);
  j["enable_illum"] = cfg.enable_illum;
  j["enable_moire"] = cfg.enable_moire;
  j["enable_noise"] = cfg.enable_noise;
  return j.dump();
}

AugConfigPIMoG aug_pimog_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  AugConfigPIMoG cfg;
  if (j.contains("perspective_scale"))
    cfg.perspective_scale = j.at("perspective_scale").get<double>();
  if (j.contains("illum")) cfg.illum = range_from_json(j.at("illum"));
  if (j.contains("moire_amplitude"))
    cfg.moire_amplitude = range_from_json(j.at("moire_amplitude"));
  if (j.contains("moire_freq")) cfg.moire_freq = range_from_json(j.at("moire_freq"));
  if (j.contains("noise_sigma")) cfg.noise_sigma = range_from_json(j.at("noise_sigma"));
  if (j.contains("enable_illum")) cfg.enable_illum = j.at("enable_illum").get<bool>();
  if (j.contains("enable_moire")) cfg.enable_moire = j.at("enable_moire").get<bool>();
  if (j.contains("enable_noise")) cfg.enable_noise = j.at("enable_noise").get<bool>();
  return cfg;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::array<Vec2, 4> frame_corners(int h, int w) {
  return {Vec2{0.0, 0.0}, Vec2{static_cast<double>(w - 1), 0.0},
          Vec2{static_cast<double>(w - 1), static_cast<double>(h - 1)},
          Vec2{0.0, static_cast<double>(h - 1)}};
}

}  // namespace

RowMat<double> motion_blur_kernel(int size, double angle_rad) {
  // Rasterized line through the kernel center; each cell weighted by how
  // close the line passes, then L1-normalized.
  RowMat<double> k = RowMat<double>::Zero(size, size);
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  const int r = size / 2;
  const int steps = 8 * size;
  for (int i = -steps; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps * r;
    const int x = static_cast<int>(std::lround(t * c));
    const int y = static_cast<int>(std::lround(t * s));
    if (std::abs(x) <= r && std::abs(y) <= r) k(y + r, x + r) = 1.0;
  }
  k /= k.sum();
  return k;
}

RowMat<double> defocus_blur_kernel(int size) {
  // Disk kernel; cell coverage estimated on a 4x4 subgrid.
  RowMat<double> k(size, size);
  const double r = size / 2.0;
  const int sub = 4;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int hits = 0;
      for (int sy = 0; sy < sub; ++sy)
        for (int sx = 0; sx < sub; ++sx) {
          const double px = x - size / 2.0 + (sx + 0.5) / sub;
          const double py = y - size / 2.0 + (sy + 0.5) / sub;
          if (px * px + py * py <= r * r) ++hits;
        }
      k(y, x) = static_cast<double>(hits) / (sub * sub);
    }
  k /= k.sum();
  return k;
}

HomographySample sample_perspective(int frame_h, int frame_w, double scale,
                                    Rng& rng) {
  if (scale < 0.0 || scale > 0.3)
    throw ConfigError("sample_perspective: scale must be in [0, 0.3]");
  const double amp = 0.5 * scale * std::min(frame_h, frame_w);
  const auto corners = frame_corners(frame_h, frame_w);
  for (int attempt = 0; attempt < 8; ++attempt) {
    HomographySample hs;
    hs.scale = scale;
    std::array<Vec2, 4> displaced;
    for (int i = 0; i < 4; ++i) {
      hs.corner_offsets[i] = {rng.uniform(-amp, amp), rng.uniform(-amp, amp)};
      displaced[i] = corners[i] + hs.corner_offsets[i];
    }
    try {
      Homography h = estimate_homography(corners, displaced);
      if (std::abs(h.matrix.determinant()) <= 1e-9) continue;
      hs.matrix = h.matrix;
      return hs;
    } catch (const DegenerateRegionError&) {
      continue;
    }
  }
  throw NumericError("sample_perspective: repeated degenerate samples");
}

std::optional<WarpedSample> warp_sample(const Tensor<float>& image,
                                        const VertexSet& vertices,
                                        const RegionMask<float>& mask,
                                        const HomographySample& hs) {
  const int h = image.h(), w = image.w();
  if (mask.h() != h || mask.w() != w)
    throw ShapeError("warp_sample: mask/image frame mismatch");

  const Homography fwd{hs.matrix};
  VertexSet out_v = vertices;
  for (auto& p : out_v.points) {
    p = fwd.apply(p);
    if (p.x < 0 || p.x >= w || p.y < 0 || p.y >= h) return std::nullopt;
  }

  const Homography inv = fwd.inverse();
  WarpedSample out{Tensor<float>(1, image.c(), h, w), out_v,
                   Tensor<float>(1, 1, h, w)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec2 src = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < image.c(); ++c)
        out.image(0, c, y, x) = bilinear_at(image, c, src.x, src.y);
      out.mask(0, 0, y, x) = bilinear_at(mask, 0, src.x, src.y);
    }
  return out;
}

Tensor<float> distort_ss(const Tensor<float>& image, const AugConfigSS& cfg,
                         Rng& rng) {
  Tensor<float> img = image;

  if (cfg.enable_blur) {
    const int which = static_cast<int>(rng.uniform_int(0, 1));
    const int size = cfg.blur_kernels[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cfg.blur_kernels.size()) - 1))];
    const double angle = rng.uniform(0.0, kPi);
    const RowMat<double> k =
        which == 0 ? motion_blur_kernel(size, angle) : defocus_blur_kernel(size);
    img = correlate_reflect(img, k);
  }

  if (cfg.enable_color_jitter) {
    const double b = rng.uniform(cfg.brightness.lo, cfg.brightness.hi);
    const double c = rng.uniform(cfg.contrast.lo, cfg.contrast.hi);
    const double s = rng.uniform(cfg.saturation.lo, cfg.saturation.hi);
    const double hshift = rng.uniform(cfg.hue.lo, cfg.hue.hi);

    float* p = img.data();
    for (std::size_t i = 0; i < img.size(); ++i)
      p[i] = clamp01(p[i] + static_cast<float>(b));

    // Contrast scales about the mean luma of the image.
    double mean = 0.0;
    for (int y = 0; y < img.h(); ++y)
      for (int x = 0; x < img.w(); ++x)
        mean += luma(img(0, 0, y, x), img(0, 1, y, x), img(0, 2, y, x));
    mean /= static_cast<double>(img.h()) * img.w();
    for (std::size_t i = 0; i < img.size(); ++i)
      p[i] = clamp01(static_cast<float>(mean + c * (p[i] - mean)));

    // Saturation lerps toward per-pixel gray; factor 0 is grayscale.
    for (int y = 0; y < img.h(); ++y)
      for (int x = 0; x < img.w(); ++x) {
        const double g = luma(img(0, 0, y, x), img(0, 1, y, x), img(0, 2, y, x));
        for (int ch = 0; ch < 3; ++ch)
          img(0, ch, y, x) =
              clamp01(static_cast<float>(g + s * (img(0, ch, y, x) - g)));
      }

    // Hue rotation in HSV; the offset is in turns.
    for (int y = 0; y < img.h(); ++y)
      for (int x = 0; x < img.w(); ++x) {
        double hh, ss, vv, r, g, b2;
        rgb_to_hsv(img(0, 0, y, x), img(0, 1, y, x), img(0, 2, y, x), hh, ss, vv);
        hsv_to_rgb(hh + hshift, ss, vv, r, g, b2);
        img(0, 0, y, x) = clamp01(static_cast<float>(r));
        img(0, 1, y, x) = clamp01(static_cast<float>(g));
        img(0, 2, y, x) = clamp01(static_cast<float>(b2));
      }
  }

  if (cfg.enable_noise) {
    const double sigma = rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi);
    float* p = img.data();
    for (std::size_t i = 0; i < img.size(); ++i)
      p[i] = clamp01(p[i] + static_cast<float>(sigma * rng.normal()));
  }

  if (cfg.enable_jpeg) {
    const int q = static_cast<int>(
        rng.uniform_int(static_cast<std::int64_t>(cfg.jpeg_quality.lo),
                        static_cast<std::int64_t>(cfg.jpeg_quality.hi)));
    img = jpeg_roundtrip(img, q);
  }

  clamp01_inplace(img);
  return img;
}

Tensor<float> distort_pimog(const Tensor<float>& image,
                            const AugConfigPIMoG& cfg, Rng& rng) {
  Tensor<float> img = image;
  const int h = img.h(), w = img.w();

  if (cfg.enable_illum) {
    const int which = static_cast<int>(rng.uniform_int(0, 1));
    const double lo = rng.uniform(cfg.illum.lo, cfg.illum.hi);
    const double hi = rng.uniform(cfg.illum.lo, cfg.illum.hi);
    if (which == 0) {
      // Linear gradient along a random direction.
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      const double cx = std::cos(theta), cy = std::sin(theta);
      const double pmin = std::min({0.0, cx * (w - 1), cy * (h - 1),
                                    cx * (w - 1) + cy * (h - 1)});
      const double pmax = std::max({0.0, cx * (w - 1), cy * (h - 1),
                                    cx * (w - 1) + cy * (h - 1)});
      const double span = std::max(pmax - pmin, 1e-12);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double t = (cx * x + cy * y - pmin) / span;
          const float m = static_cast<float>(lo + (hi - lo) * t);
          for (int c = 0; c < 3; ++c)
            img(0, c, y, x) = clamp01(img(0, c, y, x) * m);
        }
    } else {
      // Radial spotlight: hi at a random center, falling to lo at the
      // farthest corner.
      const double sx = rng.uniform(0.0, w - 1.0);
      const double sy = rng.uniform(0.0, h - 1.0);
      double rmax = 0.0;
      for (const auto& corner : frame_corners(h, w))
        rmax = std::max(rmax, std::hypot(corner.x - sx, corner.y - sy));
      rmax = std::max(rmax, 1e-12);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double t = std::hypot(x - sx, y - sy) / rmax;
          const float m = static_cast<float>(hi + (lo - hi) * t);
          for (int c = 0; c < 3; ++c)
            img(0, c, y, x) = clamp01(img(0, c, y, x) * m);
        }
    }
  }

  if (cfg.enable_moire) {
    // Two near-parallel sinusoidal gratings (angles within 10 degrees).
    const double amp = rng.uniform(cfg.moire_amplitude.lo, cfg.moire_amplitude.hi);
    const double theta1 = rng.uniform(0.0, kPi);
    const double theta2 = theta1 + rng.uniform(-kPi / 18.0, kPi / 18.0);
    const double f1 = rng.uniform(cfg.moire_freq.lo, cfg.moire_freq.hi);
    const double f2 = rng.uniform(cfg.moire_freq.lo, cfg.moire_freq.hi);
    const double p1 = rng.uniform(0.0, 2.0 * kPi);
    const double p2 = rng.uniform(0.0, 2.0 * kPi);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double g1 =
            std::sin(2.0 * kPi * f1 * (x * std::cos(theta1) + y * std::sin(theta1)) + p1);
        const double g2 =
            std::sin(2.0 * kPi * f2 * (x * std::cos(theta2) + y * std::sin(theta2)) + p2);
        const float add = static_cast<float>(0.5 * amp * (g1 + g2));
        for (int c = 0; c < 3; ++c)
          img(0, c, y, x) = clamp01(img(0, c, y, x) + add);
      }
  }

  if (cfg.enable_noise) {
    const double sigma = rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi);
    float* p = img.data();
    for (std::size_t i = 0; i < img.size(); ++i)
      p[i] = clamp01(p[i] + static_cast<float>(sigma * rng.normal()));
  }

  clamp01_inplace(img);
  return img;
}

}  // namespace dbdh
