#pragma once

#include <array>
#include <optional>
#include <vector>

#include "dbdh/core/rng.hpp"
#include "dbdh/core/tensor.hpp"
#include "dbdh/geometry.hpp"
#include "dbdh/supervision.hpp"

namespace dbdh {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// A sampled random perspective transform; `matrix` maps original to
/// displaced coordinates and is normalized so element (2,2) == 1.
struct HomographySample {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  std::array<Vec2, 4> corner_offsets{};
  double scale = 0.0;
};

/// Print-shooting augmentation channel (Aug-SS) configuration.
struct AugConfigSS {
  std::vector<int> blur_kernels = {3, 5, 7};
  Range brightness = {-0.3, 0.3};
  Range contrast = {0.5, 1.5};
  Range saturation = {0.0, 1.0};
  Range hue = {-0.2, 0.2};
  Range noise_sigma = {0.0, 0.2};
  Range jpeg_quality = {50, 100};
  double perspective_scale = 0.3;
  bool enable_blur = true;
  bool enable_color_jitter = true;
  bool enable_noise = true;
  bool enable_jpeg = true;
};

/// Screen-shooting augmentation channel (Aug-PIMoG) configuration.
struct AugConfigPIMoG {
  double perspective_scale = 0.3;
  Range illum = {0.7, 1.3};
  Range moire_amplitude = {0.0, 0.1};
  Range moire_freq = {0.05, 0.25};  // cycles per pixel
  Range noise_sigma = {0.0, 0.2};
  bool enable_illum = true;
  bool enable_moire = true;
  bool enable_noise = true;
};

/// JSON documents mirroring the config fields (CLI `--aug-config`).
std::string aug_ss_to_json(const AugConfigSS& cfg);
AugConfigSS aug_ss_from_json(const std::string& text);
std::string aug_pimog_to_json(const AugConfigPIMoG& cfg);
AugConfigPIMoG aug_pimog_from_json(const std::string& text);

/// Displace each image corner uniformly in [-scale/2, +scale/2]*min(H,W)
/// and solve the exact 4-point homography; near-singular samples are
/// redrawn (up to 8 attempts).
HomographySample sample_perspective(int frame_h, int frame_w, double scale,
                                    Rng& rng);

struct WarpedSample {
  Tensor<float> image;
  VertexSet vertices;
  RegionMask<float> mask;
};

/// Warp image (bilinear, black fill) and mask (bilinear, kept fractional)
/// while vertices are mapped by the exact projective formula. Returns
/// nullopt when a warped vertex leaves the frame (caller resamples).
std::optional<WarpedSample> warp_sample(const Tensor<float>& image,
                                        const VertexSet& vertices,
                                        const RegionMask<float>& mask,
                                        const HomographySample& hs);

/// Pixel-level print-shooting distortions, applied in the order
/// blur -> color jitter -> Gaussian noise -> JPEG round trip.
Tensor<float> distort_ss(const Tensor<float>& image, const AugConfigSS& cfg,
                         Rng& rng);

/// Pixel-level screen-shooting distortions: illumination map, moire
/// pattern, Gaussian noise.
Tensor<float> distort_pimog(const Tensor<float>& image,
                            const AugConfigPIMoG& cfg, Rng& rng);

// Kernel builders, exposed for tests.
RowMat<double> motion_blur_kernel(int size, double angle_rad);
RowMat<double> defocus_blur_kernel(int size);

}  // namespace dbdh
