#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dbdh/core/image_ops.hpp"
#include "dbdh/core/tensor.hpp"

namespace dbdh {

enum class KernelFamily { SRM, GABOR };

struct GaborParams {
  double sigma = 0.0;
  double orientation_rad = 0.0;
  double phase_rad = 0.0;
  double aspect = 0.0;
};

/// One fixed high-pass kernel. `weights` already carries the normalizer
/// division; `normalizer` records the divisor that was applied.
struct KernelSpec {
  KernelFamily family = KernelFamily::SRM;
  int index = 0;        // 0-based within the family
  int size = 3;         // 3 or 5
  double normalizer = 1.0;
  RowMat<double> weights;  // size x size
  std::optional<GaborParams> params;
};

/// The 62-kernel bank: SRM indices 0-29 first, then Gabor 0-31. All kernels
/// are applied on a uniform 5x5 support (smaller ones are zero-padded).
struct FilterBank {
  std::vector<KernelSpec> kernels;
  int pad_size = 5;
};

/// The 30 basic SRM residual kernels: 8 first-order, 4 second-order and
/// 8 third-order directional residuals, the 3x3/5x5 SQUARE kernels and the
/// 3x3/5x5 EDGE kernels (4 rotations each). Each is stored divided by its
/// class normalizer (1, 2, 3, 4, 12) so the central coefficient has
/// magnitude 1.
std::vector<KernelSpec> build_srm_bank();

/// Zero-mean, L1-normalized 5x5 Gabor kernels on an
/// orientations x phases x sigmas grid (must multiply to 32).
/// Aspect ratio 0.5, wavelength 4*sigma.
std::vector<KernelSpec> build_gabor_bank(
    int orientations = 8,
    const std::vector<double>& phases = {0.0, 1.5707963267948966},
    const std::vector<double>& sigmas = {0.75, 1.5});

FilterBank build_filter_bank();

/// Kernel weights zero-padded to pad x pad.
RowMat<double> padded_weights(const KernelSpec& k, int pad);

std::string filter_bank_to_json(const FilterBank& bank);
FilterBank filter_bank_from_json(const std::string& text);

/// Append the BT.601 luma channel: (R,G,B) -> (R,G,B,Y).
template <typename T>
Tensor<T> rgb_to_rgby(const Tensor<T>& image) {
  if (image.c() != 3) throw ShapeError("rgb_to_rgby: expected 3 channels");
  Tensor<T> out(image.n(), 4, image.h(), image.w());
  for (int n = 0; n < image.n(); ++n) {
    for (int c = 0; c < 3; ++c) out.plane(n, c) = image.plane(n, c);
    for (int y = 0; y < image.h(); ++y)
      for (int x = 0; x < image.w(); ++x)
        out(n, 3, y, x) = static_cast<T>(
            luma(image(n, 0, y, x), image(n, 1, y, x), image(n, 2, y, x)));
  }
  return out;
}

/// Apply all 62 kernels to each of the 4 channels (cross-correlation,
/// stride 1, reflect padding). Output channel order is channel-major:
/// [ch0 x k0..k61, ch1 x k0..k61, ...].
template <typename T>
Tensor<T> apply_bank(const FilterBank& bank, const Tensor<T>& image) {
  if (image.c() != 4) throw ShapeError("apply_bank: expected 4 channels");
  const int h = image.h(), w = image.w();
  if (h < bank.pad_size || w < bank.pad_size)
    throw ShapeError("apply_bank: input smaller than the 5x5 kernel support");
  const int nk = static_cast<int>(bank.kernels.size());
  const int r = bank.pad_size / 2;
  Tensor<T> out(image.n(), 4 * nk, h, w);

  // Gather the reflect-padded 5x5 neighborhoods once per channel, then hit
  // them with all kernels in a single matrix product.
  RowMat<double> kmat(nk, bank.pad_size * bank.pad_size);
  for (int k = 0; k < nk; ++k) {
    const RowMat<double> pw = padded_weights(bank.kernels[k], bank.pad_size);
    for (int i = 0; i < bank.pad_size; ++i)
      for (int j = 0; j < bank.pad_size; ++j)
        kmat(k, i * bank.pad_size + j) = pw(i, j);
  }
  ColMat<double> col(bank.pad_size * bank.pad_size,
                     static_cast<Eigen::Index>(h) * w);
  for (int n = 0; n < image.n(); ++n) {
    for (int ch = 0; ch < 4; ++ch) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const Eigen::Index cidx = static_cast<Eigen::Index>(y) * w + x;
          for (int ky = -r; ky <= r; ++ky) {
            const int sy = reflect_index(y + ky, h);
            for (int kx = -r; kx <= r; ++kx)
              col((ky + r) * bank.pad_size + (kx + r), cidx) =
                  image(n, ch, sy, reflect_index(x + kx, w));
          }
        }
      ColMat<double> resp = kmat * col;  // nk x (h*w)
      for (int k = 0; k < nk; ++k) {
        T* dst = &out(n, ch * nk + k, 0, 0);
        for (Eigen::Index i = 0; i < resp.cols(); ++i)
          dst[i] = static_cast<T>(resp(k, i));
      }
    }
  }
  return out;
}

}  // namespace dbdh
