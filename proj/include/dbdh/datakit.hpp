#pragma once

#include <array>
#include <string>
#include <vector>

#include "dbdh/core/rng.hpp"
#include "dbdh/core/tensor.hpp"
#include "dbdh/geometry.hpp"

namespace dbdh {

/// Axis-aligned pixel rectangle, half-open: [x0, x1) x [y0, y1).
struct RectI {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

struct HostImage {
  std::string path;
  Tensor<float> pixels;  // 3 x 900 x 900 after tiling
  std::string source_id;
  int tile_index = 0;  // 0..2
};

enum class EmbedScheme { WMSS, WMPIMOG, SYNTH };

std::string to_string(EmbedScheme s);
EmbedScheme embed_scheme_from_string(const std::string& s);

/// Per-sample manifest record.
struct EmbeddedSample {
  std::string image_path;
  std::string host_path;
  VertexSet vertices;
  RectI region_rect;
  EmbedScheme scheme = EmbedScheme::SYNTH;
  double psnr_db = 0.0;
};

enum class Split { TRAIN, VAL, TEST, UNUSED };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetManifest {
  std::vector<EmbeddedSample> samples;
  std::vector<Split> split;  // aligned with samples
  std::uint64_t seed = 0;
  std::array<int, 3> sizes = {0, 0, 0};

  std::vector<int> indices_of(Split s) const;
};

/// Bilinear-resize a host image to the 1800 x 900 panorama.
Tensor<float> resize_to_panorama(const Tensor<float>& image);

/// Three 900 x 900 tiles of the panorama at x-offsets {0, 450, 900}.
std::array<Tensor<float>, 3> tile_panorama(const Tensor<float>& panorama);

/// In-memory convenience for small corpora: resize + tile every input.
std::vector<HostImage> tile_hosts(const std::vector<Tensor<float>>& images);

/// 10*log10(1 / MSE) on [0,1] images, capped at 100 dB (identical images
/// return the cap).
double psnr(const Tensor<float>& a, const Tensor<float>& b);

inline constexpr double kPsnrCap = 100.0;

struct EmbedResult {
  Tensor<float> image;
  VertexSet vertices;  // exact corners of the embedded patch
  RectI region_rect;
  double psnr_db = 0.0;
};

/// Surrogate embedder: adds a zero-mean high-frequency noise residual to
/// the centered region_side^2 patch, scaled by bisection so the full-image
/// PSNR hits target_psnr_db within 0.2 dB.
EmbedResult synthetic_embed(const Tensor<float>& host, int region_side,
                            double target_psnr_db, Rng& rng);

/// WM-SS post-processing: scale the pixel modification inside region_rect
/// by `strength`, then restore the outermost `border_px` ring to host
/// pixels.
Tensor<float> wmss_postprocess(const Tensor<float>& host,
                               const Tensor<float>& embedded, RectI region_rect,
                               double strength = 0.6, int border_px = 10);

/// Deterministic shuffle + split assignment (first sizes[0] train, then
/// val, then test; leftovers are tagged UNUSED).
DatasetManifest split_manifest(std::vector<EmbeddedSample> samples,
                               std::uint64_t seed,
                               std::array<int, 3> sizes = {10000, 300, 350});

/// JSON-lines serialization (one header line, then one line per sample).
std::string manifest_to_jsonl(const DatasetManifest& m);
DatasetManifest manifest_from_jsonl(const std::string& text);
void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

/// Low-frequency random host (coarse random grid, bilinearly upsampled).
/// Stands in for photographic hosts in desk-scale runs and tests.
Tensor<float> make_synthetic_host(int h, int w, Rng& rng);

}  // namespace dbdh
