#include "dbdh/datakit.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dbdh/core/error.hpp"
#include "dbdh/core/image_ops.hpp"
#include "json.hpp"

namespace dbdh {

std::string to_string(EmbedScheme s) {
  switch (s) {
    case EmbedScheme::WMSS: return "WMSS";
    case EmbedScheme::WMPIMOG: return "WMPIMOG";
    default: return "SYNTH";
  }
}

EmbedScheme embed_scheme_from_string(const std::string& s) {
  if (s == "WMSS") return EmbedScheme::WMSS;
  if (s == "WMPIMOG") return EmbedScheme::WMPIMOG;
  if (s == "SYNTH") return EmbedScheme::SYNTH;
  throw ConfigError("unknown embed scheme: " + s);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::TRAIN: return "train";
    case Split::VAL: return "val";
    case Split::TEST: return "test";
    default: return "unused";
  }
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::TRAIN;
  if (s == "val") return Split::VAL;
  if (s == "test") return Split::TEST;
  if (s == "unused") return Split::UNUSED;
  throw ConfigError("unknown split tag: " + s);
}

std::vector<int> DatasetManifest::indices_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(static_cast<int>(i));
  return out;
}

Tensor<float> resize_to_panorama(const Tensor<float>& image) {
  return resize_bilinear(image, 900, 1800);
}

std::array<Tensor<float>, 3> tile_panorama(const Tensor<float>& panorama) {
  if (panorama.h() != 900 || panorama.w() != 1800)
    throw ShapeError("tile_panorama: expected a 1800x900 panorama");
  return {crop(panorama, 0, 0, 900, 900), crop(panorama, 0, 450, 900, 900),
          crop(panorama, 0, 900, 900, 900)};
}

std::vector<HostImage> tile_hosts(const std::vector<Tensor<float>>& images) {
  std::vector<HostImage> out;
  out.reserve(images.size() * 3);
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto tiles = tile_panorama(resize_to_panorama(images[i]));
    for (int t = 0; t < 3; ++t) {
      HostImage h;
      h.source_id = std::to_string(i);
      h.tile_index = t;
      h.pixels = std::move(tiles[t]);
      out.push_back(std::move(h));
    }
  }
  return out;
}

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
  double mse = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(10.0 * std::log10(1.0 / mse), kPsnrCap);
}

namespace {

Tensor<float> apply_residual(const Tensor<float>& host,
                             const Tensor<double>& residual, RectI rect,
                             double scale) {
  Tensor<float> out = host;
  for (int c = 0; c < 3; ++c)
    for (int y = rect.y0; y < rect.y1; ++y)
      for (int x = rect.x0; x < rect.x1; ++x)
        out(0, c, y, x) = clamp01(static_cast<float>(
            host(0, c, y, x) +
            scale * residual(0, c, y - rect.y0, x - rect.x0)));
  return out;
}

}  // namespace

EmbedResult synthetic_embed(const Tensor<float>& host, int region_side,
                            double target_psnr_db, Rng& rng) {
  const int h = host.h(), w = host.w();
  if (region_side > std::min(h, w))
    throw ConfigError("synthetic_embed: region larger than host");
  if (target_psnr_db < 30.0 || target_psnr_db > 50.0)
    throw ConfigError("synthetic_embed: target PSNR must be in [30, 50] dB");

  RectI rect;
  rect.x0 = (w - region_side) / 2;
  rect.y0 = (h - region_side) / 2;
  rect.x1 = rect.x0 + region_side;
  rect.y1 = rect.y0 + region_side;

  // White noise minus its binomial-smoothed copy: energy concentrated in
  // the upper half of the spectrum, zero mean by construction.
  Tensor<double> noise(1, 3, region_side, region_side);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < region_side; ++y)
      for (int x = 0; x < region_side; ++x) noise(0, c, y, x) = rng.normal();
  RowMat<double> binomial(3, 3);
  binomial << 1, 2, 1, 2, 4, 2, 1, 2, 1;
  binomial /= 16.0;
  Tensor<double> smooth = correlate_reflect(noise, binomial);
  Tensor<double> residual = noise;
  for (std::size_t i = 0; i < residual.size(); ++i)
    residual.data()[i] -= smooth.data()[i];
  for (int c = 0; c < 3; ++c) {
    const double mean = residual.plane(0, c).mean();
    residual.plane(0, c).array() -= mean;
  }

  // PSNR decreases monotonically with the residual scale (clamping only
  // flattens it), so bracket then bisect.
  double s_hi = 1.0;
  int expand = 0;
  while (psnr(apply_residual(host, residual, rect, s_hi), host) >
             target_psnr_db &&
         expand++ < 12)
    s_hi *= 2.0;
  double lo = 0.0, hi = s_hi;
  Tensor<float> best;
  double best_psnr = kPsnrCap;
  for (int step = 0; step < 20; ++step) {
    const double mid = 0.5 * (lo + hi);
    best = apply_residual(host, residual, rect, mid);
    best_psnr = psnr(best, host);
    if (std::abs(best_psnr - target_psnr_db) <= 0.05) break;
    if (best_psnr > target_psnr_db)
      lo = mid;
    else
      hi = mid;
  }
  if (std::abs(best_psnr - target_psnr_db) > 0.2)
    throw NumericError("synthetic_embed: target PSNR unreachable for this host");

  EmbedResult out;
  out.image = std::move(best);
  out.region_rect = rect;
  out.psnr_db = best_psnr;
  out.vertices.frame_h = h;
  out.vertices.frame_w = w;
  out.vertices.points = {
      Vec2{static_cast<double>(rect.x0), static_cast<double>(rect.y0)},
      Vec2{static_cast<double>(rect.x1), static_cast<double>(rect.y0)},
      Vec2{static_cast<double>(rect.x1), static_cast<double>(rect.y1)},
      Vec2{static_cast<double>(rect.x0), static_cast<double>(rect.y1)}};
  return out;
}

Tensor<float> wmss_postprocess(const Tensor<float>& host,
                               const Tensor<float>& embedded, RectI rect,
                               double strength, int border_px) {
  if (!host.same_shape(embedded))
    throw ShapeError("wmss_postprocess: host/embedded shape mismatch");
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > host.w() || rect.y1 > host.h() ||
      rect.x0 >= rect.x1 || rect.y0 >= rect.y1)
    throw BoundsError("wmss_postprocess: region outside image");
  Tensor<float> out = host;
  const int ix0 = rect.x0 + border_px, ix1 = rect.x1 - border_px;
  const int iy0 = rect.y0 + border_px, iy1 = rect.y1 - border_px;
  for (int c = 0; c < host.c(); ++c)
    for (int y = iy0; y < iy1; ++y)
      for (int x = ix0; x < ix1; ++x)
        out(0, c, y, x) =
            static_cast<float>((1.0 - strength) * host(0, c, y, x) +
                               strength * embedded(0, c, y, x));
  return out;
}

DatasetManifest split_manifest(std::vector<EmbeddedSample> samples,
                               std::uint64_t seed, std::array<int, 3> sizes) {
  const long long need =
      static_cast<long long>(sizes[0]) + sizes[1] + sizes[2];
  if (static_cast<long long>(samples.size()) < need)
    throw SizeError("split_manifest: need " + std::to_string(need) +
                    " samples, got " + std::to_string(samples.size()) +
                    " (deficit " +
                    std::to_string(need - static_cast<long long>(samples.size())) +
                    ")");
  const int n = static_cast<int>(samples.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(0, i));
    std::swap(order[i], order[j]);
  }
  DatasetManifest m;
  m.seed = seed;
  m.sizes = sizes;
  m.samples = std::move(samples);
  m.split.assign(n, Split::UNUSED);
  int k = 0;
  for (int i = 0; i < sizes[0]; ++i) m.split[order[k++]] = Split::TRAIN;
  for (int i = 0; i < sizes[1]; ++i) m.split[order[k++]] = Split::VAL;
  for (int i = 0; i < sizes[2]; ++i) m.split[order[k++]] = Split::TEST;
  return m;
}

namespace {

nlohmann::json sample_to_json(const EmbeddedSample& s, Split split) {
  nlohmann::json j;
  j["image_path"] = s.image_path;
  j["host_path"] = s.host_path;
  j["frame"] = {s.vertices.frame_h, s.vertices.frame_w};
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& p : s.vertices.points) verts.push_back({p.x, p.y});
  j["vertices"] = verts;
  j["region_rect"] = {s.region_rect.x0, s.region_rect.y0, s.region_rect.x1,
                      s.region_rect.y1};
  j["scheme"] = to_string(s.scheme);
  j["psnr_db"] = s.psnr_db;
  j["split"] = to_string(split);
  return j;
}

}  // namespace

std::string manifest_to_jsonl(const DatasetManifest& m) {
  std::ostringstream out;
  nlohmann::json header;
  header["seed"] = m.seed;
  header["sizes"] = {m.sizes[0], m.sizes[1], m.sizes[2]};
  out << header.dump() << "\n";
  for (std::size_t i = 0; i < m.samples.size(); ++i)
    out << sample_to_json(m.samples[i], m.split[i]).dump() << "\n";
  return out.str();
}

DatasetManifest manifest_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw IoError("manifest_from_jsonl: empty document");
  const auto header = nlohmann::json::parse(line);
  DatasetManifest m;
  m.seed = header.at("seed").get<std::uint64_t>();
  const auto sz = header.at("sizes");
  m.sizes = {sz.at(0).get<int>(), sz.at(1).get<int>(), sz.at(2).get<int>()};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    EmbeddedSample s;
    s.image_path = j.at("image_path").get<std::string>();
    s.host_path = j.at("host_path").get<std::string>();
    s.vertices.frame_h = j.at("frame").at(0).get<int>();
    s.vertices.frame_w = j.at("frame").at(1).get<int>();
    for (int i = 0; i < 4; ++i) {
      s.vertices.points[i].x = j.at("vertices").at(i).at(0).get<double>();
      s.vertices.points[i].y = j.at("vertices").at(i).at(1).get<double>();
    }
    s.region_rect = {j.at("region_rect").at(0).get<int>(),
                     j.at("region_rect").at(1).get<int>(),
                     j.at("region_rect").at(2).get<int>(),
                     j.at("region_rect").at(3).get<int>()};
    s.scheme = embed_scheme_from_string(j.at("scheme").get<std::string>());
    s.psnr_db = j.at("psnr_db").get<double>();
    m.samples.push_back(std::move(s));
    m.split.push_back(split_from_string(j.at("split").get<std::string>()));
  }
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_manifest: cannot open " + path);
  out << manifest_to_jsonl(m);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_manifest: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_jsonl(buf.str());
}

Tensor<float> make_synthetic_host(int h, int w, Rng& rng) {
  // Coarse random grid upsampled bilinearly; photographic hosts are
  // low-frequency at this scale, which is what the texture branch relies on.
  const int gh = 6, gw = 10;
  Tensor<float> grid(1, 3, gh, gw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x)
        grid(0, c, y, x) = static_cast<float>(rng.uniform(0.05, 0.95));
  return resize_bilinear(grid, h, w);
}

}  // namespace dbdh
