#include "dbdh/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbdh/core/error.hpp"
#include "dbdh/geometry.hpp"
#include "dbdh/io/image_io.hpp"
#include "dbdh/optim.hpp"
#include "json.hpp"

namespace dbdh {

namespace {

// Stream tags for deriving independent RNG streams from the run seed.
constexpr std::uint64_t kTagShuffle = 0x53485546;
constexpr std::uint64_t kTagAugment = 0x41554747;
constexpr std::uint64_t kTagVal = 0x56414c31;

Rng sample_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  return Rng(mix_seed(mix_seed(seed, kTagAugment),
                      mix_seed(epoch, 0x10001 + index)));
}

struct AugmentedSample {
  Tensor<float> image;
  VertexSet vertices;
  RegionMask<float> mask;
};

// Perspective warp with rejection-resampling, then the family's pixel
// distortions. Geometry is only ever changed by the warp.
AugmentedSample augment_sample(const TrainSample& s, AugKind aug,
                               const AugConfigSS& ss, const AugConfigPIMoG& pimog,
                               Rng& rng) {
  AugmentedSample out{s.image, s.vertices, s.mask};
  const double scale =
      aug == AugKind::SS ? ss.perspective_scale : pimog.perspective_scale;
  for (int attempt = 0; attempt < 32; ++attempt) {
    const auto hs =
        sample_perspective(s.image.h(), s.image.w(), scale, rng);
    if (auto warped = warp_sample(s.image, s.vertices, s.mask, hs)) {
      out.image = std::move(warped->image);
      out.vertices = warped->vertices;
      out.mask = std::move(warped->mask);
      break;
    }
  }
  out.image = aug == AugKind::SS ? distort_ss(out.image, ss, rng)
                                 : distort_pimog(out.image, pimog, rng);
  return out;
}

Quadrilateral decode_quad(const Tensor<float>& heatmaps) {
  return quad_of(decode_vertices(heatmaps));
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  out << text;
}

}  // namespace

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::FULL: return "full";
    case AblationMode::NO_TEXTURE_NO_SEG: return "id1";
    case AblationMode::NO_TEXTURE: return "id2";
    default: return "id3";
  }
}

AblationMode ablation_from_string(const std::string& s) {
  if (s == "full" || s == "id4") return AblationMode::FULL;
  if (s == "id1") return AblationMode::NO_TEXTURE_NO_SEG;
  if (s == "id2") return AblationMode::NO_TEXTURE;
  if (s == "id3") return AblationMode::TRAINABLE_FILTERS;
  throw ConfigError("unknown ablation mode: " + s);
}

std::string to_string(AugKind k) { return k == AugKind::SS ? "ss" : "pimog"; }

AugKind aug_from_string(const std::string& s) {
  if (s == "ss") return AugKind::SS;
  if (s == "pimog") return AugKind::PIMOG;
  throw ConfigError("unknown augmentation family: " + s);
}

const std::vector<std::string>& distortion_keys(AugKind k) {
  static const std::vector<std::string> ss = {"none", "blur", "color_jitter",
                                              "noise", "jpeg", "combined"};
  static const std::vector<std::string> pimog = {"none", "illum", "moire",
                                                 "noise", "combined"};
  return k == AugKind::SS ? ss : pimog;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("TrainConfig: epochs must be positive");
  if (lr <= 0) throw ConfigError("TrainConfig: learning rate must be positive");
  if (weight_decay < 0) throw ConfigError("TrainConfig: weight decay must be non-negative");
  if (batch_size < 0) throw ConfigError("TrainConfig: batch size must be non-negative");
  if (val_every <= 0 || checkpoint_every <= 0)
    throw ConfigError("TrainConfig: cadence fields must be positive");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["batch_size"] = resolved_batch();
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["aug"] = to_string(aug);
  j["seed"] = seed;
  j["ablation"] = to_string(ablation);
  j["checkpoint_every"] = checkpoint_every;
  j["val_every"] = val_every;
  j["augment"] = augment;
  j["loss"] = {{"lambda_det", loss.lambda_det},
               {"lambda_seg", loss.lambda_seg},
               {"alpha", loss.alpha},
               {"beta", loss.beta}};
  j["aug_ss"] = nlohmann::json::parse(aug_ss_to_json(ss));
  j["aug_pimog"] = nlohmann::json::parse(aug_pimog_to_json(pimog));
  return j.dump();
}

TrainSample make_sample(const Tensor<float>& image, const VertexSet& vertices) {
  return {image, vertices,
          render_mask<float>(vertices, image.h(), image.w())};
}

std::vector<TrainSample> load_samples(const DatasetManifest& manifest,
                                      Split split,
                                      const std::string& data_root) {
  namespace fs = std::filesystem;
  std::vector<TrainSample> out;
  for (int idx : manifest.indices_of(split)) {
    const auto& rec = manifest.samples[idx];
    fs::path p(rec.image_path);
    if (p.is_relative() && !data_root.empty()) p = fs::path(data_root) / p;
    out.push_back(make_sample(load_image(p.string()), rec.vertices));
  }
  return out;
}

ModelConfig apply_ablation(ModelConfig config, AblationMode mode) {
  switch (mode) {
    case AblationMode::FULL:
      break;
    case AblationMode::NO_TEXTURE_NO_SEG:
    case AblationMode::NO_TEXTURE:
      config.use_texture_branch = false;
      break;
    case AblationMode::TRAINABLE_FILTERS:
      config.filters_trainable = true;
      break;
  }
  return config;
}

TrainResult train(DbdhModel<float>& model,
                  const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set,
                  const TrainConfig& tc, const std::string& run_dir) {
  tc.validate();
  if (train_set.empty()) throw SizeError("train: empty training set");
  const int frame_h = train_set[0].image.h();
  const int frame_w = train_set[0].image.w();
  for (const auto& s : train_set)
    if (s.image.h() != frame_h || s.image.w() != frame_w)
      throw ShapeError("train: training samples must share one frame size");

  namespace fs = std::filesystem;
  std::ofstream metrics;
  if (!run_dir.empty()) {
    fs::create_directories(fs::path(run_dir) / "checkpoints");
    nlohmann::json cfg;
    cfg["model_config"] = nlohmann::json::parse(model.config().to_json());
    cfg["model_config_hash"] = model.config().hash();
    cfg["train_config"] = nlohmann::json::parse(tc.to_json());
    cfg["jpeg_codec"] = jpeg_codec_version();
    cfg["png_codec"] = png_codec_version();
    write_file((fs::path(run_dir) / "config.json").string(), cfg.dump(2) + "\n");
    metrics.open((fs::path(run_dir) / "metrics.csv").string());
    metrics << "epoch,det_loss,seg_loss,total_loss,val_iou_pct\n";
  }

  auto params = model.params();
  AdamW<float> opt(params, tc.lr, tc.weight_decay);
  const int batch = std::min<int>(tc.resolved_batch(),
                                  static_cast<int>(train_set.size()));
  const int steps_per_epoch =
      (static_cast<int>(train_set.size()) + batch - 1) / batch;

  TrainResult result;
  long global_step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    // The ID-1 warm-start schedule keeps the segmentation head for the
    // first epoch only; other modes follow the config.
    const bool seg_active =
        model.config().use_seg_head &&
        (tc.ablation != AblationMode::NO_TEXTURE_NO_SEG || epoch == 0);

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle(mix_seed(mix_seed(tc.seed, kTagShuffle), epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(shuffle.uniform_int(0, i))]);

    double epoch_det = 0.0, epoch_seg = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
      const int begin = step * batch;
      const int count =
          std::min<int>(batch, static_cast<int>(train_set.size()) - begin);

      Tensor<float> images(count, 3, frame_h, frame_w);
      Tensor<float> gt_heat(count, 4, frame_h, frame_w);
      Tensor<float> gt_mask(count, 1, frame_h, frame_w);
      for (int b = 0; b < count; ++b) {
        const int idx = order[begin + b];
        const TrainSample& s = train_set[idx];
        VertexSet verts = s.vertices;
        const Tensor<float>* img = &s.image;
        const RegionMask<float>* mask = &s.mask;
        AugmentedSample aug;
        if (tc.augment) {
          Rng rng = sample_stream(tc.seed, epoch, idx);
          aug = augment_sample(s, tc.aug, tc.ss, tc.pimog, rng);
          verts = aug.vertices;
          img = &aug.image;
          mask = &aug.mask;
        }
        const auto heat = render_heatmaps<float>(verts, frame_h, frame_w);
        std::copy(img->data(), img->data() + img->size(),
                  &images(b, 0, 0, 0));
        std::copy(heat.data.data(), heat.data.data() + heat.data.size(),
                  &gt_heat(b, 0, 0, 0));
        std::copy(mask->data(), mask->data() + mask->size(),
                  &gt_mask(b, 0, 0, 0));
      }

      auto out = model.forward(images, /*train_mode=*/true, seg_active);
      Tensor<float> dheat = zeros_like(out.heatmaps);
      const double det =
          focal_heatmap_loss(out.heatmaps, gt_heat, tc.loss.alpha,
                             tc.loss.beta, &dheat) /
          count;
      double seg = 0.0;
      Tensor<float> dmask;
      if (seg_active && out.mask) {
        dmask = zeros_like(*out.mask);
        seg = bce_mask_loss(*out.mask, gt_mask, &dmask);
      }
      const double total = total_loss(det, seg, tc.loss);
      if (!std::isfinite(total))
        throw NumericError("train: non-finite loss at step " +
                           std::to_string(global_step) + " (det=" +
                           std::to_string(det) + ", seg=" +
                           std::to_string(seg) + ")");

      const float det_scale = static_cast<float>(tc.loss.lambda_det / count);
      for (std::size_t i = 0; i < dheat.size(); ++i)
        dheat.data()[i] *= det_scale;
      if (seg_active && out.mask) {
        const float seg_scale = static_cast<float>(tc.loss.lambda_seg);
        for (std::size_t i = 0; i < dmask.size(); ++i)
          dmask.data()[i] *= seg_scale;
      }

      model.zero_grad();
      model.backward(dheat, seg_active && out.mask ? &dmask : nullptr);
      opt.step();

      epoch_det += det;
      epoch_seg += seg;
      result.final_loss = total;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.det_loss = epoch_det / steps_per_epoch;
    stats.seg_loss = epoch_seg / steps_per_epoch;
    stats.total = total_loss(stats.det_loss, stats.seg_loss, tc.loss);

    const bool last_epoch = epoch + 1 == tc.epochs;
    if (!val_set.empty() && ((epoch + 1) % tc.val_every == 0 || last_epoch)) {
      // Fixed validation seed: every epoch sees identical distortions, so
      // the best-checkpoint comparison is apples to apples.
      stats.val_iou_pct =
          100.0 * evaluate_samples(model, val_set, tc.aug, "combined",
                                   mix_seed(tc.seed, kTagVal), tc);
      if (stats.val_iou_pct > result.best_val_iou_pct) {
        result.best_val_iou_pct = stats.val_iou_pct;
        if (!run_dir.empty() && (epoch + 1) % tc.checkpoint_every == 0) {
          result.best_checkpoint =
              (fs::path(run_dir) / "checkpoints" / "best.ckpt").string();
          save_checkpoint(result.best_checkpoint, model);
        }
      }
    }
    if (metrics.is_open())
      metrics << stats.epoch << ',' << stats.det_loss << ',' << stats.seg_loss
              << ',' << stats.total << ',' << stats.val_iou_pct << "\n";
    result.history.push_back(stats);
  }

  if (!run_dir.empty()) {
    const std::string last =
        (fs::path(run_dir) / "checkpoints" / "last.ckpt").string();
    save_checkpoint(last, model);
    if (result.best_checkpoint.empty()) result.best_checkpoint = last;
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest, const std::string& data_root,
                  const ModelConfig& base_config, const TrainConfig& tc,
                  const std::string& run_dir) {
  const ModelConfig config = apply_ablation(base_config, tc.ablation);
  DbdhModel<float> model(config);
  model.init(tc.seed);
  const auto train_set = load_samples(manifest, Split::TRAIN, data_root);
  const auto val_set = load_samples(manifest, Split::VAL, data_root);
  return train(model, train_set, val_set, tc, run_dir);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["aug"] = to_string(aug);
  j["iou_pct"] = iou_pct;
  j["sample_count"] = sample_count;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  return j.dump();
}

std::string EvalReport::pretty() const {
  std::ostringstream out;
  out << "aug=" << to_string(aug) << " n=" << sample_count << "\n";
  for (const auto& [key, value] : iou_pct) {
    out << "  " << key << ": " << value << "\n";
  }
  return out.str();
}

double evaluate_samples(DbdhModel<float>& model,
                        const std::vector<TrainSample>& samples, AugKind aug,
                        const std::string& distortion, std::uint64_t seed,
                        const TrainConfig& tc) {
  const auto& keys = distortion_keys(aug);
  if (std::find(keys.begin(), keys.end(), distortion) == keys.end())
    throw ConfigError("evaluate: distortion key '" + distortion +
                      "' not valid for family " + to_string(aug));
  if (samples.empty()) throw SizeError("evaluate: empty sample set");

  AugConfigSS ss = tc.ss;
  AugConfigPIMoG pimog = tc.pimog;
  const bool all = distortion == "combined";
  ss.enable_blur = all || distortion == "blur";
  ss.enable_color_jitter = all || distortion == "color_jitter";
  ss.enable_noise = all || distortion == "noise";
  ss.enable_jpeg = all || distortion == "jpeg";
  pimog.enable_illum = all || distortion == "illum";
  pimog.enable_moire = all || distortion == "moire";
  pimog.enable_noise = all || distortion == "noise";

  // Per-sample values first, then an order-independent reduction.
  std::vector<double> ious(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    const auto augd = augment_sample(samples[i], aug, ss, pimog, rng);
    const auto out = model.forward(augd.image, /*train_mode=*/false);
    ious[i] = quad_iou(decode_quad(out.heatmaps), quad_of(augd.vertices)).iou;
  }
  std::sort(ious.begin(), ious.end());
  double iou_sum = 0.0;
  for (double v : ious) iou_sum += v;
  return iou_sum / static_cast<double>(samples.size());
}

EvalReport evaluate(DbdhModel<float>& model,
                    const std::vector<TrainSample>& samples, AugKind aug,
                    const std::string& distortion, std::uint64_t seed,
                    const TrainConfig& tc) {
  EvalReport report;
  report.aug = aug;
  report.sample_count = static_cast<int>(samples.size());
  report.config_hash = model.config().hash();
  report.seed = seed;
  if (distortion == "all") {
    for (const auto& key : distortion_keys(aug))
      report.iou_pct[key] =
          100.0 * evaluate_samples(model, samples, aug, key, seed, tc);
  } else {
    report.iou_pct[distortion] =
        100.0 * evaluate_samples(model, samples, aug, distortion, seed, tc);
  }
  return report;
}

std::vector<AblationRow> run_ablation_grid(
    const std::vector<TrainSample>& train_set,
    const std::vector<TrainSample>& val_set,
    const std::vector<TrainSample>& test_set, const ModelConfig& base_config,
    const TrainConfig& tc, const std::vector<AblationMode>& modes,
    const std::string& run_root) {
  namespace fs = std::filesystem;
  std::vector<AblationRow> rows;
  for (const AblationMode mode : modes) {
    TrainConfig mode_tc = tc;
    mode_tc.ablation = mode;
    DbdhModel<float> model(apply_ablation(base_config, mode));
    model.init(mode_tc.seed);
    const std::string run_dir =
        run_root.empty() ? "" : (fs::path(run_root) / to_string(mode)).string();
    AblationRow row;
    row.mode = mode;
    row.train_result = train(model, train_set, val_set, mode_tc, run_dir);
    row.report = evaluate(model, test_set, tc.aug, "all",
                          mix_seed(tc.seed, 0x7e57), mode_tc);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table_json(const std::vector<AblationRow>& rows) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["id"] = to_string(row.mode);
    r["texture_branch"] = row.mode == AblationMode::FULL
                              ? "fixed"
                              : (row.mode == AblationMode::TRAINABLE_FILTERS
                                     ? "trainable"
                                     : "conv-stack");
    r["detection_head"] = true;
    r["segmentation_head"] = row.mode != AblationMode::NO_TEXTURE_NO_SEG;
    r["iou_pct"] = row.report.iou_pct;
    r["best_val_iou_pct"] = row.train_result.best_val_iou_pct;
    table.push_back(std::move(r));
  }
  return table.dump(2);
}

}  // namespace dbdh
