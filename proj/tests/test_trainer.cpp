#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dbdh/checkpoint.hpp"
#include "dbdh/datakit.hpp"
#include "dbdh/io/image_io.hpp"
#include "dbdh/optim.hpp"
#include "dbdh/trainer.hpp"
#include "doctest.h"

using namespace dbdh;

namespace {

std::vector<TrainSample> synth_samples(int count, int frame, int region,
                                       std::uint64_t seed,
                                       double psnr_db = 38.0) {
  std::vector<TrainSample> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    Rng r = rng.child(i);
    const auto host = make_synthetic_host(frame, frame, r);
    const auto emb = synthetic_embed(host, region, psnr_db, r);
    out.push_back(make_sample(emb.image, emb.vertices));
  }
  return out;
}

TrainConfig quick_config(int epochs, int batch, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.seed = seed;
  tc.augment = false;
  tc.val_every = 1 << 20;
  return tc;
}

bool params_bit_equal(nn::ParamRefs<float> a, nn::ParamRefs<float> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.size() != b[i]->value.size()) return false;
    if (std::memcmp(a[i]->value.data(), b[i]->value.data(),
                    sizeof(float) * a[i]->value.size()) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("two identical seeded runs produce identical losses") {
  const auto samples = synth_samples(4, 96, 48, 11);
  double finals[2];
  for (int run = 0; run < 2; ++run) {
    DbdhModel<float> model(ModelConfig::tiny());
    model.init(33);
    const auto result = train(model, samples, {}, quick_config(2, 2, 33), "");
    finals[run] = result.final_loss;
  }
  CHECK(finals[0] == doctest::Approx(finals[1]).epsilon(1e-6));
  CHECK(finals[0] == finals[1]);  // same machine, same code path: bit-equal
}

TEST_CASE("fixed filters stay bit-identical through training; trainable ones move") {
  const auto samples = synth_samples(4, 96, 48, 12);

  DbdhModel<float> fixed(ModelConfig::tiny());
  fixed.init(5);
  const Tensor<float> before = fixed.bank_weights();
  train(fixed, samples, {}, quick_config(2, 2, 5), "");
  CHECK(std::memcmp(before.data(), fixed.bank_weights().data(),
                    sizeof(float) * before.size()) == 0);

  auto cfg = ModelConfig::tiny();
  cfg.filters_trainable = true;
  DbdhModel<float> trainable(cfg);
  trainable.init(5);
  const Tensor<float> before_t = trainable.bank_weights();
  auto tc = quick_config(1, 4, 5);
  tc.ablation = AblationMode::TRAINABLE_FILTERS;
  train(trainable, samples, {}, tc, "");
  CHECK(std::memcmp(before_t.data(), trainable.bank_weights().data(),
                    sizeof(float) * before_t.size()) != 0);
}

TEST_CASE("with lambda_seg=0 the detection gradients match a seg-off run at step 1") {
  const auto samples = synth_samples(2, 96, 48, 13);

  auto cfg_on = ModelConfig::tiny();
  auto cfg_off = ModelConfig::tiny();
  cfg_off.use_seg_head = false;
  DbdhModel<float> m_on(cfg_on), m_off(cfg_off);
  m_on.init(77);
  m_off.init(77);

  // Name-keyed init: the shared modules start bit-identical.
  {
    nn::ParamRefs<float> on = m_on.params(), off = m_off.params();
    std::size_t matched = 0;
    for (auto* po : off) {
      for (auto* p : on)
        if (p->name == po->name) {
          CHECK(std::memcmp(p->value.data(), po->value.data(),
                            sizeof(float) * p->value.size()) == 0);
          ++matched;
        }
    }
    CHECK(matched == off.size());
  }

  auto tc = quick_config(1, 2, 77);
  tc.loss.lambda_seg = 0.0;
  train(m_on, samples, {}, tc, "");
  train(m_off, samples, {}, tc, "");

  // After one identical step, every shared parameter took the same update.
  nn::ParamRefs<float> on = m_on.params(), off = m_off.params();
  for (auto* po : off)
    for (auto* p : on)
      if (p->name == po->name)
        CHECK(std::memcmp(p->value.data(), po->value.data(),
                          sizeof(float) * p->value.size()) == 0);
}

TEST_CASE("checkpoint round trip: save, load, evaluate bit-exactly") {
  namespace fs = std::filesystem;
  const auto samples = synth_samples(3, 96, 48, 14);
  DbdhModel<float> model(ModelConfig::tiny());
  model.init(21);
  train(model, samples, {}, quick_config(1, 3, 21), "");

  const std::string path = "/tmp/dbdh_test_ckpt.bin";
  save_checkpoint(path, model);
  auto loaded = load_checkpoint(path);
  CHECK(params_bit_equal(model.params(), loaded->params()));

  const auto a = model.forward(samples[0].image, false);
  const auto b = loaded->forward(samples[0].image, false);
  CHECK(std::memcmp(a.heatmaps.data(), b.heatmaps.data(),
                    sizeof(float) * a.heatmaps.size()) == 0);

  const double ia = evaluate_samples(model, samples, AugKind::SS, "none", 3);
  const double ib = evaluate_samples(*loaded, samples, AugKind::SS, "none", 3);
  CHECK(ia == ib);

  // architecture guard
  const ModelConfig other = ModelConfig::desk();
  CHECK_THROWS_AS(load_checkpoint(path, &other), ConfigError);
  const ModelConfig same = ModelConfig::tiny();
  CHECK_NOTHROW(load_checkpoint(path, &same));
  fs::remove(path);
}

TEST_CASE("evaluate: oracle stub reaches ~1.0 IoU, degenerate stub scores 0") {
  const auto samples = synth_samples(4, 96, 48, 15);

  // Oracle route: rendered GT heatmaps decode back to the warped vertices.
  double oracle_iou = 0.0, zero_iou = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(mix_seed(91, i));
    const auto hs = sample_perspective(96, 96, 0.2, rng);
    const auto warped =
        warp_sample(samples[i].image, samples[i].vertices, samples[i].mask, hs);
    if (!warped) continue;
    const auto gt_heat =
        render_heatmaps<float>(warped->vertices, 96, 96);
    const auto decoded = decode_vertices(gt_heat.data);
    oracle_iou += quad_iou(quad_of(decoded), quad_of(warped->vertices)).iou;

    Tensor<float> constant(1, 4, 96, 96);
    constant.fill(0.25f);
    const auto zeros = decode_vertices(constant);
    const auto z = quad_iou(quad_of(zeros), quad_of(warped->vertices));
    zero_iou += z.iou;
    CHECK(z.rasterized_fallback);
  }
  oracle_iou /= static_cast<double>(samples.size());
  // at this frame size the half-pixel argmax rounding costs a few percent;
  // the acceptance suite checks the <1% slack at the 400-px region scale
  CHECK(oracle_iou > 0.95);
  CHECK(zero_iou == 0.0);
}

TEST_CASE("evaluate validates the distortion key against the family") {
  const auto samples = synth_samples(1, 96, 48, 16);
  DbdhModel<float> model(ModelConfig::tiny());
  model.init(1);
  CHECK_THROWS_AS(evaluate_samples(model, samples, AugKind::SS, "moire", 1),
                  ConfigError);
  CHECK_THROWS_AS(evaluate_samples(model, samples, AugKind::PIMOG, "jpeg", 1),
                  ConfigError);
  CHECK_NOTHROW(evaluate_samples(model, samples, AugKind::PIMOG, "moire", 1));
}

TEST_CASE("ID-1 warm start: seg loss active in epoch 1 only") {
  const auto samples = synth_samples(4, 96, 48, 17);
  auto cfg = apply_ablation(ModelConfig::tiny(), AblationMode::NO_TEXTURE_NO_SEG);
  CHECK_FALSE(cfg.use_texture_branch);
  DbdhModel<float> model(cfg);
  model.init(9);
  auto tc = quick_config(3, 4, 9);
  tc.ablation = AblationMode::NO_TEXTURE_NO_SEG;
  const auto result = train(model, samples, {}, tc, "");
  REQUIRE(result.history.size() == 3);
  CHECK(result.history[0].seg_loss > 0.0);
  CHECK(result.history[1].seg_loss == 0.0);
  CHECK(result.history[2].seg_loss == 0.0);
}

TEST_CASE("run directory artifacts: config, metrics, checkpoints") {
  namespace fs = std::filesystem;
  const std::string run_dir = "/tmp/dbdh_test_run";
  fs::remove_all(run_dir);
  const auto samples = synth_samples(4, 96, 48, 18);
  const auto val = synth_samples(2, 96, 48, 19);
  DbdhModel<float> model(ModelConfig::tiny());
  model.init(3);
  auto tc = quick_config(2, 2, 3);
  tc.val_every = 1;
  tc.augment = true;  // exercise the full augmentation path
  const auto result = train(model, samples, val, tc, run_dir);
  CHECK(fs::exists(fs::path(run_dir) / "config.json"));
  CHECK(fs::exists(fs::path(run_dir) / "metrics.csv"));
  CHECK(fs::exists(fs::path(run_dir) / "checkpoints" / "last.ckpt"));
  CHECK(result.best_val_iou_pct >= 0.0);
  CHECK_FALSE(result.best_checkpoint.empty());

  std::ifstream metrics(fs::path(run_dir) / "metrics.csv");
  std::string header;
  std::getline(metrics, header);
  CHECK(header == "epoch,det_loss,seg_loss,total_loss,val_iou_pct");
  int rows = 0;
  for (std::string line; std::getline(metrics, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  fs::remove_all(run_dir);
}

TEST_CASE("manifest-driven training loads images from disk") {
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/dbdh_test_data";
  fs::remove_all(dir);
  fs::create_directories(dir);
  DatasetManifest manifest;
  manifest.sizes = {3, 1, 1};
  Rng rng(55);
  for (int i = 0; i < 5; ++i) {
    Rng r = rng.child(i);
    const auto host = make_synthetic_host(96, 96, r);
    const auto emb = synthetic_embed(host, 48, 38.0, r);
    const std::string name = "s" + std::to_string(i) + ".png";
    save_png(dir + "/" + name, emb.image, 16);
    EmbeddedSample s;
    s.image_path = name;
    s.host_path = name;
    s.vertices = emb.vertices;
    s.region_rect = emb.region_rect;
    s.psnr_db = emb.psnr_db;
    manifest.samples.push_back(s);
  }
  manifest.split = {Split::TRAIN, Split::TRAIN, Split::TRAIN, Split::VAL,
                    Split::TEST};
  auto tc = quick_config(1, 3, 55);
  tc.val_every = 1;
  const auto result = train(manifest, dir, ModelConfig::tiny(), tc, "");
  CHECK(result.history.size() == 1);
  CHECK(result.best_val_iou_pct >= 0.0);
  fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const auto samples = synth_samples(2, 96, 48, 20);
  DbdhModel<float> model(ModelConfig::tiny());
  model.init(4);
  auto tc = quick_config(1, 2, 4);
  tc.lr = 1e14;  // blows the weights up within the first steps
  tc.epochs = 3;
  CHECK_THROWS_AS(train(model, samples, {}, tc, ""), NumericError);
}

TEST_CASE("adamw: decay applies only to flagged params") {
  nn::Param<float> decayed, plain;
  decayed.name = "w";
  decayed.init_shape(1, 1, 1, 1);
  decayed.value.fill(1.0f);
  plain.name = "b";
  plain.decay = false;
  plain.init_shape(1, 1, 1, 1);
  plain.value.fill(1.0f);
  AdamW<float> opt({&decayed, &plain}, 0.1, 0.5);
  // zero gradients: only the decay term moves parameters
  opt.step();
  CHECK(decayed.value.data()[0] == doctest::Approx(1.0f - 0.1f * 0.5f));
  CHECK(plain.value.data()[0] == 1.0f);
}
