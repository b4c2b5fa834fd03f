#pragma once

#include <map>
#include <string>
#include <vector>

#include "dbdh/checkpoint.hpp"
#include "dbdh/datakit.hpp"
#include "dbdh/distortion.hpp"
#include "dbdh/model.hpp"
#include "dbdh/supervision.hpp"

namespace dbdh {

/// Table-2 ablation rows. NO_TEXTURE_NO_SEG uses the warm-start protocol
/// (segmentation head active in the first epoch only).
enum class AblationMode { FULL, NO_TEXTURE_NO_SEG, NO_TEXTURE, TRAINABLE_FILTERS };

std::string to_string(AblationMode m);
AblationMode ablation_from_string(const std::string& s);

enum class AugKind { SS, PIMOG };

std::string to_string(AugKind k);
AugKind aug_from_string(const std::string& s);

/// Distortion keys accepted by evaluate() for each augmentation family
/// ("none" applies the perspective warp only; "combined" applies all).
const std::vector<std::string>& distortion_keys(AugKind k);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 0;  // 0 -> 16 for SS, 32 for PIMoG
  double lr = 1e-3;
  double weight_decay = 1e-5;
  AugKind aug = AugKind::SS;
  std::uint64_t seed = 0;
  AblationMode ablation = AblationMode::FULL;
  int checkpoint_every = 1;  // epochs between checkpoint refreshes
  int val_every = 1;         // epochs between validation passes
  bool augment = true;       // overfit smoke runs train on clean samples
  AugConfigSS ss;
  AugConfigPIMoG pimog;
  LossWeights loss;

  int resolved_batch() const {
    return batch_size > 0 ? batch_size : (aug == AugKind::SS ? 16 : 32);
  }
  void validate() const;
  std::string to_json() const;
};

/// One training/evaluation sample held in memory.
struct TrainSample {
  Tensor<float> image;
  VertexSet vertices;
  RegionMask<float> mask;
};

TrainSample make_sample(const Tensor<float>& image, const VertexSet& vertices);

/// Loads the images of one split and renders their masks.
std::vector<TrainSample> load_samples(const DatasetManifest& manifest,
                                      Split split,
                                      const std::string& data_root);

struct EpochStats {
  int epoch = 0;
  double det_loss = 0.0;
  double seg_loss = 0.0;
  double total = 0.0;
  double val_iou_pct = -1.0;  // -1 when validation did not run
};

struct TrainResult {
  double final_loss = 0.0;
  double best_val_iou_pct = -1.0;
  std::string best_checkpoint;
  std::vector<EpochStats> history;
};

/// Apply the ablation row to a base architecture config.
ModelConfig apply_ablation(ModelConfig config, AblationMode mode);

/// Train on in-memory samples. When run_dir is non-empty, writes
/// config.json, metrics.csv and checkpoints/{best,last}.ckpt there.
TrainResult train(DbdhModel<float>& model,
                  const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set,
                  const TrainConfig& tc, const std::string& run_dir = "");

/// Manifest-driven wrapper: builds the model per the ablation mode, loads
/// the train/val splits and trains.
TrainResult train(const DatasetManifest& manifest, const std::string& data_root,
                  const ModelConfig& base_config, const TrainConfig& tc,
                  const std::string& run_dir);

struct EvalReport {
  AugKind aug = AugKind::SS;
  std::map<std::string, double> iou_pct;  // distortion key -> mean IoU (%)
  int sample_count = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string to_json() const;
  std::string pretty() const;
};

/// Mean IoU (in [0,1]) over samples: perspective warp always, plus the
/// named pixel distortion stage(s).
double evaluate_samples(DbdhModel<float>& model,
                        const std::vector<TrainSample>& samples, AugKind aug,
                        const std::string& distortion, std::uint64_t seed,
                        const TrainConfig& tc = {});

/// Full per-distortion report ("all" runs every key of the family).
EvalReport evaluate(DbdhModel<float>& model,
                    const std::vector<TrainSample>& samples, AugKind aug,
                    const std::string& distortion, std::uint64_t seed,
                    const TrainConfig& tc = {});

struct AblationRow {
  AblationMode mode;
  TrainResult train_result;
  EvalReport report;
};

/// Trains one model per mode with a shared seed and evaluates each across
/// the family's distortion columns (Table-2-shaped output).
std::vector<AblationRow> run_ablation_grid(
    const std::vector<TrainSample>& train_set,
    const std::vector<TrainSample>& val_set,
    const std::vector<TrainSample>& test_set, const ModelConfig& base_config,
    const TrainConfig& tc, const std::vector<AblationMode>& modes,
    const std::string& run_root = "");

std::string ablation_table_json(const std::vector<AblationRow>& rows);

}  // namespace dbdh
