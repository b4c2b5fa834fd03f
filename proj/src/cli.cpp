#include "dbdh/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dbdh/checkpoint.hpp"
#include "dbdh/datakit.hpp"
#include "dbdh/geometry.hpp"
#include "dbdh/io/image_io.hpp"
#include "dbdh/trainer.hpp"
#include "json.hpp"

#ifndef DBDH_SOURCE_HASH
#define DBDH_SOURCE_HASH "unknown"
#endif

namespace dbdh {

namespace {

namespace fs = std::filesystem;

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_run_metadata(const std::string& dir, int argc,
                        const char* const* argv, std::uint64_t seed) {
  nlohmann::json j;
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  j["command_line"] = cmd;
  j["seed"] = seed;
  j["jpeg_codec"] = jpeg_codec_version();
  j["png_codec"] = png_codec_version();
  j["timestamp"] = timestamp_utc();
  j["source_hash"] = DBDH_SOURCE_HASH;
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "run_metadata.json");
  out << j.dump(2) << "\n";
}

ModelConfig model_preset(const std::string& name) {
  if (name == "default") return ModelConfig{};
  if (name == "desk") return ModelConfig::desk();
  if (name == "tiny") return ModelConfig::tiny();
  throw ConfigError("unknown model preset: " + name);
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RectI parse_rect(const std::string& text) {
  RectI r;
  if (std::sscanf(text.c_str(), "%d,%d,%d,%d", &r.x0, &r.y0, &r.x1, &r.y1) != 4)
    throw ConfigError("rect must be x0,y0,x1,y1");
  return r;
}

// Optional JSON document with "ss" and/or "pimog" sections mirroring the
// augmentation config fields.
void apply_aug_config(const std::string& path, TrainConfig& tc) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open aug config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto j = nlohmann::json::parse(buf.str());
  if (j.contains("ss")) tc.ss = aug_ss_from_json(j.at("ss").dump());
  if (j.contains("pimog")) tc.pimog = aug_pimog_from_json(j.at("pimog").dump());
}

int cmd_prepare_hosts(const std::string& input_dir, int synthetic,
                      int synth_h, int synth_w, const std::string& output_dir,
                      std::uint64_t seed) {
  if (input_dir.empty() && synthetic <= 0)
    throw ConfigError("prepare-hosts: give --input-dir or --synthetic N");
  fs::create_directories(output_dir);
  std::ofstream index(fs::path(output_dir) / "hosts.jsonl");
  Rng rng(seed);
  int sources = 0, hosts = 0;
  auto emit = [&](const Tensor<float>& image, const std::string& source_id) {
    const auto tiles = tile_panorama(resize_to_panorama(image));
    for (int t = 0; t < 3; ++t) {
      const std::string name = "host_" + source_id + "_" + std::to_string(t) + ".png";
      save_png((fs::path(output_dir) / name).string(), tiles[t], 8);
      nlohmann::json j;
      j["path"] = name;
      j["source_id"] = source_id;
      j["tile_index"] = t;
      index << j.dump() << "\n";
      ++hosts;
    }
    ++sources;
  };
  if (!input_dir.empty()) {
    for (const auto& path : list_images(input_dir)) {
      try {
        emit(load_image(path), fs::path(path).stem().string());
      } catch (const IoError& e) {
        // per-file error, processing continues
        std::cerr << nlohmann::json{{"error", "IoError"}, {"message", e.what()}}
                  << "\n";
      }
    }
  }
  for (int i = 0; i < synthetic; ++i) {
    Rng host_rng = rng.child(i);
    emit(make_synthetic_host(synth_h, synth_w, host_rng),
         "synth" + std::to_string(i));
  }
  std::cout << nlohmann::json{{"sources", sources}, {"hosts", hosts}} << "\n";
  return 0;
}

int cmd_embed_synthetic(const std::string& hosts_index,
                        const std::string& output_dir, int region_side,
                        double psnr_db, int limit, std::uint64_t seed) {
  std::ifstream in(hosts_index);
  if (!in) throw IoError("embed-synthetic: cannot open " + hosts_index);
  fs::create_directories(output_dir);
  const fs::path hosts_dir = fs::path(hosts_index).parent_path();
  DatasetManifest manifest;
  manifest.seed = seed;
  std::string line;
  int count = 0;
  double psnr_sum = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (limit > 0 && count >= limit) break;
    const auto j = nlohmann::json::parse(line);
    const std::string host_rel = j.at("path").get<std::string>();
    const auto host = load_image((hosts_dir / host_rel).string());
    Rng rng(mix_seed(seed, count));
    const auto res = synthetic_embed(host, region_side, psnr_db, rng);
    const std::string name = "emb_" + std::to_string(count) + ".png";
    save_png((fs::path(output_dir) / name).string(), res.image, 16);
    EmbeddedSample s;
    s.image_path = name;
    s.host_path = (hosts_dir / host_rel).string();
    s.vertices = res.vertices;
    s.region_rect = res.region_rect;
    s.scheme = EmbedScheme::SYNTH;
    s.psnr_db = res.psnr_db;
    manifest.samples.push_back(std::move(s));
    manifest.split.push_back(Split::UNUSED);
    psnr_sum += res.psnr_db;
    ++count;
  }
  write_manifest((fs::path(output_dir) / "samples.jsonl").string(), manifest);
  std::cout << nlohmann::json{{"samples", count},
                              {"mean_psnr_db", count ? psnr_sum / count : 0.0}}
            << "\n";
  return 0;
}

int cmd_train(const std::string& dataset, std::string data_root,
              const std::string& aug, const std::string& ablation,
              const std::string& preset, const std::string& run_dir,
              TrainConfig tc) {
  if (data_root.empty()) {
    if (const char* env = std::getenv("DBDH_DATA_ROOT"))
      data_root = env;
    else
      data_root = fs::path(dataset).parent_path().string();
  }
  tc.aug = aug_from_string(aug);
  tc.ablation = ablation_from_string(ablation);
  const auto manifest = read_manifest(dataset);
  const auto result = train(manifest, data_root, model_preset(preset), tc, run_dir);
  nlohmann::json j;
  j["best_val_iou_pct"] = result.best_val_iou_pct;
  j["final_loss"] = result.final_loss;
  j["checkpoint"] = result.best_checkpoint;
  j["epochs"] = static_cast<int>(result.history.size());
  std::cout << j << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& dataset,
             std::string data_root, const std::string& split_name,
             const std::string& aug, const std::string& distortion,
             std::uint64_t seed, const std::string& out_path, bool pretty,
             const TrainConfig& tc) {
  if (data_root.empty()) {
    if (const char* env = std::getenv("DBDH_DATA_ROOT"))
      data_root = env;
    else
      data_root = fs::path(dataset).parent_path().string();
  }
  auto model = load_checkpoint(ckpt);
  const auto manifest = read_manifest(dataset);
  const auto samples =
      load_samples(manifest, split_from_string(split_name), data_root);
  const auto report =
      evaluate(*model, samples, aug_from_string(aug), distortion, seed, tc);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << report.to_json() << "\n";
  }
  std::cout << (pretty ? report.pretty() : report.to_json() + "\n");
  return 0;
}

int cmd_localize(const std::string& ckpt, const std::string& image_path,
                 const std::string& rectify_out, int rectify_size,
                 const std::string& out_path) {
  auto model = load_checkpoint(ckpt);
  const auto image = load_image(image_path);
  const auto out = model->forward(image, /*train_mode=*/false);
  const VertexSet v = decode_vertices(out.heatmaps);
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& p : v.points) j["vertices"].push_back({p.x, p.y});
  j["order"] = "TL,TR,BR,BL";
  if (!rectify_out.empty()) {
    const auto rect =
        rectify(image, quad_of(v), rectify_size, rectify_size);
    save_png(rectify_out, rect, 8);
    j["rectified"] = rectify_out;
  }
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    f << j.dump() << "\n";
  }
  std::cout << j << "\n";
  return 0;
}

int cmd_profile(int height, int width, const std::string& preset) {
  const auto macs = count_mult_adds(model_preset(preset), height, width);
  const double reference = 30.71e9;
  nlohmann::json j;
  j["mult_adds"] = macs;
  j["reference"] = static_cast<std::uint64_t>(reference);
  j["band"] = {static_cast<std::uint64_t>(reference * 0.75),
               static_cast<std::uint64_t>(reference * 1.25)};
  j["within_band"] =
      macs >= reference * 0.75 && macs <= reference * 1.25;
  std::cout << j << "\n";
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"DBDH invisible-embedded-region localization toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  auto* prep = app.add_subcommand("prepare-hosts",
                                  "Resize sources to 1800x900 and cut 900x900 tiles");
  std::string prep_input, prep_output;
  int prep_synth = 0, prep_h = 1080, prep_w = 2048;
  prep->add_option("--input-dir", prep_input, "Directory of source images");
  prep->add_option("--synthetic", prep_synth, "Generate N synthetic sources instead");
  prep->add_option("--synth-height", prep_h);
  prep->add_option("--synth-width", prep_w);
  prep->add_option("--output-dir", prep_output)->required();
  prep->add_option("--seed", seed);

  auto* embed = app.add_subcommand("embed-synthetic",
                                   "Embed the synthetic high-frequency surrogate watermark");
  std::string embed_hosts, embed_output;
  int embed_side = 400, embed_limit = 0;
  double embed_psnr = 40.0;
  embed->add_option("--hosts", embed_hosts, "hosts.jsonl from prepare-hosts")->required();
  embed->add_option("--output-dir", embed_output)->required();
  embed->add_option("--region-side", embed_side);
  embed->add_option("--psnr", embed_psnr, "Target PSNR in dB");
  embed->add_option("--limit", embed_limit, "Embed at most N hosts (0 = all)");
  embed->add_option("--seed", seed);

  auto* post = app.add_subcommand("postprocess-wmss",
                                  "Scale the embedding residual and restore the border ring");
  std::string post_host, post_embedded, post_rect, post_out;
  double post_strength = 0.6;
  int post_border = 10;
  post->add_option("--host", post_host)->required();
  post->add_option("--embedded", post_embedded)->required();
  post->add_option("--rect", post_rect, "x0,y0,x1,y1")->required();
  post->add_option("--strength", post_strength);
  post->add_option("--border", post_border);
  post->add_option("--out", post_out)->required();
  post->add_option("--seed", seed);

  auto* mani = app.add_subcommand("make-manifest", "Shuffle and split samples");
  std::string mani_samples, mani_out, mani_sizes = "10000,300,350";
  mani->add_option("--samples", mani_samples)->required();
  mani->add_option("--out", mani_out)->required();
  mani->add_option("--sizes", mani_sizes, "train,val,test");
  mani->add_option("--seed", seed);

  auto* tr = app.add_subcommand("train", "Train the localization model");
  std::string tr_dataset, tr_root, tr_aug = "ss", tr_abl = "full",
              tr_model = "default", tr_run;
  TrainConfig tc;
  tr->add_option("--dataset", tr_dataset)->required();
  tr->add_option("--data-root", tr_root, "Image path prefix (default: manifest dir or $DBDH_DATA_ROOT)");
  tr->add_option("--aug", tr_aug, "ss|pimog");
  tr->add_option("--ablation", tr_abl, "full|id1|id2|id3");
  tr->add_option("--model", tr_model, "default|desk|tiny");
  tr->add_option("--run-dir", tr_run)->required();
  tr->add_option("--epochs", tc.epochs);
  tr->add_option("--batch", tc.batch_size);
  tr->add_option("--lr", tc.lr);
  tr->add_option("--weight-decay", tc.weight_decay);
  tr->add_option("--val-every", tc.val_every);
  tr->add_flag("--no-augment", [&tc](std::int64_t) { tc.augment = false; },
               "Train on clean samples (overfit smoke runs)");
  std::string tr_aug_config;
  tr->add_option("--aug-config", tr_aug_config,
                 "JSON document overriding the augmentation ranges");
  tr->add_option("--seed", seed);

  auto* ev = app.add_subcommand("eval", "Per-distortion IoU report");
  std::string ev_ckpt, ev_dataset, ev_root, ev_split = "test", ev_aug = "ss",
              ev_dist = "all", ev_out;
  bool ev_pretty = false;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--data-root", ev_root);
  ev->add_option("--split", ev_split, "train|val|test");
  ev->add_option("--aug", ev_aug, "ss|pimog");
  ev->add_option("--distortion", ev_dist, "one key or 'all'");
  ev->add_option("--out", ev_out, "Write report.json here");
  ev->add_flag("--pretty", ev_pretty, "Human-readable table");
  std::string ev_aug_config;
  ev->add_option("--aug-config", ev_aug_config,
                 "JSON document overriding the augmentation ranges");
  ev->add_option("--seed", seed);

  auto* loc = app.add_subcommand("localize", "Decode the embedded-region vertices");
  std::string loc_ckpt, loc_image, loc_rect_out, loc_out;
  int loc_rect_size = 400;
  loc->add_option("--ckpt", loc_ckpt)->required();
  loc->add_option("--image", loc_image)->required();
  loc->add_option("--rectify-out", loc_rect_out, "Write the rectified region here");
  loc->add_option("--rectify-size", loc_rect_size);
  loc->add_option("--out", loc_out, "Write the JSON result here");
  loc->add_option("--seed", seed);

  auto* prof = app.add_subcommand("profile", "Analytic mult-adds count");
  int prof_h = 900, prof_w = 900;
  std::string prof_model = "default";
  prof->add_option("--height", prof_h);
  prof->add_option("--width", prof_w);
  prof->add_option("--model", prof_model, "default|desk|tiny");
  prof->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (prep->parsed()) {
      write_run_metadata(prep_output, argc, argv, seed);
      return cmd_prepare_hosts(prep_input, prep_synth, prep_h, prep_w,
                               prep_output, seed);
    }
    if (embed->parsed()) {
      write_run_metadata(embed_output, argc, argv, seed);
      return cmd_embed_synthetic(embed_hosts, embed_output, embed_side,
                                 embed_psnr, embed_limit, seed);
    }
    if (post->parsed()) {
      const auto host = load_image(post_host);
      const auto embedded = load_image(post_embedded);
      const auto out = wmss_postprocess(host, embedded, parse_rect(post_rect),
                                        post_strength, post_border);
      save_png(post_out, out, 16);
      std::cout << nlohmann::json{{"psnr_before", psnr(embedded, host)},
                                  {"psnr_after", psnr(out, host)}}
                << "\n";
      return 0;
    }
    if (mani->parsed()) {
      std::array<int, 3> sizes{};
      if (std::sscanf(mani_sizes.c_str(), "%d,%d,%d", &sizes[0], &sizes[1],
                      &sizes[2]) != 3)
        throw ConfigError("make-manifest: --sizes must be train,val,test");
      const auto input = read_manifest(mani_samples);
      const auto manifest = split_manifest(input.samples, seed, sizes);
      write_manifest(mani_out, manifest);
      std::cout << nlohmann::json{
                       {"train", manifest.indices_of(Split::TRAIN).size()},
                       {"val", manifest.indices_of(Split::VAL).size()},
                       {"test", manifest.indices_of(Split::TEST).size()},
                       {"unused", manifest.indices_of(Split::UNUSED).size()}}
                << "\n";
      return 0;
    }
    if (tr->parsed()) {
      tc.seed = seed;
      apply_aug_config(tr_aug_config, tc);
      write_run_metadata(tr_run, argc, argv, seed);
      return cmd_train(tr_dataset, tr_root, tr_aug, tr_abl, tr_model, tr_run, tc);
    }
    if (ev->parsed()) {
      TrainConfig ev_tc;
      apply_aug_config(ev_aug_config, ev_tc);
      return cmd_eval(ev_ckpt, ev_dataset, ev_root, ev_split, ev_aug, ev_dist,
                      seed, ev_out, ev_pretty, ev_tc);
    }
    if (loc->parsed())
      return cmd_localize(loc_ckpt, loc_image, loc_rect_out, loc_rect_size,
                          loc_out);
    if (prof->parsed()) return cmd_profile(prof_h, prof_w, prof_model);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "ConfigError"}, {"message", e.what()}} << "\n";
    return 1;
  } catch (const SizeError& e) {
    std::cerr << nlohmann::json{{"error", "SizeError"}, {"message", e.what()}} << "\n";
    return 1;
  } catch (const BoundsError& e) {
    std::cerr << nlohmann::json{{"error", "BoundsError"}, {"message", e.what()}} << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << nlohmann::json{{"error", "ShapeError"}, {"message", e.what()}} << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", "RuntimeError"}, {"message", e.what()}} << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "Unexpected"}, {"message", e.what()}} << "\n";
    return 2;
  }
}

}  // namespace dbdh
