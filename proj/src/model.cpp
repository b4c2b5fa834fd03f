#include "dbdh/model.hpp"

#include "dbdh/core/error.hpp"
#include "json.hpp"

namespace dbdh {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string("ModelConfig: ") + what + " must be positive");
  };
  positive(texture_channels, "texture_channels");
  positive(context_stem_channels, "context_stem_channels");
  for (int c : context_stage_channels) positive(c, "context_stage_channels");
  positive(context_out_channels, "context_out_channels");
  positive(head_channels, "head_channels");
  positive(ase_reduction, "ase_reduction");
  if (head_channels % ase_reduction != 0 ||
      context_stage_channels[2] % ase_reduction != 0 ||
      context_stage_channels[3] % ase_reduction != 0)
    throw ConfigError(
        "ModelConfig: ase_reduction must divide head_channels and the last "
        "two context stage widths");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["texture_channels"] = texture_channels;
  j["context_stem_channels"] = context_stem_channels;
  j["context_stage_channels"] = context_stage_channels;
  j["context_out_channels"] = context_out_channels;
  j["head_channels"] = head_channels;
  j["ase_reduction"] = ase_reduction;
  j["filters_trainable"] = filters_trainable;
  j["use_texture_branch"] = use_texture_branch;
  j["use_seg_head"] = use_seg_head;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.texture_channels = j.at("texture_channels").get<int>();
  c.context_stem_channels = j.at("context_stem_channels").get<int>();
  for (int i = 0; i < 4; ++i)
    c.context_stage_channels[i] = j.at("context_stage_channels").at(i).get<int>();
  c.context_out_channels = j.at("context_out_channels").get<int>();
  c.head_channels = j.at("head_channels").get<int>();
  c.ase_reduction = j.at("ase_reduction").get<int>();
  c.filters_trainable = j.at("filters_trainable").get<bool>();
  c.use_texture_branch = j.at("use_texture_branch").get<bool>();
  c.use_seg_head = j.at("use_seg_head").get<bool>();
  return c;
}

std::uint64_t ModelConfig::hash() const { return fnv1a64(to_json()); }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.texture_channels = 8;
  c.context_stem_channels = 8;
  c.context_stage_channels = {8, 16, 32, 64};
  c.context_out_channels = 16;
  c.head_channels = 16;
  c.ase_reduction = 8;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.texture_channels = 8;
  c.context_stem_channels = 8;
  c.context_stage_channels = {8, 8, 8, 8};
  c.context_out_channels = 8;
  c.head_channels = 8;
  c.ase_reduction = 8;
  return c;
}

std::uint64_t conv_mult_adds(int out_h, int out_w, int cout, int cin_per_group,
                             int k) {
  return static_cast<std::uint64_t>(out_h) * out_w * cout * cin_per_group * k * k;
}

MultAddsBreakdown count_mult_adds_breakdown(const ModelConfig& config, int h,
                                            int w) {
  config.validate();
  const int hp = aligned_size(h), wp = aligned_size(w);
  const int h2 = hp / 2, w2 = wp / 2;
  const int h4 = hp / 4, w4 = wp / 4;
  const int h8 = hp / 8, w8 = wp / 8;
  const int h16 = hp / 16, w16 = wp / 16;
  const int h32 = hp / 32, w32 = wp / 32;
  const int tex = config.texture_channels;
  const auto& st = config.context_stage_channels;
  const int r = config.ase_reduction;

  MultAddsBreakdown m;
  if (config.use_texture_branch) {
    m.conv += conv_mult_adds(hp, wp, 4 * 62, 1, 5);       // fixed bank
    m.conv += conv_mult_adds(hp, wp, tex, 4 * 62, 1);     // 1x1 compress
    m.conv += conv_mult_adds(h2, w2, tex, tex, 3);        // stride-2 reduce
  } else {
    m.conv += conv_mult_adds(hp, wp, tex, 3, 3);
    m.conv += conv_mult_adds(h2, w2, tex, tex, 3);
    m.conv += conv_mult_adds(h2, w2, tex, tex, 3);
  }

  m.conv += conv_mult_adds(h2, w2, config.context_stem_channels, 3, 7);
  auto block = [&](int oh, int ow, int cin, int cout, int stride) {
    m.conv += conv_mult_adds(oh, ow, cout, cin, 3);
    m.conv += conv_mult_adds(oh, ow, cout, cout, 3);
    if (stride != 1 || cin != cout) m.conv += conv_mult_adds(oh, ow, cout, cin, 1);
  };
  block(h4, w4, config.context_stem_channels, st[0], 1);
  block(h4, w4, st[0], st[0], 1);
  block(h8, w8, st[0], st[1], 2);
  block(h8, w8, st[1], st[1], 1);
  block(h16, w16, st[1], st[2], 2);
  block(h16, w16, st[2], st[2], 1);
  block(h32, w32, st[2], st[3], 2);
  block(h32, w32, st[3], st[3], 1);
  m.fc += 2ull * st[2] * (st[2] / r);  // ASE after stage 3
  m.fc += 2ull * st[3] * (st[3] / r);  // ASE after stage 4
  m.fc += static_cast<std::uint64_t>(st[3]) * st[3];  // global-context projection
  m.conv += conv_mult_adds(h32, w32, config.context_out_channels, st[3], 1);

  const int fused = tex + config.context_out_channels;
  m.conv += conv_mult_adds(h2, w2, config.head_channels, fused, 3);
  m.fc += 2ull * config.head_channels * (config.head_channels / r);
  m.conv += conv_mult_adds(h2, w2, 4, config.head_channels, 3);
  return m;
}

std::uint64_t count_mult_adds(const ModelConfig& config, int h, int w) {
  return count_mult_adds_breakdown(config, h, w).total();
}

}  // namespace dbdh
