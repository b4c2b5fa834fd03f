#include "dbdh/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "dbdh/core/error.hpp"
#include "json.hpp"

namespace dbdh {

namespace {

constexpr char kMagic[8] = {'D', 'B', 'D', 'H', 'C', 'K', 'P', '1'};

struct NamedTensor {
  std::string name;
  Tensor<float>* tensor;
};

std::vector<NamedTensor> all_tensors(DbdhModel<float>& model) {
  std::vector<NamedTensor> out;
  for (auto* p : model.params()) out.push_back({p->name, &p->value});
  for (auto& [name, t] : model.buffers()) out.push_back({name, t});
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, DbdhModel<float>& model) {
  nlohmann::json header;
  header["config"] = nlohmann::json::parse(model.config().to_json());
  header["config_hash"] = model.config().hash();
  header["filter_bank"] =
      nlohmann::json::parse(filter_bank_to_json(model.bank_spec()));
  header["scalar"] = "f32";
  auto tensors = all_tensors(model);
  auto& manifest = header["tensors"] = nlohmann::json::array();
  for (const auto& nt : tensors)
    manifest.push_back({{"name", nt.name},
                        {"shape", {nt.tensor->n(), nt.tensor->c(),
                                   nt.tensor->h(), nt.tensor->w()}}});
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& nt : tensors)
    out.write(reinterpret_cast<const char*>(nt.tensor->data()),
              static_cast<std::streamsize>(sizeof(float) * nt.tensor->size()));
  if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

std::unique_ptr<DbdhModel<float>> load_checkpoint(const std::string& path,
                                                  const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("load_checkpoint: not a checkpoint file: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  const auto header = nlohmann::json::parse(htext);

  const ModelConfig config = ModelConfig::from_json(header.at("config").dump());
  const std::uint64_t stored_hash = header.at("config_hash").get<std::uint64_t>();
  if (stored_hash != config.hash())
    throw IoError("load_checkpoint: corrupt header (config hash mismatch)");
  if (expected && expected->hash() != stored_hash)
    throw ConfigError(
        "load_checkpoint: checkpoint architecture does not match the "
        "requested config");
  const FilterBank bank =
      filter_bank_from_json(header.at("filter_bank").dump());

  auto model = std::make_unique<DbdhModel<float>>(config, bank);
  auto tensors = all_tensors(*model);
  const auto& manifest = header.at("tensors");
  if (manifest.size() != tensors.size())
    throw IoError("load_checkpoint: tensor manifest size mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& entry = manifest.at(i);
    if (entry.at("name").get<std::string>() != tensors[i].name)
      throw IoError("load_checkpoint: tensor order mismatch at " +
                    tensors[i].name);
    const auto& s = entry.at("shape");
    if (s.at(0).get<int>() != tensors[i].tensor->n() ||
        s.at(1).get<int>() != tensors[i].tensor->c() ||
        s.at(2).get<int>() != tensors[i].tensor->h() ||
        s.at(3).get<int>() != tensors[i].tensor->w())
      throw IoError("load_checkpoint: tensor shape mismatch at " +
                    tensors[i].name);
    in.read(reinterpret_cast<char*>(tensors[i].tensor->data()),
            static_cast<std::streamsize>(sizeof(float) *
                                         tensors[i].tensor->size()));
  }
  if (!in) throw IoError("load_checkpoint: truncated weight blob in " + path);
  return model;
}

}  // namespace dbdh
