#pragma once

#include <memory>
#include <string>

#include "dbdh/model.hpp"

namespace dbdh {

/// Single-file checkpoint: magic, length-prefixed JSON header (model config,
/// config hash, full filter-bank serialization, tensor manifest) followed by
/// the raw float32 weight blob.
void save_checkpoint(const std::string& path, DbdhModel<float>& model);

/// Rebuilds the model from the embedded config and filter bank. When
/// `expected` is given, refuses checkpoints whose config hash differs from
/// the requested architecture.
std::unique_ptr<DbdhModel<float>> load_checkpoint(
    const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace dbdh
