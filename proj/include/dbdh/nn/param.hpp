#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dbdh/core/rng.hpp"
#include "dbdh/core/tensor.hpp"

namespace dbdh::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool decay = true;  // participates in decoupled weight decay

  void init_shape(int n, int c, int h, int w) {
    value = Tensor<T>(n, c, h, w);
    grad = Tensor<T>(n, c, h, w);
  }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;
template <typename T>
using BufferRefs = std::vector<std::pair<std::string, Tensor<T>*>>;

/// Initialization stream keyed by the parameter path, so two models with a
/// shared submodule get bit-identical weights for it regardless of which
/// other modules exist.
inline Rng param_rng(std::uint64_t seed, const std::string& name) {
  return Rng(mix_seed(seed, fnv1a64(name)));
}

template <typename T>
void he_normal(Tensor<T>& t, int fan_in, Rng rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<T>(rng.normal(0.0, stddev));
}

}  // namespace dbdh::nn
