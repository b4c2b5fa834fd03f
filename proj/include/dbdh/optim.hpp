#pragma once

#include <cmath>

#include "dbdh/nn/param.hpp"

namespace dbdh {

/// Adam with decoupled weight decay. Decay is skipped for parameters
/// flagged decay=false (normalization affine terms and biases).
template <typename T>
class AdamW {
 public:
  AdamW(nn::ParamRefs<T> params, double lr, double weight_decay,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1),
        b2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
      m_.push_back(zeros_like(p->value));
      v_.push_back(zeros_like(p->value));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto* p = params_[k];
      T* w = p->value.data();
      const T* g = p->grad.data();
      T* m = m_[k].data();
      T* v = v_[k].data();
      const bool decay = p->decay && wd_ > 0.0;
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double gi = g[i];
        const double mi = b1_ * m[i] + (1.0 - b1_) * gi;
        const double vi = b2_ * v[i] + (1.0 - b2_) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        double wi = w[i] - lr_ * (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
        if (decay) wi -= lr_ * wd_ * wi;
        w[i] = static_cast<T>(wi);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.set_zero();
  }

  long step_count() const { return t_; }

 private:
  nn::ParamRefs<T> params_;
  std::vector<Tensor<T>> m_, v_;
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
};

}  // namespace dbdh
