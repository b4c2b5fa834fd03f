#pragma once

#include "dbdh/nn/param.hpp"

namespace dbdh::nn {

/// Fully connected layer over (n, c, 1, 1) vectors.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out)
      : name_(std::move(name)), in_(in), out_(out) {
    w_.name = name_ + ".weight";
    w_.init_shape(out, in, 1, 1);
    b_.name = name_ + ".bias";
    b_.decay = false;
    b_.init_shape(1, out, 1, 1);
  }

  void init(std::uint64_t seed) {
    he_normal(w_.value, in_, param_rng(seed, w_.name));
    b_.value.set_zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    Tensor<T> y(x.n(), out_, 1, 1);
    Eigen::Map<const RowMat<T>> wmat(w_.value.data(), out_, in_);
    for (int n = 0; n < x.n(); ++n) {
      Eigen::Map<const VecX<T>> xv(&x(n, 0, 0, 0), in_);
      Eigen::Map<VecX<T>> yv(&y(n, 0, 0, 0), out_);
      yv.noalias() = wmat * xv;
      yv += Eigen::Map<const VecX<T>>(b_.value.data(), out_);
    }
    if (cache) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Eigen::Map<const RowMat<T>> wmat(w_.value.data(), out_, in_);
    Eigen::Map<RowMat<T>> dwmat(w_.grad.data(), out_, in_);
    Eigen::Map<VecX<T>> dbv(b_.grad.data(), out_);
    Tensor<T> dx(dy.n(), in_, 1, 1);
    for (int n = 0; n < dy.n(); ++n) {
      Eigen::Map<const VecX<T>> dyv(&dy(n, 0, 0, 0), out_);
      Eigen::Map<const VecX<T>> xv(&x_(n, 0, 0, 0), in_);
      dwmat.noalias() += dyv * xv.transpose();
      dbv += dyv;
      Eigen::Map<VecX<T>> dxv(&dx(n, 0, 0, 0), in_);
      dxv.noalias() = wmat.transpose() * dyv;
    }
    return dx;
  }

  void collect_params(ParamRefs<T>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  std::string name_;
  int in_ = 0, out_ = 0;
  Param<T> w_, b_;
  Tensor<T> x_;
};

}  // namespace dbdh::nn
