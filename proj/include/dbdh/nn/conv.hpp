#pragma once

#include <Eigen/Dense>

#include "dbdh/core/image_ops.hpp"
#include "dbdh/filterbank.hpp"
#include "dbdh/nn/param.hpp"

namespace dbdh::nn {

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

/// Gather k x k patches (zero padding) of one batch element into a
/// (c*k*k) x (oh*ow) matrix.
template <typename T>
void im2col_zero(const Tensor<T>& x, int n, int k, int stride, int pad,
                 ColMat<T>& col) {
  const int h = x.h(), w = x.w(), c = x.c();
  const int oh = conv_out_size(h, k, stride, pad);
  const int ow = conv_out_size(w, k, stride, pad);
  col.resize(static_cast<Eigen::Index>(c) * k * k,
             static_cast<Eigen::Index>(oh) * ow);
  for (int ch = 0; ch < c; ++ch) {
    const T* src = &x(n, ch, 0, 0);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(ch) * k + ky) * k + kx;
        Eigen::Index o = 0;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) {
            for (int ox = 0; ox < ow; ++ox) col(row, o++) = T(0);
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(sy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int sx = ox * stride - pad + kx;
            col(row, o++) = (sx < 0 || sx >= w) ? T(0) : srow[sx];
          }
        }
      }
  }
}

/// Scatter-add of the column gradient back to the input (zero padding).
template <typename T>
void col2im_zero(const ColMat<T>& dcol, int n, int k, int stride, int pad,
                 Tensor<T>& dx) {
  const int h = dx.h(), w = dx.w(), c = dx.c();
  const int oh = conv_out_size(h, k, stride, pad);
  const int ow = conv_out_size(w, k, stride, pad);
  for (int ch = 0; ch < c; ++ch) {
    T* dst = &dx(n, ch, 0, 0);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(ch) * k + ky) * k + kx;
        Eigen::Index o = 0;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) {
            o += ow;
            continue;
          }
          T* drow = dst + static_cast<std::size_t>(sy) * w;
          for (int ox = 0; ox < ow; ++ox, ++o) {
            const int sx = ox * stride - pad + kx;
            if (sx >= 0 && sx < w) drow[sx] += dcol(row, o);
          }
        }
      }
  }
}

/// Single-channel reflect-padded gather used by the fixed filter bank
/// (k x k, stride 1).
template <typename T>
void im2col_reflect1(const Tensor<T>& x, int n, int ch, int k, ColMat<T>& col) {
  const int h = x.h(), w = x.w();
  const int r = k / 2;
  col.resize(static_cast<Eigen::Index>(k) * k, static_cast<Eigen::Index>(h) * w);
  for (int ky = 0; ky < k; ++ky)
    for (int kx = 0; kx < k; ++kx) {
      const Eigen::Index row = static_cast<Eigen::Index>(ky) * k + kx;
      Eigen::Index o = 0;
      for (int y = 0; y < h; ++y) {
        const int sy = reflect_index(y + ky - r, h);
        const T* srow = &x(n, ch, sy, 0);
        for (int xx = 0; xx < w; ++xx)
          col(row, o++) = srow[reflect_index(xx + kx - r, w)];
      }
    }
}

/// Standard 2D convolution (cross-correlation) layer, zero padding.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int cin, int cout, int k, int stride, int pad,
         bool bias)
      : name_(std::move(name)), cin_(cin), cout_(cout), k_(k), stride_(stride),
        pad_(pad), has_bias_(bias) {
    w_.name = name_ + ".weight";
    w_.init_shape(cout, cin, k, k);
    if (has_bias_) {
      b_.name = name_ + ".bias";
      b_.decay = false;
      b_.init_shape(1, cout, 1, 1);
    }
  }

  void init(std::uint64_t seed) {
    he_normal(w_.value, cin_ * k_ * k_, param_rng(seed, w_.name));
    if (has_bias_) b_.value.set_zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    const int oh = conv_out_size(x.h(), k_, stride_, pad_);
    const int ow = conv_out_size(x.w(), k_, stride_, pad_);
    Tensor<T> y(x.n(), cout_, oh, ow);
    Eigen::Map<const RowMat<T>> wmat(w_.value.data(), cout_,
                                     static_cast<Eigen::Index>(cin_) * k_ * k_);
    ColMat<T> col;
    for (int n = 0; n < x.n(); ++n) {
      if (k_ == 1 && stride_ == 1 && pad_ == 0) {
        y.chw(n).noalias() = wmat * x.chw(n);
      } else {
        im2col_zero(x, n, k_, stride_, pad_, col);
        y.chw(n).noalias() = wmat * col;
      }
    }
    if (has_bias_)
      for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < cout_; ++c)
          y.plane(n, c).array() += b_.value.data()[c];
    if (cache) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) {
    Eigen::Map<RowMat<T>> dwmat(w_.grad.data(), cout_,
                                static_cast<Eigen::Index>(cin_) * k_ * k_);
    Eigen::Map<const RowMat<T>> wmat(w_.value.data(), cout_,
                                     static_cast<Eigen::Index>(cin_) * k_ * k_);
    Tensor<T> dx;
    if (need_dx) dx = zeros_like(x_);
    ColMat<T> col, dcol;
    for (int n = 0; n < dy.n(); ++n) {
      const auto dymat = dy.chw(n);
      if (k_ == 1 && stride_ == 1 && pad_ == 0) {
        dwmat.noalias() += dymat * x_.chw(n).transpose();
        if (need_dx) dx.chw(n).noalias() = wmat.transpose() * dymat;
      } else {
        im2col_zero(x_, n, k_, stride_, pad_, col);
        dwmat.noalias() += dymat * col.transpose();
        if (need_dx) {
          dcol.noalias() = wmat.transpose() * dymat;
          col2im_zero(dcol, n, k_, stride_, pad_, dx);
        }
      }
    }
    if (has_bias_)
      for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < cout_; ++c)
          b_.grad.data()[c] += dy.plane(n, c).sum();
    return dx;
  }

  void collect_params(ParamRefs<T>& out) {
    out.push_back(&w_);
    if (has_bias_) out.push_back(&b_);
  }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }
  int out_channels() const { return cout_; }

 private:
  std::string name_;
  int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  bool has_bias_ = false;
  Param<T> w_, b_;
  Tensor<T> x_;
};

/// The SRM&Gabor Conv layer: 62 5x5 kernels applied to each of the 4 input
/// channels independently (reflect padding, stride 1), channel-major
/// output order. Fixed by default; the trainable ablation keeps the
/// structure but randomly initializes the 62 kernels and lets gradients
/// flow into them. Input gradients are never needed (the layer reads the
/// image directly).
template <typename T>
class BankConv {
 public:
  BankConv() = default;
  BankConv(std::string name, const FilterBank& bank, bool trainable)
      : name_(std::move(name)), trainable_(trainable),
        nk_(static_cast<int>(bank.kernels.size())), k_(bank.pad_size) {
    w_.name = name_ + ".weight";
    w_.init_shape(nk_, 1, k_, k_);
    for (int i = 0; i < nk_; ++i) {
      const RowMat<double> pw = padded_weights(bank.kernels[i], k_);
      for (int y = 0; y < k_; ++y)
        for (int x = 0; x < k_; ++x)
          w_.value(i, 0, y, x) = static_cast<T>(pw(y, x));
    }
  }

  void init(std::uint64_t seed) {
    if (trainable_)
      he_normal(w_.value, k_ * k_, param_rng(seed, w_.name));
  }

  int out_channels() const { return 4 * nk_; }

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    if (x.c() != 4) throw ShapeError("BankConv: expected 4 channels");
    const int h = x.h(), w = x.w();
    Tensor<T> y(x.n(), 4 * nk_, h, w);
    Eigen::Map<const RowMat<T>> kmat(w_.value.data(), nk_,
                                     static_cast<Eigen::Index>(k_) * k_);
    ColMat<T> col;
    for (int n = 0; n < x.n(); ++n)
      for (int ch = 0; ch < 4; ++ch) {
        im2col_reflect1(x, n, ch, k_, col);
        Eigen::Map<RowMat<T>> block(&y(n, ch * nk_, 0, 0), nk_,
                                    static_cast<Eigen::Index>(h) * w);
        block.noalias() = kmat * col;
      }
    if (cache && trainable_) x_ = x;
    return y;
  }

  void backward(const Tensor<T>& dy) {
    if (!trainable_) return;
    Eigen::Map<RowMat<T>> dk(w_.grad.data(), nk_,
                             static_cast<Eigen::Index>(k_) * k_);
    ColMat<T> col;
    const int h = x_.h(), w = x_.w();
    for (int n = 0; n < dy.n(); ++n)
      for (int ch = 0; ch < 4; ++ch) {
        im2col_reflect1(x_, n, ch, k_, col);
        Eigen::Map<const RowMat<T>> block(&dy(n, ch * nk_, 0, 0), nk_,
                                          static_cast<Eigen::Index>(h) * w);
        dk.noalias() += block * col.transpose();
      }
  }

  void collect_params(ParamRefs<T>& out) {
    if (trainable_) out.push_back(&w_);
  }

  const Tensor<T>& weights() const { return w_.value; }
  bool trainable() const { return trainable_; }

 private:
  std::string name_;
  bool trainable_ = false;
  int nk_ = 62, k_ = 5;
  Param<T> w_;
  Tensor<T> x_;
};

}  // namespace dbdh::nn
