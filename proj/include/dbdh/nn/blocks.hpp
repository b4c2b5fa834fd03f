#pragma once

#include <cmath>

#include "dbdh/nn/batchnorm.hpp"
#include "dbdh/nn/conv.hpp"
#include "dbdh/nn/linear.hpp"
#include "dbdh/nn/pool.hpp"

namespace dbdh::nn {

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y.data()[i] < T(0)) y.data()[i] = T(0);
    if (cache) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (y_.data()[i] <= T(0)) dx.data()[i] = T(0);
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    Tensor<T> y = zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i)
      y.data()[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x.data()[i]))));
    if (cache) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx = zeros_like(dy);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const T s = y_.data()[i];
      dx.data()[i] = dy.data()[i] * s * (T(1) - s);
    }
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class ConvBNReLU {
 public:
  ConvBNReLU() = default;
  ConvBNReLU(const std::string& name, int cin, int cout, int k, int stride)
      : conv_(name + ".conv", cin, cout, k, stride, k / 2, /*bias=*/false),
        bn_(name + ".bn", cout) {}

  void init(std::uint64_t seed) { conv_.init(seed); }

  Tensor<T> forward(const Tensor<T>& x, bool train, bool cache) {
    return relu_.forward(bn_.forward(conv_.forward(x, cache), train, cache), cache);
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) {
    return conv_.backward(bn_.backward(relu_.backward(dy)), need_dx);
  }

  void collect_params(ParamRefs<T>& out) {
    conv_.collect_params(out);
    bn_.collect_params(out);
  }
  void collect_buffers(BufferRefs<T>& out) { bn_.collect_buffers(out); }

  int out_channels() const { return conv_.out_channels(); }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  ReLU<T> relu_;
};

/// ResNet basic residual block (two 3x3 convs, identity or projected skip).
template <typename T>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(const std::string& name, int cin, int cout, int stride)
      : projected_(stride != 1 || cin != cout),
        conv1_(name + ".conv1", cin, cout, 3, stride, 1, false),
        bn1_(name + ".bn1", cout),
        conv2_(name + ".conv2", cout, cout, 3, 1, 1, false),
        bn2_(name + ".bn2", cout) {
    if (projected_) {
      proj_conv_ = Conv2d<T>(name + ".proj.conv", cin, cout, 1, stride, 0, false);
      proj_bn_ = BatchNorm2d<T>(name + ".proj.bn", cout);
    }
  }

  void init(std::uint64_t seed) {
    conv1_.init(seed);
    conv2_.init(seed);
    if (projected_) proj_conv_.init(seed);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, bool cache) {
    Tensor<T> main = relu1_.forward(
        bn1_.forward(conv1_.forward(x, cache), train, cache), cache);
    main = bn2_.forward(conv2_.forward(main, cache), train, cache);
    Tensor<T> skip = projected_
        ? proj_bn_.forward(proj_conv_.forward(x, cache), train, cache)
        : x;
    main.vec() += skip.vec();
    return relu2_.forward(main, cache);
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) {
    const Tensor<T> dsum = relu2_.backward(dy);
    Tensor<T> dx =
        conv1_.backward(bn1_.backward(relu1_.backward(
                            conv2_.backward(bn2_.backward(dsum), true))),
                        need_dx);
    if (projected_) {
      const Tensor<T> dskip = proj_conv_.backward(proj_bn_.backward(dsum), need_dx);
      if (need_dx) dx.vec() += dskip.vec();
    } else if (need_dx) {
      dx.vec() += dsum.vec();
    }
    return dx;
  }

  void collect_params(ParamRefs<T>& out) {
    conv1_.collect_params(out);
    bn1_.collect_params(out);
    conv2_.collect_params(out);
    bn2_.collect_params(out);
    if (projected_) {
      proj_conv_.collect_params(out);
      proj_bn_.collect_params(out);
    }
  }
  void collect_buffers(BufferRefs<T>& out) {
    bn1_.collect_buffers(out);
    bn2_.collect_buffers(out);
    if (projected_) proj_bn_.collect_buffers(out);
  }

 private:
  bool projected_ = false;
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  Conv2d<T> proj_conv_;
  BatchNorm2d<T> proj_bn_;
  ReLU<T> relu1_, relu2_;
};

/// Addition SE block: s = sigmoid(FC2(relu(FC1(gap(x))))) and
/// y = x + x (.) s, channel-wise broadcast.
template <typename T>
class ASEBlock {
 public:
  ASEBlock() = default;
  ASEBlock(const std::string& name, int c, int reduction)
      : c_(c),
        fc1_(name + ".fc1", c, c / reduction),
        fc2_(name + ".fc2", c / reduction, c) {
    if (reduction <= 0 || c % reduction != 0)
      throw ConfigError("ASEBlock: channel count not divisible by reduction");
  }

  void init(std::uint64_t seed) {
    fc1_.init(seed);
    fc2_.init(seed);
  }

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    const Tensor<T> g = global_avg_pool(x);
    const Tensor<T> a = act_.forward(fc1_.forward(g, cache), cache);
    s_ = gate_.forward(fc2_.forward(a, cache), cache);
    Tensor<T> y = zeros_like(x);
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c) {
        const T s = s_(n, c, 0, 0);
        const T* px = &x(n, c, 0, 0);
        T* py = &y(n, c, 0, 0);
        for (int i = 0; i < x.h() * x.w(); ++i) py[i] = px[i] * (T(1) + s);
      }
    if (cache) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int h = x_.h(), w = x_.w();
    Tensor<T> dx = zeros_like(dy);
    Tensor<T> ds(dy.n(), c_, 1, 1);
    for (int n = 0; n < dy.n(); ++n)
      for (int c = 0; c < c_; ++c) {
        const T s = s_(n, c, 0, 0);
        const T* pdy = &dy(n, c, 0, 0);
        const T* px = &x_(n, c, 0, 0);
        T* pdx = &dx(n, c, 0, 0);
        double acc = 0.0;
        for (int i = 0; i < h * w; ++i) {
          pdx[i] = pdy[i] * (T(1) + s);
          acc += static_cast<double>(pdy[i]) * px[i];
        }
        ds(n, c, 0, 0) = static_cast<T>(acc);
      }
    const Tensor<T> dg =
        fc1_.backward(act_.backward(fc2_.backward(gate_.backward(ds))));
    global_avg_pool_backward(dg, h, w, dx);
    return dx;
  }

  void collect_params(ParamRefs<T>& out) {
    fc1_.collect_params(out);
    fc2_.collect_params(out);
  }

  Linear<T>& fc1() { return fc1_; }
  Linear<T>& fc2() { return fc2_; }
  const Tensor<T>& gate_values() const { return s_; }

 private:
  int c_ = 0;
  Linear<T> fc1_, fc2_;
  ReLU<T> act_;
  Sigmoid<T> gate_;
  Tensor<T> x_, s_;
};

/// Standalone ASE application with the block's stored weights.
template <typename T>
Tensor<T> ase_apply(ASEBlock<T>& block, const Tensor<T>& feature) {
  return block.forward(feature, /*cache=*/false);
}

}  // namespace dbdh::nn
