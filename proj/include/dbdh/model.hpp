#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "dbdh/filterbank.hpp"
#include "dbdh/nn/blocks.hpp"
#include "dbdh/nn/upsample.hpp"

namespace dbdh {

/// Architecture hyperparameters. The channel widths are calibrated so the
/// analytic mult-adds profile at 900 x 900 lands near the 30.71e9 design
/// point (see count_mult_adds).
struct ModelConfig {
  int texture_channels = 24;
  int context_stem_channels = 32;
  std::array<int, 4> context_stage_channels = {32, 64, 128, 256};
  int context_out_channels = 56;
  int head_channels = 64;
  int ase_reduction = 16;
  bool filters_trainable = false;
  bool use_texture_branch = true;
  bool use_seg_head = true;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  std::uint64_t hash() const;

  /// Reduced widths for desk-scale training runs.
  static ModelConfig desk();
  /// All widths 8; used by gradient checks.
  static ModelConfig tiny();
};

template <typename T>
struct ModelOutputs {
  Tensor<T> heatmaps;                // n x 4 x H x W, sigmoid probabilities
  std::optional<Tensor<T>> mask;     // n x 1 x H x W when the seg head ran
};

/// Round up to the模型's stride alignment (32).
inline int aligned_size(int v) { return (v + 31) / 32 * 32; }

// Detection logits start at a low prior (sigmoid(-4.6) ~ 0.01) so the focal
// loss is not dominated by the negative background term early in training.
inline constexpr double kDetBiasPrior = -4.6;

/// Inference-time mult-adds profile (conv + FC layers; the train-only
/// segmentation head, upsampling and activations are excluded). Computed at
/// the internally padded size, matching what forward() executes.
std::uint64_t count_mult_adds(const ModelConfig& config, int h, int w);

/// Mult-adds split used by the scaling property tests.
struct MultAddsBreakdown {
  std::uint64_t conv = 0;
  std::uint64_t fc = 0;
  std::uint64_t total() const { return conv + fc; }
};
MultAddsBreakdown count_mult_adds_breakdown(const ModelConfig& config, int h,
                                            int w);
std::uint64_t conv_mult_adds(int out_h, int out_w, int cout, int cin_per_group,
                             int k);

/// The dual-branch dual-head network.
template <typename T>
class DbdhModel {
 public:
  explicit DbdhModel(const ModelConfig& config,
                     const FilterBank& bank = build_filter_bank())
      : cfg_(config), bank_spec_(bank) {
    cfg_.validate();
    const int tex = cfg_.texture_channels;
    if (cfg_.use_texture_branch) {
      bank_conv_ = nn::BankConv<T>("texture.bank", bank, cfg_.filters_trainable);
      tex_compress_ = nn::ConvBNReLU<T>("texture.compress",
                                        bank_conv_.out_channels(), tex, 1, 1);
      tex_down_ = nn::ConvBNReLU<T>("texture.down", tex, tex, 3, 2);
    } else {
      // Ablation stand-in: three stacked convolutional blocks, the second
      // with stride 2.
      stack1_ = nn::ConvBNReLU<T>("texture.stack1", 3, tex, 3, 1);
      stack2_ = nn::ConvBNReLU<T>("texture.stack2", tex, tex, 3, 2);
      stack3_ = nn::ConvBNReLU<T>("texture.stack3", tex, tex, 3, 1);
    }

    const auto& st = cfg_.context_stage_channels;
    stem_ = nn::ConvBNReLU<T>("context.stem", 3, cfg_.context_stem_channels, 7, 2);
    pool_ = nn::MaxPool2d<T>(3, 2, 1);
    blocks_[0] = nn::BasicBlock<T>("context.stage1.block0",
                                   cfg_.context_stem_channels, st[0], 1);
    blocks_[1] = nn::BasicBlock<T>("context.stage1.block1", st[0], st[0], 1);
    blocks_[2] = nn::BasicBlock<T>("context.stage2.block0", st[0], st[1], 2);
    blocks_[3] = nn::BasicBlock<T>("context.stage2.block1", st[1], st[1], 1);
    blocks_[4] = nn::BasicBlock<T>("context.stage3.block0", st[1], st[2], 2);
    blocks_[5] = nn::BasicBlock<T>("context.stage3.block1", st[2], st[2], 1);
    blocks_[6] = nn::BasicBlock<T>("context.stage4.block0", st[2], st[3], 2);
    blocks_[7] = nn::BasicBlock<T>("context.stage4.block1", st[3], st[3], 1);
    ase3_ = nn::ASEBlock<T>("context.ase3", st[2], cfg_.ase_reduction);
    ase4_ = nn::ASEBlock<T>("context.ase4", st[3], cfg_.ase_reduction);
    gc_fc_ = nn::Linear<T>("context.gc_fc", st[3], st[3]);
    ctx_out_ = nn::ConvBNReLU<T>("context.out", st[3], cfg_.context_out_channels, 1, 1);
    up16_ = nn::BilinearUpsample<T>(16);

    const int fused = tex + cfg_.context_out_channels;
    det_fuse_ = nn::ConvBNReLU<T>("det.fuse", fused, cfg_.head_channels, 3, 1);
    det_ase_ = nn::ASEBlock<T>("det.ase", cfg_.head_channels, cfg_.ase_reduction);
    det_out_ = nn::Conv2d<T>("det.out", cfg_.head_channels, 4, 3, 1, 1, true);
    det_up_ = nn::BilinearUpsample<T>(2);
    if (cfg_.use_seg_head) {
      seg_fuse_ = nn::ConvBNReLU<T>("seg.fuse", fused, cfg_.head_channels, 3, 1);
      seg_ase_ = nn::ASEBlock<T>("seg.ase", cfg_.head_channels, cfg_.ase_reduction);
      seg_out_ = nn::Conv2d<T>("seg.out", cfg_.head_channels, 1, 3, 1, 1, true);
      seg_up_ = nn::BilinearUpsample<T>(2);
    }
  }

  void init(std::uint64_t seed) {
    if (cfg_.use_texture_branch) {
      bank_conv_.init(seed);
      tex_compress_.init(seed);
      tex_down_.init(seed);
    } else {
      stack1_.init(seed);
      stack2_.init(seed);
      stack3_.init(seed);
    }
    stem_.init(seed);
    for (auto& b : blocks_) b.init(seed);
    ase3_.init(seed);
    ase4_.init(seed);
    gc_fc_.init(seed);
    ctx_out_.init(seed);
    det_fuse_.init(seed);
    det_ase_.init(seed);
    det_out_.init(seed);
    det_out_.bias().value.fill(static_cast<T>(kDetBiasPrior));
    if (cfg_.use_seg_head) {
      seg_fuse_.init(seed);
      seg_ase_.init(seed);
      seg_out_.init(seed);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const FilterBank& bank_spec() const { return bank_spec_; }

  /// Full forward pass. `with_mask` additionally gates the train-only
  /// segmentation head (used by the warm-start ablation schedule).
  ModelOutputs<T> forward(const Tensor<T>& x, bool train_mode,
                          bool with_mask = true) {
    if (x.c() != 3) throw ShapeError("forward: expected a 3-channel image");
    if (x.h() < 64 || x.w() < 64)
      throw ShapeError(
          "forward: spatial size must be at least 64 (and is padded up to a "
          "multiple of 32)");
    const bool cache = train_mode;
    const int h = x.h(), w = x.w();
    const int hp = aligned_size(h), wp = aligned_size(w);
    pad_top_ = (hp - h) / 2;
    pad_left_ = (wp - w) / 2;
    out_h_ = h;
    out_w_ = w;
    Tensor<T> xin = (hp != h || wp != w)
                        ? pad_reflect(x, pad_top_, hp - h - pad_top_, pad_left_,
                                      wp - w - pad_left_)
                        : x;

    // Texture branch (1/2 resolution output).
    Tensor<T> t;
    if (cfg_.use_texture_branch) {
      const Tensor<T> rgby = rgb_to_rgby(xin);
      t = tex_down_.forward(
          tex_compress_.forward(bank_conv_.forward(rgby, cache), train_mode, cache),
          train_mode, cache);
    } else {
      t = stack3_.forward(
          stack2_.forward(stack1_.forward(xin, train_mode, cache), train_mode, cache),
          train_mode, cache);
    }

    // Context branch.
    Tensor<T> c = pool_.forward(stem_.forward(xin, train_mode, cache), cache);
    for (int i = 0; i < 6; ++i) c = blocks_[i].forward(c, train_mode, cache);
    c = ase3_.forward(c, cache);
    c = blocks_[6].forward(c, train_mode, cache);
    c = blocks_[7].forward(c, train_mode, cache);
    c = ase4_.forward(c, cache);
    // Global context: pooled vector through a 1x1 projection, broadcast-added.
    gc_hw_ = {c.h(), c.w()};
    const Tensor<T> v = nn::global_avg_pool(c);
    const Tensor<T> u = gc_fc_.forward(v, cache);
    for (int n = 0; n < c.n(); ++n)
      for (int ch = 0; ch < c.c(); ++ch)
        c.plane(n, ch).array() += u(n, ch, 0, 0);
    c = up16_.forward(ctx_out_.forward(c, train_mode, cache), cache);

    texture_hw_ = {t.h(), t.w()};
    context_hw_ = {c.h(), c.w()};

    // Heads over the channel concat of both branches.
    Tensor<T> fused(t.n(), t.c() + c.c(), t.h(), t.w());
    for (int n = 0; n < t.n(); ++n) {
      fused.chw(n).topRows(t.c()) = t.chw(n);
      fused.chw(n).bottomRows(c.c()) = c.chw(n);
    }
    split_t_ = t.c();

    ModelOutputs<T> out;
    out.heatmaps = head_crop(det_sig_.forward(
        det_up_.forward(
            det_out_.forward(
                det_ase_.forward(det_fuse_.forward(fused, train_mode, cache), cache),
                cache),
            cache),
        cache));
    seg_ran_ = cfg_.use_seg_head && train_mode && with_mask;
    if (seg_ran_)
      out.mask = head_crop(seg_sig_.forward(
          seg_up_.forward(
              seg_out_.forward(
                  seg_ase_.forward(seg_fuse_.forward(fused, train_mode, cache), cache),
                  cache),
              cache),
          cache));
    return out;
  }

  /// Backward from gradients w.r.t. the output probabilities (cropped
  /// frame). Requires the previous forward to have run with
  /// train_mode=true.
  void backward(const Tensor<T>& d_heatmaps, const Tensor<T>* d_mask = nullptr) {
    Tensor<T> dfused = det_fuse_.backward(
        det_ase_.backward(det_out_.backward(
            det_up_.backward(det_sig_.backward(head_uncrop(d_heatmaps))), true)),
        true);
    if (d_mask) {
      if (!seg_ran_)
        throw ConfigError("backward: segmentation head did not run forward");
      const Tensor<T> dseg = seg_fuse_.backward(
          seg_ase_.backward(seg_out_.backward(
              seg_up_.backward(seg_sig_.backward(head_uncrop(*d_mask))), true)),
          true);
      dfused.vec() += dseg.vec();
    }

    // Split the concat gradient back into the two branches.
    Tensor<T> dt(dfused.n(), split_t_, dfused.h(), dfused.w());
    Tensor<T> dc(dfused.n(), dfused.c() - split_t_, dfused.h(), dfused.w());
    for (int n = 0; n < dfused.n(); ++n) {
      dt.chw(n) = dfused.chw(n).topRows(split_t_);
      dc.chw(n) = dfused.chw(n).bottomRows(dfused.c() - split_t_);
    }

    // Context branch.
    Tensor<T> dctx = ctx_out_.backward(up16_.backward(dc), true);
    // Global-context add: identity path plus the pooled-vector path.
    {
      Tensor<T> du(dctx.n(), dctx.c(), 1, 1);
      for (int n = 0; n < dctx.n(); ++n)
        for (int ch = 0; ch < dctx.c(); ++ch)
          du(n, ch, 0, 0) = static_cast<T>(dctx.plane(n, ch).sum());
      const Tensor<T> dv = gc_fc_.backward(du);
      nn::global_avg_pool_backward(dv, gc_hw_[0], gc_hw_[1], dctx);
    }
    dctx = ase4_.backward(dctx);
    dctx = blocks_[7].backward(dctx, true);
    dctx = blocks_[6].backward(dctx, true);
    dctx = ase3_.backward(dctx);
    for (int i = 5; i >= 0; --i) dctx = blocks_[i].backward(dctx, true);
    stem_.backward(pool_.backward(dctx), false);

    // Texture branch.
    if (cfg_.use_texture_branch) {
      bank_conv_.backward(tex_compress_.backward(
          tex_down_.backward(dt, true), true));
    } else {
      stack1_.backward(stack2_.backward(stack3_.backward(dt, true), true), false);
    }
  }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> out;
    if (cfg_.use_texture_branch) {
      bank_conv_.collect_params(out);
      tex_compress_.collect_params(out);
      tex_down_.collect_params(out);
    } else {
      stack1_.collect_params(out);
      stack2_.collect_params(out);
      stack3_.collect_params(out);
    }
    stem_.collect_params(out);
    for (auto& b : blocks_) b.collect_params(out);
    ase3_.collect_params(out);
    ase4_.collect_params(out);
    gc_fc_.collect_params(out);
    ctx_out_.collect_params(out);
    det_fuse_.collect_params(out);
    det_ase_.collect_params(out);
    det_out_.collect_params(out);
    if (cfg_.use_seg_head) {
      seg_fuse_.collect_params(out);
      seg_ase_.collect_params(out);
      seg_out_.collect_params(out);
    }
    return out;
  }

  nn::BufferRefs<T> buffers() {
    nn::BufferRefs<T> out;
    if (cfg_.use_texture_branch) {
      tex_compress_.collect_buffers(out);
      tex_down_.collect_buffers(out);
    } else {
      stack1_.collect_buffers(out);
      stack2_.collect_buffers(out);
      stack3_.collect_buffers(out);
    }
    stem_.collect_buffers(out);
    for (auto& b : blocks_) b.collect_buffers(out);
    ctx_out_.collect_buffers(out);
    det_fuse_.collect_buffers(out);
    if (cfg_.use_seg_head) seg_fuse_.collect_buffers(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.set_zero();
  }

  /// Fixed 62-kernel weights (valid when the texture branch is present).
  const Tensor<T>& bank_weights() const { return bank_conv_.weights(); }

  std::array<int, 2> last_texture_hw() const { return texture_hw_; }
  std::array<int, 2> last_context_hw() const { return context_hw_; }

 private:
  Tensor<T> head_crop(const Tensor<T>& y) {
    if (y.h() == out_h_ && y.w() == out_w_) return y;
    return crop(y, pad_top_, pad_left_, out_h_, out_w_);
  }
  /// Adjoint of head_crop: embed the cropped gradient into zeros.
  Tensor<T> head_uncrop(const Tensor<T>& d) {
    const int hp = aligned_size(out_h_), wp = aligned_size(out_w_);
    if (hp == out_h_ && wp == out_w_) return d;
    Tensor<T> out(d.n(), d.c(), hp, wp);
    for (int n = 0; n < d.n(); ++n)
      for (int c = 0; c < d.c(); ++c)
        out.plane(n, c).block(pad_top_, pad_left_, out_h_, out_w_) = d.plane(n, c);
    return out;
  }

  ModelConfig cfg_;
  FilterBank bank_spec_;

  nn::BankConv<T> bank_conv_;
  nn::ConvBNReLU<T> tex_compress_, tex_down_;
  nn::ConvBNReLU<T> stack1_, stack2_, stack3_;

  nn::ConvBNReLU<T> stem_;
  nn::MaxPool2d<T> pool_;
  std::array<nn::BasicBlock<T>, 8> blocks_;
  nn::ASEBlock<T> ase3_, ase4_;
  nn::Linear<T> gc_fc_;
  nn::ConvBNReLU<T> ctx_out_;
  nn::BilinearUpsample<T> up16_;

  nn::ConvBNReLU<T> det_fuse_, seg_fuse_;
  nn::ASEBlock<T> det_ase_, seg_ase_;
  nn::Conv2d<T> det_out_, seg_out_;
  nn::BilinearUpsample<T> det_up_, seg_up_;
  nn::Sigmoid<T> det_sig_, seg_sig_;

  bool seg_ran_ = false;
  int pad_top_ = 0, pad_left_ = 0, out_h_ = 0, out_w_ = 0, split_t_ = 0;
  std::array<int, 2> gc_hw_ = {0, 0};
  std::array<int, 2> texture_hw_ = {0, 0};
  std::array<int, 2> context_hw_ = {0, 0};
};

}  // namespace dbdh
