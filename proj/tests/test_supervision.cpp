#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "dbdh/core/rng.hpp"
#include "dbdh/supervision.hpp"
#include "doctest.h"

using namespace dbdh;

namespace {

VertexSet square_vertices(double x0, double y0, double x1, double y1, int h,
                          int w) {
  VertexSet v;
  v.frame_h = h;
  v.frame_w = w;
  v.points = {Vec2{x0, y0}, Vec2{x1, y0}, Vec2{x1, y1}, Vec2{x0, y1}};
  return v;
}

// Literal transcription of the printed focal-loss formula, triple loop.
double focal_loss_naive(const Tensor<double>& pred, const Tensor<double>& gt,
                        double alpha, double beta) {
  double loss = 0.0;
  for (int c = 0; c < pred.c(); ++c)
    for (int i = 0; i < pred.h(); ++i)
      for (int j = 0; j < pred.w(); ++j) {
        const double p = clamp_prob(pred(0, c, i, j));
        const double g = gt(0, c, i, j);
        if (g == 1.0)
          loss += std::pow(1.0 - p, alpha) * std::log(p);
        else
          loss += std::pow(1.0 - g, beta) * std::pow(p, alpha) * std::log(1.0 - p);
      }
  return -loss;
}

double bce_naive(const Tensor<double>& pred, const Tensor<double>& gt) {
  double loss = 0.0;
  for (int i = 0; i < pred.h(); ++i)
    for (int j = 0; j < pred.w(); ++j) {
      const double p = clamp_prob(pred(0, 0, i, j));
      const double m = gt(0, 0, i, j);
      loss += -(m * std::log(p) + (1.0 - m) * std::log(1.0 - p));
    }
  return loss / (pred.h() * pred.w());
}

}  // namespace

TEST_CASE("render_heatmaps: exact peak, sigma profile, ordering") {
  const auto v = square_vertices(30.2, 40.7, 90.0, 100.0, 128, 128);
  const auto hm = render_heatmaps<double>(v, 128, 128);
  CHECK(hm.sigma == 5.0);
  // channel 0 peak at the rounded TL vertex
  CHECK(hm.data(0, 0, 41, 30) == 1.0);
  CHECK(hm.data(0, 1, 41, 90) == 1.0);
  CHECK(hm.data(0, 2, 100, 90) == 1.0);
  CHECK(hm.data(0, 3, 100, 30) == 1.0);
  // value at Euclidean distance sigma
  CHECK(hm.data(0, 0, 41, 35) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(hm.data(0, 0, 46, 30) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
}

TEST_CASE("render_heatmaps: far vertices do not contaminate each other") {
  const auto v = square_vertices(10, 10, 110, 110, 128, 128);
  const auto hm = render_heatmaps<double>(v, 128, 128);
  // channel 0 value at the TR peak position: distance 100 px
  CHECK(hm.data(0, 0, 10, 110) < 1e-80);
  for (int c = 0; c < 4; ++c) {
    int count = 0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x)
        if (hm.data(0, c, y, x) == 1.0) ++count;
    CHECK(count == 1);
  }
}

TEST_CASE("render_heatmaps rejects out-of-frame vertices") {
  const auto v = square_vertices(-1, 10, 50, 50, 64, 64);
  CHECK_THROWS_AS(render_heatmaps<double>(v, 64, 64), OutOfFrameError);
}

TEST_CASE("render_mask: axis-aligned square area") {
  const auto v = square_vertices(100, 100, 300, 300, 400, 400);
  const auto mask = render_mask<double>(v, 400, 400);
  double sum = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) sum += mask.data()[i];
  CHECK(sum >= 40000 - 400);
  CHECK(sum <= 40000 + 400);
}

TEST_CASE("render_mask: full-frame quad is all ones") {
  const auto v = square_vertices(0, 0, 64, 64, 64, 64);
  const auto mask = render_mask<double>(v, 64, 64);
  for (std::size_t i = 0; i < mask.size(); ++i)
    CHECK(mask.data()[i] == 1.0);
}

TEST_CASE("render_mask rejects degenerate quads") {
  VertexSet v;
  v.frame_h = v.frame_w = 64;
  v.points = {Vec2{5, 5}, Vec2{5, 5}, Vec2{5, 5}, Vec2{5, 5}};
  CHECK_THROWS_AS(render_mask<double>(v, 64, 64), DegenerateRegionError);
  // bow-tie
  v.points = {Vec2{0, 0}, Vec2{10, 10}, Vec2{10, 0}, Vec2{0, 10}};
  CHECK_THROWS_AS(render_mask<double>(v, 64, 64), DegenerateRegionError);
}

TEST_CASE("focal loss scalar hand evaluations") {
  Tensor<double> pred(1, 1, 1, 1), gt(1, 1, 1, 1);
  pred(0, 0, 0, 0) = 0.9;
  gt(0, 0, 0, 0) = 1.0;
  CHECK(focal_heatmap_loss(pred, gt) == doctest::Approx(1.0536052e-3).epsilon(1e-5));

  pred(0, 0, 0, 0) = 0.2;
  gt(0, 0, 0, 0) = 0.5;
  CHECK(focal_heatmap_loss(pred, gt) == doctest::Approx(5.5785888e-4).epsilon(1e-5));

  // perfect prediction drives the loss to ~0
  pred(0, 0, 0, 0) = 1.0 - 1e-9;
  gt(0, 0, 0, 0) = 1.0;
  CHECK(focal_heatmap_loss(pred, gt) < 1e-10);
}

TEST_CASE("focal loss matches the naive triple loop on random tensors") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor<double> pred(1, 4, 8, 8), gt(1, 4, 8, 8);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred.data()[i] = rng.uniform(0.01, 0.99);
      gt.data()[i] = rng.uniform();
    }
    // plant exact peaks
    for (int c = 0; c < 4; ++c)
      gt(0, c, static_cast<int>(rng.uniform_int(0, 7)),
         static_cast<int>(rng.uniform_int(0, 7))) = 1.0;
    const double got = focal_heatmap_loss(pred, gt);
    const double want = focal_loss_naive(pred, gt, 2.0, 4.0);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("focal loss gradient matches finite differences") {
  Rng rng(17);
  Tensor<double> pred(1, 4, 6, 6), gt(1, 4, 6, 6);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred.data()[i] = rng.uniform(0.05, 0.95);
    gt.data()[i] = rng.uniform(0.0, 0.9);
  }
  gt(0, 2, 3, 3) = 1.0;
  Tensor<double> grad = zeros_like(pred);
  focal_heatmap_loss(pred, gt, 2.0, 4.0, &grad);
  for (int probe = 0; probe < 12; ++probe) {
    const std::size_t i = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pred.size()) - 1));
    const double eps = 1e-6;
    const double keep = pred.data()[i];
    pred.data()[i] = keep + eps;
    const double up = focal_heatmap_loss(pred, gt);
    pred.data()[i] = keep - eps;
    const double dn = focal_heatmap_loss(pred, gt);
    pred.data()[i] = keep;
    CHECK(grad.data()[i] == doctest::Approx((up - dn) / (2 * eps)).epsilon(1e-5));
  }
}

TEST_CASE("bce loss closed forms and naive loop") {
  Tensor<double> pred(1, 1, 8, 8), gt(1, 1, 8, 8);
  pred.fill(0.5);
  Rng rng(3);
  for (std::size_t i = 0; i < gt.size(); ++i)
    gt.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  CHECK(bce_mask_loss(pred, gt) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  gt.fill(1.0);
  pred.fill(0.25);
  CHECK(bce_mask_loss(pred, gt) == doctest::Approx(-std::log(0.25)).epsilon(1e-12));

  // perfect prediction
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    pred.data()[i] = gt.data()[i];
  }
  CHECK(bce_mask_loss(pred, gt) <= 1e-5);

  for (int trial = 0; trial < 100; ++trial) {
    for (std::size_t i = 0; i < gt.size(); ++i) {
      pred.data()[i] = rng.uniform(0.01, 0.99);
      gt.data()[i] = rng.uniform();
    }
    CHECK(bce_mask_loss(pred, gt) ==
          doctest::Approx(bce_naive(pred, gt)).epsilon(1e-6));
  }
}

TEST_CASE("bce gradient matches finite differences") {
  Rng rng(23);
  Tensor<double> pred(1, 1, 8, 8), gt(1, 1, 8, 8);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred.data()[i] = rng.uniform(0.05, 0.95);
    gt.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }
  Tensor<double> grad = zeros_like(pred);
  bce_mask_loss(pred, gt, &grad);
  for (int probe = 0; probe < 12; ++probe) {
    const std::size_t i = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pred.size()) - 1));
    const double eps = 1e-6;
    const double keep = pred.data()[i];
    pred.data()[i] = keep + eps;
    const double up = bce_mask_loss(pred, gt);
    pred.data()[i] = keep - eps;
    const double dn = bce_mask_loss(pred, gt);
    pred.data()[i] = keep;
    CHECK(grad.data()[i] == doctest::Approx((up - dn) / (2 * eps)).epsilon(1e-5));
  }
}

TEST_CASE("total loss combination") {
  CHECK(total_loss(0.5, 0.03) == doctest::Approx(0.8));
  CHECK(total_loss(1.25, 0.0) == doctest::Approx(1.25));
  const LossWeights w;
  CHECK(w.lambda_det == 1.0);
  CHECK(w.lambda_seg == 10.0);
  CHECK(w.alpha == 2.0);
  CHECK(w.beta == 4.0);
}
