#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "dbdh/core/rng.hpp"
#include "dbdh/nn/blocks.hpp"
#include "dbdh/nn/upsample.hpp"
#include "doctest.h"

using namespace dbdh;
using namespace dbdh::nn;

namespace {

Tensor<double> randn(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor<double> t(n, c, h, w);
  for (std::size_t i = 0; i < t.size(); ++i)
    t.data()[i] = scale * rng.normal();
  return t;
}

double weighted_sum(const Tensor<double>& y, const Tensor<double>& coef) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * coef.data()[i];
  return s;
}

// Central finite differences of `loss_fn` w.r.t. a handful of entries of
// `target`, compared against the analytic gradient already accumulated in
// `analytic`.
void check_grad(Tensor<double>& target, const Tensor<double>& analytic,
                const std::function<double()>& loss_fn, Rng& rng,
                int probes = 8, double eps = 1e-6, double tol = 1e-5) {
  for (int p = 0; p < probes; ++p) {
    const std::size_t i = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(target.size()) - 1));
    const double keep = target.data()[i];
    target.data()[i] = keep + eps;
    const double up = loss_fn();
    target.data()[i] = keep - eps;
    const double dn = loss_fn();
    target.data()[i] = keep;
    const double fd = (up - dn) / (2 * eps);
    const double a = analytic.data()[i];
    CAPTURE(i);
    CHECK(std::abs(a - fd) <= tol * std::max({1.0, std::abs(a), std::abs(fd)}));
  }
}

}  // namespace

TEST_CASE("conv2d forward matches a direct loop") {
  Rng rng(1);
  Conv2d<double> conv("c", 3, 5, 3, 2, 1, true);
  conv.init(7);
  const auto x = randn(2, 3, 9, 8, rng);
  const auto y = conv.forward(x, false);
  REQUIRE(y.c() == 5);
  REQUIRE(y.h() == 5);
  REQUIRE(y.w() == 4);
  for (int n = 0; n < 2; ++n)
    for (int co = 0; co < 5; ++co)
      for (int oy = 0; oy < y.h(); ++oy)
        for (int ox = 0; ox < y.w(); ++ox) {
          double acc = conv.bias().value.data()[co];
          for (int ci = 0; ci < 3; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = oy * 2 - 1 + ky, sx = ox * 2 - 1 + kx;
                if (sy < 0 || sy >= 9 || sx < 0 || sx >= 8) continue;
                acc += conv.weight().value(co, ci, ky, kx) * x(n, ci, sy, sx);
              }
          CHECK(y(n, co, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(2);
  for (const bool one_by_one : {false, true}) {
    const int k = one_by_one ? 1 : 3;
    Conv2d<double> conv("c", 3, 4, k, one_by_one ? 1 : 2, one_by_one ? 0 : 1, true);
    conv.init(11);
    Tensor<double> x = randn(2, 3, 8, 8, rng);
    const auto y0 = conv.forward(x, true);
    const auto coef = randn(y0.n(), y0.c(), y0.h(), y0.w(), rng);
    auto loss = [&]() { return weighted_sum(conv.forward(x, true), coef); };

    conv.weight().grad.set_zero();
    conv.bias().grad.set_zero();
    conv.forward(x, true);
    const auto dx = conv.backward(coef, true);
    check_grad(conv.weight().value, conv.weight().grad, loss, rng);
    check_grad(conv.bias().value, conv.bias().grad, loss, rng);
    check_grad(x, dx, loss, rng);
  }
}

TEST_CASE("bank conv: trainable gradients match finite differences") {
  Rng rng(3);
  const auto bank = build_filter_bank();
  BankConv<double> bc("b", bank, true);
  bc.init(13);
  Tensor<double> x = randn(1, 4, 7, 7, rng);
  const auto y0 = bc.forward(x, true);
  REQUIRE(y0.c() == 248);
  const auto coef = randn(1, 248, 7, 7, rng, 0.1);
  auto loss = [&]() { return weighted_sum(bc.forward(x, true), coef); };
  ParamRefs<double> ps;
  bc.collect_params(ps);
  REQUIRE(ps.size() == 1);
  ps[0]->grad.set_zero();
  bc.forward(x, true);
  bc.backward(coef);
  check_grad(ps[0]->value, ps[0]->grad, loss, rng, 10);
}

TEST_CASE("bank conv: fixed variant exposes no params and matches apply_bank") {
  Rng rng(4);
  const auto bank = build_filter_bank();
  BankConv<double> bc("b", bank, false);
  bc.init(17);
  ParamRefs<double> ps;
  bc.collect_params(ps);
  CHECK(ps.empty());
  Tensor<double> x = randn(1, 4, 9, 9, rng);
  const auto y = bc.forward(x, false);
  const auto ref = apply_bank(bank, x);
  double err = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    err = std::max(err, std::abs(y.data()[i] - ref.data()[i]));
  CHECK(err < 1e-10);
}

TEST_CASE("batchnorm gradients match finite differences") {
  Rng rng(5);
  BatchNorm2d<double> bn("bn", 4);
  Tensor<double> x = randn(2, 4, 5, 6, rng);
  const auto coef = randn(2, 4, 5, 6, rng);
  auto loss = [&]() { return weighted_sum(bn.forward(x, true, true), coef); };
  ParamRefs<double> ps;
  bn.collect_params(ps);
  for (auto* p : ps) p->grad.set_zero();
  bn.forward(x, true, true);
  const auto dx = bn.backward(coef);
  check_grad(ps[0]->value, ps[0]->grad, loss, rng);  // gamma
  check_grad(ps[1]->value, ps[1]->grad, loss, rng);  // beta
  check_grad(x, dx, loss, rng, 10, 1e-6, 1e-4);
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  Rng rng(6);
  BatchNorm2d<double> bn("bn", 2);
  Tensor<double> x = randn(4, 2, 6, 6, rng, 2.0);
  for (int step = 0; step < 50; ++step) bn.forward(x, true, false);
  const auto y = bn.forward(x, false, false);
  // after many updates the running stats approach the batch stats, so the
  // eval output is near-normalized
  double mean = 0;
  for (int n = 0; n < 4; ++n) mean += y.plane(n, 0).mean();
  CHECK(std::abs(mean / 4) < 0.05);
}

TEST_CASE("maxpool gradients match finite differences") {
  Rng rng(7);
  MaxPool2d<double> pool(3, 2, 1);
  Tensor<double> x = randn(2, 3, 9, 9, rng);
  const auto y0 = pool.forward(x, true);
  const auto coef = randn(y0.n(), y0.c(), y0.h(), y0.w(), rng);
  auto loss = [&]() { return weighted_sum(pool.forward(x, true), coef); };
  pool.forward(x, true);
  const auto dx = pool.backward(coef);
  check_grad(x, dx, loss, rng, 10);
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(8);
  Linear<double> fc("fc", 6, 3);
  fc.init(19);
  Tensor<double> x = randn(3, 6, 1, 1, rng);
  const auto coef = randn(3, 3, 1, 1, rng);
  auto loss = [&]() { return weighted_sum(fc.forward(x, true), coef); };
  fc.weight().grad.set_zero();
  fc.bias().grad.set_zero();
  fc.forward(x, true);
  const auto dx = fc.backward(coef);
  check_grad(fc.weight().value, fc.weight().grad, loss, rng);
  check_grad(fc.bias().value, fc.bias().grad, loss, rng);
  check_grad(x, dx, loss, rng);
}

TEST_CASE("bilinear upsample matches resize and its backward is the adjoint") {
  Rng rng(9);
  for (int factor : {2, 16}) {
    BilinearUpsample<double> up(factor);
    Tensor<double> x = randn(1, 2, 4, 5, rng);
    const auto y = up.forward(x, true);
    REQUIRE(y.h() == 4 * factor);
    REQUIRE(y.w() == 5 * factor);
    const auto ref = resize_bilinear(x, 4 * factor, 5 * factor);
    double err = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      err = std::max(err, std::abs(y.data()[i] - ref.data()[i]));
    CHECK(err < 1e-12);

    // adjoint identity: <up(x), g> == <x, up^T(g)>
    const auto g = randn(1, 2, 4 * factor, 5 * factor, rng);
    const auto dx = up.backward(g);
    CHECK(weighted_sum(y, g) == doctest::Approx(weighted_sum(x, dx)).epsilon(1e-10));
  }
}

TEST_CASE("ase block gradients match finite differences") {
  Rng rng(10);
  ASEBlock<double> ase("ase", 8, 4);
  ase.init(23);
  Tensor<double> x = randn(2, 8, 5, 5, rng);
  const auto coef = randn(2, 8, 5, 5, rng);
  auto loss = [&]() { return weighted_sum(ase.forward(x, true), coef); };
  ParamRefs<double> ps;
  ase.collect_params(ps);
  for (auto* p : ps) p->grad.set_zero();
  ase.forward(x, true);
  const auto dx = ase.backward(coef);
  for (auto* p : ps) check_grad(p->value, p->grad, loss, rng, 6);
  check_grad(x, dx, loss, rng, 10);
}

TEST_CASE("basic block gradients match finite differences") {
  Rng rng(11);
  for (const int stride : {1, 2}) {
    BasicBlock<double> block("blk", 4, stride == 2 ? 6 : 4, stride);
    block.init(29);
    Tensor<double> x = randn(2, 4, 8, 8, rng, 0.5);
    const auto y0 = block.forward(x, true, true);
    const auto coef = randn(y0.n(), y0.c(), y0.h(), y0.w(), rng);
    auto loss = [&]() { return weighted_sum(block.forward(x, true, true), coef); };
    ParamRefs<double> ps;
    block.collect_params(ps);
    for (auto* p : ps) p->grad.set_zero();
    block.forward(x, true, true);
    const auto dx = block.backward(coef, true);
    check_grad(ps[0]->value, ps[0]->grad, loss, rng, 6, 1e-6, 1e-4);
    check_grad(x, dx, loss, rng, 8, 1e-6, 1e-4);
  }
}

TEST_CASE("conv-bn-relu composite gradient") {
  Rng rng(12);
  ConvBNReLU<double> cbr("cbr", 3, 5, 3, 2);
  cbr.init(31);
  Tensor<double> x = randn(2, 3, 8, 8, rng);
  const auto y0 = cbr.forward(x, true, true);
  const auto coef = randn(y0.n(), y0.c(), y0.h(), y0.w(), rng);
  auto loss = [&]() { return weighted_sum(cbr.forward(x, true, true), coef); };
  cbr.forward(x, true, true);
  const auto dx = cbr.backward(coef, true);
  check_grad(x, dx, loss, rng, 8, 1e-6, 1e-4);
}

TEST_CASE("name-keyed init is independent of module order") {
  Conv2d<double> a("same.name", 3, 4, 3, 1, 1, false);
  Conv2d<double> b("same.name", 3, 4, 3, 1, 1, false);
  Conv2d<double> other("other.name", 3, 4, 3, 1, 1, false);
  a.init(42);
  other.init(42);
  b.init(42);
  double max_diff = 0, cross_diff = 0;
  for (std::size_t i = 0; i < a.weight().value.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(a.weight().value.data()[i] -
                                           b.weight().value.data()[i]));
    cross_diff = std::max(cross_diff, std::abs(a.weight().value.data()[i] -
                                               other.weight().value.data()[i]));
  }
  CHECK(max_diff == 0.0);
  CHECK(cross_diff > 0.0);
}
