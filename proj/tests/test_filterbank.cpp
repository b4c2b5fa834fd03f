#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dbdh/core/rng.hpp"
#include "dbdh/filterbank.hpp"
#include "doctest.h"

using namespace dbdh;

namespace {

// Independent transcription of the 30 basic SRM residual kernels (raw
// integer tables plus class normalizer), kept separate from the builder so
// the two routes cross-check each other.
struct RawKernel {
  int size;
  double normalizer;
  std::vector<int> w;  // row-major, size x size
};

const std::vector<RawKernel> kSrmReference = {
    // 1st order, E NE N NW W SW S SE
    {3, 1, {0, 0, 0, 0, -1, 1, 0, 0, 0}},
    {3, 1, {0, 0, 1, 0, -1, 0, 0, 0, 0}},
    {3, 1, {0, 1, 0, 0, -1, 0, 0, 0, 0}},
    {3, 1, {1, 0, 0, 0, -1, 0, 0, 0, 0}},
    {3, 1, {0, 0, 0, 1, -1, 0, 0, 0, 0}},
    {3, 1, {0, 0, 0, 0, -1, 0, 1, 0, 0}},
    {3, 1, {0, 0, 0, 0, -1, 0, 0, 1, 0}},
    {3, 1, {0, 0, 0, 0, -1, 0, 0, 0, 1}},
    // 2nd order, horizontal / vertical / diagonal / anti-diagonal
    {3, 2, {0, 0, 0, 1, -2, 1, 0, 0, 0}},
    {3, 2, {0, 1, 0, 0, -2, 0, 0, 1, 0}},
    {3, 2, {1, 0, 0, 0, -2, 0, 0, 0, 1}},
    {3, 2, {0, 0, 1, 0, -2, 0, 1, 0, 0}},
    // 3rd order, E NE N NW W SW S SE
    {5, 3, {0, 0, 0, 0, 0,  0, 0, 0, 0, 0,  0, 1, -3, 3, -1,
            0, 0, 0, 0, 0,  0, 0, 0, 0, 0}},
    {5, 3, {0, 0, 0, 0, -1, 0, 0, 0, 3, 0,  0, 0, -3, 0, 0,
            0, 1, 0, 0, 0,  0, 0, 0, 0, 0}},
    {5, 3, {0, 0, -1, 0, 0, 0, 0, 3, 0, 0,  0, 0, -3, 0, 0,
            0, 0, 1, 0, 0,  0, 0, 0, 0, 0}},
    {5, 3, {-1, 0, 0, 0, 0, 0, 3, 0, 0, 0,  0, 0, -3, 0, 0,
            0, 0, 0, 1, 0,  0, 0, 0, 0, 0}},
    {5, 3, {0, 0, 0, 0, 0,  0, 0, 0, 0, 0,  -1, 3, -3, 1, 0,
            0, 0, 0, 0, 0,  0, 0, 0, 0, 0}},
    {5, 3, {0, 0, 0, 0, 0,  0, 0, 0, 1, 0,  0, 0, -3, 0, 0,
            0, 3, 0, 0, 0,  -1, 0, 0, 0, 0}},
    {5, 3, {0, 0, 0, 0, 0,  0, 0, 1, 0, 0,  0, 0, -3, 0, 0,
            0, 0, 3, 0, 0,  0, 0, -1, 0, 0}},
    {5, 3, {0, 0, 0, 0, 0,  0, 1, 0, 0, 0,  0, 0, -3, 0, 0,
            0, 0, 0, 3, 0,  0, 0, 0, 0, -1}},
    // 3x3 SQUARE
    {3, 4, {-1, 2, -1, 2, -4, 2, -1, 2, -1}},
    // 3x3 EDGE, up right down left
    {3, 4, {-1, 2, -1, 2, -4, 2, 0, 0, 0}},
    {3, 4, {0, 2, -1, 0, -4, 2, 0, 2, -1}},
    {3, 4, {0, 0, 0, 2, -4, 2, -1, 2, -1}},
    {3, 4, {-1, 2, 0, 2, -4, 0, -1, 2, 0}},
    // 5x5 SQUARE
    {5, 12, {-1, 2, -2, 2, -1,  2, -6, 8, -6, 2,  -2, 8, -12, 8, -2,
             2, -6, 8, -6, 2,  -1, 2, -2, 2, -1}},
    // 5x5 EDGE, up right down left
    {5, 12, {-1, 2, -2, 2, -1,  2, -6, 8, -6, 2,  -2, 8, -12, 8, -2,
             0, 0, 0, 0, 0,  0, 0, 0, 0, 0}},
    {5, 12, {0, 0, -2, 2, -1,  0, 0, 8, -6, 2,  0, 0, -12, 8, -2,
             0, 0, 8, -6, 2,  0, 0, -2, 2, -1}},
    {5, 12, {0, 0, 0, 0, 0,  0, 0, 0, 0, 0,  -2, 8, -12, 8, -2,
             2, -6, 8, -6, 2,  -1, 2, -2, 2, -1}},
    {5, 12, {-1, 2, -2, 0, 0,  2, -6, 8, 0, 0,  -2, 8, -12, 0, 0,
             2, -6, 8, 0, 0,  -1, 2, -2, 0, 0}},
};

// Independent evaluation of the Gabor closed form.
RowMat<double> gabor_reference(double sigma, double theta, double phase) {
  const double pi = 3.14159265358979323846;
  const double gamma = 0.5, lambda = 4.0 * sigma;
  RowMat<double> m(5, 5);
  for (int row = 0; row < 5; ++row)
    for (int col = 0; col < 5; ++col) {
      const double x = col - 2, y = row - 2;
      const double xr = x * std::cos(theta) + y * std::sin(theta);
      const double yr = -x * std::sin(theta) + y * std::cos(theta);
      m(row, col) = std::exp(-(xr * xr + gamma * gamma * yr * yr) /
                             (2 * sigma * sigma)) *
                    std::cos(2 * pi * xr / lambda + phase);
    }
  m.array() -= m.mean();
  m /= m.array().abs().sum();
  return m;
}

Tensor<double> random_image(int c, int h, int w, Rng& rng) {
  Tensor<double> img(1, c, h, w);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.data()[i] = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("srm bank matches the independent transcription") {
  const auto bank = build_srm_bank();
  REQUIRE(bank.size() == 30);
  for (int i = 0; i < 30; ++i) {
    const auto& k = bank[i];
    const auto& ref = kSrmReference[i];
    CAPTURE(i);
    CHECK(k.family == KernelFamily::SRM);
    CHECK(k.index == i);
    CHECK(k.size == ref.size);
    CHECK(k.normalizer == doctest::Approx(ref.normalizer));
    REQUIRE(k.weights.rows() == ref.size);
    for (int r = 0; r < ref.size; ++r)
      for (int c = 0; c < ref.size; ++c)
        CHECK(k.weights(r, c) * ref.normalizer ==
              doctest::Approx(ref.w[r * ref.size + c]).epsilon(1e-12));
  }
}

TEST_CASE("second-order horizontal residual is [0.5, -1, 0.5]") {
  const auto bank = build_srm_bank();
  const auto& k = bank[8];
  CHECK(k.normalizer == 2.0);
  CHECK(k.weights(1, 0) == doctest::Approx(0.5));
  CHECK(k.weights(1, 1) == doctest::Approx(-1.0));
  CHECK(k.weights(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("gabor bank: 32 zero-mean kernels matching the closed form") {
  const auto bank = build_gabor_bank();
  REQUIRE(bank.size() == 32);
  for (const auto& k : bank) {
    CHECK(std::abs(k.weights.sum()) < 1e-6);
    REQUIRE(k.params.has_value());
    const auto ref = gabor_reference(k.params->sigma, k.params->orientation_rad,
                                     k.params->phase_rad);
    CHECK((k.weights - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gabor cosine phase is pi-periodic in orientation") {
  const double pi = 3.14159265358979323846;
  for (double sigma : {0.75, 1.5})
    for (int o = 0; o < 8; ++o) {
      const double theta = pi * o / 8;
      const auto a = gabor_reference(sigma, theta, 0.0);
      const auto b = gabor_reference(sigma, theta + pi, 0.0);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("gabor grid must multiply to 32") {
  CHECK_THROWS_AS(build_gabor_bank(7), ConfigError);
}

TEST_CASE("bank assembly: 62 kernels, SRM first, zero DC") {
  const auto bank = build_filter_bank();
  REQUIRE(bank.kernels.size() == 62);
  CHECK(bank.pad_size == 5);
  for (int i = 0; i < 30; ++i) CHECK(bank.kernels[i].family == KernelFamily::SRM);
  for (int i = 30; i < 62; ++i) CHECK(bank.kernels[i].family == KernelFamily::GABOR);
  for (const auto& k : bank.kernels) CHECK(std::abs(k.weights.sum()) < 1e-6);
}

TEST_CASE("builders are deterministic") {
  const auto a = build_filter_bank();
  const auto b = build_filter_bank();
  for (std::size_t i = 0; i < a.kernels.size(); ++i) {
    REQUIRE(a.kernels[i].weights.size() == b.kernels[i].weights.size());
    CHECK(std::memcmp(a.kernels[i].weights.data(), b.kernels[i].weights.data(),
                      sizeof(double) * a.kernels[i].weights.size()) == 0);
  }
}

TEST_CASE("rgb_to_rgby luma values") {
  Tensor<double> img(1, 3, 2, 2);
  // white, black, red, arbitrary
  img(0, 0, 0, 0) = 1; img(0, 1, 0, 0) = 1; img(0, 2, 0, 0) = 1;
  img(0, 0, 1, 0) = 1;
  img(0, 0, 1, 1) = 0.25; img(0, 1, 1, 1) = 0.5; img(0, 2, 1, 1) = 0.75;
  const auto out = rgb_to_rgby(img);
  REQUIRE(out.c() == 4);
  CHECK(out(0, 3, 0, 0) == doctest::Approx(1.0));
  CHECK(out(0, 3, 0, 1) == doctest::Approx(0.0));
  CHECK(out(0, 3, 1, 0) == doctest::Approx(0.299));
  CHECK(out(0, 3, 1, 1) == doctest::Approx(0.299 * 0.25 + 0.587 * 0.5 + 0.114 * 0.75));
  for (int c = 0; c < 3; ++c)
    CHECK(out(0, c, 1, 1) == img(0, c, 1, 1));
  Tensor<double> bad(1, 4, 2, 2);
  CHECK_THROWS_AS(rgb_to_rgby(bad), ShapeError);
}

TEST_CASE("apply_bank: constant input gives zero response on 248 channels") {
  const auto bank = build_filter_bank();
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> img(1, 4, 12, 16);
    img.fill(rng.uniform());
    const auto out = apply_bank(bank, img);
    REQUIRE(out.c() == 248);
    double m = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
      m = std::max(m, std::abs(out.data()[i]));
    CHECK(m < 1e-5);
  }
}

TEST_CASE("apply_bank rejects small inputs") {
  const auto bank = build_filter_bank();
  Tensor<double> img(1, 4, 4, 12);
  CHECK_THROWS_AS(apply_bank(bank, img), ShapeError);
}

TEST_CASE("apply_bank impulse response equals the rotated kernel") {
  const auto bank = build_filter_bank();
  const int h = 11, w = 11, cy = 5, cx = 5;
  for (int ch = 0; ch < 4; ++ch) {
    Tensor<double> img(1, 4, h, w);
    img(0, ch, cy, cx) = 1.0;
    const auto out = apply_bank(bank, img);
    for (int k = 0; k < 62; ++k) {
      const auto pw = padded_weights(bank.kernels[k], 5);
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
          CHECK(out(0, ch * 62 + k, cy + dy, cx + dx) ==
                doctest::Approx(pw(2 - dy, 2 - dx)).epsilon(1e-12));
      // other channels stay silent
      const int other = ((ch + 1) % 4) * 62 + k;
      CHECK(out(0, other, cy, cx) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("apply_bank is linear") {
  const auto bank = build_filter_bank();
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto i1 = random_image(4, 10, 14, rng);
    const auto i2 = random_image(4, 10, 14, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Tensor<double> mix(1, 4, 10, 14);
    for (std::size_t i = 0; i < mix.size(); ++i)
      mix.data()[i] = a * i1.data()[i] + b * i2.data()[i];
    const auto y1 = apply_bank(bank, i1);
    const auto y2 = apply_bank(bank, i2);
    const auto ym = apply_bank(bank, mix);
    double err = 0;
    for (std::size_t i = 0; i < ym.size(); ++i)
      err = std::max(err,
                     std::abs(ym.data()[i] - (a * y1.data()[i] + b * y2.data()[i])));
    CHECK(err < 1e-5);
  }
}

TEST_CASE("apply_bank shift equivariance on interior pixels") {
  const auto bank = build_filter_bank();
  Rng rng(29);
  const int h = 14, w = 14, sy = 1, sx = 2;
  const auto img = random_image(4, h, w, rng);
  Tensor<double> shifted(1, 4, h, w);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y + sy < h; ++y)
      for (int x = 0; x + sx < w; ++x)
        shifted(0, c, y + sy, x + sx) = img(0, c, y, x);
  const auto y0 = apply_bank(bank, img);
  const auto y1 = apply_bank(bank, shifted);
  for (int c = 0; c < 248; ++c)
    for (int y = 2; y + sy < h - 2; ++y)
      for (int x = 2; x + sx < w - 2; ++x)
        CHECK(y1(0, c, y + sy, x + sx) == doctest::Approx(y0(0, c, y, x)).epsilon(1e-10));
}

TEST_CASE("filter bank JSON round-trip preserves order and values") {
  const auto bank = build_filter_bank();
  const std::string text = filter_bank_to_json(bank);
  const auto back = filter_bank_from_json(text);
  REQUIRE(back.kernels.size() == bank.kernels.size());
  for (std::size_t i = 0; i < bank.kernels.size(); ++i) {
    CHECK(back.kernels[i].family == bank.kernels[i].family);
    CHECK(back.kernels[i].index == bank.kernels[i].index);
    CHECK(back.kernels[i].size == bank.kernels[i].size);
    CHECK((back.kernels[i].weights - bank.kernels[i].weights).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(filter_bank_to_json(back) == text);
}

TEST_CASE("filter bank matches the committed golden file") {
  std::ifstream in(std::string(DBDH_TEST_DATA_DIR) + "/filterbank_golden.json",
                   std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "golden file missing");
  std::ostringstream buf;
  buf << in.rdbuf();
  CHECK(filter_bank_to_json(build_filter_bank()) == buf.str());
}
