#include "dbdh/filterbank.hpp"

#include <cmath>

#include "dbdh/core/error.hpp"
#include "json.hpp"

namespace dbdh {

namespace {

constexpr double kPi = 3.14159265358979323846;

// (dy, dx) unit steps, counter-clockwise from East.
constexpr int kDirs[8][2] = {{0, 1},  {-1, 1}, {-1, 0}, {-1, -1},
                             {0, -1}, {1, -1}, {1, 0},  {1, 1}};

RowMat<double> zeros(int n) { return RowMat<double>::Zero(n, n); }

RowMat<double> rotate90cw(const RowMat<double>& m) {
  const int n = static_cast<int>(m.rows());
  RowMat<double> out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = m(n - 1 - j, i);
  return out;
}

KernelSpec srm(int index, int size, double normalizer, RowMat<double> raw) {
  KernelSpec k;
  k.family = KernelFamily::SRM;
  k.index = index;
  k.size = size;
  k.normalizer = normalizer;
  k.weights = raw / normalizer;
  return k;
}

}  // namespace

std::vector<KernelSpec> build_srm_bank() {
  std::vector<KernelSpec> out;
  out.reserve(30);
  int idx = 0;

  // First-order residuals: x_neighbor - x_center, 8 directions.
  for (const auto& d : kDirs) {
    RowMat<double> m = zeros(3);
    m(1, 1) = -1.0;
    m(1 + d[0], 1 + d[1]) = 1.0;
    out.push_back(srm(idx++, 3, 1.0, std::move(m)));
  }

  // Second-order residuals [1, -2, 1] along 4 axes.
  constexpr int kAxes[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (const auto& d : kAxes) {
    RowMat<double> m = zeros(3);
    m(1 - d[0], 1 - d[1]) = 1.0;
    m(1, 1) = -2.0;
    m(1 + d[0], 1 + d[1]) = 1.0;
    out.push_back(srm(idx++, 3, 2.0, std::move(m)));
  }

  // Third-order residuals [1, -3, 3, -1] with the -3 tap at the center,
  // 8 directions. The +2 tap needs the 5x5 support.
  for (const auto& d : kDirs) {
    RowMat<double> m = zeros(5);
    m(2 - d[0], 2 - d[1]) = 1.0;
    m(2, 2) = -3.0;
    m(2 + d[0], 2 + d[1]) = 3.0;
    m(2 + 2 * d[0], 2 + 2 * d[1]) = -1.0;
    out.push_back(srm(idx++, 5, 3.0, std::move(m)));
  }

  // 3x3 SQUARE.
  RowMat<double> sq3(3, 3);
  sq3 << -1, 2, -1,
          2, -4, 2,
         -1, 2, -1;
  out.push_back(srm(idx++, 3, 4.0, sq3));

  // 3x3 EDGE, 4 rotations (up, right, down, left).
  RowMat<double> e3(3, 3);
  e3 << -1, 2, -1,
         2, -4, 2,
         0, 0, 0;
  for (int r = 0; r < 4; ++r) {
    out.push_back(srm(idx++, 3, 4.0, e3));
    e3 = rotate90cw(e3);
  }

  // 5x5 SQUARE.
  RowMat<double> sq5(5, 5);
  sq5 << -1, 2, -2, 2, -1,
          2, -6, 8, -6, 2,
         -2, 8, -12, 8, -2,
          2, -6, 8, -6, 2,
         -1, 2, -2, 2, -1;
  out.push_back(srm(idx++, 5, 12.0, sq5));

  // 5x5 EDGE, 4 rotations.
  RowMat<double> e5(5, 5);
  e5 << -1, 2, -2, 2, -1,
         2, -6, 8, -6, 2,
        -2, 8, -12, 8, -2,
         0, 0, 0, 0, 0,
         0, 0, 0, 0, 0;
  for (int r = 0; r < 4; ++r) {
    out.push_back(srm(idx++, 5, 12.0, e5));
    e5 = rotate90cw(e5);
  }

  return out;
}

std::vector<KernelSpec> build_gabor_bank(int orientations,
                                         const std::vector<double>& phases,
                                         const std::vector<double>& sigmas) {
  const std::size_t total = static_cast<std::size_t>(orientations) *
                            phases.size() * sigmas.size();
  if (total != 32)
    throw ConfigError("build_gabor_bank: parameter grid must multiply to 32");

  constexpr double kAspect = 0.5;
  std::vector<KernelSpec> out;
  out.reserve(32);
  int idx = 0;
  for (double sigma : sigmas) {
    for (double phase : phases) {
      for (int o = 0; o < orientations; ++o) {
        const double theta = kPi * o / orientations;
        const double lambda = 4.0 * sigma;
        RowMat<double> m(5, 5);
        for (int row = 0; row < 5; ++row) {
          for (int col = 0; col < 5; ++col) {
            const double x = col - 2, y = row - 2;
            const double xr = x * std::cos(theta) + y * std::sin(theta);
            const double yr = -x * std::sin(theta) + y * std::cos(theta);
            const double envelope = std::exp(
                -(xr * xr + kAspect * kAspect * yr * yr) / (2.0 * sigma * sigma));
            m(row, col) = envelope * std::cos(2.0 * kPi * xr / lambda + phase);
          }
        }
        m.array() -= m.mean();
        const double l1 = m.array().abs().sum();
        m /= l1;

        KernelSpec k;
        k.family = KernelFamily::GABOR;
        k.index = idx++;
        k.size = 5;
        k.normalizer = l1;
        k.weights = std::move(m);
        k.params = GaborParams{sigma, theta, phase, kAspect};
        out.push_back(std::move(k));
      }
    }
  }
  return out;
}

FilterBank build_filter_bank() {
  FilterBank bank;
  bank.kernels = build_srm_bank();
  auto gabor = build_gabor_bank();
  bank.kernels.insert(bank.kernels.end(), gabor.begin(), gabor.end());
  bank.pad_size = 5;
  return bank;
}

RowMat<double> padded_weights(const KernelSpec& k, int pad) {
  RowMat<double> out = RowMat<double>::Zero(pad, pad);
  const int off = (pad - k.size) / 2;
  out.block(off, off, k.size, k.size) = k.weights;
  return out;
}

std::string filter_bank_to_json(const FilterBank& bank) {
  nlohmann::json doc;
  doc["pad_size"] = bank.pad_size;
  auto& arr = doc["kernels"] = nlohmann::json::array();
  for (const auto& k : bank.kernels) {
    nlohmann::json jk;
    jk["family"] = k.family == KernelFamily::SRM ? "SRM" : "GABOR";
    jk["index"] = k.index;
    jk["size"] = k.size;
    jk["normalizer"] = k.normalizer;
    if (k.params) {
      jk["params"] = {{"sigma", k.params->sigma},
                      {"orientation_rad", k.params->orientation_rad},
                      {"phase_rad", k.params->phase_rad},
                      {"aspect", k.params->aspect}};
    } else {
      jk["params"] = nullptr;
    }
    std::vector<double> w(k.weights.data(),
                          k.weights.data() + k.weights.size());
    jk["weights"] = w;  // row-major
    arr.push_back(std::move(jk));
  }
  return doc.dump(2);
}

FilterBank filter_bank_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  FilterBank bank;
  bank.pad_size = doc.at("pad_size").get<int>();
  for (const auto& jk : doc.at("kernels")) {
    KernelSpec k;
    k.family = jk.at("family").get<std::string>() == "SRM" ? KernelFamily::SRM
                                                           : KernelFamily::GABOR;
    k.index = jk.at("index").get<int>();
    k.size = jk.at("size").get<int>();
    k.normalizer = jk.at("normalizer").get<double>();
    if (!jk.at("params").is_null()) {
      GaborParams p;
      p.sigma = jk.at("params").at("sigma").get<double>();
      p.orientation_rad = jk.at("params").at("orientation_rad").get<double>();
      p.phase_rad = jk.at("params").at("phase_rad").get<double>();
      p.aspect = jk.at("params").at("aspect").get<double>();
      k.params = p;
    }
    const auto w = jk.at("weights").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(k.size) * k.size)
      throw ConfigError("filter_bank_from_json: weight count mismatch");
    k.weights = RowMat<double>(k.size, k.size);
    std::copy(w.begin(), w.end(), k.weights.data());
    bank.kernels.push_back(std::move(k));
  }
  return bank;
}

}  // namespace dbdh
