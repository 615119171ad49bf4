#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nslang/datagen.hpp"
#include "nslang/likelihood.hpp"
#include "nslang/model.hpp"
#include "nslang/spectral_grid.hpp"

namespace testing {

inline nslang::GridPtr paper_grid() {
  static const nslang::GridPtr g = nslang::SpectralGrid::build(64, 8, -1.0, 1.0);
  return g;
}

inline double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

/// Homogeneous Poisson spike train on [t0, t0 + duration].
inline nslang::Trial poisson_trial(std::mt19937_64& rng, double rate,
                                   double t0, double duration) {
  nslang::Trial tr;
  tr.t0 = t0;
  tr.tE = t0 + duration;
  std::exponential_distribution<double> isi(rate);
  double t = t0;
  for (;;) {
    t += isi(rng);
    if (t >= tr.tE) break;
    tr.spikes.push_back(t);
  }
  return tr;
}

/// Smooth random potential: a few random sine/cosine modes on [-1, 1].
inline nslang::GridFunction random_force(std::mt19937_64& rng,
                                         const nslang::GridPtr& grid,
                                         double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a[4], b[4];
  for (int k = 0; k < 4; ++k) {
    a[k] = amplitude * u(rng) / (k + 1);
    b[k] = amplitude * u(rng) / (k + 1);
  }
  const double c = amplitude * u(rng);
  return nslang::sample(grid, [&](double x) {
    double v = c;
    for (int k = 0; k < 4; ++k)
      v += a[k] * std::sin((k + 1) * x) + b[k] * std::cos((k + 1) * x);
    return v;
  });
}

/// Asymptotic Kolmogorov-Smirnov p-value for statistic d at sample size n.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// One-sample KS statistic of data against the continuous CDF cdf.
template <typename Cdf>
double ks_statistic(std::vector<double> data, Cdf&& cdf) {
  std::sort(data.begin(), data.end());
  const double n = static_cast<double>(data.size());
  double d = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double f = cdf(data[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

/// Mixed relative error: |a - b| / max(|b|, floor).
inline double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

}  // namespace testing
