#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max((i + 1) / n - f, f - i / n));
  }
  return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace oracle

namespace oracle {

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

inline double ks_two_sample_critical_1pct(std::size_t n, std::size_t m) {
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return 1.6276 * std::sqrt((nn + mm) / (nn * mm));
}

/// Draws from a 1-D density by tabulating its CDF on a fine trapezoid grid
/// over [lo, hi] and inverting it with linear interpolation.
class QuadratureInverseSampler {
 public:
  QuadratureInverseSampler(const std::function<double(double)>& density, double lo, double hi,
                           std::size_t cells)
      : xs_(cells + 1), cdf_(cells + 1, 0.0) {
    const double w = (hi - lo) / static_cast<double>(cells);
    double prev = density(lo);
    xs_[0] = lo;
    for (std::size_t k = 1; k <= cells; ++k) {
      xs_[k] = lo + w * static_cast<double>(k);
      const double cur = density(xs_[k]);
      cdf_[k] = cdf_[k - 1] + 0.5 * (prev + cur) * w;
      prev = cur;
    }
    for (double& c : cdf_) c /= cdf_.back();
  }

  double operator()(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(it - cdf_.begin()));
    const double span = cdf_[k] - cdf_[k - 1];
    const double t = span > 0.0 ? (u - cdf_[k - 1]) / span : 0.0;
    return xs_[k - 1] + t * (xs_[k] - xs_[k - 1]);
  }

 private:
  std::vector<double> xs_;
  std::vector<double> cdf_;
};

}  // namespace oracle
