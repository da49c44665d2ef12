#pragma once

// 50-digit reference evaluations of the bound formulas.

#include <algorithm>

#include <boost/multiprecision/cpp_dec_float.hpp>

namespace oracle::hp {

using Real = boost::multiprecision::cpp_dec_float_50;

inline Real pi() { return boost::math::constants::pi<Real>(); }

inline Real cd(Real d, Real alpha, Real c_alpha, Real vol, Real delta_max) {
  const Real two_pi = 2 * pi();
  return c_alpha * pow(Real(2), (alpha - 1) / 2) +
         16 * d * sqrt(c_alpha * pow(delta_max, alpha) + 1 / vol) / (sqrt(Real(2)) * pow(two_pi, d / 4)) +
         64 * d * d / pow(two_pi, d / 2);
}

inline Real rate(Real n, Real d, Real alpha) { return pow(log(n) / n, alpha / (2 * alpha + d)); }

inline Real kde_regret(Real c_max, Real t, Real vol, Real c_d, Real n, Real d, Real alpha) {
  return 2 * c_max * t * vol * c_d * rate(n, d, alpha);
}

inline Real empirical_regret(Real c_max, Real t, Real m, Real n, Real alpha) {
  return 2 * c_max * t * sqrt(2 * (alpha * log(n * log(Real(2))) + m + 1) / n);
}

inline Real pca_risk(Real c_sg, Real dl, Real tr, Real n, Real gap, Real eps, Real d) {
  const Real c2 = c_sg * c_sg;
  const Real slow = 8 * c2 * sqrt(dl) * tr / sqrt(n);
  const Real fast = 64 * c2 * c2 * tr * tr / (n * gap);
  return (slow < fast ? slow : fast) + eps * (d - dl);
}

inline Real truncation(Real u, Real vol) { return (1 + vol) * u / (1 - vol * u); }

inline Real shaped_kde_sup(Real cp, Real h, Real alpha, Real sigma_min, Real n, Real d) {
  return cp * (pow(h, alpha) / pow(sigma_min, alpha / 2) + sqrt(log(n) / (n * pow(h, d))));
}

}  // namespace oracle::hp
