#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "metaprior/dimred.hpp"
#include "metaprior/error.hpp"
#include "oracles/ks.hpp"

using namespace metaprior;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

std::vector<ThetaVector> random_cloud(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<ThetaVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = rng.normal() * (1.0 + static_cast<double>(j));
    out.emplace_back(x);
  }
  return out;
}

void expect_projector_algebra(const ProjectionMap& map) {
  const auto k = static_cast<Eigen::Index>(map.reduced_dim());
  EXPECT_LE((map.w() * map.w().transpose() - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::MatrixXd p = map.projector();
  EXPECT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((p * p - p).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(p.trace(), static_cast<double>(map.reduced_dim()), 1e-9);
  for (Eigen::Index i = 0; i + 1 < map.eigenvalues().size(); ++i) {
    EXPECT_GE(map.eigenvalues()[i], map.eigenvalues()[i + 1]);
  }
  EXPECT_GE(map.eigenvalues().minCoeff(), 0.0);
}

}  // namespace

TEST(PcaFit, DataOnFirstAxis) {
  const std::vector<ThetaVector> xs = {ThetaVector{1.0, 0.0}, ThetaVector{2.0, 0.0}, ThetaVector{-1.0, 0.0}};
  const auto map = pca_fit(xs, 1);
  EXPECT_NEAR(std::abs(map.w()(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(map.w()(0, 1), 0.0, 1e-15);
  EXPECT_GT(map.w()(0, 0), 0.0);  // sign convention
  EXPECT_EQ(empirical_risk(map, xs), 0.0);
  EXPECT_FALSE(map.rank_deficient());
}

TEST(PcaFit, FullRankIsIdentity) {
  Rng rng(1);
  const auto xs = random_cloud(100, 3, rng);
  const auto map = pca_fit(xs, 3);
  EXPECT_LE((map.projector() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(empirical_risk(map, xs), 0.0, 1e-10);
}

TEST(PcaFit, NoisyLineMatchesDirectEigensolve) {
  Rng rng(2);
  std::vector<ThetaVector> xs;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < 200; ++i) {
    const double t = rng.normal();
    const double x = t + 0.01 * rng.normal(), y = 2 * t + 0.01 * rng.normal();
    xs.push_back(ThetaVector{x, y});
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  // Closed-form top eigenvector of the 2x2 moment matrix.
  const double a = sxx / 200, b = sxy / 200, c = syy / 200;
  const double lambda = 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  Eigen::Vector2d v(b, lambda - a);
  v.normalize();
  const auto map = pca_fit(xs, 1);
  const Eigen::Vector2d w = map.w().row(0).transpose();
  EXPECT_LT(std::acos(std::min(1.0, std::abs(w.dot(v)))), 1e-8);
  EXPECT_LT(std::acos(std::min(1.0, std::abs(w.dot(Eigen::Vector2d(1, 2) / std::sqrt(5.0))))), 0.05);
  EXPECT_NEAR(map.eigenvalues()[0], lambda, 1e-12);
}

TEST(PcaFit, ProjectorAlgebraOnRandomFits) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 2 + rng.below(5);
    const std::size_t k = 1 + rng.below(d);
    for (bool centered : {false, true}) expect_projector_algebra(pca_fit(random_cloud(40, d, rng), k, centered));
  }
}

TEST(PcaFit, SpectrumMatchesRisk) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 3 + rng.below(4);
    const std::size_t k = 1 + rng.below(d - 1);
    const auto xs = random_cloud(60, d, rng);
    const auto map = pca_fit(xs, k);
    const double tail = map.eigenvalues().tail(static_cast<Eigen::Index>(d - k)).sum();
    EXPECT_NEAR(empirical_risk(map, xs) / 60.0, tail, 1e-9 * std::max(1.0, tail));
  }
}

TEST(PcaFit, BeatsRandomProjections) {
  Rng rng(5);
  const auto xs = random_cloud(80, 4, rng);
  const std::size_t k = 2;
  const auto map = pca_fit(xs, k);
  const double best = empirical_risk(map, xs);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd g(4, 2);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(4, 2);
    const auto other = ProjectionMap::from_parts(q.transpose(), map.eigenvalues(), false, {});
    EXPECT_LE(best, empirical_risk(other, xs) + 1e-9);
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 4);
      w(0, a) = 1;
      w(1, b) = 1;
      const auto coord = ProjectionMap::from_parts(w, map.eigenvalues(), false, {});
      EXPECT_LE(best, empirical_risk(coord, xs) + 1e-9);
    }
  }
}

TEST(PcaFit, TiesAreBrokenDeterministically) {
  // Isotropic square: both eigenvalues equal.
  const std::vector<ThetaVector> xs = {ThetaVector{1.0, 0.0}, ThetaVector{-1.0, 0.0}, ThetaVector{0.0, 1.0},
                                       ThetaVector{0.0, -1.0}};
  const auto a = pca_fit(xs, 1);
  const auto b = pca_fit(xs, 1);
  EXPECT_EQ(a.w(), b.w());
  EXPECT_EQ(a.eigenvalues()[0], a.eigenvalues()[1]);
}

TEST(PcaFit, RankDeficientIsFlagged) {
  const std::vector<ThetaVector> xs = {ThetaVector{1.0, 0.0, 0.0}, ThetaVector{2.0, 0.0, 0.0}};
  const auto map = pca_fit(xs, 2);
  EXPECT_TRUE(map.rank_deficient());
  expect_projector_algebra(map);
}

TEST(PcaFit, Errors) {
  EXPECT_EQ(code_of([] { pca_fit({}, 1); }), ErrorCode::TooFewSamples);
  EXPECT_EQ(code_of([] { pca_fit({ThetaVector{1.0, 2.0, 3.0}}, 2); }), ErrorCode::TooFewSamples);
  EXPECT_EQ(code_of([] { pca_fit({ThetaVector{1.0}, ThetaVector{1.0, 2.0}}, 1); }), ErrorCode::DimensionMismatch);
}

TEST(Projection, RoundTrips) {
  Rng rng(6);
  const auto map = pca_fit(random_cloud(50, 4, rng), 2);
  for (int i = 0; i < 20; ++i) {
    const ThetaVector low{rng.normal(), rng.normal()};
    const auto back = map.project(map.backproject(low));
    EXPECT_NEAR(back[0], low[0], 1e-12);
    EXPECT_NEAR(back[1], low[1], 1e-12);
    const auto in_space = map.backproject(low);
    const auto again = map.backproject(map.project(in_space));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(again[j], in_space[j], 1e-10);
  }
  EXPECT_EQ(code_of([&] { map.project(ThetaVector{1.0}); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { map.backproject(ThetaVector{1.0}); }), ErrorCode::DimensionMismatch);
}

TEST(Projection, AxisExample) {
  Eigen::MatrixXd w(1, 2);
  w << 1.0, 0.0;
  const auto map = ProjectionMap::from_parts(w, Eigen::Vector2d(1, 0), false, {});
  EXPECT_EQ(map.project(ThetaVector{3.0, 4.0}), ThetaVector{3.0});
  EXPECT_EQ(map.backproject(ThetaVector{3.0}), (ThetaVector{3.0, 0.0}));
  EXPECT_EQ(empirical_risk(map, {ThetaVector{0.0, 1.0}}), 1.0);
}

TEST(Pipeline, SubspaceDataStaysInSubspace) {
  Rng rng(7);
  std::vector<ThetaVector> xs;
  for (int i = 0; i < 100; ++i) {
    const double t = rng.normal();
    xs.push_back(ThetaVector{t, -t, 0.0});
  }
  const auto est = pca_kde_pipeline(xs, 1, 1.0);
  for (const auto& x : est.sample(500, rng)) {
    EXPECT_NEAR(x[0] + x[1], 0.0, 1e-12);
    EXPECT_EQ(x[2], 0.0);
  }
}

TEST(Pipeline, ArcProjectsToPrincipalChord) {
  Rng rng(8);
  std::vector<ThetaVector> xs;
  for (int i = 0; i < 300; ++i) {
    const double a = std::numbers::pi * rng.uniform();
    xs.push_back(ThetaVector{std::cos(a), std::sin(a)});
  }
  const auto est = pca_kde_pipeline(xs, 1, 1.0);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& x : xs) {
    const double t = est.projection().project(x)[0];
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  EXPECT_LE(hi - lo, 2.0 + 1e-12);
  const Eigen::Vector2d axis = est.projection().w().row(0).transpose();
  for (const auto& x : est.sample(200, rng)) {
    // Draws are multiples of the principal axis.
    EXPECT_NEAR(x[0] * axis[1] - x[1] * axis[0], 0.0, 1e-12);
  }
}

TEST(Pipeline, FullRankMatchesPlainKde) {
  Rng rng(9);
  std::vector<ThetaVector> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(ThetaVector{rng.normal()});
  const auto est = pca_kde_pipeline(xs, 1, 1.0);
  const auto plain = kde_fit_auto(xs, 1.0);
  Rng a(10), b(11);
  std::vector<double> sa, sb;
  for (const auto& x : est.sample(50000, a)) sa.push_back(x[0]);
  for (const auto& x : kde_sample(plain, 50000, b)) sb.push_back(x[0]);
  EXPECT_LT(oracle::ks_two_sample(sa, sb), oracle::ks_two_sample_critical_1pct(50000, 50000));
  EXPECT_NEAR(est.eval(ThetaVector{0.1}), plain.eval(ThetaVector{0.1}), 1e-3);
}
