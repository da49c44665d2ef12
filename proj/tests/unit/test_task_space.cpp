#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "metaprior/error.hpp"
#include "metaprior/task_space.hpp"
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

}  // namespace

TEST(TaskSupport, BoxVolumeAndDiameter) {
  const auto box = TaskSupport::box({0.0, -1.0}, {2.0, 2.0});
  EXPECT_EQ(box.volume(), 6.0);
  EXPECT_EQ(box.delta_max(), 5.0);
  EXPECT_TRUE(box.contains(std::vector<double>{2.0, -1.0}));
  EXPECT_FALSE(box.contains(std::vector<double>{2.1, 0.0}));
  EXPECT_EQ(code_of([] { TaskSupport::box({1.0}, {1.0}); }), ErrorCode::InvalidArgument);
}

TEST(ThetaVector, RejectsNonFinite) {
  EXPECT_EQ(code_of([] { ThetaVector{NAN}; }), ErrorCode::InvalidArgument);
}

TEST(TabularMap, TrivialSingleState) {
  TabularDims dims{1, 1, {0.0}, 1, {}, 1.0};
  const auto mdp = tabular_map(ThetaVector{1.0, 1.0}, dims);
  EXPECT_EQ(mdp.p(0, 0, 0), 1.0);
  EXPECT_EQ(mdp.c(0, 0, 0), 1.0);
}

TEST(TabularMap, TransitionRowsAreCopied) {
  TabularDims dims{2, 1, {0.0}, 1, {}, 1.0};
  const auto mdp = tabular_map(ThetaVector{0.3, 0.7, 0.6, 0.4, 1.0, 1.0}, dims);
  EXPECT_EQ(mdp.p(0, 0, 0), 0.3);
  EXPECT_EQ(mdp.p(0, 0, 1), 0.7);
  EXPECT_EQ(mdp.p(1, 0, 0), 0.6);
  EXPECT_EQ(mdp.p(1, 0, 1), 0.4);
}

TEST(TabularMap, Errors) {
  TabularDims dims{2, 1, {0.0}, 1, {}, 1.0};
  EXPECT_EQ(code_of([&] { tabular_map(ThetaVector{0.3, 0.7, 1.0}, dims); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { tabular_map(ThetaVector{0.3, 0.8, 0.6, 0.4, 1.0, 1.0}, dims); }),
            ErrorCode::SimplexViolation);
  EXPECT_EQ(code_of([&] { tabular_map(ThetaVector{-0.1, 1.1, 0.6, 0.4, 1.0, 1.0}, dims); }),
            ErrorCode::SimplexViolation);
  // Within tolerance: renormalized to an exact simplex.
  const auto mdp = tabular_map(ThetaVector{0.3, 0.7 + 5e-10, 0.6, 0.4, 1.0, 1.0}, dims);
  EXPECT_NEAR(mdp.p(0, 0, 0) + mdp.p(0, 0, 1), 1.0, 1e-15);
}

TEST(TabularMap, RowPerturbationMovesJointByExactlyDelta) {
  TabularDims dims{3, 2, {0.0, 0.5, 1.0}, 2, {}, 1.0};
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const ThetaVector theta = random_tabular_theta(dims, rng);
    std::vector<double> moved = theta.values();
    // Shift mass eps from s'=0 to s'=1 in row (s=1, a=0); the L1 change is 2 eps.
    const std::size_t row = 1 * dims.n_actions + 0;
    const double eps = 0.5 * std::min(moved[row * 3], 1.0 - moved[row * 3 + 1]);
    moved[row * 3] -= eps;
    moved[row * 3 + 1] += eps;
    const ThetaVector other(moved);
    const auto a = tabular_map(theta, dims);
    const auto b = tabular_map(other, dims);
    EXPECT_NEAR(joint_l1(a, b, 1, 0), l1_distance(theta, other), 1e-14);
    EXPECT_EQ(joint_l1(a, b, 0, 1), 0.0);
  }
}

TEST(TabularMap, LipschitzHoldsWithUnitConstant) {
  TabularDims dims{2, 2, {0.0, 1.0}, 1, {}, 1.0};
  const auto mapping = ParametricMapping::tabular(dims);
  EXPECT_EQ(mapping.lipschitz_cg(), 1.0);
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t1 = random_tabular_theta(dims, rng);
    const auto t2 = random_tabular_theta(dims, rng);
    const auto m1 = mapping.map(t1);
    const auto m2 = mapping.map(t2);
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t a = 0; a < 2; ++a) {
        EXPECT_LE(joint_l1(m1, m2, s, a), mapping.lipschitz_cg() * l1_distance(t1, t2) + 1e-12);
      }
    }
  }
}

TEST(HalfCircle, TopCenterGoal) {
  GridConfig grid;
  const auto goal = halfcircle_goal_cells(ThetaVector{std::numbers::pi / 2}, grid);
  // Goal center (0, 3): cells (4,3) exactly and its four neighbours at distance 1.
  std::set<std::size_t> expected = {3 * 9 + 4, 2 * 9 + 4, 4 * 9 + 4, 3 * 9 + 3, 3 * 9 + 5};
  EXPECT_EQ(std::set<std::size_t>(goal.cells.begin(), goal.cells.end()), expected);
  EXPECT_FALSE(goal.promoted);
  const auto mdp = halfcircle_grid_map(ThetaVector{std::numbers::pi / 2}, grid);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const bool in_goal = expected.count(s) > 0;
    EXPECT_EQ(mdp.expected_cost(s, 0), in_goal ? 0.0 : 1.0);
  }
  EXPECT_EQ(mdp.horizon, grid.episode_len);
  EXPECT_EQ(mdp.init_dist[4], 1.0);
}

TEST(HalfCircle, EndpointsAreMirrorImages) {
  GridConfig grid;
  const auto left = halfcircle_goal_cells(ThetaVector{std::numbers::pi}, grid).cells;
  const auto right = halfcircle_goal_cells(ThetaVector{0.0}, grid).cells;
  std::set<std::size_t> mirrored;
  for (std::size_t c : right) {
    const std::size_t i = c % 9, j = c / 9;
    mirrored.insert(j * 9 + (8 - i));
  }
  EXPECT_EQ(std::set<std::size_t>(left.begin(), left.end()), mirrored);
}

TEST(HalfCircle, QuarterAngleMatchesExhaustiveCheck) {
  GridConfig grid;
  const double theta = std::numbers::pi / 4;
  const double gx = 3.0 * std::cos(theta), gy = 3.0 * std::sin(theta);
  std::set<std::size_t> expected;
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 9; ++i) {
      const double dx = (i - 4.0) - gx, dy = j - gy;
      if (dx * dx + dy * dy <= 1.1 * 1.1) expected.insert(static_cast<std::size_t>(j * 9 + i));
    }
  }
  ASSERT_FALSE(expected.empty());
  const auto goal = halfcircle_goal_cells(ThetaVector{theta}, grid).cells;
  EXPECT_EQ(std::set<std::size_t>(goal.begin(), goal.end()), expected);
}

TEST(HalfCircle, DynamicsClipAtBoundary) {
  GridConfig grid;
  const auto mdp = halfcircle_grid_map(ThetaVector{1.0}, grid);
  EXPECT_NO_THROW(mdp.validate());
  EXPECT_EQ(mdp.p(0, 2, 0), 1.0);   // left at the left edge
  EXPECT_EQ(mdp.p(0, 3, 0), 1.0);   // down at the bottom edge
  EXPECT_EQ(mdp.p(0, 0, 1), 1.0);   // right
  EXPECT_EQ(mdp.p(0, 1, 9), 1.0);   // up
  EXPECT_EQ(mdp.p(10, 4, 10), 1.0); // stay
}

TEST(HalfCircle, Errors) {
  GridConfig grid;
  EXPECT_EQ(code_of([&] { halfcircle_grid_map(ThetaVector{-0.1}, grid); }), ErrorCode::OutOfSupport);
  EXPECT_EQ(code_of([&] { halfcircle_grid_map(ThetaVector{4.0}, grid); }), ErrorCode::OutOfSupport);
}

TEST(HalfCircle, TinyGoalPromotesNearestCell) {
  GridConfig grid;
  grid.goal_radius = 0.05;
  const auto goal = halfcircle_goal_cells(ThetaVector{std::numbers::pi / 4}, grid);
  EXPECT_TRUE(goal.promoted);
  ASSERT_EQ(goal.cells.size(), 1u);
  // Goal center (2.12, 2.12) is nearest to cell center (2, 2).
  EXPECT_EQ(goal.cells[0], 2u * 9 + 6);
}

TEST(HalfCircle, LipschitzHoldsOnLattice) {
  for (auto param : {HalfCircleParam::Angle, HalfCircleParam::GoalXY}) {
    GridConfig grid;
    grid.param = param;
    const auto mapping = ParametricMapping::halfcircle_grid(grid);
    EXPECT_GT(mapping.lipschitz_cg(), 0.0);
    const auto lattice = mapping.lipschitz_lattice();
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      for (std::size_t j = i + 1; j < lattice.size(); ++j) {
        const auto a = mapping.map(lattice[i]);
        const auto b = mapping.map(lattice[j]);
        for (std::size_t s = 0; s < a.n_states; ++s) {
          for (std::size_t act = 0; act < 5; ++act) {
            EXPECT_LE(joint_l1(a, b, s, act),
                      mapping.lipschitz_cg() * l1_distance(lattice[i], lattice[j]) + 1e-12);
          }
        }
      }
    }
  }
}

TEST(HalfCircle, MapIsDeterministic) {
  const auto mapping = ParametricMapping::halfcircle_grid(GridConfig{});
  EXPECT_EQ(mapping.map(ThetaVector{0.7}), mapping.map(ThetaVector{0.7}));
}

TEST(SamplePrior, HalfCircleMean) {
  Rng rng(3);
  const auto prior = TruePrior::uniform_halfcircle();
  const auto xs = sample_prior(prior, 1000, rng);
  double mean = 0.0;
  for (const auto& x : xs) {
    EXPECT_TRUE(prior.support().contains(x.coords()));
    mean += x[0] / 1000.0;
  }
  const double se = std::numbers::pi / std::sqrt(12.0) / std::sqrt(1000.0);
  EXPECT_LT(std::abs(mean - std::numbers::pi / 2), 3 * se);
}

TEST(SamplePrior, CategoricalIsReproducible) {
  const auto prior = TruePrior::categorical({ThetaVector{0.0}, ThetaVector{1.0}}, {0.5, 0.5});
  Rng a(42), b(42);
  EXPECT_EQ(sample_prior_indices(prior, 4, a), sample_prior_indices(prior, 4, b));
}

TEST(SamplePrior, CategoricalSkipsZeroWeightAtoms) {
  const auto prior =
      TruePrior::categorical({ThetaVector{0.0}, ThetaVector{1.0}, ThetaVector{2.0}}, {0.5, 0.0, 0.5});
  Rng rng(5);
  for (std::size_t idx : sample_prior_indices(prior, 2000, rng)) EXPECT_NE(idx, 1u);
}

TEST(SamplePrior, UniformBoxPassesKs) {
  const auto prior = TruePrior::uniform_box(TaskSupport::box({0.0, 0.0}, {1.0, 1.0}));
  Rng rng(2024);
  const auto xs = sample_prior(prior, 10000, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> col;
    for (const auto& x : xs) col.push_back(x[j]);
    const double d = oracle::ks_statistic(col, [](double t) { return std::clamp(t, 0.0, 1.0); });
    EXPECT_LT(d, oracle::ks_critical_1pct(col.size()));
  }
}

TEST(SamplePrior, TrianglePassesKsAndAvoidsZeroDensity) {
  const auto prior = TruePrior::piecewise_linear({0.0, 0.5, 1.0}, {0.0, 2.0, 0.0});
  EXPECT_EQ(prior.holder_const(), 4.0);
  Rng rng(99);
  const auto xs = sample_prior(prior, 10000, rng);
  std::vector<double> col;
  for (const auto& x : xs) {
    EXPECT_GT(prior_density(prior, x), 0.0);
    col.push_back(x[0]);
  }
  auto cdf = [](double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t <= 0.5 ? 2 * t * t : 1 - 2 * (1 - t) * (1 - t);
  };
  EXPECT_LT(oracle::ks_statistic(col, cdf), oracle::ks_critical_1pct(col.size()));
}

TEST(PriorDensity, Examples) {
  const auto box = TruePrior::uniform_box(TaskSupport::box({0.0}, {2.0}));
  EXPECT_EQ(prior_density(box, ThetaVector{1.0}), 0.5);
  const auto hc = TruePrior::uniform_halfcircle();
  EXPECT_EQ(prior_density(hc, ThetaVector{3 * std::numbers::pi / 2}), 0.0);
  EXPECT_DOUBLE_EQ(prior_density(hc, ThetaVector{1.0}), 1.0 / std::numbers::pi);
  const auto tri = TruePrior::piecewise_linear({0.0, 0.5, 1.0}, {0.0, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(prior_density(tri, ThetaVector{0.25}), 1.0);
  EXPECT_EQ(prior_density(tri, ThetaVector{1.5}), 0.0);
}

TEST(PriorDensity, CategoricalIsNotADensity) {
  const auto prior = TruePrior::categorical({ThetaVector{0.0}}, {1.0});
  EXPECT_EQ(code_of([&] { prior_density(prior, ThetaVector{0.0}); }), ErrorCode::NotADensity);
}

TEST(TruePrior, PiecewiseLinearMustIntegrateToOne) {
  EXPECT_EQ(code_of([] { TruePrior::piecewise_linear({0.0, 1.0}, {1.0, 2.0}); }),
            ErrorCode::InvalidArgument);
}
