#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "metaprior/error.hpp"
#include "metaprior/planning.hpp"
#include "oracles/brute_force.hpp"
#include "oracles/monte_carlo.hpp"
#include "support/instances.hpp"

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

DiscreteMdp constant_cost_mdp(double cost, int horizon) {
  DiscreteMdp m;
  m.n_states = 1;
  m.n_actions = 1;
  m.cost_values = {cost};
  m.transition = {1.0};
  m.cost_dist = {1.0};
  m.init_dist = {1.0};
  m.horizon = horizon;
  m.c_max = std::max(1.0, cost);
  return m;
}

std::function<int(const std::vector<int>&)> tree_actions(const HistoryPolicy& policy) {
  return [&policy](const std::vector<int>& h) {
    std::vector<std::int32_t> key(h.begin(), h.end());
    return static_cast<int>(policy.history_table().at(history_key(key)));
  };
}

}  // namespace

TEST(ValueIteration, ConstantCost) {
  const auto vi = value_iteration(constant_cost_mdp(0.5, 4), 4);
  EXPECT_EQ(vi.value, 2.0);
}

TEST(ValueIteration, EscapeToAbsorbingState) {
  DiscreteMdp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.cost_values = {0.0, 1.0};
  // State 0: action 0 stays, action 1 moves to 1. State 1 absorbs.
  m.transition = {1, 0, 0, 1, 0, 1, 0, 1};
  m.cost_dist = {0, 1, 0, 1, 1, 0, 1, 0};
  m.init_dist = {1.0, 0.0};
  m.horizon = 10;
  for (int t = 2; t <= 10; ++t) EXPECT_EQ(value_iteration(m, t).value, 1.0);
}

TEST(ValueIteration, BeatsRandomMarkovPolicies) {
  Rng rng(1);
  const auto mdp = oracle::random_mdp(4, 3, {0.0, 0.3, 1.0}, 3, {0.25, 0.25, 0.25, 0.25}, rng);
  const int T = 6;
  const double best = value_iteration(mdp, T).value;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::vector<std::uint8_t>> acts(T, std::vector<std::uint8_t>(4));
    for (auto& row : acts) {
      for (auto& a : row) a = static_cast<std::uint8_t>(rng.below(3));
    }
    EXPECT_LE(best, evaluate_policy(HistoryPolicy::markov(3, 3, acts), mdp, T) + 1e-12);
  }
}

TEST(EvaluatePolicy, ZeroCost) {
  Rng rng(2);
  auto mdp = oracle::random_mdp(2, 2, {0.0}, 2, {0.5, 0.5}, rng);
  EXPECT_EQ(evaluate_policy(random_history_policy(mdp, 4, rng), mdp, 4), 0.0);
}

TEST(EvaluatePolicy, ForcedPath) {
  DiscreteMdp m;
  m.n_states = 3;
  m.n_actions = 1;
  m.cost_values = {1.0, 2.0, 3.0};
  m.transition = {0, 1, 0, 0, 0, 1, 0, 0, 1};
  m.cost_dist = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  m.init_dist = {1, 0, 0};
  m.horizon = 3;
  m.c_max = 3.0;
  Rng rng(3);
  EXPECT_EQ(evaluate_policy(random_history_policy(m, 3, rng), m, 3), 6.0);
  EXPECT_EQ(value_iteration(m, 3).value, 6.0);
}

TEST(EvaluatePolicy, MatchesMonteCarlo) {
  Rng rng(4);
  const auto mdp = oracle::random_mdp(2, 2, {0.0, 1.0}, 2, {0.3, 0.7}, rng);
  const int T = 4;
  const auto policy = random_history_policy(mdp, T, rng);
  const double exact = evaluate_policy(policy, mdp, T);
  Rng mc_rng(5);
  const auto mc = oracle::monte_carlo_return(mdp, tree_actions(policy), T, 1'000'000, mc_rng);
  EXPECT_LT(std::abs(mc.mean - exact), 4 * mc.standard_error);
  EXPECT_GE(exact, 0.0);
  EXPECT_LE(exact, T * mdp.c_max);
}

TEST(EvaluatePolicy, UndefinedHistory) {
  const auto cands = support::mirror_candidates(2);
  const auto plan = bayes_optimal_plan(cands, 4, PlanOptions{.merge = false});
  EXPECT_EQ(code_of([&] { evaluate_policy(plan.policy, cands.mdps()[0], 6); }), ErrorCode::UndefinedHistory);
  // A tree with a missing entry.
  auto table = plan.policy.history_table();
  table.erase(history_key({1}));
  const auto broken = HistoryPolicy::tree(5, 4, 2, table);
  EXPECT_EQ(code_of([&] { evaluate_policy(broken, cands.mdps()[0], 4); }), ErrorCode::UndefinedHistory);
}

TEST(BayesLoss, WeightedAverage) {
  auto one = constant_cost_mdp(1.0, 4);
  one.cost_values = {1.0, 2.0};
  one.cost_dist = {1.0, 0.0};
  one.c_max = 2.0;
  auto two = one;
  two.cost_dist = {0.0, 1.0};
  const CandidateSet prior({one, two}, {0.25, 0.75});
  const auto policy = HistoryPolicy::markov(1, 4, std::vector<std::vector<std::uint8_t>>(4, {0}));
  EXPECT_DOUBLE_EQ(evaluate_bayes_loss(policy, prior, 4), 7.0);
  const CandidateSet single({constant_cost_mdp(1.0, 4)}, {1.0});
  EXPECT_EQ(evaluate_bayes_loss(policy, single, 4), evaluate_policy(policy, single.mdps()[0], 4));
}

TEST(Plan, SingleCandidateMatchesValueIteration) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = oracle::random_mdp(3, 2, {0.0, 0.5, 1.0}, 2, {0.5, 0.5, 0.0}, rng);
    const CandidateSet one({mdp}, {1.0});
    EXPECT_NEAR(bayes_optimal_plan(one, 5).value, value_iteration(mdp, 5).value, 1e-12);
    const CandidateSet dup({mdp, mdp, mdp}, {0.2, 0.3, 0.5});
    EXPECT_NEAR(bayes_optimal_plan(dup, 5).value, bayes_optimal_plan(one, 5).value, 1e-12);
  }
}

TEST(Plan, MatchesBruteForceOnMicroInstances) {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = support::random_micro_instance(rng);
    const CandidateSet cands(inst.mdps, inst.weights);
    oracle::BruteForce bf(inst.mdps, inst.weights, inst.total_steps);
    const double expected = bf.minimum();
    for (bool merge : {true, false}) {
      const auto plan = bayes_optimal_plan(cands, inst.total_steps, PlanOptions{.merge = merge});
      EXPECT_NEAR(plan.value, expected, 1e-10) << "trial " << trial;
      EXPECT_NEAR(evaluate_bayes_loss(plan.policy, cands, inst.total_steps), plan.value, 1e-10);
    }
  }
}

TEST(Plan, BeliefsAreExactPosteriors) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> init = {0.5, 0.5};
    std::vector<DiscreteMdp> mdps;
    for (int m = 0; m < 3; ++m) mdps.push_back(oracle::random_mdp(2, 2, {0.0, 1.0}, 2, init, rng));
    const CandidateSet cands(mdps, {0.2, 0.3, 0.5});
    const auto plan = bayes_optimal_plan(cands, 4, PlanOptions{.merge = false, .record_beliefs = true});
    ASSERT_FALSE(plan.beliefs.empty());
    for (const auto& rec : plan.beliefs) {
      std::vector<double> b = cands.weights();
      const auto& h = rec.history;
      for (std::size_t i = 0; 3 * i + 3 < h.size(); ++i) {
        const auto s = static_cast<std::size_t>(h[3 * i]);
        const auto a = static_cast<std::size_t>(h[3 * i + 1]);
        const auto c = static_cast<std::size_t>(h[3 * i + 2]);
        const auto s2 = static_cast<std::size_t>(h[3 * i + 3]);
        const bool boundary = (static_cast<int>(i) + 1) % 2 == 0;
        for (std::size_t m = 0; m < 3; ++m) b[m] *= mdps[m].c(s, a, c) * (boundary ? 1.0 : mdps[m].p(s, a, s2));
      }
      double total = 0.0;
      for (double v : b) total += v;
      for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(rec.belief[m], b[m] / total, 1e-10);
    }
  }
}

TEST(Plan, NotBetterThanOmniscient) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DiscreteMdp> mdps;
    for (int m = 0; m < 3; ++m) mdps.push_back(oracle::random_mdp(2, 2, {0.0, 1.0}, 2, {1.0, 0.0}, rng));
    const CandidateSet cands(mdps, {0.3, 0.3, 0.4});
    double omniscient = 0.0;
    for (int m = 0; m < 3; ++m) omniscient += cands.weights()[m] * value_iteration(mdps[m], 6).value;
    EXPECT_GE(bayes_optimal_plan(cands, 6).value, omniscient - 1e-12);
  }
}

TEST(Plan, MirrorGoalLearnsAcrossEpisodes) {
  const int H = 2;
  const auto cands = support::mirror_candidates(H);
  const auto plan = bayes_optimal_plan(cands, 2 * H);
  const double first = evaluate_bayes_loss(plan.policy, cands, H);
  const double second = plan.value - first;
  EXPECT_LT(second, first);
  oracle::BruteForce bf(cands.mdps(), cands.weights(), 2 * H);
  EXPECT_NEAR(plan.value, bf.minimum(), 1e-12);
}

TEST(Plan, CommittingPolicyRegretMatchesBruteForce) {
  const int H = 2, T = 2 * H;
  const auto cands = support::mirror_candidates(H);
  // Always move right.
  const auto commit = HistoryPolicy::markov(5, H, std::vector<std::vector<std::uint8_t>>(T, {0, 0, 0}));
  oracle::BruteForce bf(cands.mdps(), cands.weights(), T);
  const double gap = bf.evaluate_fn([](const std::vector<int>&) { return 0; }) - bf.minimum();
  EXPECT_GT(gap, 0.0);
  EXPECT_NEAR(regret(commit, cands, T), gap, 1e-12);
}

TEST(Plan, PerStepCostFallsWithMoreEpisodes) {
  const int H = 2;
  const auto cands = support::mirror_candidates(H);
  double prev = INFINITY;
  for (int episodes = 1; episodes <= 5; ++episodes) {
    const double avg = bayes_optimal_plan(cands, episodes * H).value / (episodes * H);
    EXPECT_LE(avg, prev + 1e-12);
    prev = avg;
  }
}

TEST(Plan, ResetBeliefForgetsBetweenEpisodes) {
  const int H = 2;
  const auto cands = support::mirror_candidates(H);
  const auto carry = bayes_optimal_plan(cands, 2 * H);
  const auto reset = bayes_optimal_plan(cands, 2 * H, PlanOptions{.reset_belief = true});
  const double single = bayes_optimal_plan(cands, H).value;
  EXPECT_NEAR(reset.value, 2 * single, 1e-12);
  EXPECT_LT(carry.value, reset.value);
  EXPECT_NEAR(evaluate_bayes_loss(reset.policy, cands, 2 * H), reset.value, 1e-12);
}

TEST(Plan, RegretOfBayesOptimalIsZero) {
  Rng rng(10);
  const auto inst = support::random_micro_instance(rng);
  const CandidateSet cands(inst.mdps, inst.weights);
  const auto plan = bayes_optimal_plan(cands, inst.total_steps);
  EXPECT_EQ(regret(plan.policy, cands, inst.total_steps), 0.0);
  for (int i = 0; i < 20; ++i) {
    const auto other = random_history_policy(cands.structure(), inst.total_steps, rng);
    EXPECT_GE(regret(other, cands, inst.total_steps, plan.value), 0.0);
  }
}

TEST(Plan, OffModelObservationsKeepBelief) {
  // Plan for the left and right goals; evaluate on a task whose goal is in the middle.
  const int H = 2;
  const auto cands = support::mirror_candidates(H);
  const auto plan = bayes_optimal_plan(cands, 2 * H);
  const auto middle = halfcircle_grid_map(ThetaVector{std::numbers::pi / 2}, support::mirror_grid(H));
  const auto eval = evaluate_policy_detailed(plan.policy, middle, 2 * H);
  EXPECT_GT(eval.off_model_mass, 0.0);
  EXPECT_GE(eval.value, 0.0);
  EXPECT_LE(eval.value, 2.0 * H);
}

TEST(Plan, BudgetExceeded) {
  const auto cands = support::mirror_candidates(3);
  EXPECT_EQ(code_of([&] { bayes_optimal_plan(cands, 9, PlanOptions{.node_budget = 5}); }),
            ErrorCode::BudgetExceeded);
}

TEST(CandidateSet, MergeDuplicates) {
  Rng rng(13);
  const auto a = oracle::random_mdp(2, 2, {0.0, 1.0}, 2, {1.0, 0.0}, rng);
  const auto b = oracle::random_mdp(2, 2, {0.0, 1.0}, 2, {1.0, 0.0}, rng);
  const CandidateSet set({a, b, a}, {0.25, 0.25, 0.5});
  const auto merged = set.merge_duplicates();
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged.weights()[0], 0.75);
  EXPECT_EQ(merged.weights()[1], 0.25);
  EXPECT_NEAR(bayes_optimal_plan(merged, 4).value, bayes_optimal_plan(set, 4).value, 1e-12);
  EXPECT_EQ(code_of([&] { CandidateSet({a, b}, {0.5, 0.6}); }), ErrorCode::InvalidArgument);
}

TEST(SimulationGap, IdenticalParameters) {
  TabularDims dims{2, 2, {0.0, 1.0}, 2, {}, 1.0};
  const auto mapping = ParametricMapping::tabular(dims);
  Rng rng(11);
  const auto theta = random_tabular_theta(dims, rng);
  const auto policy = random_history_policy(mapping.map(theta), 4, rng);
  const auto gap = simulation_gap_check(policy, theta, theta, mapping, 4);
  EXPECT_EQ(gap.lhs, 0.0);
  EXPECT_TRUE(gap.holds);
}

TEST(SimulationGap, PerturbedRow) {
  TabularDims dims{2, 2, {0.0, 1.0}, 3, {}, 1.0};
  const auto mapping = ParametricMapping::tabular(dims);
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto theta = random_tabular_theta(dims, rng);
    std::vector<double> moved = theta.values();
    const double eps = 0.5 * moved[0];
    moved[0] -= eps;
    moved[1] += eps;
    const ThetaVector other(moved);
    const int T = 1 + static_cast<int>(rng.below(6));
    const auto policy = random_history_policy(mapping.map(theta), T, rng);
    const auto gap = simulation_gap_check(policy, theta, other, mapping, T);
    EXPECT_NEAR(gap.rhs, 2 * eps * T * T, 1e-12);
    EXPECT_TRUE(gap.holds);
  }
}
