#include <gtest/gtest.h>

#include "metaprior/error.hpp"
#include "metaprior/serialize.hpp"
#include "oracles/brute_force.hpp"
#include "support/instances.hpp"

using namespace metaprior;

namespace {

Json round_trip(const Json& j) { return parse_json(j.dump()); }

}  // namespace

TEST(Serialize, MdpRoundTrip) {
  Rng rng(3);
  const DiscreteMdp m = oracle::random_mdp(3, 2, {0.0, 0.5, 1.0}, 2, {0.2, 0.3, 0.5}, rng);
  EXPECT_EQ(mdp_from_json(round_trip(to_json(m))), m);
  const Json j = to_json(m);
  EXPECT_EQ(j["transition"].size(), 3u);
  EXPECT_EQ(j["transition"][0].size(), 2u);
  EXPECT_EQ(j["transition"][0][0].size(), 3u);
}

TEST(Serialize, MdpRejectsBadShapesAndRows) {
  Rng rng(3);
  Json j = to_json(oracle::random_mdp(2, 2, {0.0, 1.0}, 1, {0.5, 0.5}, rng));
  Json bad = j;
  bad["transition"][0].erase(1);
  EXPECT_THROW(mdp_from_json(bad), Error);
  bad = j;
  bad["transition"][0][0] = {0.9, 0.9};
  EXPECT_THROW(mdp_from_json(bad), Error);
  bad = j;
  bad.erase("n_states");
  try {
    mdp_from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
  }
}

TEST(Serialize, CandidatesRoundTrip) {
  const CandidateSet cs = support::mirror_candidates(2);
  const CandidateSet back = candidates_from_json(round_trip(to_json(cs)));
  ASSERT_EQ(back.size(), cs.size());
  EXPECT_EQ(back.weights(), cs.weights());
  EXPECT_EQ(back.mdps(), cs.mdps());
}

TEST(Serialize, PoliciesRoundTripWithSameValue) {
  const CandidateSet cs = support::mirror_candidates(2);
  const int steps = 4;
  for (bool merge : {true, false}) {
    PlanOptions opt;
    opt.merge = merge;
    const PlanResult plan = bayes_optimal_plan(cs, steps, opt);
    const Json j = to_json(plan.policy);
    const HistoryPolicy back = policy_from_json(round_trip(j));
    EXPECT_EQ(back.representation(), plan.policy.representation());
    EXPECT_EQ(to_json(back).dump(), j.dump());
    for (const auto& m : cs.mdps()) EXPECT_EQ(evaluate_policy(back, m, steps), evaluate_policy(plan.policy, m, steps));
  }
  const auto vi = value_iteration(cs.mdps()[0], steps);
  const HistoryPolicy back = policy_from_json(round_trip(to_json(vi.policy)));
  EXPECT_EQ(evaluate_policy(back, cs.mdps()[0], steps), vi.value);
}

TEST(Serialize, KdeRoundTripEvaluatesIdentically) {
  std::vector<ThetaVector> xs{{0.1}, {0.4}, {0.45}, {0.9}};
  const KdeEstimate plain = kde_fit(xs, BandwidthSpec::isotropic(0.2, 1));
  const KdeEstimate trunc = kde_truncate(plain, TaskSupport::box({0.0}, {1.0}));
  for (const auto* est : {&plain, &trunc}) {
    const KdeEstimate back = kde_from_json(round_trip(to_json(*est)));
    for (double x : {-0.2, 0.0, 0.3, 0.77, 1.0}) EXPECT_EQ(back.eval(ThetaVector{x}), est->eval(ThetaVector{x}));
  }
}

TEST(Serialize, ProjectionRoundTrip) {
  std::vector<ThetaVector> xs{{1, 2, 0.1}, {2, 4, -0.1}, {-1, -2, 0.05}, {0.5, 1.1, 0.0}};
  const ProjectionMap p = pca_fit(xs, 1);
  const ProjectionMap back = projection_from_json(round_trip(to_json(p)));
  EXPECT_TRUE(back.w().isApprox(p.w(), 0.0) || (back.w() - p.w()).norm() == 0.0);
  EXPECT_EQ(back.project(xs[0]), p.project(xs[0]));
}

TEST(Serialize, BoundRecord) {
  BoundResult r;
  r.value = 2.5;
  r.vacuous = true;
  r.flags = {"vacuous"};
  r.terms = {{"a", 1.0}};
  const Json j = to_json(r);
  EXPECT_EQ(j["value"], 2.5);
  EXPECT_EQ(j["terms"]["a"], 1.0);
  EXPECT_EQ(j["vacuous"], true);
}

TEST(Serialize, ParseErrors) {
  try {
    parse_json("{not json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
  }
  try {
    read_json_file("/nonexistent/file.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}
