#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "metaprior/task_space.hpp"

namespace metaprior {

/// Weighted finite set of structurally identical MDPs.
class CandidateSet {
 public:
  CandidateSet(std::vector<DiscreteMdp> mdps, std::vector<double> weights);

  std::size_t size() const { return mdps_.size(); }
  const std::vector<DiscreteMdp>& mdps() const { return mdps_; }
  const std::vector<double>& weights() const { return weights_; }
  const DiscreteMdp& structure() const { return mdps_.front(); }

  /// Combines bitwise-identical MDPs, summing their weights; first
  /// occurrence order is kept.
  CandidateSet merge_duplicates() const;

 private:
  std::vector<DiscreteMdp> mdps_;
  std::vector<double> weights_;
};

struct PlanOptions {
  /// Merge belief nodes whose beliefs agree after 1e-10 quantization.
  /// Without merging the policy is an explicit history tree.
  bool merge = true;
  /// Reset the belief to the prior at every episode boundary.
  bool reset_belief = false;
  std::size_t node_budget = 2'000'000;
  /// Record (history, belief) for every planned node; requires merge = false.
  bool record_beliefs = false;
};

enum class PolicyRepresentation { BeliefLookup, Tree, Markov };

/// Deterministic history-dependent policy.
///
/// Histories are encoded as (s_0, a_0, c_0, s_1, a_1, c_1, ..., s_t) with
/// cost indices into the shared cost set. At an episode boundary s_{t+1} is
/// the state redrawn from the initial distribution.
class HistoryPolicy {
 public:
  PolicyRepresentation representation() const { return representation_; }
  int total_steps() const { return total_steps_; }
  int horizon() const { return horizon_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t size() const;

  /// BeliefLookup only.
  const CandidateSet& candidates() const;
  const PlanOptions& options() const { return options_; }

  using BeliefTable = std::unordered_map<std::string, std::uint8_t>;
  using HistoryTable = std::unordered_map<std::string, std::uint8_t>;

  const BeliefTable& belief_table() const { return belief_table_; }
  const HistoryTable& history_table() const { return history_table_; }
  const std::vector<std::vector<std::uint8_t>>& markov_actions() const { return markov_; }

  static HistoryPolicy belief_lookup(CandidateSet candidates, int total_steps, PlanOptions options,
                                     BeliefTable table);
  static HistoryPolicy tree(std::size_t n_actions, int total_steps, int horizon, HistoryTable table);
  /// actions[t][s].
  static HistoryPolicy markov(std::size_t n_actions, int horizon, std::vector<std::vector<std::uint8_t>> actions);

 private:
  PolicyRepresentation representation_ = PolicyRepresentation::Markov;
  int total_steps_ = 0;
  int horizon_ = 1;
  std::size_t n_actions_ = 0;
  std::shared_ptr<const CandidateSet> candidates_;
  PlanOptions options_;
  BeliefTable belief_table_;
  HistoryTable history_table_;
  std::vector<std::vector<std::uint8_t>> markov_;
};

/// Key helpers for the policy tables.
std::string belief_key(int t, std::size_t s, const std::vector<double>& belief);
std::string history_key(const std::vector<std::int32_t>& history);
std::vector<std::int32_t> parse_history_key(const std::string& key);
/// Returns (t, s, quantized belief).
struct DecodedBeliefKey {
  int t = 0;
  std::size_t s = 0;
  std::vector<std::int64_t> quantized;
};
DecodedBeliefKey parse_belief_key(const std::string& key);
std::string make_belief_key(int t, std::size_t s, const std::vector<std::int64_t>& quantized);

struct BeliefRecord {
  std::vector<std::int32_t> history;
  int t = 0;
  std::size_t s = 0;
  std::vector<double> belief;
};

struct PlanResult {
  HistoryPolicy policy;
  double value = 0.0;
  std::size_t nodes = 0;
  std::vector<BeliefRecord> beliefs;
};

/// Exact Bayes-optimal planning by expectimax over (t, s, belief).
PlanResult bayes_optimal_plan(const CandidateSet& candidates, int total_steps, const PlanOptions& options = {});

struct PolicyEvaluation {
  double value = 0.0;
  /// Probability mass of observations the policy's candidates rule out.
  double off_model_mass = 0.0;
  std::size_t lazily_planned = 0;
};

/// Exact expected cumulative cost of the policy on one MDP.
PolicyEvaluation evaluate_policy_detailed(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps);
double evaluate_policy(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps);

/// Weighted average of per-candidate losses.
double evaluate_bayes_loss(const HistoryPolicy& policy, const CandidateSet& prior, int total_steps);

/// Loss minus the Bayes-optimal loss, clipped to 0 within 1e-9.
double regret(const HistoryPolicy& policy, const CandidateSet& truth, int total_steps, double bayes_optimal_loss);
double regret(const HistoryPolicy& policy, const CandidateSet& truth, int total_steps);

struct ValueIterationResult {
  HistoryPolicy policy;  // Markov, time-dependent
  double value = 0.0;
};

/// Finite-horizon backward induction with episode resets every H steps.
ValueIterationResult value_iteration(const DiscreteMdp& mdp, int total_steps);

/// Policy drawing a uniformly random action for every history an MDP with
/// this structure can produce under that policy.
HistoryPolicy random_history_policy(const DiscreteMdp& structure, int total_steps, Rng& rng);

struct SimulationGap {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// |L(g(theta1), pi) - L(g(theta2), pi)| against C_max C_g |theta1 - theta2|_1 T^2.
SimulationGap simulation_gap_check(const HistoryPolicy& policy, const ThetaVector& theta1,
                                   const ThetaVector& theta2, const ParametricMapping& mapping, int total_steps);

}  // namespace metaprior
