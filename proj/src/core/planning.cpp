#include "metaprior/planning.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "metaprior/error.hpp"

namespace metaprior {

namespace {

constexpr double kQuantum = 1e-10;
constexpr std::size_t kBoundary = std::numeric_limits<std::size_t>::max();

template <typename T>
void append_bytes(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T read_bytes(const std::string& in, std::size_t& pos) {
  require(pos + sizeof(T) <= in.size(), ErrorCode::Parse, "truncated policy key");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::vector<std::int64_t> quantize(const std::vector<double>& belief) {
  std::vector<std::int64_t> q(belief.size());
  for (std::size_t m = 0; m < belief.size(); ++m) q[m] = std::llround(belief[m] / kQuantum);
  return q;
}

bool is_boundary(int next_t, int horizon) { return next_t % horizon == 0; }

/// One observable outcome of (s, a): a cost index and, within an episode,
/// the next state. likelihood[m] is its probability under candidate m.
struct Outcome {
  std::size_t cost_index = 0;
  std::size_t next = kBoundary;
  std::vector<double> likelihood;
};

/// Per-(s, a) outcome tables shared by all candidates.
class CandidateModel {
 public:
  explicit CandidateModel(const CandidateSet& set) : set_(set) {
    const DiscreteMdp& st = set.structure();
    const std::size_t k = set.size();
    const std::size_t rows = st.n_states * st.n_actions;
    within_.resize(rows);
    boundary_.resize(rows);
    expected_cost_.assign(rows * k, 0.0);
    for (std::size_t s = 0; s < st.n_states; ++s) {
      for (std::size_t a = 0; a < st.n_actions; ++a) {
        const std::size_t row = s * st.n_actions + a;
        for (std::size_t m = 0; m < k; ++m) expected_cost_[row * k + m] = set.mdps()[m].expected_cost(s, a);
        for (std::size_t c = 0; c < st.n_costs(); ++c) {
          Outcome b{c, kBoundary, std::vector<double>(k)};
          bool any = false;
          for (std::size_t m = 0; m < k; ++m) {
            b.likelihood[m] = set.mdps()[m].c(s, a, c);
            any = any || b.likelihood[m] > 0.0;
          }
          if (any) boundary_[row].push_back(std::move(b));
          for (std::size_t next = 0; next < st.n_states; ++next) {
            Outcome o{c, next, std::vector<double>(k)};
            bool pos = false;
            for (std::size_t m = 0; m < k; ++m) {
              o.likelihood[m] = set.mdps()[m].joint(s, a, c, next);
              pos = pos || o.likelihood[m] > 0.0;
            }
            if (pos) within_[row].push_back(std::move(o));
          }
        }
      }
    }
  }

  const CandidateSet& set() const { return set_; }
  std::size_t k() const { return set_.size(); }
  const std::vector<Outcome>& outcomes(std::size_t s, std::size_t a, bool boundary) const {
    const std::size_t row = s * set_.structure().n_actions + a;
    return boundary ? boundary_[row] : within_[row];
  }
  double expected_cost(std::size_t s, std::size_t a, const std::vector<double>& belief) const {
    const std::size_t row = s * set_.structure().n_actions + a;
    double sum = 0.0;
    for (std::size_t m = 0; m < k(); ++m) sum += belief[m] * expected_cost_[row * k() + m];
    return sum;
  }

 private:
  const CandidateSet& set_;
  std::vector<std::vector<Outcome>> within_;
  std::vector<std::vector<Outcome>> boundary_;
  std::vector<double> expected_cost_;
};

/// Posterior after observing an outcome; returns the predictive probability.
double posterior(const std::vector<double>& belief, const std::vector<double>& likelihood, std::vector<double>& out) {
  out.resize(belief.size());
  double total = 0.0;
  for (std::size_t m = 0; m < belief.size(); ++m) {
    out[m] = belief[m] * likelihood[m];
    total += out[m];
  }
  if (total <= 0.0) return 0.0;
  for (double& v : out) v /= total;
  return total;
}

struct Solved {
  double value = 0.0;
  std::uint8_t action = 0;
};

std::uint8_t argmin_lowest(const std::vector<double>& q, double& best_out) {
  double best = q.front();
  for (double v : q) best = std::min(best, v);
  const double tol = 1e-12 * (1.0 + std::abs(best));
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (q[a] <= best + tol) {
      best_out = q[a];
      return static_cast<std::uint8_t>(a);
    }
  }
  best_out = best;
  return 0;
}

class Planner {
 public:
  Planner(const CandidateSet& set, int total_steps, const PlanOptions& options)
      : model_(set), total_steps_(total_steps), horizon_(set.structure().horizon), options_(options) {}

  Solved solve_merged(int t, std::size_t s, const std::vector<double>& belief) {
    std::string key = belief_key(t, s, belief);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    count_node();
    const Solved out = backup(t, s, belief, [&](int nt, std::size_t ns, const std::vector<double>& nb, std::size_t,
                                                std::size_t, std::size_t) { return solve_merged(nt, ns, nb).value; });
    memo_.emplace(std::move(key), out);
    return out;
  }

  double solve_tree(int t, std::size_t s, const std::vector<double>& belief) {
    count_node();
    if (options_.record_beliefs) beliefs_.push_back(BeliefRecord{history_, t, s, belief});
    const Solved out = backup(t, s, belief, [&](int nt, std::size_t ns, const std::vector<double>& nb,
                                                std::size_t a, std::size_t c, std::size_t obs_state) {
      history_.push_back(static_cast<std::int32_t>(a));
      history_.push_back(static_cast<std::int32_t>(c));
      history_.push_back(static_cast<std::int32_t>(obs_state));
      const double v = solve_tree(nt, ns, nb);
      history_.resize(history_.size() - 3);
      return v;
    });
    history_table_.emplace(history_key(history_), out.action);
    return out.value;
  }

  void start_history(std::size_t s0) { history_.assign(1, static_cast<std::int32_t>(s0)); }

  std::size_t nodes() const { return nodes_; }
  const std::unordered_map<std::string, Solved>& memo() const { return memo_; }
  HistoryPolicy::HistoryTable take_history_table() { return std::move(history_table_); }
  std::vector<BeliefRecord> take_beliefs() { return std::move(beliefs_); }

 private:
  void count_node() {
    if (++nodes_ > options_.node_budget) {
      fail(ErrorCode::BudgetExceeded, "planning tree exceeds the node budget");
    }
  }

  template <typename Child>
  Solved backup(int t, std::size_t s, const std::vector<double>& belief, Child&& child) {
    const DiscreteMdp& st = model_.set().structure();
    std::vector<double> q(st.n_actions, 0.0);
    std::vector<double> next_belief;
    const int nt = t + 1;
    const bool has_future = nt < total_steps_;
    const bool boundary = has_future && is_boundary(nt, horizon_);
    for (std::size_t a = 0; a < st.n_actions; ++a) {
      double value = model_.expected_cost(s, a, belief);
      if (has_future) {
        for (const Outcome& o : model_.outcomes(s, a, boundary)) {
          const double pr = posterior(belief, o.likelihood, next_belief);
          if (pr <= 0.0) continue;
          if (!boundary) {
            value += pr * child(nt, o.next, next_belief, a, o.cost_index, o.next);
            continue;
          }
          const std::vector<double>& carried = options_.reset_belief ? model_.set().weights() : next_belief;
          const std::vector<double> kept = carried;
          for (std::size_t s2 = 0; s2 < st.n_states; ++s2) {
            if (st.init_dist[s2] <= 0.0) continue;
            value += pr * st.init_dist[s2] * child(nt, s2, kept, a, o.cost_index, s2);
          }
        }
      }
      q[a] = value;
    }
    Solved out;
    out.action = argmin_lowest(q, out.value);
    return out;
  }

  CandidateModel model_;
  int total_steps_;
  int horizon_;
  PlanOptions options_;
  std::size_t nodes_ = 0;
  std::unordered_map<std::string, Solved> memo_;
  std::vector<std::int32_t> history_;
  HistoryPolicy::HistoryTable history_table_;
  std::vector<BeliefRecord> beliefs_;
};

}  // namespace

CandidateSet::CandidateSet(std::vector<DiscreteMdp> mdps, std::vector<double> weights)
    : mdps_(std::move(mdps)), weights_(std::move(weights)) {
  require(!mdps_.empty() && mdps_.size() == weights_.size(), ErrorCode::InvalidArgument,
          "candidate set needs one weight per MDP");
  double total = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::InvalidArgument, "candidate weights must be nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::InvalidArgument, "candidate weights must sum to 1");
  for (double& w : weights_) w /= total;
  for (const auto& mdp : mdps_) {
    mdp.validate();
    require(mdp.same_structure(mdps_.front()), ErrorCode::DimensionMismatch, "candidate MDPs differ in structure");
  }
}

CandidateSet CandidateSet::merge_duplicates() const {
  std::vector<DiscreteMdp> mdps;
  std::vector<double> weights;
  for (std::size_t i = 0; i < mdps_.size(); ++i) {
    auto it = std::find(mdps.begin(), mdps.end(), mdps_[i]);
    if (it == mdps.end()) {
      mdps.push_back(mdps_[i]);
      weights.push_back(weights_[i]);
    } else {
      weights[static_cast<std::size_t>(it - mdps.begin())] += weights_[i];
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return CandidateSet(std::move(mdps), std::move(weights));
}

std::size_t HistoryPolicy::size() const {
  switch (representation_) {
    case PolicyRepresentation::BeliefLookup: return belief_table_.size();
    case PolicyRepresentation::Tree: return history_table_.size();
    case PolicyRepresentation::Markov: return markov_.size() * (markov_.empty() ? 0 : markov_.front().size());
  }
  return 0;
}

const CandidateSet& HistoryPolicy::candidates() const {
  require(candidates_ != nullptr, ErrorCode::InvalidArgument, "policy carries no candidate set");
  return *candidates_;
}

HistoryPolicy HistoryPolicy::belief_lookup(CandidateSet candidates, int total_steps, PlanOptions options,
                                           BeliefTable table) {
  require(total_steps >= 1, ErrorCode::InvalidArgument, "T must be positive");
  HistoryPolicy p;
  p.representation_ = PolicyRepresentation::BeliefLookup;
  p.total_steps_ = total_steps;
  p.horizon_ = candidates.structure().horizon;
  p.n_actions_ = candidates.structure().n_actions;
  p.candidates_ = std::make_shared<const CandidateSet>(std::move(candidates));
  p.options_ = options;
  p.belief_table_ = std::move(table);
  return p;
}

HistoryPolicy HistoryPolicy::tree(std::size_t n_actions, int total_steps, int horizon, HistoryTable table) {
  require(total_steps >= 1 && horizon >= 1 && n_actions >= 1, ErrorCode::InvalidArgument,
          "tree policy needs positive T, H and |A|");
  HistoryPolicy p;
  p.representation_ = PolicyRepresentation::Tree;
  p.total_steps_ = total_steps;
  p.horizon_ = horizon;
  p.n_actions_ = n_actions;
  p.options_.merge = false;
  p.history_table_ = std::move(table);
  return p;
}

HistoryPolicy HistoryPolicy::markov(std::size_t n_actions, int horizon,
                                    std::vector<std::vector<std::uint8_t>> actions) {
  require(!actions.empty() && horizon >= 1 && n_actions >= 1, ErrorCode::InvalidArgument,
          "Markov policy needs at least one step");
  for (const auto& row : actions) {
    require(row.size() == actions.front().size(), ErrorCode::DimensionMismatch, "ragged Markov policy");
    for (auto a : row) require(a < n_actions, ErrorCode::InvalidArgument, "action out of range");
  }
  HistoryPolicy p;
  p.representation_ = PolicyRepresentation::Markov;
  p.total_steps_ = static_cast<int>(actions.size());
  p.horizon_ = horizon;
  p.n_actions_ = n_actions;
  p.markov_ = std::move(actions);
  return p;
}

std::string make_belief_key(int t, std::size_t s, const std::vector<std::int64_t>& quantized) {
  std::string key;
  key.reserve(8 + 8 * quantized.size());
  append_bytes<std::int32_t>(key, t);
  append_bytes<std::uint32_t>(key, static_cast<std::uint32_t>(s));
  for (auto v : quantized) append_bytes<std::int64_t>(key, v);
  return key;
}

std::string belief_key(int t, std::size_t s, const std::vector<double>& belief) {
  return make_belief_key(t, s, quantize(belief));
}

DecodedBeliefKey parse_belief_key(const std::string& key) {
  require((key.size() - 8) % 8 == 0 && key.size() >= 8, ErrorCode::Parse, "malformed belief key");
  DecodedBeliefKey out;
  std::size_t pos = 0;
  out.t = read_bytes<std::int32_t>(key, pos);
  out.s = read_bytes<std::uint32_t>(key, pos);
  while (pos < key.size()) out.quantized.push_back(read_bytes<std::int64_t>(key, pos));
  return out;
}

std::string history_key(const std::vector<std::int32_t>& history) {
  std::string key;
  key.reserve(4 * history.size());
  for (auto v : history) append_bytes<std::int32_t>(key, v);
  return key;
}

std::vector<std::int32_t> parse_history_key(const std::string& key) {
  require(key.size() % 4 == 0, ErrorCode::Parse, "malformed history key");
  std::vector<std::int32_t> out;
  std::size_t pos = 0;
  while (pos < key.size()) out.push_back(read_bytes<std::int32_t>(key, pos));
  return out;
}

PlanResult bayes_optimal_plan(const CandidateSet& candidates, int total_steps, const PlanOptions& options) {
  require(total_steps >= 1, ErrorCode::InvalidArgument, "T must be positive");
  require(candidates.structure().n_actions <= 256, ErrorCode::InvalidArgument, "at most 256 actions");
  require(!(options.record_beliefs && options.merge), ErrorCode::InvalidArgument,
          "belief recording needs an unmerged tree");
  const DiscreteMdp& st = candidates.structure();
  Planner planner(candidates, total_steps, options);
  double value = 0.0;
  for (std::size_t s0 = 0; s0 < st.n_states; ++s0) {
    if (st.init_dist[s0] <= 0.0) continue;
    if (options.merge) {
      value += st.init_dist[s0] * planner.solve_merged(0, s0, candidates.weights()).value;
    } else {
      planner.start_history(s0);
      value += st.init_dist[s0] * planner.solve_tree(0, s0, candidates.weights());
    }
  }
  PlanResult out{HistoryPolicy{}, value, planner.nodes(), {}};
  if (options.merge) {
    HistoryPolicy::BeliefTable table;
    table.reserve(planner.memo().size());
    for (const auto& [key, solved] : planner.memo()) table.emplace(key, solved.action);
    out.policy = HistoryPolicy::belief_lookup(candidates, total_steps, options, std::move(table));
  } else {
    out.policy = HistoryPolicy::tree(st.n_actions, total_steps, st.horizon, planner.take_history_table());
    out.beliefs = planner.take_beliefs();
  }
  return out;
}

namespace {

struct BeliefNode {
  std::size_t s = 0;
  std::vector<double> belief;
  double mass = 0.0;
};

PolicyEvaluation evaluate_belief_lookup(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps) {
  const CandidateSet& cands = policy.candidates();
  const DiscreteMdp& st = cands.structure();
  std::unique_ptr<Planner> lazy;
  PolicyEvaluation out;
  auto act = [&](int t, std::size_t s, const std::vector<double>& b) -> std::size_t {
    const std::string key = belief_key(t, s, b);
    if (auto it = policy.belief_table().find(key); it != policy.belief_table().end()) return it->second;
    if (!lazy) lazy = std::make_unique<Planner>(cands, policy.total_steps(), policy.options());
    ++out.lazily_planned;
    return lazy->solve_merged(t, s, b).action;
  };

  std::vector<BeliefNode> frontier;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.init_dist[s] > 0.0) frontier.push_back({s, cands.weights(), mdp.init_dist[s]});
  }
  std::vector<double> likelihood(cands.size()), next_belief;
  for (int t = 0; t < total_steps; ++t) {
    std::vector<BeliefNode> next;
    std::unordered_map<std::string, std::size_t> index;
    auto push = [&](std::size_t s, const std::vector<double>& b, double mass) {
      const std::string key = belief_key(t + 1, s, b);
      auto [it, inserted] = index.emplace(key, next.size());
      if (inserted) {
        next.push_back({s, b, mass});
      } else {
        next[it->second].mass += mass;
      }
    };
    const int nt = t + 1;
    const bool has_future = nt < total_steps;
    const bool boundary = has_future && is_boundary(nt, st.horizon);
    for (const BeliefNode& node : frontier) {
      const std::size_t a = act(t, node.s, node.belief);
      out.value += node.mass * mdp.expected_cost(node.s, a);
      if (!has_future) continue;
      for (std::size_t c = 0; c < mdp.n_costs(); ++c) {
        const double pc = mdp.c(node.s, a, c);
        if (pc <= 0.0) continue;
        if (boundary) {
          for (std::size_t m = 0; m < cands.size(); ++m) likelihood[m] = cands.mdps()[m].c(node.s, a, c);
          double pr = posterior(node.belief, likelihood, next_belief);
          if (pr <= 0.0) {
            out.off_model_mass += node.mass * pc;
            next_belief = node.belief;
          }
          const std::vector<double>& carried = policy.options().reset_belief ? cands.weights() : next_belief;
          for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
            if (mdp.init_dist[s2] > 0.0) push(s2, carried, node.mass * pc * mdp.init_dist[s2]);
          }
          continue;
        }
        for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
          const double p = pc * mdp.p(node.s, a, s2);
          if (p <= 0.0) continue;
          for (std::size_t m = 0; m < cands.size(); ++m) likelihood[m] = cands.mdps()[m].joint(node.s, a, c, s2);
          if (posterior(node.belief, likelihood, next_belief) <= 0.0) {
            out.off_model_mass += node.mass * p;
            next_belief = node.belief;
          }
          push(s2, next_belief, node.mass * p);
        }
      }
    }
    frontier = std::move(next);
  }
  return out;
}

struct HistoryNode {
  std::vector<std::int32_t> history;
  std::size_t s = 0;
  double mass = 0.0;
};

PolicyEvaluation evaluate_tree(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps) {
  PolicyEvaluation out;
  std::vector<HistoryNode> frontier;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.init_dist[s] > 0.0) frontier.push_back({{static_cast<std::int32_t>(s)}, s, mdp.init_dist[s]});
  }
  for (int t = 0; t < total_steps; ++t) {
    std::vector<HistoryNode> next;
    const int nt = t + 1;
    const bool has_future = nt < total_steps;
    const bool boundary = has_future && is_boundary(nt, policy.horizon());
    for (const HistoryNode& node : frontier) {
      auto it = policy.history_table().find(history_key(node.history));
      require(it != policy.history_table().end(), ErrorCode::UndefinedHistory, "policy undefined on a history");
      const std::size_t a = it->second;
      require(a < mdp.n_actions, ErrorCode::InvalidArgument, "policy action out of range");
      out.value += node.mass * mdp.expected_cost(node.s, a);
      if (!has_future) continue;
      for (std::size_t c = 0; c < mdp.n_costs(); ++c) {
        const double pc = mdp.c(node.s, a, c);
        if (pc <= 0.0) continue;
        for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
          const double p = pc * (boundary ? mdp.init_dist[s2] : mdp.p(node.s, a, s2));
          if (p <= 0.0) continue;
          HistoryNode child{node.history, s2, node.mass * p};
          child.history.push_back(static_cast<std::int32_t>(a));
          child.history.push_back(static_cast<std::int32_t>(c));
          child.history.push_back(static_cast<std::int32_t>(s2));
          next.push_back(std::move(child));
        }
      }
    }
    frontier = std::move(next);
  }
  return out;
}

PolicyEvaluation evaluate_markov(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps) {
  PolicyEvaluation out;
  std::vector<double> dist = mdp.init_dist;
  for (int t = 0; t < total_steps; ++t) {
    const auto& row = policy.markov_actions()[static_cast<std::size_t>(t)];
    require(row.size() == mdp.n_states, ErrorCode::DimensionMismatch, "Markov policy has the wrong state count");
    std::vector<double> next(mdp.n_states, 0.0);
    const bool boundary = is_boundary(t + 1, policy.horizon());
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      if (dist[s] <= 0.0) continue;
      const std::size_t a = row[s];
      require(a < mdp.n_actions, ErrorCode::InvalidArgument, "policy action out of range");
      out.value += dist[s] * mdp.expected_cost(s, a);
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        next[s2] += dist[s] * (boundary ? mdp.init_dist[s2] : mdp.p(s, a, s2));
      }
    }
    dist = std::move(next);
  }
  return out;
}

}  // namespace

PolicyEvaluation evaluate_policy_detailed(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps) {
  require(total_steps >= 1, ErrorCode::InvalidArgument, "T must be positive");
  require(total_steps <= policy.total_steps(), ErrorCode::UndefinedHistory,
          "evaluation horizon exceeds the policy's horizon");
  mdp.validate();
  require(mdp.n_actions == policy.n_actions() && mdp.horizon == policy.horizon(), ErrorCode::DimensionMismatch,
          "MDP does not match the policy's action set or episode length");
  switch (policy.representation()) {
    case PolicyRepresentation::BeliefLookup:
      require(mdp.same_structure(policy.candidates().structure()), ErrorCode::DimensionMismatch,
              "MDP does not match the policy's candidates");
      return evaluate_belief_lookup(policy, mdp, total_steps);
    case PolicyRepresentation::Tree: return evaluate_tree(policy, mdp, total_steps);
    case PolicyRepresentation::Markov: return evaluate_markov(policy, mdp, total_steps);
  }
  fail(ErrorCode::InvalidArgument, "unknown policy representation");
}

double evaluate_policy(const HistoryPolicy& policy, const DiscreteMdp& mdp, int total_steps) {
  return evaluate_policy_detailed(policy, mdp, total_steps).value;
}

double evaluate_bayes_loss(const HistoryPolicy& policy, const CandidateSet& prior, int total_steps) {
  double total = 0.0;
  for (std::size_t m = 0; m < prior.size(); ++m) {
    if (prior.weights()[m] > 0.0) total += prior.weights()[m] * evaluate_policy(policy, prior.mdps()[m], total_steps);
  }
  return total;
}

double regret(const HistoryPolicy& policy, const CandidateSet& truth, int total_steps, double bayes_optimal_loss) {
  const double r = evaluate_bayes_loss(policy, truth, total_steps) - bayes_optimal_loss;
  if (r < 0.0 && r >= -1e-9) return 0.0;
  return r;
}

double regret(const HistoryPolicy& policy, const CandidateSet& truth, int total_steps) {
  return regret(policy, truth, total_steps, bayes_optimal_plan(truth, total_steps).value);
}

ValueIterationResult value_iteration(const DiscreteMdp& mdp, int total_steps) {
  require(total_steps >= 1, ErrorCode::InvalidArgument, "horizon must be positive");
  mdp.validate();
  const std::size_t ns = mdp.n_states;
  std::vector<std::vector<std::uint8_t>> actions(static_cast<std::size_t>(total_steps),
                                                 std::vector<std::uint8_t>(ns, 0));
  std::vector<double> v(ns, 0.0), q(mdp.n_actions);
  for (int t = total_steps - 1; t >= 0; --t) {
    const int nt = t + 1;
    const bool has_future = nt < total_steps;
    const bool boundary = has_future && is_boundary(nt, mdp.horizon);
    double reset_value = 0.0;
    for (std::size_t s = 0; s < ns; ++s) reset_value += mdp.init_dist[s] * v[s];
    std::vector<double> nv(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        double value = mdp.expected_cost(s, a);
        if (has_future) {
          if (boundary) {
            value += reset_value;
          } else {
            for (std::size_t s2 = 0; s2 < ns; ++s2) value += mdp.p(s, a, s2) * v[s2];
          }
        }
        q[a] = value;
      }
      actions[static_cast<std::size_t>(t)][s] = argmin_lowest(q, nv[s]);
    }
    v = std::move(nv);
  }
  double value = 0.0;
  for (std::size_t s = 0; s < ns; ++s) value += mdp.init_dist[s] * v[s];
  return {HistoryPolicy::markov(mdp.n_actions, mdp.horizon, std::move(actions)), value};
}

HistoryPolicy random_history_policy(const DiscreteMdp& structure, int total_steps, Rng& rng) {
  require(total_steps >= 1, ErrorCode::InvalidArgument, "T must be positive");
  HistoryPolicy::HistoryTable table;
  std::vector<std::vector<std::int32_t>> frontier;
  for (std::size_t s = 0; s < structure.n_states; ++s) {
    if (structure.init_dist[s] > 0.0) frontier.push_back({static_cast<std::int32_t>(s)});
  }
  for (int t = 0; t < total_steps; ++t) {
    std::vector<std::vector<std::int32_t>> next;
    const bool boundary = is_boundary(t + 1, structure.horizon);
    for (const auto& h : frontier) {
      const auto a = static_cast<std::uint8_t>(rng.below(structure.n_actions));
      table.emplace(history_key(h), a);
      if (t + 1 == total_steps) continue;
      for (std::size_t c = 0; c < structure.n_costs(); ++c) {
        for (std::size_t s2 = 0; s2 < structure.n_states; ++s2) {
          if (boundary && structure.init_dist[s2] <= 0.0) continue;
          auto child = h;
          child.push_back(static_cast<std::int32_t>(a));
          child.push_back(static_cast<std::int32_t>(c));
          child.push_back(static_cast<std::int32_t>(s2));
          next.push_back(std::move(child));
        }
      }
    }
    frontier = std::move(next);
  }
  return HistoryPolicy::tree(structure.n_actions, total_steps, structure.horizon, std::move(table));
}

SimulationGap simulation_gap_check(const HistoryPolicy& policy, const ThetaVector& theta1,
                                   const ThetaVector& theta2, const ParametricMapping& mapping, int total_steps) {
  const DiscreteMdp m1 = mapping.map(theta1);
  const DiscreteMdp m2 = mapping.map(theta2);
  SimulationGap out;
  out.lhs = std::abs(evaluate_policy(policy, m1, total_steps) - evaluate_policy(policy, m2, total_steps));
  const double t = static_cast<double>(total_steps);
  out.rhs = mapping.c_max() * mapping.lipschitz_cg() * l1_distance(theta1, theta2) * t * t;
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

}  // namespace metaprior
