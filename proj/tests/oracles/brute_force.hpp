#pragma once

// Exhaustive search over deterministic history-dependent policies.
//
// Policies are enumerated explicitly as maps from histories to actions,
// restricted to histories that are reachable with positive mixture
// probability under the policy's own earlier choices. Each policy is then
// evaluated by forward propagation of the joint weights w_m P_m(h); no
// posterior or belief computation is involved. Actions at the final step
// only affect that step's cost, so they are chosen by a per-history minimum
// instead of being enumerated; this gives the same minimum as enumerating
// them.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "metaprior/task_space.hpp"

namespace oracle {

using History = std::vector<int>;
using Policy = std::map<History, int>;

class BruteForce {
 public:
  BruteForce(std::vector<metaprior::DiscreteMdp> mdps, std::vector<double> weights, int total_steps)
      : mdps_(std::move(mdps)), weights_(std::move(weights)), total_steps_(total_steps) {}

  /// Minimum Bayes loss over all enumerated policies.
  double minimum() {
    std::vector<Policy> all{Policy{}};
    for (const Root& root : roots()) all = product(all, fragments(root.history, root.s, 0, root.omega));
    enumerated_ = all.size();
    double best = std::numeric_limits<double>::infinity();
    for (const Policy& p : all) best = std::min(best, evaluate(p));
    return best;
  }

  std::size_t enumerated() const { return enumerated_; }

  /// Bayes loss of a policy given as a function of the history. The final
  /// step also uses the function (no minimum).
  double evaluate_fn(const std::function<int(const History&)>& policy) const {
    double total = 0.0;
    for (const Root& root : roots()) total += go_fn(root.history, root.s, 0, root.omega, policy);
    return total;
  }

 private:
  struct Root {
    History history;
    std::size_t s;
    std::vector<double> omega;
  };
  struct Child {
    History history;
    std::size_t s;
    std::vector<double> omega;
  };

  const metaprior::DiscreteMdp& st() const { return mdps_.front(); }

  std::vector<Root> roots() const {
    std::vector<Root> out;
    for (std::size_t s = 0; s < st().n_states; ++s) {
      if (st().init_dist[s] <= 0.0) continue;
      std::vector<double> omega(mdps_.size());
      for (std::size_t m = 0; m < mdps_.size(); ++m) omega[m] = weights_[m] * st().init_dist[s];
      out.push_back({{static_cast<int>(s)}, s, omega});
    }
    return out;
  }

  std::vector<Child> children(const History& h, std::size_t s, int t, std::size_t a,
                              const std::vector<double>& omega) const {
    std::vector<Child> out;
    const bool boundary = (t + 1) % st().horizon == 0;
    for (std::size_t c = 0; c < st().n_costs(); ++c) {
      for (std::size_t s2 = 0; s2 < st().n_states; ++s2) {
        std::vector<double> next(mdps_.size());
        double total = 0.0;
        for (std::size_t m = 0; m < mdps_.size(); ++m) {
          const double move = boundary ? st().init_dist[s2] : mdps_[m].p(s, a, s2);
          next[m] = omega[m] * mdps_[m].c(s, a, c) * move;
          total += next[m];
        }
        if (total <= 0.0) continue;
        History child = h;
        child.push_back(static_cast<int>(a));
        child.push_back(static_cast<int>(c));
        child.push_back(static_cast<int>(s2));
        out.push_back({child, s2, next});
      }
    }
    return out;
  }

  double step_cost(std::size_t s, std::size_t a, const std::vector<double>& omega) const {
    double cost = 0.0;
    for (std::size_t m = 0; m < mdps_.size(); ++m) {
      for (std::size_t c = 0; c < st().n_costs(); ++c) {
        cost += omega[m] * mdps_[m].c(s, a, c) * st().cost_values[c];
      }
    }
    return cost;
  }

  static std::vector<Policy> product(const std::vector<Policy>& a, const std::vector<Policy>& b) {
    std::vector<Policy> out;
    out.reserve(a.size() * b.size());
    for (const Policy& x : a) {
      for (const Policy& y : b) {
        Policy z = x;
        z.insert(y.begin(), y.end());
        out.push_back(std::move(z));
      }
    }
    return out;
  }

  std::vector<Policy> fragments(const History& h, std::size_t s, int t, const std::vector<double>& omega) const {
    if (t == total_steps_ - 1) return {Policy{}};
    std::vector<Policy> out;
    for (std::size_t a = 0; a < st().n_actions; ++a) {
      std::vector<Policy> acc{Policy{{h, static_cast<int>(a)}}};
      for (const Child& ch : children(h, s, t, a, omega)) acc = product(acc, fragments(ch.history, ch.s, t + 1, ch.omega));
      out.insert(out.end(), acc.begin(), acc.end());
    }
    return out;
  }

  double go(const Policy& p, const History& h, std::size_t s, int t, const std::vector<double>& omega) const {
    if (t == total_steps_ - 1) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < st().n_actions; ++a) best = std::min(best, step_cost(s, a, omega));
      return best;
    }
    const std::size_t a = static_cast<std::size_t>(p.at(h));
    double total = step_cost(s, a, omega);
    for (const Child& ch : children(h, s, t, a, omega)) total += go(p, ch.history, ch.s, t + 1, ch.omega);
    return total;
  }

  double evaluate(const Policy& p) const {
    double total = 0.0;
    for (const Root& root : roots()) total += go(p, root.history, root.s, 0, root.omega);
    return total;
  }

  double go_fn(const History& h, std::size_t s, int t, const std::vector<double>& omega,
               const std::function<int(const History&)>& policy) const {
    const std::size_t a = static_cast<std::size_t>(policy(h));
    double total = step_cost(s, a, omega);
    if (t + 1 == total_steps_) return total;
    for (const Child& ch : children(h, s, t, a, omega)) total += go_fn(ch.history, ch.s, t + 1, ch.omega, policy);
    return total;
  }

  std::vector<metaprior::DiscreteMdp> mdps_;
  std::vector<double> weights_;
  int total_steps_;
  std::size_t enumerated_ = 0;
};

/// Random MDP with |S|, |A|, |C| given; some entries are zeroed so that
/// observations can rule candidates out.
inline metaprior::DiscreteMdp random_mdp(std::size_t ns, std::size_t na, std::vector<double> cost_values,
                                         int horizon, const std::vector<double>& init, metaprior::Rng& rng) {
  metaprior::DiscreteMdp mdp;
  mdp.n_states = ns;
  mdp.n_actions = na;
  mdp.cost_values = std::move(cost_values);
  mdp.horizon = horizon;
  mdp.c_max = 1.0;
  mdp.init_dist = init;
  auto row = [&](std::size_t width) {
    std::vector<double> r(width);
    double total = 0.0;
    for (double& v : r) {
      v = rng.uniform() < 0.25 ? 0.0 : rng.exponential();
      total += v;
    }
    if (total == 0.0) {
      r[rng.below(width)] = 1.0;
      total = 1.0;
    }
    for (double& v : r) v /= total;
    return r;
  };
  for (std::size_t i = 0; i < ns * na; ++i) {
    const auto r = row(ns);
    mdp.transition.insert(mdp.transition.end(), r.begin(), r.end());
  }
  for (std::size_t i = 0; i < ns * na; ++i) {
    const auto r = row(mdp.cost_values.size());
    mdp.cost_dist.insert(mdp.cost_dist.end(), r.begin(), r.end());
  }
  return mdp;
}

}  // namespace oracle
