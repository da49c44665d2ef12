#pragma once

#include <numbers>

#include "metaprior/planning.hpp"
#include "oracles/brute_force.hpp"

namespace support {

/// Three cells in a row, start in the middle, goal at either end.
inline metaprior::GridConfig mirror_grid(int episode_len) {
  metaprior::GridConfig g;
  g.nx = 3;
  g.ny = 1;
  g.radius = 1.0;
  g.goal_radius = 0.5;
  g.episode_len = episode_len;
  return g;
}

inline metaprior::CandidateSet mirror_candidates(int episode_len) {
  const auto g = mirror_grid(episode_len);
  return metaprior::CandidateSet(
      {metaprior::halfcircle_grid_map(metaprior::ThetaVector{0.0}, g),
       metaprior::halfcircle_grid_map(metaprior::ThetaVector{std::numbers::pi}, g)},
      {0.5, 0.5});
}

struct MicroInstance {
  std::vector<metaprior::DiscreteMdp> mdps;
  std::vector<double> weights;
  int total_steps = 1;
};

/// |S|, |A|, |C| <= 2, K <= 2, T <= 3.
inline MicroInstance random_micro_instance(metaprior::Rng& rng) {
  MicroInstance inst;
  const std::size_t ns = 1 + rng.below(2), na = 1 + rng.below(2), nc = 1 + rng.below(2);
  const std::size_t k = 1 + rng.below(2);
  inst.total_steps = 1 + static_cast<int>(rng.below(3));
  const int horizon = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(inst.total_steps)));
  std::vector<double> costs = nc == 1 ? std::vector<double>{0.5} : std::vector<double>{0.0, 1.0};
  std::vector<double> init(ns);
  double total = 0.0;
  for (double& v : init) {
    v = rng.exponential();
    total += v;
  }
  for (double& v : init) v /= total;
  for (std::size_t m = 0; m < k; ++m) inst.mdps.push_back(oracle::random_mdp(ns, na, costs, horizon, init, rng));
  const double w = k == 1 ? 1.0 : 0.1 + 0.8 * rng.uniform();
  inst.weights = k == 1 ? std::vector<double>{1.0} : std::vector<double>{w, 1.0 - w};
  return inst;
}

}  // namespace support
