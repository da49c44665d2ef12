#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "metaprior/rng.hpp"

namespace metaprior {

/// A point in the parametric task space. Coordinates are always finite.
class ThetaVector {
 public:
  ThetaVector() = default;
  explicit ThetaVector(std::vector<double> coords);
  ThetaVector(std::initializer_list<double> coords);

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& values() const { return coords_; }

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;

 private:
  std::vector<double> coords_;
};

double l1_distance(const ThetaVector& a, const ThetaVector& b);

/// Axis-aligned box support with its volume and maximal L1 diameter.
class TaskSupport {
 public:
  static TaskSupport box(std::vector<double> lower, std::vector<double> upper);

  std::size_t dim() const { return lower_.size(); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  double volume() const { return volume_; }
  double delta_max() const { return delta_max_; }
  bool contains(std::span<const double> x) const;

 private:
  TaskSupport() = default;
  std::vector<double> lower_;
  std::vector<double> upper_;
  double volume_ = 0.0;
  double delta_max_ = 0.0;
};

/// Finite MDP tuple (S, A, cost set, P_init, C, P, H). Tensors are row-major:
/// transition[s][a][s'], cost_dist[s][a][c].
struct DiscreteMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> cost_values;
  std::vector<double> transition;
  std::vector<double> cost_dist;
  std::vector<double> init_dist;
  int horizon = 1;
  double c_max = 1.0;

  std::size_t n_costs() const { return cost_values.size(); }

  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return transition[(s * n_actions + a) * n_states + next];
  }
  double c(std::size_t s, std::size_t a, std::size_t cost_index) const {
    return cost_dist[(s * n_actions + a) * n_costs() + cost_index];
  }
  /// P(c, s' | s, a) = P(s' | s, a) C(c | s, a).
  double joint(std::size_t s, std::size_t a, std::size_t cost_index, std::size_t next) const {
    return p(s, a, next) * c(s, a, cost_index);
  }
  double expected_cost(std::size_t s, std::size_t a) const;

  /// Throws InvalidArgument when any stochasticity or cost invariant fails.
  void validate() const;

  /// True when S, A, the cost set, H and P_init agree.
  bool same_structure(const DiscreteMdp& other) const;

  friend bool operator==(const DiscreteMdp&, const DiscreteMdp&) = default;
};

/// L1 distance between the joint (c, s') distributions of two MDPs at (s, a).
double joint_l1(const DiscreteMdp& a, const DiscreteMdp& b, std::size_t s, std::size_t action);

struct TabularDims {
  std::size_t n_states = 2;
  std::size_t n_actions = 2;
  std::vector<double> cost_values{0.0, 1.0};
  int horizon = 1;
  std::vector<double> init_dist;  // empty means uniform
  double c_max = 1.0;

  std::size_t theta_dim() const {
    return n_states * n_states * n_actions + n_states * n_actions * cost_values.size();
  }
};

/// θ layout for the tabular mapping: the transition block θ_P[s][a][s']
/// followed by the cost block θ_C[s][a][c].
DiscreteMdp tabular_map(const ThetaVector& theta, const TabularDims& dims);
ThetaVector tabular_theta(const DiscreteMdp& mdp);
/// A uniformly random simplex-valid tabular parameter.
ThetaVector random_tabular_theta(const TabularDims& dims, Rng& rng);

enum class HalfCircleParam { Angle, GoalXY };

/// Discretized HalfCircle navigation. Cell (i, j) has center
/// ((i - (nx-1)/2) * cell, j * cell), so row 0 runs along the diameter of the
/// half circle and the grid spans [-R-r, R+r] horizontally for the default
/// 9x5 layout. Actions: 0 right, 1 up, 2 left, 3 down, 4 stay; moves that
/// leave the grid are clipped. The agent starts at the cell nearest the
/// origin.
struct GridConfig {
  int nx = 9;
  int ny = 5;
  double cell = 1.0;
  double radius = 3.0;       // R
  double goal_radius = 1.1;  // r
  int episode_len = 10;      // H
  double c_goal = 0.0;
  double c_far = 1.0;
  HalfCircleParam param = HalfCircleParam::Angle;
  int lipschitz_bins = 16;

  std::size_t n_cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
};

struct GoalCells {
  std::vector<std::size_t> cells;
  bool promoted = false;  // goal disk covered no cell center; nearest cell used
};

GoalCells halfcircle_goal_cells(const ThetaVector& theta, const GridConfig& grid);
DiscreteMdp halfcircle_grid_map(const ThetaVector& theta, const GridConfig& grid);

enum class MappingKind { Tabular, HalfCircleGrid, Custom };

/// The mapping g from parameters to MDPs together with its support and its
/// Lipschitz constant C_g with respect to the joint (c, s') distribution.
class ParametricMapping {
 public:
  using MapFn = std::function<DiscreteMdp(const ThetaVector&)>;

  static ParametricMapping tabular(TabularDims dims);
  static ParametricMapping halfcircle_grid(GridConfig grid);
  static ParametricMapping custom(TaskSupport support, double lipschitz_cg, MapFn fn);

  MappingKind kind() const { return kind_; }
  std::size_t dim() const { return support_.dim(); }
  const TaskSupport& support() const { return support_; }
  double lipschitz_cg() const { return lipschitz_cg_; }
  double c_max() const { return c_max_; }
  int horizon() const { return horizon_; }

  DiscreteMdp map(const ThetaVector& theta) const;

  const TabularDims& tabular_dims() const;
  const GridConfig& grid() const;

  /// HalfCircle only: converts a goal angle into this mapping's parameters.
  ThetaVector embed_angle(double angle) const;
  /// HalfCircle only: the parameter points used to compute C_g.
  std::vector<ThetaVector> lipschitz_lattice() const;

 private:
  ParametricMapping() = default;

  MappingKind kind_ = MappingKind::Custom;
  TaskSupport support_ = TaskSupport::box({0.0}, {1.0});
  double lipschitz_cg_ = 0.0;
  double c_max_ = 1.0;
  int horizon_ = 1;
  std::shared_ptr<const TabularDims> tabular_;
  std::shared_ptr<const GridConfig> grid_;
  MapFn custom_;
};

enum class PriorKind { UniformBox, UniformHalfCircleParam, Categorical, PiecewiseLinearDensity };

/// Ground-truth task prior.
class TruePrior {
 public:
  static TruePrior uniform_box(TaskSupport support, double holder_const = 1.0);
  static TruePrior uniform_halfcircle(double holder_const = 1.0);
  static TruePrior categorical(std::vector<ThetaVector> atoms, std::vector<double> weights);
  /// One-dimensional density linear between knots and zero outside them.
  static TruePrior piecewise_linear(std::vector<double> xs, std::vector<double> ys);

  PriorKind kind() const { return kind_; }
  bool is_continuous() const { return kind_ != PriorKind::Categorical; }
  std::size_t dim() const;
  double holder_alpha() const { return holder_alpha_; }
  double holder_const() const { return holder_const_; }
  /// Continuous kinds only.
  const TaskSupport& support() const;
  double max_density() const;

  const std::vector<ThetaVector>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& knots_x() const { return xs_; }
  const std::vector<double>& knots_y() const { return ys_; }

 private:
  TruePrior() = default;

  PriorKind kind_ = PriorKind::UniformBox;
  std::vector<TaskSupport> support_;  // zero or one element
  double holder_alpha_ = 1.0;
  double holder_const_ = 1.0;
  std::vector<ThetaVector> atoms_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::vector<double> xs_;
  std::vector<double> ys_;

  friend std::vector<ThetaVector> sample_prior(const TruePrior&, std::size_t, Rng&);
  friend std::vector<std::size_t> sample_prior_indices(const TruePrior&, std::size_t, Rng&);
};

std::vector<ThetaVector> sample_prior(const TruePrior& prior, std::size_t n, Rng& rng);
/// Categorical priors: the sampled atom indices.
std::vector<std::size_t> sample_prior_indices(const TruePrior& prior, std::size_t n, Rng& rng);
double prior_density(const TruePrior& prior, const ThetaVector& theta);

}  // namespace metaprior
