#include "metaprior/task_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "metaprior/error.hpp"

namespace metaprior {

namespace {

constexpr double kSimplexTolerance = 1e-9;
constexpr double kStochasticTolerance = 1e-12;

void check_stochastic(std::span<const double> row, const char* what) {
  double sum = 0.0;
  for (double v : row) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument,
            std::string(what) + " has a negative or non-finite entry");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= kStochasticTolerance, ErrorCode::InvalidArgument,
          std::string(what) + " does not sum to 1");
}

// Validates a slice against the simplex and renormalizes it exactly.
void project_slice(std::span<const double> in, std::span<double> out, const char* what) {
  double sum = 0.0;
  for (double v : in) {
    if (v < -kSimplexTolerance) {
      fail(ErrorCode::SimplexViolation, std::string(what) + " slice has a negative entry");
    }
    sum += std::max(v, 0.0);
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    fail(ErrorCode::SimplexViolation, std::string(what) + " slice does not sum to 1");
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::max(in[i], 0.0) / sum;
}

std::pair<double, double> cell_center(const GridConfig& grid, std::size_t cell) {
  const auto i = static_cast<int>(cell % static_cast<std::size_t>(grid.nx));
  const auto j = static_cast<int>(cell / static_cast<std::size_t>(grid.nx));
  return {(i - 0.5 * (grid.nx - 1)) * grid.cell, j * grid.cell};
}

void check_grid(const GridConfig& grid) {
  require(grid.nx >= 1 && grid.ny >= 1, ErrorCode::InvalidArgument, "grid needs at least one cell");
  require(grid.cell > 0.0 && grid.radius > 0.0 && grid.goal_radius > 0.0,
          ErrorCode::InvalidArgument, "grid cell size and radii must be positive");
  require(grid.episode_len >= 1, ErrorCode::InvalidArgument, "episode length must be positive");
  require(grid.c_goal >= 0.0 && grid.c_far >= 0.0, ErrorCode::InvalidArgument, "costs must be nonnegative");
  require(grid.lipschitz_bins >= 2, ErrorCode::InvalidArgument, "C_g lattice needs at least two bins");
}

TaskSupport halfcircle_support(const GridConfig& grid) {
  if (grid.param == HalfCircleParam::Angle) return TaskSupport::box({0.0}, {std::numbers::pi});
  const double reach = grid.radius + grid.goal_radius;
  return TaskSupport::box({-reach, -reach}, {reach, reach});
}

}  // namespace

ThetaVector::ThetaVector(std::vector<double> coords) : coords_(std::move(coords)) {
  for (double v : coords_) {
    require(std::isfinite(v), ErrorCode::InvalidArgument, "theta coordinates must be finite");
  }
}

ThetaVector::ThetaVector(std::initializer_list<double> coords)
    : ThetaVector(std::vector<double>(coords)) {}

double l1_distance(const ThetaVector& a, const ThetaVector& b) {
  require(a.dim() == b.dim(), ErrorCode::DimensionMismatch, "theta dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

TaskSupport TaskSupport::box(std::vector<double> lower, std::vector<double> upper) {
  require(!lower.empty() && lower.size() == upper.size(), ErrorCode::DimensionMismatch,
          "support bounds must be nonempty and of equal length");
  TaskSupport out;
  out.volume_ = 1.0;
  out.delta_max_ = 0.0;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    require(std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] < upper[j],
            ErrorCode::InvalidArgument, "support needs lower < upper in every coordinate");
    out.volume_ *= upper[j] - lower[j];
    out.delta_max_ += upper[j] - lower[j];
  }
  out.lower_ = std::move(lower);
  out.upper_ = std::move(upper);
  return out;
}

bool TaskSupport::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] < lower_[j] || x[j] > upper_[j]) return false;
  }
  return true;
}

double DiscreteMdp::expected_cost(std::size_t s, std::size_t a) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < n_costs(); ++k) sum += c(s, a, k) * cost_values[k];
  return sum;
}

void DiscreteMdp::validate() const {
  require(n_states > 0 && n_actions > 0 && !cost_values.empty(), ErrorCode::InvalidArgument,
          "MDP needs at least one state, action and cost value");
  require(horizon >= 1, ErrorCode::InvalidArgument, "MDP horizon must be positive");
  require(transition.size() == n_states * n_actions * n_states, ErrorCode::DimensionMismatch,
          "transition tensor has the wrong size");
  require(cost_dist.size() == n_states * n_actions * n_costs(), ErrorCode::DimensionMismatch,
          "cost tensor has the wrong size");
  require(init_dist.size() == n_states, ErrorCode::DimensionMismatch, "init_dist has the wrong size");
  require(std::is_sorted(cost_values.begin(), cost_values.end()), ErrorCode::InvalidArgument,
          "cost values must be sorted");
  for (double v : cost_values) {
    require(std::isfinite(v) && v >= 0.0 && v <= c_max, ErrorCode::InvalidArgument,
            "cost values must lie in [0, C_max]");
  }
  const std::span<const double> p_all(transition);
  const std::span<const double> c_all(cost_dist);
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    check_stochastic(p_all.subspan(row * n_states, n_states), "transition row");
    check_stochastic(c_all.subspan(row * n_costs(), n_costs()), "cost row");
  }
  check_stochastic(init_dist, "init_dist");
}

bool DiscreteMdp::same_structure(const DiscreteMdp& other) const {
  return n_states == other.n_states && n_actions == other.n_actions &&
         cost_values == other.cost_values && horizon == other.horizon &&
         init_dist == other.init_dist;
}

double joint_l1(const DiscreteMdp& a, const DiscreteMdp& b, std::size_t s, std::size_t action) {
  require(a.same_structure(b), ErrorCode::DimensionMismatch, "MDPs differ in structure");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.n_costs(); ++k) {
    for (std::size_t next = 0; next < a.n_states; ++next) {
      sum += std::abs(a.joint(s, action, k, next) - b.joint(s, action, k, next));
    }
  }
  return sum;
}

DiscreteMdp tabular_map(const ThetaVector& theta, const TabularDims& dims) {
  require(dims.n_states > 0 && dims.n_actions > 0 && !dims.cost_values.empty(),
          ErrorCode::InvalidArgument, "tabular dims must be positive");
  require(theta.dim() == dims.theta_dim(), ErrorCode::DimensionMismatch,
          "theta length must be |S|^2|A| + |S||A||C|");
  DiscreteMdp mdp;
  mdp.n_states = dims.n_states;
  mdp.n_actions = dims.n_actions;
  mdp.cost_values = dims.cost_values;
  mdp.horizon = dims.horizon;
  mdp.c_max = dims.c_max;
  mdp.init_dist = dims.init_dist.empty()
                      ? std::vector<double>(dims.n_states, 1.0 / static_cast<double>(dims.n_states))
                      : dims.init_dist;
  const std::size_t rows = dims.n_states * dims.n_actions;
  const std::size_t nc = dims.cost_values.size();
  mdp.transition.resize(rows * dims.n_states);
  mdp.cost_dist.resize(rows * nc);
  const auto all = theta.coords();
  const std::size_t cost_offset = rows * dims.n_states;
  for (std::size_t row = 0; row < rows; ++row) {
    project_slice(all.subspan(row * dims.n_states, dims.n_states),
                  std::span<double>(mdp.transition).subspan(row * dims.n_states, dims.n_states),
                  "transition");
    project_slice(all.subspan(cost_offset + row * nc, nc),
                  std::span<double>(mdp.cost_dist).subspan(row * nc, nc), "cost");
  }
  mdp.validate();
  return mdp;
}

ThetaVector tabular_theta(const DiscreteMdp& mdp) {
  std::vector<double> coords = mdp.transition;
  coords.insert(coords.end(), mdp.cost_dist.begin(), mdp.cost_dist.end());
  return ThetaVector(std::move(coords));
}

ThetaVector random_tabular_theta(const TabularDims& dims, Rng& rng) {
  const std::size_t rows = dims.n_states * dims.n_actions;
  std::vector<double> coords;
  coords.reserve(dims.theta_dim());
  auto dirichlet_row = [&](std::size_t width) {
    std::vector<double> row(width);
    double sum = 0.0;
    for (double& v : row) {
      v = rng.exponential();
      sum += v;
    }
    for (double& v : row) v /= sum;
    coords.insert(coords.end(), row.begin(), row.end());
  };
  for (std::size_t row = 0; row < rows; ++row) dirichlet_row(dims.n_states);
  for (std::size_t row = 0; row < rows; ++row) dirichlet_row(dims.cost_values.size());
  return ThetaVector(std::move(coords));
}

GoalCells halfcircle_goal_cells(const ThetaVector& theta, const GridConfig& grid) {
  check_grid(grid);
  const TaskSupport support = halfcircle_support(grid);
  require(theta.dim() == support.dim(), ErrorCode::DimensionMismatch,
          "HalfCircle parameter has the wrong dimension");
  require(support.contains(theta.coords()), ErrorCode::OutOfSupport,
          "HalfCircle parameter lies outside its support");
  double gx, gy;
  if (grid.param == HalfCircleParam::Angle) {
    gx = grid.radius * std::cos(theta[0]);
    gy = grid.radius * std::sin(theta[0]);
  } else {
    gx = theta[0];
    gy = theta[1];
  }
  GoalCells out;
  std::size_t nearest = 0;
  double nearest_dist = INFINITY;
  for (std::size_t cell = 0; cell < grid.n_cells(); ++cell) {
    const auto [cx, cy] = cell_center(grid, cell);
    const double dist = std::hypot(cx - gx, cy - gy);
    if (dist <= grid.goal_radius + 1e-12) out.cells.push_back(cell);
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest = cell;
    }
  }
  if (out.cells.empty()) {
    out.cells.push_back(nearest);
    out.promoted = true;
  }
  return out;
}

DiscreteMdp halfcircle_grid_map(const ThetaVector& theta, const GridConfig& grid) {
  const GoalCells goal = halfcircle_goal_cells(theta, grid);
  DiscreteMdp mdp;
  mdp.n_states = grid.n_cells();
  mdp.n_actions = 5;
  mdp.horizon = grid.episode_len;
  mdp.c_max = std::max(grid.c_goal, grid.c_far);
  mdp.cost_values = {std::min(grid.c_goal, grid.c_far), std::max(grid.c_goal, grid.c_far)};
  if (grid.c_goal == grid.c_far) mdp.cost_values.resize(1);
  const std::size_t nc = mdp.cost_values.size();
  const std::size_t goal_index = grid.c_goal <= grid.c_far ? 0 : nc - 1;
  const std::size_t far_index = grid.c_goal <= grid.c_far ? nc - 1 : 0;

  std::vector<bool> is_goal(mdp.n_states, false);
  for (std::size_t cell : goal.cells) is_goal[cell] = true;

  mdp.transition.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
  mdp.cost_dist.assign(mdp.n_states * mdp.n_actions * nc, 0.0);
  constexpr int dx[5] = {1, 0, -1, 0, 0};
  constexpr int dy[5] = {0, 1, 0, -1, 0};
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const int i = static_cast<int>(s % static_cast<std::size_t>(grid.nx));
    const int j = static_cast<int>(s / static_cast<std::size_t>(grid.nx));
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const int ni = std::clamp(i + dx[a], 0, grid.nx - 1);
      const int nj = std::clamp(j + dy[a], 0, grid.ny - 1);
      const auto next = static_cast<std::size_t>(nj * grid.nx + ni);
      const std::size_t row = s * mdp.n_actions + a;
      mdp.transition[row * mdp.n_states + next] = 1.0;
      mdp.cost_dist[row * nc + (is_goal[s] ? goal_index : far_index)] = 1.0;
    }
  }
  mdp.init_dist.assign(mdp.n_states, 0.0);
  const int start_i = (grid.nx - 1) / 2;
  mdp.init_dist[static_cast<std::size_t>(start_i)] = 1.0;
  return mdp;
}

ParametricMapping ParametricMapping::tabular(TabularDims dims) {
  ParametricMapping m;
  m.kind_ = MappingKind::Tabular;
  const std::size_t d = dims.theta_dim();
  m.support_ = TaskSupport::box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
  m.lipschitz_cg_ = 1.0;
  m.c_max_ = dims.c_max;
  m.horizon_ = dims.horizon;
  m.tabular_ = std::make_shared<const TabularDims>(std::move(dims));
  return m;
}

ParametricMapping ParametricMapping::halfcircle_grid(GridConfig grid) {
  check_grid(grid);
  ParametricMapping m;
  m.kind_ = MappingKind::HalfCircleGrid;
  m.support_ = halfcircle_support(grid);
  m.c_max_ = std::max(grid.c_goal, grid.c_far);
  m.horizon_ = grid.episode_len;
  m.grid_ = std::make_shared<const GridConfig>(std::move(grid));
  // Costs are point masses, so the joint L1 jump between neighbouring goal
  // bins is either 0 or 2 per (s, a); the constant is the largest jump over
  // the lattice spacing.
  const auto lattice = m.lipschitz_lattice();
  double cg = 0.0;
  for (std::size_t k = 0; k + 1 < lattice.size(); ++k) {
    const DiscreteMdp a = halfcircle_grid_map(lattice[k], *m.grid_);
    const DiscreteMdp b = halfcircle_grid_map(lattice[k + 1], *m.grid_);
    const double dist = l1_distance(lattice[k], lattice[k + 1]);
    for (std::size_t s = 0; s < a.n_states; ++s) {
      for (std::size_t act = 0; act < a.n_actions; ++act) {
        cg = std::max(cg, joint_l1(a, b, s, act) / dist);
      }
    }
  }
  m.lipschitz_cg_ = cg;
  return m;
}

ParametricMapping ParametricMapping::custom(TaskSupport support, double lipschitz_cg, MapFn fn) {
  require(lipschitz_cg >= 0.0, ErrorCode::InvalidArgument, "C_g must be nonnegative");
  require(static_cast<bool>(fn), ErrorCode::InvalidArgument, "custom mapping needs a function");
  ParametricMapping m;
  m.kind_ = MappingKind::Custom;
  m.support_ = std::move(support);
  m.lipschitz_cg_ = lipschitz_cg;
  m.custom_ = std::move(fn);
  std::vector<double> probe(m.support_.dim());
  for (std::size_t j = 0; j < probe.size(); ++j) {
    probe[j] = 0.5 * (m.support_.lower()[j] + m.support_.upper()[j]);
  }
  const DiscreteMdp mdp = m.custom_(ThetaVector(probe));
  m.c_max_ = mdp.c_max;
  m.horizon_ = mdp.horizon;
  return m;
}

DiscreteMdp ParametricMapping::map(const ThetaVector& theta) const {
  switch (kind_) {
    case MappingKind::Tabular: return tabular_map(theta, *tabular_);
    case MappingKind::HalfCircleGrid: return halfcircle_grid_map(theta, *grid_);
    case MappingKind::Custom: {
      require(theta.dim() == dim(), ErrorCode::DimensionMismatch, "theta has the wrong dimension");
      DiscreteMdp mdp = custom_(theta);
      mdp.validate();
      return mdp;
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown mapping kind");
}

const TabularDims& ParametricMapping::tabular_dims() const {
  require(kind_ == MappingKind::Tabular, ErrorCode::InvalidArgument, "mapping is not tabular");
  return *tabular_;
}

const GridConfig& ParametricMapping::grid() const {
  require(kind_ == MappingKind::HalfCircleGrid, ErrorCode::InvalidArgument,
          "mapping is not a HalfCircle grid");
  return *grid_;
}

ThetaVector ParametricMapping::embed_angle(double angle) const {
  const GridConfig& g = grid();
  if (g.param == HalfCircleParam::Angle) return ThetaVector{angle};
  return ThetaVector{g.radius * std::cos(angle), g.radius * std::sin(angle)};
}

std::vector<ThetaVector> ParametricMapping::lipschitz_lattice() const {
  const GridConfig& g = grid();
  std::vector<ThetaVector> out;
  out.reserve(static_cast<std::size_t>(g.lipschitz_bins));
  for (int k = 0; k < g.lipschitz_bins; ++k) {
    out.push_back(embed_angle((k + 0.5) * std::numbers::pi / g.lipschitz_bins));
  }
  return out;
}

TruePrior TruePrior::uniform_box(TaskSupport support, double holder_const) {
  require(holder_const > 0.0, ErrorCode::InvalidArgument, "Hölder constant must be positive");
  TruePrior p;
  p.kind_ = PriorKind::UniformBox;
  p.support_.push_back(std::move(support));
  p.holder_const_ = holder_const;
  return p;
}

TruePrior TruePrior::uniform_halfcircle(double holder_const) {
  TruePrior p = uniform_box(TaskSupport::box({0.0}, {std::numbers::pi}), holder_const);
  p.kind_ = PriorKind::UniformHalfCircleParam;
  return p;
}

TruePrior TruePrior::categorical(std::vector<ThetaVector> atoms, std::vector<double> weights) {
  require(!atoms.empty() && atoms.size() == weights.size(), ErrorCode::InvalidArgument,
          "categorical prior needs one weight per atom");
  double sum = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::InvalidArgument, "weights must be nonnegative");
    sum += w;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "weights must sum to 1");
  for (const auto& atom : atoms) {
    require(atom.dim() == atoms.front().dim(), ErrorCode::DimensionMismatch,
            "atoms must share a dimension");
  }
  TruePrior p;
  p.kind_ = PriorKind::Categorical;
  p.atoms_ = std::move(atoms);
  p.weights_ = std::move(weights);
  for (double& w : p.weights_) w /= sum;
  p.cumulative_.resize(p.weights_.size());
  std::partial_sum(p.weights_.begin(), p.weights_.end(), p.cumulative_.begin());
  return p;
}

TruePrior TruePrior::piecewise_linear(std::vector<double> xs, std::vector<double> ys) {
  require(xs.size() >= 2 && xs.size() == ys.size(), ErrorCode::InvalidArgument,
          "piecewise-linear density needs at least two knots");
  double area = 0.0;
  double slope = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(std::isfinite(ys[i]) && ys[i] >= 0.0, ErrorCode::InvalidArgument,
            "density knots must be nonnegative");
    if (i == 0) continue;
    require(xs[i] > xs[i - 1], ErrorCode::InvalidArgument, "knots must be strictly increasing");
    area += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    slope = std::max(slope, std::abs(ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]));
  }
  require(std::abs(area - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
          "piecewise-linear density must integrate to 1");
  TruePrior p;
  p.kind_ = PriorKind::PiecewiseLinearDensity;
  p.support_.push_back(TaskSupport::box({xs.front()}, {xs.back()}));
  p.holder_alpha_ = 1.0;
  p.holder_const_ = slope > 0.0 ? slope : 1.0;
  p.cumulative_.assign(1, 0.0);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    p.cumulative_.push_back(p.cumulative_.back() + 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]));
  }
  p.xs_ = std::move(xs);
  p.ys_ = std::move(ys);
  return p;
}

std::size_t TruePrior::dim() const {
  if (kind_ == PriorKind::Categorical) return atoms_.front().dim();
  return support_.front().dim();
}

const TaskSupport& TruePrior::support() const {
  require(is_continuous(), ErrorCode::NotADensity, "categorical prior has no continuous support");
  return support_.front();
}

double TruePrior::max_density() const {
  switch (kind_) {
    case PriorKind::UniformBox:
    case PriorKind::UniformHalfCircleParam: return 1.0 / support_.front().volume();
    case PriorKind::PiecewiseLinearDensity: return *std::max_element(ys_.begin(), ys_.end());
    case PriorKind::Categorical: break;
  }
  fail(ErrorCode::NotADensity, "categorical prior has no density");
}

std::vector<std::size_t> sample_prior_indices(const TruePrior& prior, std::size_t n, Rng& rng) {
  require(prior.kind_ == PriorKind::Categorical, ErrorCode::InvalidArgument,
          "indices are only defined for categorical priors");
  require(n >= 1, ErrorCode::InvalidArgument, "need at least one sample");
  std::vector<std::size_t> out(n);
  for (auto& idx : out) {
    const double u = rng.uniform_open() * prior.cumulative_.back();
    idx = static_cast<std::size_t>(
        std::upper_bound(prior.cumulative_.begin(), prior.cumulative_.end(), u) -
        prior.cumulative_.begin());
    idx = std::min(idx, prior.weights_.size() - 1);
    // Never land on a zero-weight atom through rounding at a cumulative tie.
    while (prior.weights_[idx] == 0.0 && idx > 0) --idx;
  }
  return out;
}

std::vector<ThetaVector> sample_prior(const TruePrior& prior, std::size_t n, Rng& rng) {
  require(n >= 1, ErrorCode::InvalidArgument, "need at least one sample");
  std::vector<ThetaVector> out;
  out.reserve(n);
  switch (prior.kind_) {
    case PriorKind::UniformBox:
    case PriorKind::UniformHalfCircleParam: {
      const TaskSupport& box = prior.support_.front();
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(box.dim());
        for (std::size_t j = 0; j < x.size(); ++j) {
          x[j] = box.lower()[j] + rng.uniform() * (box.upper()[j] - box.lower()[j]);
        }
        out.emplace_back(std::move(x));
      }
      break;
    }
    case PriorKind::Categorical: {
      for (std::size_t idx : sample_prior_indices(prior, n, rng)) out.push_back(prior.atoms_[idx]);
      break;
    }
    case PriorKind::PiecewiseLinearDensity: {
      const auto& cum = prior.cumulative_;
      for (std::size_t i = 0; i < n; ++i) {
        const double target = rng.uniform_open() * cum.back();
        std::size_t seg = static_cast<std::size_t>(
            std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
        seg = std::clamp<std::size_t>(seg, 1, cum.size() - 1);
        // Skip zero-area segments so the draw has positive density.
        while (cum[seg] == cum[seg - 1] && seg + 1 < cum.size()) ++seg;
        const double x0 = prior.xs_[seg - 1];
        const double w = prior.xs_[seg] - x0;
        const double y0 = prior.ys_[seg - 1];
        const double y1 = prior.ys_[seg];
        const double local = target - cum[seg - 1];
        // Solve y0 t + (y1 - y0) t^2 / (2w) = local for t in [0, w].
        const double a = (y1 - y0) / (2.0 * w);
        const double disc = std::max(y0 * y0 + 4.0 * a * local, 0.0);
        const double denom = y0 + std::sqrt(disc);
        double t = denom > 0.0 ? 2.0 * local / denom : 0.0;
        t = std::clamp(t, 0.0, w);
        double x = x0 + t;
        if (prior_density(prior, ThetaVector{x}) <= 0.0) {
          x = std::clamp(x, std::nextafter(x0, INFINITY), std::nextafter(x0 + w, -INFINITY));
        }
        out.push_back(ThetaVector{x});
      }
      break;
    }
  }
  return out;
}

double prior_density(const TruePrior& prior, const ThetaVector& theta) {
  require(prior.kind() != PriorKind::Categorical, ErrorCode::NotADensity,
          "categorical prior has no density");
  require(theta.dim() == prior.dim(), ErrorCode::DimensionMismatch, "theta has the wrong dimension");
  const TaskSupport& support = prior.support();
  if (!support.contains(theta.coords())) return 0.0;
  if (prior.kind() != PriorKind::PiecewiseLinearDensity) return 1.0 / support.volume();
  const auto& xs = prior.knots_x();
  const auto& ys = prior.knots_y();
  const double x = theta[0];
  std::size_t seg = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  if (seg >= xs.size()) return ys.back();
  if (seg == 0) return ys.front();
  const double t = (x - xs[seg - 1]) / (xs[seg] - xs[seg - 1]);
  return ys[seg - 1] + t * (ys[seg] - ys[seg - 1]);
}

}  // namespace metaprior
