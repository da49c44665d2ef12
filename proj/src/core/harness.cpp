#include "metaprior/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "metaprior/dimred.hpp"
#include "metaprior/error.hpp"
#include "metaprior/numeric.hpp"

namespace metaprior {

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

BandwidthForm form_from_name(const std::string& name) {
  if (name == "constant_free") return BandwidthForm::ConstantFree;
  if (name == "exact") return BandwidthForm::Exact;
  fail(ErrorCode::Parse, "unknown bandwidth form '" + name + "'");
}

EstimatorSpec estimator_from_json(const Json& j) {
  EstimatorSpec e;
  if (j.is_string()) {
    e.kind = estimator_kind_from_name(j.get<std::string>());
    e.name = j.get<std::string>();
    return e;
  }
  const auto kind = get_required<std::string>(j, "kind");
  e.kind = estimator_kind_from_name(kind);
  e.name = get_or<std::string>(j, "name", kind);
  e.alpha = get_or<double>(j, "alpha", 1.0);
  require(e.alpha > 0.0 && e.alpha <= 1.0, ErrorCode::InvalidArgument, "estimator alpha must lie in (0, 1]");
  if (j.contains("bandwidth")) {
    const auto& bw = j.at("bandwidth");
    if (bw.is_number()) {
      e.bandwidth = bw.get<double>();
      require(*e.bandwidth > 0.0, ErrorCode::InvalidBandwidth, "bandwidth must be positive");
    } else {
      e.form = form_from_name(bw.get<std::string>());
    }
  }
  e.reduced_dim = get_or<std::size_t>(j, "reduced_dim", 1);
  e.centered = get_or<bool>(j, "centered", false);
  return e;
}

std::vector<std::uint64_t> seeds_from_json(const Json& j) {
  if (j.is_array()) return j.get<std::vector<std::uint64_t>>();
  const auto count = get_required<std::uint64_t>(j, "count");
  const auto start = get_or<std::uint64_t>(j, "start", 0);
  std::vector<std::uint64_t> out(count);
  std::iota(out.begin(), out.end(), start);
  return out;
}

std::vector<double> normalized(std::vector<double> w) {
  CompensatedSum sum;
  for (double v : w) sum.add(v);
  const double total = sum.value();
  require(total > 0.0 && std::isfinite(total), ErrorCode::ZeroMass, "candidate weights have no mass");
  for (double& v : w) v /= total;
  return w;
}

/// Candidate set from weighted points, dropping zero weights.
CandidateSet build_candidates(const std::vector<DiscreteMdp>& mdps, const std::vector<double>& weights) {
  std::vector<DiscreteMdp> kept;
  std::vector<double> kept_w;
  for (std::size_t i = 0; i < mdps.size(); ++i) {
    if (weights[i] > 0.0) {
      kept.push_back(mdps[i]);
      kept_w.push_back(weights[i]);
    }
  }
  require(!kept.empty(), ErrorCode::ZeroMass, "estimated prior puts no mass on any candidate");
  return CandidateSet(std::move(kept), normalized(std::move(kept_w))).merge_duplicates();
}

TaskSupport parse_quadrature_box(const ParametricMapping& mapping, const Json& quadrature) {
  if (quadrature.contains("box")) {
    const auto& box = quadrature.at("box");
    TaskSupport out = TaskSupport::box(get_required<std::vector<double>>(box, "lower"),
                                       get_required<std::vector<double>>(box, "upper"));
    require(out.dim() == mapping.dim(), ErrorCode::DimensionMismatch, "quadrature box has the wrong dimension");
    return out;
  }
  return mapping.support();
}

std::vector<ThetaVector> grid_points(const EvaluationGrid& grid) {
  std::vector<ThetaVector> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out.push_back(grid.point(i));
  return out;
}

std::vector<DiscreteMdp> map_all(const ParametricMapping& mapping, const std::vector<ThetaVector>& points) {
  std::vector<DiscreteMdp> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(mapping.map(p));
  return out;
}

ThetaVector clamp_into(const ThetaVector& theta, const TaskSupport& box, bool& clamped) {
  std::vector<double> c = theta.values();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double v = std::clamp(c[i], box.lower()[i], box.upper()[i]);
    if (v != c[i]) clamped = true;
    c[i] = v;
  }
  return ThetaVector(std::move(c));
}

double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::EmptySample, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

/// Everything an estimator produces for one cell.
struct Fitted {
  std::optional<CandidateSet> candidates;
  double l1 = 0.0;
  std::optional<double> linf;
  std::optional<BoundResult> bound;
  std::vector<std::string> flags;
};

struct CellInputs {
  const ExperimentContext& ctx;
  const EstimatorSpec& est;
  std::size_t n;
  std::uint64_t seed;
};

double bound_volume(const ExperimentConfig& cfg) { return cfg.mapping().support().volume(); }

BoundResult kde_regret_bound(const ExperimentConfig& cfg, const EstimatorSpec& est, std::size_t n) {
  const TaskSupport& box = cfg.mapping().support();
  const double d = static_cast<double>(box.dim());
  const double cd = cd_constant(d, est.alpha, cfg.prior().holder_const(), box.volume(), box.delta_max()).value;
  return regret_bound_kde(cfg.mapping().c_max(), cfg.total_steps, box.volume(), cd, static_cast<double>(n), d,
                          est.alpha);
}

Fitted fit_categorical_truth(const CellInputs& in, const std::vector<ThetaVector>& train,
                             const std::vector<std::size_t>& train_ids, Rng& est_rng) {
  const ExperimentConfig& cfg = in.ctx.config();
  const auto& atoms = cfg.prior().atoms();
  const auto& truth_w = cfg.prior().weights();
  const auto& atom_mdps = in.ctx.bins().mdps;
  const double cmax = cfg.mapping().c_max();
  const int steps = cfg.total_steps;
  std::vector<double> w;
  Fitted out;
  switch (in.est.kind) {
    case EstimatorKind::Oracle:
      w = truth_w;
      break;
    case EstimatorKind::Empirical:
      w = empirical_fit(train_ids, atoms.size()).probabilities();
      break;
    case EstimatorKind::Kde:
    case EstimatorKind::TruncatedKde: {
      KdeEstimate kde = in.est.bandwidth ? kde_fit(train, BandwidthSpec::isotropic(*in.est.bandwidth, atoms[0].dim()))
                                         : kde_fit_auto(train, in.est.alpha, in.est.form);
      if (in.est.kind == EstimatorKind::TruncatedKde) kde = kde_truncate(kde, cfg.mapping().support());
      for (const auto& a : atoms) w.push_back(kde.eval(a));
      break;
    }
    case EstimatorKind::PcaKde: {
      const auto low = pca_kde_pipeline(train, in.est.reduced_dim, in.est.alpha, in.est.centered, in.est.form);
      if (low.projection().rank_deficient()) out.flags.emplace_back("rank_deficient");
      for (const auto& a : atoms) w.push_back(low.eval(a));
      break;
    }
    case EstimatorKind::MixupPool: {
      std::vector<ThetaVector> pool = train;
      for (std::size_t i = 0; i < in.n; ++i) pool.push_back(mixup_sample(train, est_rng));
      out.candidates = build_candidates(map_all(cfg.mapping(), pool), std::vector<double>(pool.size(), 1.0));
      out.l1 = std::numeric_limits<double>::quiet_NaN();
      out.flags.emplace_back("no_bound");
      return out;
    }
  }
  w = normalized(std::move(w));
  double linf = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) linf = std::max(linf, std::abs(w[i] - truth_w[i]));
  out.l1 = categorical_l1(w, truth_w);
  out.linf = linf;
  out.candidates = build_candidates(atom_mdps, w);
  if (in.est.kind == EstimatorKind::Empirical && in.n >= 2) {
    BoundResult b = regret_bound_empirical(cmax, steps, static_cast<double>(atoms.size()), static_cast<double>(in.n),
                                           cfg.empirical_alpha);
    b.flags.emplace_back("probabilistic");
    out.bound = b;
  } else {
    out.bound = regret_bound_l1(cmax, steps, std::min(out.l1, 2.0));
  }
  return out;
}

Fitted fit_continuous_truth(const CellInputs& in, const std::vector<ThetaVector>& train, Rng& est_rng) {
  const ExperimentConfig& cfg = in.ctx.config();
  const ParametricMapping& mapping = cfg.mapping();
  const WeightedPoints& bins = in.ctx.bins();
  const TaskSupport& support = mapping.support();
  const double cmax = mapping.c_max();
  const int steps = cfg.total_steps;
  const std::size_t d = support.dim();
  const EvaluationGrid dist_grid = EvaluationGrid::over(cfg.quadrature_box(), cfg.grid_points);
  const DensityFn truth_density = density_of(cfg.prior());

  Fitted out;

  // Pooled estimators: candidates are parameter points with equal weight.
  auto pooled = [&](const std::vector<ThetaVector>& pool) {
    std::vector<double> hist(bins.points.size(), 0.0);
    for (const auto& p : pool) hist[in.ctx.bin_of(p)] += 1.0;
    out.l1 = categorical_l1(normalized(std::move(hist)), bins.weights);
    out.candidates = build_candidates(map_all(mapping, pool), std::vector<double>(pool.size(), 1.0));
  };

  if (in.est.kind == EstimatorKind::Empirical || in.est.kind == EstimatorKind::MixupPool) {
    std::vector<ThetaVector> pool = train;
    if (in.est.kind == EstimatorKind::MixupPool) {
      for (std::size_t i = 0; i < in.n; ++i) pool.push_back(mixup_sample(train, est_rng));
    }
    pooled(pool);
    out.flags.emplace_back("no_bound");
    return out;
  }

  DensityFn density;
  std::function<std::vector<ThetaVector>(std::size_t, Rng&)> sampler;
  std::optional<KdeEstimate> kde;
  std::optional<LowDimPriorEstimate> low;
  switch (in.est.kind) {
    case EstimatorKind::Oracle:
      density = truth_density;
      sampler = [&](std::size_t m, Rng& r) { return sample_prior(cfg.prior(), m, r); };
      break;
    case EstimatorKind::Kde:
    case EstimatorKind::TruncatedKde: {
      if (in.est.bandwidth) {
        kde = kde_fit(train, BandwidthSpec::isotropic(*in.est.bandwidth, d));
      } else {
        kde = kde_fit_auto(train, in.est.alpha, in.est.form);
        if (!optimal_bandwidth(in.n, d, in.est.alpha, in.est.form).valid) out.flags.emplace_back("bandwidth_below_floor");
      }
      if (in.est.kind == EstimatorKind::TruncatedKde) kde = kde_truncate(*kde, support);
      density = density_of(*kde);
      sampler = [&](std::size_t m, Rng& r) { return kde_sample(*kde, m, r); };
      break;
    }
    case EstimatorKind::PcaKde: {
      low = pca_kde_pipeline(train, in.est.reduced_dim, in.est.alpha, in.est.centered, in.est.form);
      if (low->projection().rank_deficient()) out.flags.emplace_back("rank_deficient");
      density = DensityFn{d, [&](const ThetaVector& x) { return low->eval(x); }};
      sampler = [&](std::size_t m, Rng& r) { return low->sample(m, r); };
      break;
    }
    default:
      break;
  }

  out.l1 = l1_distance(density, truth_density, dist_grid).value;
  out.linf = sup_distance(density, truth_density, dist_grid).value;

  if (cfg.discretization == Discretization::Particles) {
    bool clamped = false;
    std::vector<ThetaVector> pool;
    for (const auto& p : sampler(cfg.particles, est_rng)) pool.push_back(clamp_into(p, support, clamped));
    if (clamped) out.flags.emplace_back("clamped_particles");
    out.candidates = build_candidates(map_all(mapping, pool), std::vector<double>(pool.size(), 1.0));
  } else {
    std::vector<double> w;
    w.reserve(bins.points.size());
    for (const auto& p : bins.points) w.push_back(density.eval(p));
    out.candidates = build_candidates(bins.mdps, w);
  }

  const double vol = bound_volume(cfg);
  switch (in.est.kind) {
    case EstimatorKind::Oracle:
      out.bound = regret_bound_l1(cmax, steps, 0.0);
      break;
    case EstimatorKind::Kde: {
      BoundResult b = kde_regret_bound(cfg, in.est, in.n);
      if (in.est.bandwidth || !optimal_bandwidth(in.n, d, in.est.alpha, in.est.form).valid) b.valid = false;
      if (in.est.alpha > cfg.prior().holder_alpha()) b.valid = false;
      b.flags.emplace_back("probabilistic");
      out.bound = b;
      break;
    }
    case EstimatorKind::TruncatedKde: {
      const BoundResult untrunc = kde_regret_bound(cfg, in.est, in.n);
      const double u = untrunc.term("sup_error");
      if (vol * u < 1.0) {
        const BoundResult infl = truncation_inflation(u, vol);
        BoundResult b = regret_bound_linf(cmax, steps, vol, infl.value);
        b.flags.emplace_back("probabilistic");
        out.bound = b;
      } else {
        out.flags.emplace_back("truncation_bound_undefined");
      }
      break;
    }
    case EstimatorKind::PcaKde: {
      const ProjectionMap& proj = low->projection();
      const auto& ev = proj.eigenvalues();
      const std::size_t dl = proj.reduced_dim();
      BoundInputs bi;
      bi.n = static_cast<double>(in.n);
      bi.d = static_cast<double>(d);
      bi.d_low = static_cast<double>(dl);
      bi.alpha_low = in.est.alpha;
      bi.c_alpha_low = cfg.prior().holder_const();
      bi.c_max = cmax;
      bi.total_steps = steps;
      bi.c_sg = cfg.c_sg;
      bi.trace_sigma = ev.sum();
      bi.lambda_d = ev(static_cast<Eigen::Index>(dl - 1));
      bi.lambda_next = dl < d ? ev(static_cast<Eigen::Index>(dl)) : 0.0;
      bi.epsilon = bi.lambda_next;
      bi.c_g = mapping.lipschitz_cg();
      const auto& lb = low->low_kde().truncation();
      if (lb) {
        bi.vol_low = lb->support.volume();
        bi.delta_max_low = lb->support.delta_max();
      }
      BoundResult b = regret_bound_pca_kde(bi);
      b.valid = false;
      b.flags.emplace_back("plug_in_constants");
      out.bound = b;
      break;
    }
    default:
      break;
  }
  return out;
}

std::vector<ThetaVector> atoms_of(const TruePrior& prior, const std::vector<std::size_t>& ids) {
  std::vector<ThetaVector> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(prior.atoms()[i]);
  return out;
}

Fitted fit_cell(const CellInputs& in) {
  const ExperimentConfig& cfg = in.ctx.config();
  require(in.n >= 1, ErrorCode::InvalidArgument, "N must be positive");
  Rng train_rng = Rng::stream(in.seed, in.n, 0);
  Rng est_rng = Rng::stream(in.seed, in.n, 1 + hash_string(in.est.name));
  if (cfg.prior().kind() == PriorKind::Categorical) {
    const auto ids = sample_prior_indices(cfg.prior(), in.n, train_rng);
    return fit_categorical_truth(in, atoms_of(cfg.prior(), ids), ids, est_rng);
  }
  return fit_continuous_truth(in, sample_prior(cfg.prior(), in.n, train_rng), est_rng);
}

}  // namespace

EstimatorKind estimator_kind_from_name(const std::string& name) {
  static const std::map<std::string, EstimatorKind> kinds{
      {"oracle", EstimatorKind::Oracle},         {"empirical", EstimatorKind::Empirical},
      {"kde", EstimatorKind::Kde},               {"truncated-kde", EstimatorKind::TruncatedKde},
      {"pca-kde", EstimatorKind::PcaKde},        {"mixup-pool", EstimatorKind::MixupPool}};
  auto it = kinds.find(name);
  require(it != kinds.end(), ErrorCode::Parse, "unknown estimator '" + name + "'");
  return it->second;
}

std::string estimator_kind_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Oracle:
      return "oracle";
    case EstimatorKind::Empirical:
      return "empirical";
    case EstimatorKind::Kde:
      return "kde";
    case EstimatorKind::TruncatedKde:
      return "truncated-kde";
    case EstimatorKind::PcaKde:
      return "pca-kde";
    case EstimatorKind::MixupPool:
      return "mixup-pool";
  }
  return "?";
}

ParametricMapping mapping_from_json(const Json& j) {
  const auto kind = get_required<std::string>(j, "kind");
  if (kind == "halfcircle") {
    GridConfig g;
    g.nx = get_or<int>(j, "nx", g.nx);
    g.ny = get_or<int>(j, "ny", g.ny);
    g.cell = get_or<double>(j, "cell", g.cell);
    g.radius = get_or<double>(j, "radius", g.radius);
    g.goal_radius = get_or<double>(j, "goal_radius", g.goal_radius);
    g.episode_len = get_or<int>(j, "episode_len", g.episode_len);
    g.c_goal = get_or<double>(j, "c_goal", g.c_goal);
    g.c_far = get_or<double>(j, "c_far", g.c_far);
    g.lipschitz_bins = get_or<int>(j, "lipschitz_bins", g.lipschitz_bins);
    const auto param = get_or<std::string>(j, "param", "angle");
    require(param == "angle" || param == "goal_xy", ErrorCode::Parse, "param must be angle or goal_xy");
    g.param = param == "angle" ? HalfCircleParam::Angle : HalfCircleParam::GoalXY;
    return ParametricMapping::halfcircle_grid(g);
  }
  if (kind == "tabular") {
    TabularDims dims;
    dims.n_states = get_or<std::size_t>(j, "n_states", dims.n_states);
    dims.n_actions = get_or<std::size_t>(j, "n_actions", dims.n_actions);
    dims.cost_values = get_or<std::vector<double>>(j, "cost_values", dims.cost_values);
    dims.horizon = get_or<int>(j, "horizon", dims.horizon);
    dims.init_dist = get_or<std::vector<double>>(j, "init_dist", {});
    dims.c_max = get_or<double>(j, "c_max", dims.c_max);
    return ParametricMapping::tabular(dims);
  }
  fail(ErrorCode::Parse, "unknown task_space kind '" + kind + "'");
}

TruePrior prior_from_json(const Json& j) {
  const auto kind = get_required<std::string>(j, "kind");
  const double holder = get_or<double>(j, "holder_const", 1.0);
  if (kind == "uniform_halfcircle") return TruePrior::uniform_halfcircle(holder);
  if (kind == "uniform_box") {
    return TruePrior::uniform_box(TaskSupport::box(get_required<std::vector<double>>(j, "lower"),
                                                   get_required<std::vector<double>>(j, "upper")),
                                  holder);
  }
  if (kind == "categorical") {
    return TruePrior::categorical(thetas_from_json(j.at("atoms")), get_required<std::vector<double>>(j, "weights"));
  }
  if (kind == "piecewise_linear") {
    return TruePrior::piecewise_linear(get_required<std::vector<double>>(j, "xs"),
                                       get_required<std::vector<double>>(j, "ys"));
  }
  fail(ErrorCode::Parse, "unknown true_prior kind '" + kind + "'");
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  try {
    require(j.is_object(), ErrorCode::Parse, "config must be a JSON object");
    ExperimentConfig c(mapping_from_json(j.at("task_space")), prior_from_json(j.at("true_prior")));
    const std::size_t prior_dim =
        c.prior_.kind() == PriorKind::Categorical ? c.prior_.atoms().front().dim() : c.prior_.dim();
    require(prior_dim == c.mapping_.dim(), ErrorCode::DimensionMismatch,
            "true prior and task space disagree on the parameter dimension");

    for (const auto& e : j.at("estimators")) c.estimators.push_back(estimator_from_json(e));
    require(!c.estimators.empty(), ErrorCode::InvalidArgument, "no estimators configured");
    for (const auto& e : c.estimators) {
      if (e.kind == EstimatorKind::PcaKde) {
        require(e.reduced_dim >= 1 && e.reduced_dim <= c.mapping_.dim(), ErrorCode::InvalidArgument,
                "reduced_dim must lie in [1, d]");
      }
      for (const auto& other : c.estimators) {
        require(&e == &other || e.name != other.name, ErrorCode::InvalidArgument,
                "estimator names must be unique: " + e.name);
      }
    }

    c.n_train = get_required<std::vector<std::size_t>>(j, "N_train");
    require(!c.n_train.empty(), ErrorCode::InvalidArgument, "N_train is empty");
    for (auto n : c.n_train) require(n > 0, ErrorCode::InvalidArgument, "N values must be positive");
    c.seeds = seeds_from_json(j.at("seeds"));
    require(!c.seeds.empty(), ErrorCode::InvalidArgument, "no seeds configured");

    const int horizon = get_or<int>(j, "H", c.mapping_.horizon());
    require(horizon == c.mapping_.horizon(), ErrorCode::InvalidArgument, "H must match the task space horizon");
    c.total_steps = get_or<int>(j, "T", horizon);
    require(c.total_steps > 0 && c.total_steps % horizon == 0, ErrorCode::InvalidArgument,
            "T must be a positive multiple of H");

    const Json quad = j.value("quadrature", Json::object());
    c.quadrature_box_.push_back(parse_quadrature_box(c.mapping_, quad));
    c.candidate_bins = get_or<std::size_t>(quad, "candidate_bins", c.candidate_bins);
    c.truth_bins = get_or<std::size_t>(quad, "truth_bins", c.candidate_bins);
    c.grid_points = get_or<std::size_t>(quad, "grid_points", c.grid_points);
    require(c.candidate_bins >= 2 && c.truth_bins >= 2 && c.grid_points >= 2, ErrorCode::InvalidArgument,
            "quadrature bins must be at least 2");

    const auto disc = get_or<std::string>(j, "discretization", "bins");
    require(disc == "bins" || disc == "particles", ErrorCode::Parse, "discretization must be bins or particles");
    c.discretization = disc == "bins" ? Discretization::Bins : Discretization::Particles;
    c.particles = get_or<std::size_t>(j, "particles", c.particles);
    require(c.particles >= 1, ErrorCode::InvalidArgument, "particles must be positive");

    const Json plan = j.value("plan", Json::object());
    c.plan.node_budget = get_or<std::size_t>(plan, "node_budget", c.plan.node_budget);
    c.plan.reset_belief = get_or<bool>(plan, "reset_belief", false);

    const Json bound = j.value("bound", Json::object());
    c.empirical_alpha = get_or<double>(bound, "empirical_alpha", c.empirical_alpha);
    c.c_sg = get_or<double>(bound, "c_sg", c.c_sg);

    c.record_timing = get_or<bool>(j, "record_timing", false);
    const Json output = j.value("output", Json::object());
    c.csv_path = get_or<std::string>(output, "csv", c.csv_path);
    c.manifest_path = get_or<std::string>(output, "manifest", c.manifest_path);

    c.source_ = j;
    c.hash_ = fnv1a(j.dump());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) { return from_json(read_json_file(path)); }

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
  return buf;
}

namespace {

CandidateSet discretize_truth(const ExperimentConfig& cfg, WeightedPoints& bins, std::vector<std::string>& warnings) {
  const TruePrior& prior = cfg.prior();
  const ParametricMapping& mapping = cfg.mapping();
  if (prior.kind() == PriorKind::Categorical) {
    bins.points = prior.atoms();
    bins.mdps = map_all(mapping, bins.points);
    bins.weights = prior.weights();
    return build_candidates(bins.mdps, bins.weights);
  }
  const DensityFn density = density_of(prior);
  auto weigh = [&](const std::vector<ThetaVector>& pts) {
    std::vector<double> w;
    w.reserve(pts.size());
    for (const auto& p : pts) w.push_back(density.eval(p));
    return normalized(std::move(w));
  };
  bins.points = grid_points(EvaluationGrid::over(cfg.quadrature_box(), cfg.candidate_bins));
  bins.mdps = map_all(mapping, bins.points);
  bins.weights = weigh(bins.points);
  if (mapping.kind() == MappingKind::HalfCircleGrid) {
    std::size_t promoted = 0;
    for (const auto& p : bins.points) promoted += halfcircle_goal_cells(p, mapping.grid()).promoted ? 1 : 0;
    if (promoted > 0) {
      warnings.push_back("DegenerateGrid: goal disk covers no cell center for " + std::to_string(promoted) +
                         " candidate bins; nearest cell promoted");
    }
  }
  if (cfg.truth_bins == cfg.candidate_bins) return build_candidates(bins.mdps, bins.weights);
  const auto truth_points = grid_points(EvaluationGrid::over(cfg.quadrature_box(), cfg.truth_bins));
  return build_candidates(map_all(mapping, truth_points), weigh(truth_points));
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

ExperimentContext::ExperimentContext(ExperimentConfig config) : config_(std::move(config)) {
  truth_ = discretize_truth(config_, bins_, warnings_);
  PlanOptions options = config_.plan;
  options.merge = true;
  const PlanResult bo = bayes_optimal_plan(*truth_, config_.total_steps, options);
  truth_loss_ = bo.value;
  truth_nodes_ = bo.nodes;
}

std::size_t ExperimentContext::bin_of(const ThetaVector& theta) const {
  const TaskSupport& box = config_.quadrature_box();
  require(theta.dim() == box.dim(), ErrorCode::DimensionMismatch, "theta has the wrong dimension");
  if (config_.prior().kind() == PriorKind::Categorical) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bins_.points.size(); ++i) {
      const double d = l1_distance(theta, bins_.points[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }
  const std::size_t b = config_.candidate_bins;
  std::size_t index = 0, stride = 1;
  for (std::size_t j = 0; j < box.dim(); ++j) {
    const double u = (theta[j] - box.lower()[j]) / (box.upper()[j] - box.lower()[j]);
    const auto k = static_cast<std::size_t>(std::clamp(std::floor(u * static_cast<double>(b)), 0.0,
                                                       static_cast<double>(b - 1)));
    index += k * stride;
    stride *= b;
  }
  return index;
}

std::vector<ThetaVector> training_sample(const ExperimentConfig& config, std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, n, 0);
  if (config.prior().kind() == PriorKind::Categorical) {
    return atoms_of(config.prior(), sample_prior_indices(config.prior(), n, rng));
  }
  return sample_prior(config.prior(), n, rng);
}

CandidateSet fit_candidates(const ExperimentContext& context, const EstimatorSpec& estimator, std::size_t n,
                            std::uint64_t seed) {
  return *fit_cell(CellInputs{context, estimator, n, seed}).candidates;
}

CellResult run_experiment(const ExperimentContext& context, const EstimatorSpec& estimator, std::size_t n,
                          std::uint64_t seed) {
  const ExperimentConfig& cfg = context.config();
  const double start = cfg.record_timing ? now_ms() : 0.0;
  Fitted fitted = fit_cell(CellInputs{context, estimator, n, seed});
  PlanOptions options = cfg.plan;
  options.merge = true;
  const PlanResult plan = bayes_optimal_plan(*fitted.candidates, cfg.total_steps, options);

  CellResult r;
  r.estimator = estimator.name;
  r.n = n;
  r.seed = seed;
  r.loss = evaluate_bayes_loss(plan.policy, context.truth(), cfg.total_steps);
  r.regret = regret(plan.policy, context.truth(), cfg.total_steps, context.truth_loss());
  r.l1_err = fitted.l1;
  r.linf_err = fitted.linf;
  r.bound = fitted.bound;
  r.plan_nodes = plan.nodes;
  r.candidates = fitted.candidates->size();
  r.flags = std::move(fitted.flags);
  if (cfg.record_timing) r.wall_ms = now_ms() - start;
  return r;
}

ConfidenceInterval bootstrap_mean_ci(const std::vector<double>& values, Rng& rng, std::size_t resamples,
                                     double level) {
  require(!values.empty(), ErrorCode::EmptySample, "bootstrap of an empty sample");
  require(resamples >= 1 && level > 0.0 && level < 1.0, ErrorCode::InvalidArgument, "bad bootstrap settings");
  auto mean_of = [](auto first, auto last) {
    CompensatedSum s;
    std::size_t k = 0;
    for (; first != last; ++first, ++k) s.add(*first);
    return s.value() / static_cast<double>(k);
  };
  ConfidenceInterval ci;
  ci.mean = mean_of(values.begin(), values.end());
  std::vector<double> means(resamples);
  std::vector<double> draw(values.size());
  for (auto& m : means) {
    for (auto& x : draw) x = values[rng.below(values.size())];
    m = mean_of(draw.begin(), draw.end());
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  const auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1) + 0.5));
    return means[std::min(i, resamples - 1)];
  };
  ci.lower = at(tail);
  ci.upper = at(1.0 - tail);
  return ci;
}

double wilcoxon_greater_p(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), ErrorCode::DimensionMismatch, "paired samples differ in length");
  std::vector<double> diff;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diff.push_back(d);
  }
  const std::size_t n = diff.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(diff[a]) < std::abs(diff[b]); });
  // Doubled midranks are integers, so the null distribution is a subset-sum
  // count over them.
  std::vector<std::size_t> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = i + j + 2;
    i = j + 1;
  }
  std::size_t observed = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank2[i];
    if (diff[i] > 0.0) observed += rank2[i];
  }
  std::vector<double> ways(total + 1, 0.0);
  ways[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = total; s + 1 > rank2[i]; --s) ways[s] += ways[s - rank2[i]];
  }
  double upper = 0.0;
  for (std::size_t s = observed; s <= total; ++s) upper += ways[s];
  return upper / std::ldexp(1.0, static_cast<int>(n));
}

RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& error) {
  require(n.size() == error.size(), ErrorCode::DimensionMismatch, "n and error differ in length");
  require(n.size() >= 4, ErrorCode::InvalidArgument, "rate fit needs at least 4 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < n.size(); ++i) {
    require(n[i] > 0.0 && error[i] > 0.0, ErrorCode::NonPositiveInput, "rate fit needs positive n and error");
    lx.push_back(std::log(n[i]));
    ly.push_back(std::log(error[i]));
  }
  const double k = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  require(sxx > 0.0, ErrorCode::InvalidArgument, "rate fit needs at least two distinct n");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

std::size_t Manifest::failed() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok(); }));
}

std::vector<double> Manifest::regrets(const std::string& estimator, std::size_t n) const {
  std::vector<double> out;
  for (const auto& c : cells) {
    if (c.ok() && c.estimator == estimator && c.n == n) out.push_back(c.regret);
  }
  return out;
}

Manifest sweep(const ExperimentConfig& config, unsigned jobs) {
  const ExperimentContext context(config);
  struct Cell {
    const EstimatorSpec* est;
    std::size_t n;
    std::uint64_t seed;
  };
  std::vector<Cell> plan;
  for (const auto& e : config.estimators) {
    for (auto n : config.n_train) {
      for (auto s : config.seeds) plan.push_back({&e, n, s});
    }
  }

  Manifest m;
  m.config_hash = config.hash_hex();
  m.config = config.source();
  m.warnings = context.warnings();
  m.truth_loss = context.truth_loss();
  m.cells.resize(plan.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      const Cell& c = plan[i];
      try {
        m.cells[i] = run_experiment(context, *c.est, c.n, c.seed);
      } catch (const Error& e) {
        CellResult failed;
        failed.estimator = c.est->name;
        failed.n = c.n;
        failed.seed = c.seed;
        failed.error = e.code();
        failed.error_message = e.what();
        m.cells[i] = std::move(failed);
      } catch (const std::exception& e) {
        CellResult failed;
        failed.estimator = c.est->name;
        failed.n = c.n;
        failed.seed = c.seed;
        failed.error = ErrorCode::InvalidArgument;
        failed.error_message = e.what();
        m.cells[i] = std::move(failed);
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(plan.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& e : config.estimators) {
    for (auto n : config.n_train) {
      const auto values = m.regrets(e.name, n);
      if (values.empty()) continue;
      Aggregate a;
      a.estimator = e.name;
      a.n = n;
      a.cells = values.size();
      Rng rng = Rng::stream(config.hash(), hash_string(e.name), n);
      a.regret = bootstrap_mean_ci(values, rng);
      CompensatedSum l1;
      std::size_t counted = 0;
      for (const auto& c : m.cells) {
        if (c.ok() && c.estimator == e.name && c.n == n && std::isfinite(c.l1_err)) {
          l1.add(c.l1_err);
          ++counted;
        }
      }
      a.mean_l1 = counted ? l1.value() / static_cast<double>(counted)
                          : std::numeric_limits<double>::quiet_NaN();
      m.aggregates.push_back(a);
    }
  }
  return m;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string manifest_csv(const Manifest& manifest) {
  std::string out = "estimator,N,seed,regret,l1_err,linf_err,bound_value,bound_valid,plan_nodes,wall_ms\n";
  for (const auto& c : manifest.cells) {
    if (!c.ok()) continue;
    out += c.estimator + ',' + std::to_string(c.n) + ',' + std::to_string(c.seed) + ',' + csv_number(c.regret) + ',' +
           csv_number(c.l1_err) + ',' + (c.linf_err ? csv_number(*c.linf_err) : std::string()) + ',' +
           (c.bound ? csv_number(c.bound->value) : std::string()) + ',' +
           (c.bound && c.bound->valid ? "1" : "0") + ',' + std::to_string(c.plan_nodes) + ',' +
           csv_number(c.wall_ms) + '\n';
  }
  return out;
}

Json manifest_json(const Manifest& manifest) {
  auto number = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json cells = Json::array();
  for (const auto& c : manifest.cells) {
    Json row{{"estimator", c.estimator}, {"N", c.n}, {"seed", c.seed}};
    if (c.ok()) {
      row["regret"] = number(c.regret);
      row["loss"] = number(c.loss);
      row["l1_err"] = number(c.l1_err);
      row["linf_err"] = c.linf_err ? number(*c.linf_err) : Json(nullptr);
      row["bound"] = c.bound ? to_json(*c.bound) : Json(nullptr);
      row["plan_nodes"] = c.plan_nodes;
      row["candidates"] = c.candidates;
      row["wall_ms"] = c.wall_ms;
      row["flags"] = c.flags;
      row["error"] = nullptr;
    } else {
      row["error"] = Json{{"code", std::string(error_code_name(*c.error))}, {"message", c.error_message}};
    }
    cells.push_back(std::move(row));
  }
  Json aggregates = Json::array();
  for (const auto& a : manifest.aggregates) {
    aggregates.push_back(Json{{"estimator", a.estimator},
                              {"N", a.n},
                              {"cells", a.cells},
                              {"mean_regret", a.regret.mean},
                              {"ci_lower", a.regret.lower},
                              {"ci_upper", a.regret.upper},
                              {"mean_l1_err", number(a.mean_l1)}});
  }
  return Json{{"format_version", kFormatVersion},
              {"version", kVersion},
              {"csv_schema_version", kCsvSchemaVersion},
              {"config_hash", manifest.config_hash},
              {"config", manifest.config},
              {"truth_bayes_loss", manifest.truth_loss},
              {"warnings", manifest.warnings},
              {"failed_cells", manifest.failed()},
              {"cells", std::move(cells)},
              {"aggregates", std::move(aggregates)}};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    require(used == text.size(), ErrorCode::Parse, "bad number '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::Parse, "bad number '" + text + "'");
  }
}

}  // namespace

RateFit fit_rate_csv(const std::string& csv_text, const std::string& estimator, const std::string& metric) {
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(split_csv_line(line));
  }
  require(!rows.empty(), ErrorCode::EmptySample, "empty CSV");
  const auto& header = rows.front();
  const auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<double> ns, errs;
  if (col("estimator") && col("N")) {
    const auto metric_col = col(metric);
    require(metric_col.has_value(), ErrorCode::Parse, "CSV has no column '" + metric + "'");
    std::map<double, std::vector<double>> by_n;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      require(row.size() == header.size(), ErrorCode::Parse, "ragged CSV row");
      if (row[*col("estimator")] != estimator || row[*metric_col].empty()) continue;
      by_n[parse_number(row[*col("N")])].push_back(parse_number(row[*metric_col]));
    }
    for (const auto& [n, values] : by_n) {
      ns.push_back(n);
      errs.push_back(median(values));
    }
  } else {
    const bool has_header = header.size() >= 1 && !header[0].empty() &&
                            (std::isalpha(static_cast<unsigned char>(header[0][0])) != 0);
    for (std::size_t r = has_header ? 1 : 0; r < rows.size(); ++r) {
      require(rows[r].size() >= 2, ErrorCode::Parse, "rate CSV rows need n and error");
      ns.push_back(parse_number(rows[r][0]));
      errs.push_back(parse_number(rows[r][1]));
    }
  }
  return fit_rate(ns, errs);
}

BoundResult evaluate_bound(const std::string& which, const Json& p) {
  try {
    auto num = [&](const char* key) { return get_required<double>(p, key); };
    auto opt = [&](const char* key, double fallback) { return get_or<double>(p, key, fallback); };
    if (which == "cd") {
      return cd_constant(num("d"), opt("alpha", 1.0), opt("c_alpha", 1.0), opt("vol", 1.0), opt("delta_max", 1.0));
    }
    if (which == "kde-sup") {
      const BoundResult cd =
          cd_constant(num("d"), opt("alpha", 1.0), opt("c_alpha", 1.0), opt("vol", 1.0), opt("delta_max", 1.0));
      BoundResult r = kde_sup_bound(num("n"), num("d"), opt("alpha", 1.0), opt("c_d", cd.value));
      r.terms.insert(r.terms.end(), cd.terms.begin(), cd.terms.end());
      r.flags.emplace_back("probabilistic");
      return r;
    }
    if (which == "kde-regret") {
      const double d = num("d"), alpha = opt("alpha", 1.0), vol = opt("vol", 1.0);
      const double cd = p.contains("c_d") ? num("c_d")
                                          : cd_constant(d, alpha, opt("c_alpha", 1.0), vol, opt("delta_max", 1.0)).value;
      return regret_bound_kde(opt("c_max", 1.0), num("T"), vol, cd, num("n"), d, alpha);
    }
    if (which == "pca-kde-regret") {
      BoundInputs in;
      in.n = num("n");
      in.d = num("d");
      in.d_low = num("d_low");
      in.alpha_low = opt("alpha_low", 1.0);
      in.c_alpha_low = opt("c_alpha_low", 1.0);
      in.c_max = opt("c_max", 1.0);
      in.total_steps = num("T");
      in.vol_low = opt("vol_low", 1.0);
      in.delta_max_low = opt("delta_max_low", 1.0);
      in.c_sg = opt("c_sg", 1.0);
      in.trace_sigma = num("trace_sigma");
      in.lambda_d = num("lambda_d");
      in.lambda_next = num("lambda_next");
      in.epsilon = opt("epsilon", 0.0);
      in.c_g = opt("c_g", 1.0);
      return regret_bound_pca_kde(in);
    }
    if (which == "empirical-regret") {
      return regret_bound_empirical(opt("c_max", 1.0), num("T"), num("card_m"), num("n"), num("alpha"));
    }
    if (which == "pca-risk") {
      return pca_risk_bound(opt("c_sg", 1.0), num("d_low"), num("trace_sigma"), num("n"), num("lambda_d"),
                            num("lambda_next"), opt("epsilon", 0.0), num("d"));
    }
    if (which == "pca-excess-risk") {
      BoundResult r = pca_excess_risk_bound(opt("c_sg", 1.0), num("d_low"), num("trace_sigma"), num("n"),
                                         num("lambda_d"), num("lambda_next"));
      if (num("lambda_d") > num("lambda_next")) {
        r.terms.push_back({"crossover_n", pca_excess_risk_crossover(opt("c_sg", 1.0), num("d_low"), num("trace_sigma"),
                                                                 num("lambda_d"), num("lambda_next"))});
      }
      return r;
    }
    if (which == "prior-error-regret") {
      if (p.contains("linf_err")) return regret_bound_linf(opt("c_max", 1.0), num("T"), opt("vol", 1.0), num("linf_err"));
      return regret_bound_l1(opt("c_max", 1.0), num("T"), num("l1_err"));
    }
    if (which == "shaped-kde-sup") {
      return shaped_kde_sup_bound(num("c_prime"), num("h"), opt("alpha", 1.0), opt("sigma_min", 1.0), num("n"), num("d"));
    }
    if (which == "truncation") return truncation_inflation(num("u"), opt("vol", 1.0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  fail(ErrorCode::InvalidArgument, "unknown bound '" + which + "'");
}

}  // namespace metaprior
