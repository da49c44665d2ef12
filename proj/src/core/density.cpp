#include "metaprior/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "metaprior/error.hpp"
#include "metaprior/numeric.hpp"

namespace metaprior {

namespace {

// Squared whitened distances beyond this contribute exp(-750) < DBL_MIN.
constexpr double kUnderflowDist2 = 1500.0;

double gaussian_norm(std::size_t d) {
  return std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(d));
}

// Phi(hi) - Phi(lo), evaluated in the tail where it keeps precision.
double interval_mass(double lo, double hi) {
  if (lo > 0.0) return normal_cdf(-lo) - normal_cdf(-hi);
  return normal_cdf(hi) - normal_cdf(lo);
}

// Standard normal truncated to [lo, hi], by inverse CDF.
double truncated_standard_normal(double lo, double hi, Rng& rng) {
  bool flip = false;
  if (lo > 0.0) {
    // Work in the lower tail, where Phi is accurate.
    std::swap(lo, hi);
    lo = -lo;
    hi = -hi;
    flip = true;
  }
  const double plo = normal_cdf(lo);
  const double phi = normal_cdf(hi);
  double z;
  const double p = plo + rng.uniform_open() * (phi - plo);
  if (phi > plo && p > 0.0 && p < 1.0) {
    z = std::clamp(normal_quantile(p), lo, hi);
  } else {
    z = std::isfinite(lo) ? lo : hi;
  }
  return flip ? -z : z;
}

}  // namespace

double Kernel::profile(double t, std::size_t d) const { return gaussian_norm(d) * std::exp(-0.5 * t * t); }

double Kernel::c_rho(std::size_t d) const { return gaussian_norm(d); }

BandwidthSpec BandwidthSpec::isotropic(double h, std::size_t d) {
  require(d >= 1, ErrorCode::InvalidBandwidth, "bandwidth dimension must be positive");
  return with_shape(h, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
}

BandwidthSpec BandwidthSpec::with_shape(double h, Eigen::MatrixXd h0) {
  require(std::isfinite(h) && h > 0.0, ErrorCode::InvalidBandwidth, "bandwidth h must be positive");
  require(h0.rows() >= 1 && h0.rows() == h0.cols(), ErrorCode::InvalidBandwidth, "H0 must be square");
  require(h0.allFinite(), ErrorCode::InvalidBandwidth, "H0 must be finite");
  require((h0 - h0.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorCode::InvalidBandwidth,
          "H0 must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h0);
  require(eig.info() == Eigen::Success, ErrorCode::InvalidBandwidth, "H0 eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  require(values.minCoeff() > 0.0, ErrorCode::InvalidBandwidth, "H0 must be positive definite");
  require(std::abs(values.prod() - 1.0) <= 1e-9, ErrorCode::InvalidBandwidth, "det(H0) must be 1");
  BandwidthSpec out;
  out.h_ = h;
  out.identity_ = h0.isIdentity(0.0);
  out.sigma_min_ = values.minCoeff();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  out.h0_sqrt_ = v * values.cwiseSqrt().asDiagonal() * v.transpose();
  out.h0_inv_sqrt_ = v * values.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  if (out.identity_) {
    out.h0_sqrt_ = h0;
    out.h0_inv_sqrt_ = h0;
  }
  out.h0_ = std::move(h0);
  return out;
}

KdeEstimate::KdeEstimate(std::vector<ThetaVector> samples, Kernel kernel, BandwidthSpec bandwidth)
    : samples_(std::move(samples)), kernel_(kernel), bandwidth_(std::move(bandwidth)) {
  const std::size_t d = dim();
  whitened_.resize(samples_.size() * d);
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& x = samples_[i].values();
    if (bandwidth_.is_identity()) {
      std::copy(x.begin(), x.end(), whitened_.begin() + static_cast<std::ptrdiff_t>(i * d));
    } else {
      const Eigen::VectorXd w =
          bandwidth_.h0_inv_sqrt() * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(d));
      std::copy(w.data(), w.data() + d, whitened_.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  }
}

double KdeEstimate::eval_untruncated(const ThetaVector& x) const {
  const std::size_t d = dim();
  require(x.dim() == d, ErrorCode::DimensionMismatch, "evaluation point has the wrong dimension");
  std::vector<double> wx(x.values());
  if (!bandwidth_.is_identity()) {
    const Eigen::VectorXd w =
        bandwidth_.h0_inv_sqrt() * Eigen::Map<const Eigen::VectorXd>(wx.data(), static_cast<Eigen::Index>(d));
    std::copy(w.data(), w.data() + d, wx.begin());
  }
  const double inv_h = 1.0 / bandwidth_.h();
  CompensatedSum sum;
  for (std::size_t i = 0; i < n(); ++i) {
    const double* xi = whitened_.data() + i * d;
    double dist2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double u = (wx[j] - xi[j]) * inv_h;
      dist2 += u * u;
    }
    if (dist2 < kUnderflowDist2) sum.add(std::exp(-0.5 * dist2));
  }
  return sum.value() * gaussian_norm(d) / (static_cast<double>(n()) * std::pow(bandwidth_.h(), static_cast<double>(d)));
}

double KdeEstimate::eval(const ThetaVector& x) const {
  if (!truncation_) return eval_untruncated(x);
  require(x.dim() == dim(), ErrorCode::DimensionMismatch, "evaluation point has the wrong dimension");
  if (!truncation_->support.contains(x.coords())) return 0.0;
  return eval_untruncated(x) / truncation_->total_mass;
}

KdeEstimate kde_fit(std::vector<ThetaVector> samples, const BandwidthSpec& bandwidth, Kernel kernel) {
  require(!samples.empty(), ErrorCode::EmptySample, "KDE needs at least one sample");
  for (const auto& x : samples) {
    require(x.dim() == bandwidth.dim(), ErrorCode::DimensionMismatch,
            "samples and bandwidth must share a dimension");
  }
  return KdeEstimate(std::move(samples), kernel, bandwidth);
}

KdeEstimate kde_truncate(const KdeEstimate& est, const TaskSupport& support) {
  require(!est.truncation_, ErrorCode::InvalidArgument, "estimate is already truncated");
  require(est.bandwidth_.is_identity(), ErrorCode::UnsupportedBandwidthMatrix,
          "truncation requires H0 = I");
  require(support.dim() == est.dim(), ErrorCode::DimensionMismatch, "support has the wrong dimension");
  Truncation trunc{support, std::vector<double>(est.n(), 1.0), 0.0};
  const double h = est.bandwidth_.h();
  CompensatedSum total;
  for (std::size_t i = 0; i < est.n(); ++i) {
    double mass = 1.0;
    for (std::size_t j = 0; j < est.dim(); ++j) {
      const double x = est.samples_[i][j];
      mass *= interval_mass((support.lower()[j] - x) / h, (support.upper()[j] - x) / h);
    }
    trunc.component_mass[i] = mass;
    total.add(mass);
  }
  trunc.total_mass = total.value() / static_cast<double>(est.n());
  require(trunc.total_mass >= 1e-12, ErrorCode::ZeroMass, "no kernel mass inside the support");
  KdeEstimate out = est;
  out.truncation_ = std::move(trunc);
  return out;
}

std::vector<ThetaVector> kde_sample(const KdeEstimate& est, std::size_t m, Rng& rng) {
  require(m >= 1, ErrorCode::InvalidArgument, "need at least one sample");
  const std::size_t d = est.dim();
  const double h = est.bandwidth().h();
  std::vector<ThetaVector> out;
  out.reserve(m);
  if (!est.truncation()) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto& center = est.samples()[rng.below(est.n())].values();
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < d; ++j) z[static_cast<Eigen::Index>(j)] = rng.normal();
      if (!est.bandwidth().is_identity()) z = est.bandwidth().h0_sqrt() * z;
      std::vector<double> x(d);
      for (std::size_t j = 0; j < d; ++j) x[j] = center[j] + h * z[static_cast<Eigen::Index>(j)];
      out.emplace_back(std::move(x));
    }
    return out;
  }
  const Truncation& trunc = *est.truncation();
  require(trunc.total_mass >= 1e-12, ErrorCode::ZeroMass, "no kernel mass inside the support");
  std::vector<double> cumulative(trunc.component_mass.size());
  std::partial_sum(trunc.component_mass.begin(), trunc.component_mass.end(), cumulative.begin());
  const auto& lower = trunc.support.lower();
  const auto& upper = trunc.support.upper();
  for (std::size_t k = 0; k < m; ++k) {
    const double u = rng.uniform_open() * cumulative.back();
    std::size_t idx = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    idx = std::min(idx, cumulative.size() - 1);
    while (trunc.component_mass[idx] == 0.0 && idx > 0) --idx;
    const auto& center = est.samples()[idx].values();
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double z = truncated_standard_normal((lower[j] - center[j]) / h, (upper[j] - center[j]) / h, rng);
      x[j] = std::clamp(center[j] + h * z, std::nextafter(lower[j], INFINITY),
                        std::nextafter(upper[j], -INFINITY));
    }
    out.emplace_back(std::move(x));
  }
  return out;
}

BandwidthChoice optimal_bandwidth(std::size_t n, std::size_t d, double alpha, BandwidthForm form) {
  require(n >= 2, ErrorCode::InvalidArgument, "optimal bandwidth needs n >= 2");
  require(d >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double rate = std::log(nn) / nn;
  double base = rate;
  if (form == BandwidthForm::Exact) base = dd * dd * rate / (4.0 * alpha * alpha);
  BandwidthChoice out;
  out.h = std::pow(base, 1.0 / (2.0 * alpha + dd));
  out.valid = out.h > std::pow(rate, 1.0 / dd);
  return out;
}

KdeEstimate kde_fit_auto(std::vector<ThetaVector> samples, double alpha, BandwidthForm form) {
  require(!samples.empty(), ErrorCode::EmptySample, "KDE needs at least one sample");
  const std::size_t d = samples.front().dim();
  const auto choice = optimal_bandwidth(samples.size(), d, alpha, form);
  return kde_fit(std::move(samples), BandwidthSpec::isotropic(choice.h, d));
}

double CategoricalEstimate::probability(std::size_t task) const {
  return static_cast<double>(counts_.at(task)) / static_cast<double>(n_);
}

std::vector<double> CategoricalEstimate::probabilities() const {
  std::vector<double> out(counts_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probability(i);
  return out;
}

CategoricalEstimate empirical_fit(std::span<const std::size_t> task_ids, std::size_t universe_size) {
  require(!task_ids.empty(), ErrorCode::EmptySample, "empirical estimator needs observations");
  CategoricalEstimate est;
  est.counts_.assign(universe_size, 0);
  for (std::size_t id : task_ids) {
    require(id < universe_size, ErrorCode::InvalidArgument, "task id outside the universe");
    ++est.counts_[id];
  }
  est.n_ = task_ids.size();
  return est;
}

ThetaVector mixup_sample(std::span<const ThetaVector> latents, Rng& rng) {
  require(!latents.empty(), ErrorCode::EmptySample, "mixup needs at least one latent");
  if (latents.size() == 1) return latents.front();
  const std::size_t d = latents.front().dim();
  std::vector<double> weights(latents.size());
  double total = 0.0;
  for (double& w : weights) {
    w = rng.exponential();
    total += w;
  }
  std::vector<double> x(d, 0.0);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    require(latents[i].dim() == d, ErrorCode::DimensionMismatch, "latents must share a dimension");
    for (std::size_t j = 0; j < d; ++j) x[j] += (weights[i] / total) * latents[i][j];
  }
  return ThetaVector(std::move(x));
}

EvaluationGrid EvaluationGrid::over(const TaskSupport& box, std::size_t points_per_dim) {
  require(points_per_dim >= 1, ErrorCode::InvalidArgument, "grid needs at least one point per axis");
  return EvaluationGrid{box.lower(), box.upper(), points_per_dim};
}

std::size_t EvaluationGrid::size() const {
  std::size_t total = 1;
  for (std::size_t j = 0; j < dim(); ++j) total *= points_per_dim;
  return total;
}

double EvaluationGrid::cell_volume() const {
  double v = 1.0;
  for (std::size_t j = 0; j < dim(); ++j) v *= (upper[j] - lower[j]) / static_cast<double>(points_per_dim);
  return v;
}

ThetaVector EvaluationGrid::point(std::size_t index) const {
  std::vector<double> x(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    const std::size_t k = index % points_per_dim;
    index /= points_per_dim;
    x[j] = lower[j] + (static_cast<double>(k) + 0.5) * (upper[j] - lower[j]) / static_cast<double>(points_per_dim);
  }
  return ThetaVector(std::move(x));
}

DensityFn density_of(const KdeEstimate& est) {
  return DensityFn{est.dim(), [&est](const ThetaVector& x) { return est.eval(x); }};
}

DensityFn density_of(const TruePrior& prior) {
  require(prior.is_continuous(), ErrorCode::NotADensity, "categorical prior has no density");
  return DensityFn{prior.dim(), [&prior](const ThetaVector& x) { return prior_density(prior, x); }};
}

namespace {

template <typename Reduce>
DistanceResult grid_distance(const DensityFn& f, const DensityFn& g, const EvaluationGrid& grid, Reduce reduce) {
  require(grid.dim() >= 1 && grid.points_per_dim >= 1, ErrorCode::GridMismatch, "grid is empty");
  require(f.dim == grid.dim() && g.dim == grid.dim(), ErrorCode::GridMismatch,
          "densities and grid differ in dimension");
  DistanceResult out;
  out.grid_points = grid.size();
  for (std::size_t j = 0; j < grid.dim(); ++j) {
    out.spacing.push_back((grid.upper[j] - grid.lower[j]) / static_cast<double>(grid.points_per_dim));
  }
  for (std::size_t k = 0; k < out.grid_points; ++k) {
    const ThetaVector x = grid.point(k);
    reduce(std::abs(f.eval(x) - g.eval(x)));
  }
  return out;
}

}  // namespace

DistanceResult sup_distance(const DensityFn& f, const DensityFn& g, const EvaluationGrid& grid) {
  double best = 0.0;
  auto out = grid_distance(f, g, grid, [&](double diff) { best = std::max(best, diff); });
  out.value = best;
  return out;
}

DistanceResult l1_distance(const DensityFn& f, const DensityFn& g, const EvaluationGrid& grid) {
  CompensatedSum sum;
  auto out = grid_distance(f, g, grid, [&](double diff) { sum.add(diff); });
  out.value = sum.value() * grid.cell_volume();
  return out;
}

double categorical_l1(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), ErrorCode::GridMismatch, "distributions differ in support size");
  CompensatedSum sum;
  for (std::size_t i = 0; i < p.size(); ++i) sum.add(std::abs(p[i] - q[i]));
  return sum.value();
}

}  // namespace metaprior
