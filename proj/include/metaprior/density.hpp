#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "metaprior/rng.hpp"
#include "metaprior/task_space.hpp"

namespace metaprior {

enum class KernelKind { Gaussian };

/// K(x) = kappa(|x|) with kappa(t) <= c_rho * exp(-t^rho) for t > t0.
struct Kernel {
  KernelKind kind = KernelKind::Gaussian;

  double profile(double t, std::size_t d) const;
  /// Decay constants (rho, C_rho, t0) for dimension d.
  double rho() const { return 1.0; }
  double c_rho(std::size_t d) const;
  double t0() const { return 2.0; }
};

/// Bandwidth h and shape matrix H0 (symmetric positive definite, det 1).
class BandwidthSpec {
 public:
  static BandwidthSpec isotropic(double h, std::size_t d);
  static BandwidthSpec with_shape(double h, Eigen::MatrixXd h0);

  double h() const { return h_; }
  std::size_t dim() const { return static_cast<std::size_t>(h0_.rows()); }
  const Eigen::MatrixXd& h0() const { return h0_; }
  const Eigen::MatrixXd& h0_sqrt() const { return h0_sqrt_; }
  const Eigen::MatrixXd& h0_inv_sqrt() const { return h0_inv_sqrt_; }
  double sigma_min() const { return sigma_min_; }
  bool is_identity() const { return identity_; }

 private:
  BandwidthSpec() = default;
  double h_ = 1.0;
  Eigen::MatrixXd h0_, h0_sqrt_, h0_inv_sqrt_;
  double sigma_min_ = 1.0;
  bool identity_ = true;
};

struct Truncation {
  TaskSupport support;
  std::vector<double> component_mass;
  double total_mass = 1.0;  // r, the mean component mass
};

/// Gaussian-kernel density estimate, optionally truncated to a box.
class KdeEstimate {
 public:
  std::size_t n() const { return samples_.size(); }
  std::size_t dim() const { return bandwidth_.dim(); }
  const std::vector<ThetaVector>& samples() const { return samples_; }
  const Kernel& kernel() const { return kernel_; }
  const BandwidthSpec& bandwidth() const { return bandwidth_; }
  const std::optional<Truncation>& truncation() const { return truncation_; }

  double eval(const ThetaVector& x) const;
  /// The mixture value ignoring truncation.
  double eval_untruncated(const ThetaVector& x) const;

 private:
  KdeEstimate(std::vector<ThetaVector> samples, Kernel kernel, BandwidthSpec bandwidth);

  std::vector<ThetaVector> samples_;
  Kernel kernel_;
  BandwidthSpec bandwidth_;
  std::vector<double> whitened_;  // H0^{-1/2} X_i, row-major n x d
  std::optional<Truncation> truncation_;

  friend KdeEstimate kde_fit(std::vector<ThetaVector>, const BandwidthSpec&, Kernel);
  friend KdeEstimate kde_truncate(const KdeEstimate&, const TaskSupport&);
};

KdeEstimate kde_fit(std::vector<ThetaVector> samples, const BandwidthSpec& bandwidth, Kernel kernel = {});
KdeEstimate kde_truncate(const KdeEstimate& est, const TaskSupport& support);
std::vector<ThetaVector> kde_sample(const KdeEstimate& est, std::size_t m, Rng& rng);

enum class BandwidthForm {
  ConstantFree,  // (log n / n)^{1/(2 alpha + d)}
  Exact,         // (d^2 log n / (4 alpha^2 n))^{1/(2 alpha + d)}
};

struct BandwidthChoice {
  double h = 0.0;
  /// h exceeds the (log n / n)^{1/d} floor required by the sup-norm bound.
  bool valid = false;
};

BandwidthChoice optimal_bandwidth(std::size_t n, std::size_t d, double alpha,
                                  BandwidthForm form = BandwidthForm::ConstantFree);

/// kde_fit with an isotropic optimal bandwidth.
KdeEstimate kde_fit_auto(std::vector<ThetaVector> samples, double alpha,
                         BandwidthForm form = BandwidthForm::ConstantFree);

/// Count-based distribution over a finite task universe {0, ..., K-1}.
class CategoricalEstimate {
 public:
  std::size_t universe_size() const { return counts_.size(); }
  std::uint64_t n() const { return n_; }
  std::uint64_t count(std::size_t task) const { return counts_.at(task); }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  double probability(std::size_t task) const;
  std::vector<double> probabilities() const;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_ = 0;

  friend CategoricalEstimate empirical_fit(std::span<const std::size_t>, std::size_t);
};

CategoricalEstimate empirical_fit(std::span<const std::size_t> task_ids, std::size_t universe_size);

/// Convex combination of the latents with Dirichlet(1, ..., 1) weights.
ThetaVector mixup_sample(std::span<const ThetaVector> latents, Rng& rng);

/// Cell-centered grid over a box: points_per_dim cells along each axis.
struct EvaluationGrid {
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t points_per_dim = 0;

  static EvaluationGrid over(const TaskSupport& box, std::size_t points_per_dim);
  std::size_t dim() const { return lower.size(); }
  std::size_t size() const;
  double cell_volume() const;
  ThetaVector point(std::size_t index) const;
};

struct DensityFn {
  std::size_t dim = 0;
  std::function<double(const ThetaVector&)> eval;
};

DensityFn density_of(const KdeEstimate& est);
DensityFn density_of(const TruePrior& prior);

struct DistanceResult {
  double value = 0.0;
  std::size_t grid_points = 0;
  std::vector<double> spacing;  // per-dimension cell width
};

/// Max of |f - g| over the grid; a lower estimate of the true sup.
DistanceResult sup_distance(const DensityFn& f, const DensityFn& g, const EvaluationGrid& grid);
/// Midpoint-rule estimate of the L1 distance.
DistanceResult l1_distance(const DensityFn& f, const DensityFn& g, const EvaluationGrid& grid);
/// Exact L1 distance between two distributions on the same finite set.
double categorical_l1(std::span<const double> p, std::span<const double> q);

}  // namespace metaprior
