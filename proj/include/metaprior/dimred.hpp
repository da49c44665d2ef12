#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metaprior/density.hpp"
#include "metaprior/task_space.hpp"

namespace metaprior {

/// Rank-d' orthogonal projection built from the top eigenvectors of the
/// empirical second-moment matrix (or covariance, when centered).
class ProjectionMap {
 public:
  std::size_t dim() const { return static_cast<std::size_t>(w_.cols()); }
  std::size_t reduced_dim() const { return static_cast<std::size_t>(w_.rows()); }
  /// W_L, d' x d with orthonormal rows.
  const Eigen::MatrixXd& w() const { return w_; }
  /// All d eigenvalues, non-increasing.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  bool centered() const { return centered_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  /// Fewer than d' eigenvalues were nonzero; trailing rows complete the basis.
  bool rank_deficient() const { return rank_deficient_; }
  Eigen::MatrixXd projector() const { return w_.transpose() * w_; }

  ThetaVector project(const ThetaVector& theta) const;
  ThetaVector backproject(const ThetaVector& low) const;

  static ProjectionMap from_parts(Eigen::MatrixXd w, Eigen::VectorXd eigenvalues, bool centered,
                                  Eigen::VectorXd mean);

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd mean_;
  bool centered_ = false;
  bool rank_deficient_ = false;

  friend ProjectionMap pca_fit(const std::vector<ThetaVector>&, std::size_t, bool);
};

ProjectionMap pca_fit(const std::vector<ThetaVector>& samples, std::size_t reduced_dim, bool centered = false);

/// Sum over samples of |X_i - P X_i|^2 (about the mean when centered).
double empirical_risk(const ProjectionMap& map, const std::vector<ThetaVector>& samples);

/// Prior estimate that lives on the d'-dimensional principal subspace.
class LowDimPriorEstimate {
 public:
  const ProjectionMap& projection() const { return projection_; }
  const KdeEstimate& low_kde() const { return low_kde_; }
  /// Per-side inflation of the projected bounding box, in bandwidths.
  static constexpr double kBoxInflation = 3.0;

  /// f_low(W_L theta).
  double eval(const ThetaVector& theta) const;
  std::vector<ThetaVector> sample(std::size_t m, Rng& rng) const;

 private:
  LowDimPriorEstimate(ProjectionMap projection, KdeEstimate low_kde)
      : projection_(std::move(projection)), low_kde_(std::move(low_kde)) {}

  ProjectionMap projection_;
  KdeEstimate low_kde_;

  friend LowDimPriorEstimate pca_kde_pipeline(const std::vector<ThetaVector>&, std::size_t, double, bool,
                                              BandwidthForm);
};

LowDimPriorEstimate pca_kde_pipeline(const std::vector<ThetaVector>& samples, std::size_t reduced_dim,
                                     double alpha, bool centered = false,
                                     BandwidthForm form = BandwidthForm::ConstantFree);

}  // namespace metaprior
