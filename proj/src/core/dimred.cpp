#include "metaprior/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaprior/error.hpp"

namespace metaprior {

namespace {

Eigen::VectorXd to_eigen(const ThetaVector& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.values().data(), static_cast<Eigen::Index>(x.dim()));
}

ThetaVector from_eigen(const Eigen::VectorXd& v) {
  return ThetaVector(std::vector<double>(v.data(), v.data() + v.size()));
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0.0) v = -v;
}

bool lex_greater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return false;
}

}  // namespace

ThetaVector ProjectionMap::project(const ThetaVector& theta) const {
  require(theta.dim() == dim(), ErrorCode::DimensionMismatch, "theta has the wrong dimension");
  Eigen::VectorXd x = to_eigen(theta);
  if (centered_) x -= mean_;
  return from_eigen(w_ * x);
}

ThetaVector ProjectionMap::backproject(const ThetaVector& low) const {
  require(low.dim() == reduced_dim(), ErrorCode::DimensionMismatch, "reduced point has the wrong dimension");
  Eigen::VectorXd x = w_.transpose() * to_eigen(low);
  if (centered_) x += mean_;
  return from_eigen(x);
}

ProjectionMap ProjectionMap::from_parts(Eigen::MatrixXd w, Eigen::VectorXd eigenvalues, bool centered,
                                        Eigen::VectorXd mean) {
  require(w.rows() >= 1 && w.rows() <= w.cols(), ErrorCode::DimensionMismatch, "W_L must be d' x d with d' <= d");
  require(eigenvalues.size() == w.cols(), ErrorCode::DimensionMismatch, "need d eigenvalues");
  require(!centered || mean.size() == w.cols(), ErrorCode::DimensionMismatch, "mean has the wrong dimension");
  const Eigen::MatrixXd gram = w * w.transpose();
  require((gram - Eigen::MatrixXd::Identity(w.rows(), w.rows())).cwiseAbs().maxCoeff() <= 1e-10,
          ErrorCode::InvalidArgument, "W_L rows must be orthonormal");
  ProjectionMap out;
  out.w_ = std::move(w);
  out.eigenvalues_ = std::move(eigenvalues);
  out.centered_ = centered;
  out.mean_ = centered ? std::move(mean) : Eigen::VectorXd::Zero(out.w_.cols());
  out.rank_deficient_ = false;
  return out;
}

ProjectionMap pca_fit(const std::vector<ThetaVector>& samples, std::size_t reduced_dim, bool centered) {
  require(!samples.empty(), ErrorCode::TooFewSamples, "PCA needs samples");
  const std::size_t d = samples.front().dim();
  require(reduced_dim >= 1 && reduced_dim <= d, ErrorCode::InvalidArgument, "need 1 <= d' <= d");
  require(samples.size() >= reduced_dim, ErrorCode::TooFewSamples, "PCA needs at least d' samples");
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), di);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(samples[i].dim() == d, ErrorCode::DimensionMismatch, "samples must share a dimension");
    x.row(static_cast<Eigen::Index>(i)) = to_eigen(samples[i]).transpose();
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(di);
  if (centered) {
    mean = x.colwise().mean().transpose();
    x.rowwise() -= mean.transpose();
  }
  const Eigen::MatrixXd moment = (x.transpose() * x) / static_cast<double>(samples.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment);
  require(eig.info() == Eigen::Success, ErrorCode::RankDeficient, "eigendecomposition failed");

  std::vector<Eigen::Index> order(d);
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd vectors = eig.eigenvectors();
  for (Eigen::Index k = 0; k < di; ++k) fix_sign(vectors.col(k));
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double tie_tol = 1e-12 * std::max(1.0, values.cwiseAbs().maxCoeff());
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(values[a] - values[b]) > tie_tol) return values[a] > values[b];
    return lex_greater(vectors.col(a), vectors.col(b));
  });

  ProjectionMap out;
  out.centered_ = centered;
  out.mean_ = mean;
  out.eigenvalues_.resize(di);
  out.w_.resize(static_cast<Eigen::Index>(reduced_dim), di);
  std::size_t nonzero = 0;
  for (std::size_t k = 0; k < d; ++k) {
    double lambda = values[order[k]];
    if (lambda < 0.0 && lambda >= -1e-12) lambda = 0.0;
    out.eigenvalues_[static_cast<Eigen::Index>(k)] = lambda;
    if (lambda > tie_tol) ++nonzero;
    if (k < reduced_dim) out.w_.row(static_cast<Eigen::Index>(k)) = vectors.col(order[k]).transpose();
  }
  out.rank_deficient_ = nonzero < reduced_dim;
  return out;
}

double empirical_risk(const ProjectionMap& map, const std::vector<ThetaVector>& samples) {
  const Eigen::MatrixXd p = map.projector();
  double total = 0.0;
  for (const auto& s : samples) {
    require(s.dim() == map.dim(), ErrorCode::DimensionMismatch, "sample has the wrong dimension");
    Eigen::VectorXd x = to_eigen(s);
    if (map.centered()) x -= map.mean();
    total += (x - p * x).squaredNorm();
  }
  return total;
}

double LowDimPriorEstimate::eval(const ThetaVector& theta) const {
  return low_kde_.eval(projection_.project(theta));
}

std::vector<ThetaVector> LowDimPriorEstimate::sample(std::size_t m, Rng& rng) const {
  std::vector<ThetaVector> out;
  out.reserve(m);
  for (const auto& low : kde_sample(low_kde_, m, rng)) out.push_back(projection_.backproject(low));
  return out;
}

LowDimPriorEstimate pca_kde_pipeline(const std::vector<ThetaVector>& samples, std::size_t reduced_dim,
                                     double alpha, bool centered, BandwidthForm form) {
  ProjectionMap map = pca_fit(samples, reduced_dim, centered);
  std::vector<ThetaVector> low;
  low.reserve(samples.size());
  for (const auto& s : samples) low.push_back(map.project(s));
  const std::size_t n = std::max<std::size_t>(low.size(), 2);
  const double h = optimal_bandwidth(n, reduced_dim, alpha, form).h;
  std::vector<double> lo(reduced_dim, INFINITY), hi(reduced_dim, -INFINITY);
  for (const auto& x : low) {
    for (std::size_t j = 0; j < reduced_dim; ++j) {
      lo[j] = std::min(lo[j], x[j]);
      hi[j] = std::max(hi[j], x[j]);
    }
  }
  for (std::size_t j = 0; j < reduced_dim; ++j) {
    lo[j] -= LowDimPriorEstimate::kBoxInflation * h;
    hi[j] += LowDimPriorEstimate::kBoxInflation * h;
  }
  KdeEstimate kde = kde_truncate(kde_fit(std::move(low), BandwidthSpec::isotropic(h, reduced_dim)),
                                 TaskSupport::box(lo, hi));
  return LowDimPriorEstimate(std::move(map), std::move(kde));
}

}  // namespace metaprior
