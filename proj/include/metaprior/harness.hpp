#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaprior/bounds.hpp"
#include "metaprior/density.hpp"
#include "metaprior/planning.hpp"
#include "metaprior/serialize.hpp"
#include "metaprior/task_space.hpp"

namespace metaprior {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;

enum class EstimatorKind { Oracle, Empirical, Kde, TruncatedKde, PcaKde, MixupPool };

struct EstimatorSpec {
  std::string name;  // label used in outputs; defaults to the kind name
  EstimatorKind kind = EstimatorKind::Kde;
  double alpha = 1.0;
  BandwidthForm form = BandwidthForm::ConstantFree;
  std::optional<double> bandwidth;  // fixed h instead of the optimal one
  std::size_t reduced_dim = 1;
  bool centered = false;
};

EstimatorKind estimator_kind_from_name(const std::string& name);
std::string estimator_kind_name(EstimatorKind kind);

/// How continuous estimates become candidate sets.
enum class Discretization { Bins, Particles };

/// Parsed experiment configuration. See README for the key reference.
class ExperimentConfig {
 public:
  static ExperimentConfig from_json(const Json& j);
  static ExperimentConfig load(const std::string& path);

  const ParametricMapping& mapping() const { return mapping_; }
  const TruePrior& prior() const { return prior_; }
  /// Box carrying the candidate bins, the discretized truth and the
  /// distance grid; defaults to the task space support.
  const TaskSupport& quadrature_box() const { return quadrature_box_.front(); }

  std::vector<EstimatorSpec> estimators;
  std::vector<std::size_t> n_train;
  std::vector<std::uint64_t> seeds;
  int total_steps = 1;
  std::size_t candidate_bins = 16;
  std::size_t truth_bins = 16;
  std::size_t grid_points = 256;
  Discretization discretization = Discretization::Bins;
  std::size_t particles = 64;
  PlanOptions plan;
  double empirical_alpha = 0.5;
  double c_sg = 1.0;
  bool record_timing = false;
  std::string csv_path = "results.csv";
  std::string manifest_path = "manifest.json";

  /// Canonical JSON of the input and its FNV-1a hash.
  const Json& source() const { return source_; }
  std::uint64_t hash() const { return hash_; }
  std::string hash_hex() const;

 private:
  ExperimentConfig(ParametricMapping mapping, TruePrior prior)
      : mapping_(std::move(mapping)), prior_(std::move(prior)) {}

  ParametricMapping mapping_;
  TruePrior prior_;
  std::vector<TaskSupport> quadrature_box_;  // exactly one element
  Json source_;
  std::uint64_t hash_ = 0;
};

ParametricMapping mapping_from_json(const Json& j);
TruePrior prior_from_json(const Json& j);

/// A weighted point set over Theta with the MDP of every point.
struct WeightedPoints {
  std::vector<ThetaVector> points;
  std::vector<DiscreteMdp> mdps;
  std::vector<double> weights;  // normalized
};

/// Work shared by every cell of a sweep: the discretized truth, its
/// Bayes-optimal loss and the candidate bins.
class ExperimentContext {
 public:
  explicit ExperimentContext(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const CandidateSet& truth() const { return *truth_; }
  double truth_loss() const { return truth_loss_; }
  std::size_t truth_nodes() const { return truth_nodes_; }
  /// Candidate bins with the true prior's weights on them.
  const WeightedPoints& bins() const { return bins_; }
  /// Index of the candidate bin containing theta.
  std::size_t bin_of(const ThetaVector& theta) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  ExperimentConfig config_;
  std::optional<CandidateSet> truth_;
  double truth_loss_ = 0.0;
  std::size_t truth_nodes_ = 0;
  WeightedPoints bins_;
  std::vector<std::string> warnings_;
};

struct CellResult {
  std::string estimator;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double regret = 0.0;
  double loss = 0.0;
  double l1_err = 0.0;
  std::optional<double> linf_err;
  std::optional<BoundResult> bound;
  std::size_t plan_nodes = 0;
  std::size_t candidates = 0;
  double wall_ms = 0.0;
  std::vector<std::string> flags;
  std::optional<ErrorCode> error;
  std::string error_message;

  bool ok() const { return !error.has_value(); }
};

/// One (estimator, N, seed) cell. Throws on failure.
CellResult run_experiment(const ExperimentContext& context, const EstimatorSpec& estimator, std::size_t n,
                          std::uint64_t seed);

/// Training parameters of cell (N, seed); shared by every estimator so
/// estimators are compared on the same data.
std::vector<ThetaVector> training_sample(const ExperimentConfig& config, std::size_t n, std::uint64_t seed);

/// The estimator's candidate set for a training sample drawn as in
/// run_experiment.
CandidateSet fit_candidates(const ExperimentContext& context, const EstimatorSpec& estimator, std::size_t n,
                            std::uint64_t seed);

struct ConfidenceInterval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Percentile bootstrap of the mean.
ConfidenceInterval bootstrap_mean_ci(const std::vector<double>& values, Rng& rng, std::size_t resamples = 2000,
                                     double level = 0.95);

/// Exact one-sided signed-rank test of "x tends to exceed y" on paired
/// samples. Zero differences are dropped; tied magnitudes get midranks.
double wilcoxon_greater_p(const std::vector<double>& x, const std::vector<double>& y);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares line through (log n, log error).
RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& error);

struct Aggregate {
  std::string estimator;
  std::size_t n = 0;
  std::size_t cells = 0;
  ConfidenceInterval regret;
  double mean_l1 = 0.0;
};

struct Manifest {
  std::string config_hash;
  Json config;
  std::vector<CellResult> cells;  // (estimator, N, seed) order
  std::vector<Aggregate> aggregates;
  std::vector<std::string> warnings;
  double truth_loss = 0.0;

  std::size_t failed() const;
  std::vector<double> regrets(const std::string& estimator, std::size_t n) const;
};

/// Runs every cell on a pool of `jobs` threads; the result does not depend
/// on scheduling. Failed cells are recorded and the sweep continues.
Manifest sweep(const ExperimentConfig& config, unsigned jobs = 1);

std::string manifest_csv(const Manifest& manifest);
Json manifest_json(const Manifest& manifest);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Groups sweep CSV rows of one estimator by N, takes the median of the
/// metric column and fits the rate. A two-column (n, error) CSV is used
/// as-is.
RateFit fit_rate_csv(const std::string& csv_text, const std::string& estimator, const std::string& metric);

/// Evaluates a named bound from a JSON parameter object.
BoundResult evaluate_bound(const std::string& which, const Json& params);

}  // namespace metaprior
