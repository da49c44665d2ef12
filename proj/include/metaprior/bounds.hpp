#pragma once

#include <string>
#include <vector>

namespace metaprior {

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

/// A bound value with its ingredients. Values are never clamped; regret
/// bounds above C_max * T are flagged vacuous.
struct BoundResult {
  double value = 0.0;
  bool valid = true;
  bool vacuous = false;
  std::vector<std::string> flags;
  std::vector<BoundTerm> terms;

  double term(const std::string& name) const;
};

/// Every constant that appears in the bounds. Logs are natural.
struct BoundInputs {
  double n = 0;
  double d = 0;
  double d_low = 0;  // d'
  double alpha = 1.0;
  double alpha_low = 1.0;  // alpha'
  double c_alpha = 1.0;
  double c_alpha_low = 1.0;
  double c_max = 1.0;
  double total_steps = 1;  // T
  double horizon = 1;      // H
  double vol = 1.0;
  double vol_low = 1.0;
  double delta_max = 1.0;
  double delta_max_low = 1.0;
  double c_sg = 1.0;
  double trace_sigma = 1.0;
  double lambda_d = 0.0;       // lambda_{d'}
  double lambda_next = 0.0;    // lambda_{d'+1}
  double epsilon = 0.0;
  double c_g = 1.0;
  double card_m = 1;  // |M|
};

BoundResult cd_constant(double d, double alpha, double c_alpha, double vol, double delta_max);
/// C_d (log n / n)^{alpha / (2 alpha + d)}.
BoundResult kde_sup_bound(double n, double d, double alpha, double c_d);
BoundResult regret_bound_kde(double c_max, double total_steps, double vol, double c_d, double n, double d,
                             double alpha);
BoundResult regret_bound_l1(double c_max, double total_steps, double l1_err);
BoundResult regret_bound_linf(double c_max, double total_steps, double vol, double linf_err);
BoundResult regret_bound_empirical(double c_max, double total_steps, double card_m, double n, double alpha);
BoundResult pca_excess_risk_bound(double c_sg, double d_low, double trace_sigma, double n, double lambda_d,
                               double lambda_next);
/// Sample size at which the two branches of the PCA bound are equal.
double pca_excess_risk_crossover(double c_sg, double d_low, double trace_sigma, double lambda_d, double lambda_next);
BoundResult pca_risk_bound(double c_sg, double d_low, double trace_sigma, double n, double lambda_d,
                           double lambda_next, double epsilon, double d);
BoundResult regret_bound_pca_kde(const BoundInputs& in);
/// C' (h^alpha / sigma_min^{alpha/2} + sqrt(log n / (n h^d))); valid only for
/// h > (log n / n)^{1/d}.
BoundResult shaped_kde_sup_bound(double c_prime, double h, double alpha, double sigma_min, double n, double d);
/// (1 + |Theta|) U / (1 - |Theta| U); DomainError unless |Theta| U < 1.
BoundResult truncation_inflation(double u, double vol);

}  // namespace metaprior
