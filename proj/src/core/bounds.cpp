#include "metaprior/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "metaprior/error.hpp"

namespace metaprior {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void positive(double v, const char* what) {
  require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidArgument, std::string(what) + " must be positive");
}

void nonnegative(double v, const char* what) {
  require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, std::string(what) + " must be nonnegative");
}

void holder_exponent(double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::InvalidArgument, "Hölder exponent must lie in (0, 1]");
}

void dimension(double d, const char* what) {
  require(std::isfinite(d) && d >= 1.0, ErrorCode::InvalidArgument, std::string(what) + " must be at least 1");
}

void sample_size(double n) {
  require(std::isfinite(n) && n >= 2.0, ErrorCode::InvalidArgument, "n must be at least 2");
}

double rate(double n, double d, double alpha) { return std::pow(std::log(n) / n, alpha / (2.0 * alpha + d)); }

void mark_vacuous(BoundResult& r, double c_max, double total_steps) {
  r.vacuous = r.value > c_max * total_steps;
  if (r.vacuous) r.flags.emplace_back("vacuous");
}

}  // namespace

double BoundResult::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t.value;
  }
  fail(ErrorCode::InvalidArgument, "no bound term named " + name);
}

BoundResult cd_constant(double d, double alpha, double c_alpha, double vol, double delta_max) {
  dimension(d, "d");
  holder_exponent(alpha);
  nonnegative(c_alpha, "C_alpha");
  positive(vol, "|Theta|");
  nonnegative(delta_max, "Delta_max");
  const double bias = c_alpha * std::pow(2.0, (alpha - 1.0) / 2.0);
  const double variance = 16.0 * d * std::sqrt(c_alpha * std::pow(delta_max, alpha) + 1.0 / vol) /
                          (std::numbers::sqrt2 * std::pow(kTwoPi, d / 4.0));
  const double tail = 64.0 * d * d / std::pow(kTwoPi, d / 2.0);
  BoundResult r;
  r.value = bias + variance + tail;
  r.terms = {{"holder", bias}, {"variance", variance}, {"tail", tail}};
  return r;
}

BoundResult kde_sup_bound(double n, double d, double alpha, double c_d) {
  sample_size(n);
  dimension(d, "d");
  holder_exponent(alpha);
  nonnegative(c_d, "C_d");
  BoundResult r;
  const double factor = rate(n, d, alpha);
  r.value = c_d * factor;
  r.terms = {{"C_d", c_d}, {"rate", factor}};
  return r;
}

BoundResult regret_bound_kde(double c_max, double total_steps, double vol, double c_d, double n, double d,
                             double alpha) {
  positive(c_max, "C_max");
  positive(total_steps, "T");
  positive(vol, "|Theta|");
  const BoundResult sup = kde_sup_bound(n, d, alpha, c_d);
  BoundResult r;
  r.value = 2.0 * c_max * total_steps * vol * sup.value;
  r.terms = {{"sup_error", sup.value}, {"rate", sup.term("rate")}, {"C_d", c_d}};
  mark_vacuous(r, c_max, total_steps);
  return r;
}

BoundResult regret_bound_l1(double c_max, double total_steps, double l1_err) {
  positive(c_max, "C_max");
  positive(total_steps, "T");
  require(l1_err >= 0.0 && l1_err <= 2.0 + 1e-12, ErrorCode::InvalidArgument, "L1 error must lie in [0, 2]");
  BoundResult r;
  r.value = 2.0 * c_max * total_steps * l1_err;
  r.terms = {{"l1_error", l1_err}};
  mark_vacuous(r, c_max, total_steps);
  return r;
}

BoundResult regret_bound_linf(double c_max, double total_steps, double vol, double linf_err) {
  positive(c_max, "C_max");
  positive(total_steps, "T");
  positive(vol, "|Theta|");
  nonnegative(linf_err, "sup error");
  BoundResult r;
  r.value = 2.0 * c_max * total_steps * vol * linf_err;
  r.terms = {{"sup_error", linf_err}};
  mark_vacuous(r, c_max, total_steps);
  return r;
}

BoundResult regret_bound_empirical(double c_max, double total_steps, double card_m, double n, double alpha) {
  positive(c_max, "C_max");
  positive(total_steps, "T");
  require(card_m >= 1.0, ErrorCode::InvalidArgument, "|M| must be at least 1");
  sample_size(n);
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "confidence exponent must lie in (0, 1)");
  const double l1 = std::sqrt(2.0 * (alpha * std::log(n * std::numbers::ln2) + card_m + 1.0) / n);
  BoundResult r;
  r.value = 2.0 * c_max * total_steps * l1;
  r.terms = {{"l1_error", l1}, {"confidence", 1.0 - std::pow(n, -alpha)}};
  mark_vacuous(r, c_max, total_steps);
  return r;
}

BoundResult pca_excess_risk_bound(double c_sg, double d_low, double trace_sigma, double n, double lambda_d,
                               double lambda_next) {
  positive(c_sg, "C_sg");
  dimension(d_low, "d'");
  nonnegative(trace_sigma, "tr(Sigma)");
  require(std::isfinite(n) && n >= 1.0, ErrorCode::InvalidArgument, "n must be at least 1");
  require(lambda_next >= 0.0 && lambda_d >= lambda_next, ErrorCode::InvalidArgument,
          "eigenvalues must satisfy lambda_d >= lambda_{d+1} >= 0");
  const double c2 = c_sg * c_sg;
  const double slow = 8.0 * c2 * std::sqrt(d_low) * trace_sigma / std::sqrt(n);
  const double gap = lambda_d - lambda_next;
  const double fast = gap > 0.0 ? 64.0 * c2 * c2 * trace_sigma * trace_sigma / (n * gap)
                                : std::numeric_limits<double>::infinity();
  BoundResult r;
  r.value = std::min(slow, fast);
  r.terms = {{"slow_branch", slow}, {"fast_branch", fast}};
  r.flags.emplace_back(slow <= fast ? "slow_branch_active" : "fast_branch_active");
  return r;
}

double pca_excess_risk_crossover(double c_sg, double d_low, double trace_sigma, double lambda_d, double lambda_next) {
  positive(c_sg, "C_sg");
  dimension(d_low, "d'");
  positive(trace_sigma, "tr(Sigma)");
  const double gap = lambda_d - lambda_next;
  positive(gap, "eigengap");
  const double c2 = c_sg * c_sg;
  return 64.0 * c2 * c2 * trace_sigma * trace_sigma / (d_low * gap * gap);
}

BoundResult pca_risk_bound(double c_sg, double d_low, double trace_sigma, double n, double lambda_d,
                           double lambda_next, double epsilon, double d) {
  nonnegative(epsilon, "epsilon");
  require(d >= d_low, ErrorCode::InvalidArgument, "need d' <= d");
  BoundResult r = pca_excess_risk_bound(c_sg, d_low, trace_sigma, n, lambda_d, lambda_next);
  const double tail = epsilon * (d - d_low);
  r.terms.push_back({"estimation", r.value});
  r.terms.push_back({"residual", tail});
  r.value += tail;
  return r;
}

BoundResult regret_bound_pca_kde(const BoundInputs& in) {
  positive(in.c_max, "C_max");
  positive(in.total_steps, "T");
  nonnegative(in.c_g, "C_g");
  positive(in.vol_low, "|Theta_L|");
  const BoundResult cd = cd_constant(in.d_low, in.alpha_low, in.c_alpha_low, in.vol_low, in.delta_max_low);
  const BoundResult sup = kde_sup_bound(in.n, in.d_low, in.alpha_low, cd.value);
  const double t = in.total_steps;
  const double kde_term = 2.0 * in.c_max * t * in.vol_low * sup.value;
  // With C'_sg = 8 C_sg^2 tr(Sigma) the PCA part is the PCA risk bound.
  const BoundResult risk =
      pca_risk_bound(in.c_sg, in.d_low, in.trace_sigma, in.n, in.lambda_d, in.lambda_next, in.epsilon, in.d);
  const double pca_term = 2.0 * in.c_max * t * t * in.c_g * std::sqrt(risk.value);
  BoundResult r;
  r.value = kde_term + pca_term;
  r.terms = {{"kde_term", kde_term},
             {"pca_term", pca_term},
             {"C_d_low", cd.value},
             {"pca_risk", risk.value},
             {"C_sg_prime", 8.0 * in.c_sg * in.c_sg * in.trace_sigma}};
  r.flags = risk.flags;
  mark_vacuous(r, in.c_max, t);
  return r;
}

BoundResult shaped_kde_sup_bound(double c_prime, double h, double alpha, double sigma_min, double n, double d) {
  positive(c_prime, "C'");
  positive(h, "h");
  holder_exponent(alpha);
  positive(sigma_min, "sigma_min");
  sample_size(n);
  dimension(d, "d");
  const double bias = std::pow(h, alpha) / std::pow(sigma_min, alpha / 2.0);
  const double variance = std::sqrt(std::log(n) / (n * std::pow(h, d)));
  BoundResult r;
  r.value = c_prime * (bias + variance);
  r.terms = {{"bias", c_prime * bias}, {"variance", c_prime * variance}};
  r.valid = h > std::pow(std::log(n) / n, 1.0 / d);
  if (!r.valid) r.flags.emplace_back("bandwidth_below_floor");
  return r;
}

BoundResult truncation_inflation(double u, double vol) {
  nonnegative(u, "U");
  positive(vol, "|Theta|");
  require(vol * u < 1.0, ErrorCode::DomainError, "truncation bound needs |Theta| U < 1");
  BoundResult r;
  r.value = (1.0 + vol) * u / (1.0 - vol * u);
  r.terms = {{"U", u}, {"mass_deficit", vol * u}};
  return r;
}

}  // namespace metaprior
