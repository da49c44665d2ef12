#include "metaprior/metaprior.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "metaprior/dimred.hpp"
#include "metaprior/error.hpp"
#include "metaprior/harness.hpp"
#include "metaprior/serialize.hpp"

using namespace metaprior;

struct mp_config {
  ExperimentConfig value;
};
struct mp_mdp {
  DiscreteMdp value;
};
struct mp_candidates {
  CandidateSet value;
};
struct mp_policy {
  HistoryPolicy value;
};
struct mp_manifest {
  Manifest value;
};

namespace {

thread_local std::string last_error;

template <typename F>
mp_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return MP_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return static_cast<mp_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MP_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const Json& j, char** out) {
  need(out, "output");
  *out = dup_string(j.dump(2));
}

ThetaVector theta_of(const double* x, std::size_t dim) {
  need(x, "theta");
  return ThetaVector(std::vector<double>(x, x + dim));
}

}  // namespace

extern "C" {

const char* mp_version(void) { return kVersion; }

const char* mp_status_name(mp_status status) {
  if (status == MP_OK) return "Ok";
  if (status == MP_ERR_INTERNAL) return "Internal";
  if (status >= MP_ERR_INVALID_ARGUMENT && status <= MP_ERR_PARSE) {
    return error_code_name(static_cast<ErrorCode>(static_cast<int>(status))).data();
  }
  return "Unknown";
}

const char* mp_last_error(void) { return last_error.c_str(); }

void mp_string_free(char* text) { std::free(text); }

mp_status mp_config_load(const char* path, mp_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "output");
    *out = new mp_config{ExperimentConfig::load(path)};
  });
}

mp_status mp_config_parse(const char* json, mp_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "output");
    *out = new mp_config{ExperimentConfig::from_json(parse_json(json))};
  });
}

void mp_config_free(mp_config* config) { delete config; }

mp_status mp_config_set_seeds(mp_config* config, const uint64_t* seeds, size_t count) {
  return guarded([&] {
    need(config, "config");
    need(seeds, "seeds");
    require(count > 0, ErrorCode::InvalidArgument, "at least one seed is needed");
    config->value.seeds.assign(seeds, seeds + count);
  });
}

mp_status mp_config_summary(const mp_config* config, char** out_json) {
  return guarded([&] {
    need(config, "config");
    const ExperimentConfig& c = config->value;
    Json est = Json::array();
    for (const auto& e : c.estimators) est.push_back(e.name);
    emit(Json{{"hash", c.hash_hex()},
              {"estimators", est},
              {"N_train", c.n_train},
              {"seeds", c.seeds},
              {"T", c.total_steps},
              {"H", c.mapping().horizon()},
              {"csv", c.csv_path},
              {"manifest", c.manifest_path}},
         out_json);
  });
}

mp_status mp_config_map(const mp_config* config, const double* theta, size_t dim, mp_mdp** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "output");
    *out = new mp_mdp{config->value.mapping().map(theta_of(theta, dim))};
  });
}

mp_status mp_estimate(const mp_config* config, const char* estimator, size_t n, uint64_t seed, char** out_json) {
  return guarded([&] {
    need(config, "config");
    need(estimator, "estimator");
    const ExperimentConfig& cfg = config->value;
    const auto it = std::find_if(cfg.estimators.begin(), cfg.estimators.end(),
                                 [&](const EstimatorSpec& e) { return e.name == estimator; });
    EstimatorSpec spec;
    if (it != cfg.estimators.end()) {
      spec = *it;
    } else {
      try {
        spec.kind = estimator_kind_from_name(estimator);
      } catch (const Error&) {
        throw Error(ErrorCode::InvalidArgument, std::string("unknown estimator ") + estimator);
      }
      spec.name = estimator;
    }
    const auto train = training_sample(cfg, n, seed);
    Json samples = Json::array();
    for (const auto& t : train) samples.push_back(to_json(t));
    Json out{{"estimator", spec.name}, {"N", n}, {"seed", seed}, {"training_samples", samples}};
    if (spec.kind == EstimatorKind::Kde || spec.kind == EstimatorKind::TruncatedKde) {
      KdeEstimate kde = spec.bandwidth ? kde_fit(train, BandwidthSpec::isotropic(*spec.bandwidth, train[0].dim()))
                                       : kde_fit_auto(train, spec.alpha, spec.form);
      if (spec.kind == EstimatorKind::TruncatedKde) kde = kde_truncate(kde, cfg.mapping().support());
      out["estimate"] = to_json(kde);
    } else if (spec.kind == EstimatorKind::PcaKde) {
      const auto low = pca_kde_pipeline(train, spec.reduced_dim, spec.alpha, spec.centered, spec.form);
      out["estimate"] = Json{{"kind", "pca-kde"},
                             {"projection", to_json(low.projection())},
                             {"low_kde", to_json(low.low_kde())}};
    } else {
      out["estimate"] = nullptr;
    }
    const ExperimentContext ctx(cfg);
    out["candidates"] = to_json(fit_candidates(ctx, spec, n, seed));
    emit(out, out_json);
  });
}

mp_status mp_kde_fit(const char* samples_json, double alpha, const char* form, double h, const double* lower,
                     const double* upper, char** out_json) {
  return guarded([&] {
    need(samples_json, "samples");
    const auto samples = thetas_from_json(parse_json(samples_json));
    require(!samples.empty(), ErrorCode::EmptySample, "no samples");
    const std::size_t d = samples[0].dim();
    BandwidthForm bf = BandwidthForm::ConstantFree;
    if (form != nullptr && std::strcmp(form, "exact") == 0) {
      bf = BandwidthForm::Exact;
    } else {
      require(form == nullptr || std::strcmp(form, "constant_free") == 0, ErrorCode::InvalidArgument,
              "form must be constant_free or exact");
    }
    require(std::isfinite(h) && h >= 0.0, ErrorCode::InvalidBandwidth, "bandwidth must be positive, or 0 for automatic");
    KdeEstimate kde = h > 0.0 ? kde_fit(samples, BandwidthSpec::isotropic(h, d)) : kde_fit_auto(samples, alpha, bf);
    require((lower == nullptr) == (upper == nullptr), ErrorCode::InvalidArgument,
            "truncation needs both lower and upper");
    if (lower != nullptr) {
      kde = kde_truncate(kde, TaskSupport::box(std::vector<double>(lower, lower + d),
                                               std::vector<double>(upper, upper + d)));
    }
    Json out = to_json(kde);
    out["bandwidth_valid"] = h > 0.0 ? Json(nullptr) : Json(optimal_bandwidth(samples.size(), d, alpha, bf).valid);
    emit(out, out_json);
  });
}

mp_status mp_kde_eval(const char* kde_json, const double* x, size_t dim, double* out) {
  return guarded([&] {
    need(kde_json, "kde");
    need(out, "output");
    *out = kde_from_json(parse_json(kde_json)).eval(theta_of(x, dim));
  });
}

mp_status mp_reduce(const char* samples_json, size_t reduced_dim, int centered, char** out_json) {
  return guarded([&] {
    need(samples_json, "samples");
    const auto samples = thetas_from_json(parse_json(samples_json));
    const ProjectionMap map = pca_fit(samples, reduced_dim, centered != 0);
    Json projected = Json::array();
    for (const auto& s : samples) projected.push_back(to_json(map.project(s)));
    Json out = to_json(map);
    out["empirical_risk"] = empirical_risk(map, samples);
    out["projected"] = std::move(projected);
    emit(out, out_json);
  });
}

mp_status mp_mdp_parse(const char* json, mp_mdp** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "output");
    *out = new mp_mdp{mdp_from_json(parse_json(json))};
  });
}

mp_status mp_mdp_to_json(const mp_mdp* mdp, char** out_json) {
  return guarded([&] {
    need(mdp, "mdp");
    emit(to_json(mdp->value), out_json);
  });
}

void mp_mdp_free(mp_mdp* mdp) { delete mdp; }

mp_status mp_candidates_parse(const char* json, mp_candidates** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "output");
    const Json j = parse_json(json);
    // Accept both a bare candidate set and an estimate record holding one.
    *out = new mp_candidates{candidates_from_json(j.contains("candidates") ? j.at("candidates") : j)};
  });
}

mp_status mp_candidates_to_json(const mp_candidates* candidates, char** out_json) {
  return guarded([&] {
    need(candidates, "candidates");
    emit(to_json(candidates->value), out_json);
  });
}

size_t mp_candidates_size(const mp_candidates* candidates) { return candidates ? candidates->value.size() : 0; }

void mp_candidates_free(mp_candidates* candidates) { delete candidates; }

mp_status mp_plan(const mp_candidates* candidates, int total_steps, int merge, int reset_belief, size_t node_budget,
                  mp_policy** out, double* value, size_t* nodes) {
  return guarded([&] {
    need(candidates, "candidates");
    need(out, "output");
    PlanOptions opt;
    opt.merge = merge != 0;
    opt.reset_belief = reset_belief != 0;
    if (node_budget > 0) opt.node_budget = node_budget;
    PlanResult r = bayes_optimal_plan(candidates->value, total_steps, opt);
    if (value) *value = r.value;
    if (nodes) *nodes = r.nodes;
    *out = new mp_policy{std::move(r.policy)};
  });
}

mp_status mp_policy_parse(const char* json, mp_policy** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "output");
    *out = new mp_policy{policy_from_json(parse_json(json))};
  });
}

mp_status mp_policy_to_json(const mp_policy* policy, char** out_json) {
  return guarded([&] {
    need(policy, "policy");
    need(out_json, "output");
    *out_json = dup_string(to_json(policy->value).dump());
  });
}

void mp_policy_free(mp_policy* policy) { delete policy; }

mp_status mp_evaluate(const mp_policy* policy, const mp_mdp* mdp, int total_steps, double* value) {
  return guarded([&] {
    need(policy, "policy");
    need(mdp, "mdp");
    need(value, "output");
    *value = evaluate_policy(policy->value, mdp->value, total_steps);
  });
}

mp_status mp_bayes_loss(const mp_policy* policy, const mp_candidates* prior, int total_steps, double* value) {
  return guarded([&] {
    need(policy, "policy");
    need(prior, "prior");
    need(value, "output");
    *value = evaluate_bayes_loss(policy->value, prior->value, total_steps);
  });
}

mp_status mp_regret(const mp_policy* policy, const mp_candidates* truth, int total_steps, double* value) {
  return guarded([&] {
    need(policy, "policy");
    need(truth, "truth");
    need(value, "output");
    *value = regret(policy->value, truth->value, total_steps);
  });
}

mp_status mp_bound(const char* which, const char* params_json, char** out_json) {
  return guarded([&] {
    need(which, "which");
    need(params_json, "params");
    emit(to_json(evaluate_bound(which, parse_json(params_json))), out_json);
  });
}

mp_status mp_sweep(const mp_config* config, unsigned jobs, mp_manifest** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "output");
    *out = new mp_manifest{sweep(config->value, jobs)};
  });
}

mp_status mp_manifest_csv(const mp_manifest* manifest, char** out_csv) {
  return guarded([&] {
    need(manifest, "manifest");
    need(out_csv, "output");
    *out_csv = dup_string(manifest_csv(manifest->value));
  });
}

mp_status mp_manifest_json(const mp_manifest* manifest, char** out_json) {
  return guarded([&] {
    need(manifest, "manifest");
    emit(manifest_json(manifest->value), out_json);
  });
}

mp_status mp_manifest_summary(const mp_manifest* manifest, char** out_text) {
  return guarded([&] {
    need(manifest, "manifest");
    need(out_text, "output");
    const Manifest& m = manifest->value;
    std::ostringstream ss;
    ss << "config " << m.config_hash << ", Bayes-optimal loss " << m.truth_loss << '\n';
    char line[256];
    for (const auto& a : m.aggregates) {
      std::snprintf(line, sizeof line, "%-16s N=%-6zu cells=%-4zu regret %.6g [%.6g, %.6g]\n", a.estimator.c_str(),
                    a.n, a.cells, a.regret.mean, a.regret.lower, a.regret.upper);
      ss << line;
    }
    for (const auto& c : m.cells) {
      if (!c.ok()) {
        ss << "failed: " << c.estimator << " N=" << c.n << " seed=" << c.seed << " "
           << error_code_name(*c.error) << ": " << c.error_message << '\n';
      }
    }
    for (const auto& w : m.warnings) ss << "warning: " << w << '\n';
    *out_text = dup_string(ss.str());
  });
}

size_t mp_manifest_failed(const mp_manifest* manifest) { return manifest ? manifest->value.failed() : 0; }

void mp_manifest_free(mp_manifest* manifest) { delete manifest; }

mp_status mp_fit_rate(const double* n, const double* error, size_t count, double* slope, double* intercept,
                      double* r2) {
  return guarded([&] {
    need(n, "n");
    need(error, "error");
    const RateFit f = fit_rate(std::vector<double>(n, n + count), std::vector<double>(error, error + count));
    if (slope) *slope = f.slope;
    if (intercept) *intercept = f.intercept;
    if (r2) *r2 = f.r2;
  });
}

mp_status mp_fit_rate_csv(const char* csv_text, const char* estimator, const char* metric, double* slope,
                          double* intercept, double* r2) {
  return guarded([&] {
    need(csv_text, "csv");
    const RateFit f = fit_rate_csv(csv_text, estimator ? estimator : "", metric ? metric : "");
    if (slope) *slope = f.slope;
    if (intercept) *intercept = f.intercept;
    if (r2) *r2 = f.r2;
  });
}

}  // extern "C"
