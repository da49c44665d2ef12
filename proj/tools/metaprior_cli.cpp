// Command-line front end. Talks to the library only through metaprior.h.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metaprior/metaprior.h"

namespace {

constexpr int kExitFailedCells = 1;
constexpr int kExitError = 2;

struct CallError {
  mp_status status;
  std::string message;
};

void check(mp_status status) {
  if (status != MP_OK) throw CallError{status, mp_last_error()};
}

struct Text {
  char* ptr = nullptr;
  ~Text() { mp_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
};

using Config = Handle<mp_config, mp_config_free>;
using Mdp = Handle<mp_mdp, mp_mdp_free>;
using Candidates = Handle<mp_candidates, mp_candidates_free>;
using Policy = Handle<mp_policy, mp_policy_free>;
using ManifestHandle = Handle<mp_manifest, mp_manifest_free>;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CallError{MP_ERR_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw CallError{MP_ERR_IO, "cannot write " + path};
}

/// Writes to --out when given, otherwise to stdout.
void deliver(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_file(out, text);
  }
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-prior estimation, Bayes-optimal planning and regret bounds"};
  app.set_version_flag("--version", std::string(mp_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned jobs = 1;
  app.add_option("--seed", seed, "Random seed (sweep: run only this seed)");
  app.add_option("--out", out, "Output file (sweep: output directory)");
  app.add_option("--jobs", jobs, "Worker threads for sweep")->check(CLI::PositiveNumber);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Fit a prior estimate from config samples or a sample file");
  std::string est_config, est_name = "kde", est_samples, est_form = "constant_free";
  std::size_t est_n = 0;
  double est_alpha = 1.0, est_h = 0.0;
  std::vector<double> est_lower, est_upper;
  auto* est_cfg_opt = estimate->add_option("--config", est_config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  estimate->add_option("--estimator", est_name, "Estimator name or kind");
  estimate->add_option("--n", est_n, "Training sample size")->needs(est_cfg_opt);
  auto* est_samples_opt =
      estimate->add_option("--samples", est_samples, "JSON array of parameter vectors")->check(CLI::ExistingFile);
  estimate->add_option("--alpha", est_alpha, "Hölder exponent for the bandwidth");
  estimate->add_option("--form", est_form, "Bandwidth form")->check(CLI::IsMember({"constant_free", "exact"}));
  estimate->add_option("--bandwidth", est_h, "Fixed bandwidth h");
  estimate->add_option("--lower", est_lower, "Truncation box lower corner")->delimiter(',');
  estimate->add_option("--upper", est_upper, "Truncation box upper corner")->delimiter(',');
  est_cfg_opt->excludes(est_samples_opt);

  // reduce
  auto* reduce = app.add_subcommand("reduce", "PCA projection of a sample file");
  std::string red_samples;
  std::size_t red_dim = 1;
  bool red_centered = false;
  reduce->add_option("--samples", red_samples, "JSON array of parameter vectors")->required()->check(CLI::ExistingFile);
  reduce->add_option("--dim", red_dim, "Target dimension d'")->required();
  reduce->add_flag("--centered", red_centered, "Use the covariance instead of the second moment");

  // mdp
  auto* mdp_cmd = app.add_subcommand("mdp", "Map a parameter vector to an MDP with the config's task space");
  std::string mdp_config;
  std::vector<double> mdp_theta;
  mdp_cmd->add_option("--config", mdp_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  mdp_cmd->add_option("--theta", mdp_theta, "Parameter vector")->required()->delimiter(',');

  // plan
  auto* plan = app.add_subcommand("plan", "Bayes-optimal policy for a candidate set");
  std::string plan_candidates;
  int plan_t = 0;
  bool plan_tree = false, plan_reset = false;
  std::size_t plan_budget = 0;
  plan->add_option("--candidates", plan_candidates, "Candidate set or estimate JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--T", plan_t, "Total steps")->required();
  plan->add_flag("--tree", plan_tree, "Store an explicit history tree");
  plan->add_flag("--reset-belief", plan_reset, "Reset the belief at episode boundaries");
  plan->add_option("--budget", plan_budget, "Node budget");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Expected loss or regret of a policy");
  std::string ev_policy, ev_mdp, ev_candidates;
  int ev_t = 0;
  bool ev_regret = false;
  evaluate->add_option("--policy", ev_policy, "Policy JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--T", ev_t, "Total steps")->required();
  auto* ev_mdp_opt = evaluate->add_option("--mdp", ev_mdp, "MDP JSON")->check(CLI::ExistingFile);
  auto* ev_cand_opt = evaluate->add_option("--candidates", ev_candidates, "Prior as a candidate set")->check(CLI::ExistingFile);
  evaluate->add_flag("--regret", ev_regret, "Report regret against the candidate prior")->needs(ev_cand_opt);
  ev_mdp_opt->excludes(ev_cand_opt);

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Evaluate a theoretical bound");
  std::string b_which, b_params;
  bounds->add_option("--which", b_which, "Bound name")
      ->required()
      ->check(CLI::IsMember(
          {"kde-sup", "kde-regret", "pca-kde-regret", "empirical-regret", "prior-error-regret", "pca-risk", "pca-excess-risk", "shaped-kde-sup", "truncation", "cd"}));
  bounds->add_option("--params", b_params, "Parameter JSON file")->required()->check(CLI::ExistingFile);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run estimator x N x seed cells and write CSV plus manifest");
  std::string sw_config;
  sweep->add_option("--config", sw_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  // rate
  auto* rate = app.add_subcommand("rate", "Fit a log-log convergence slope");
  std::string rate_input, rate_estimator = "kde", rate_metric = "linf_err";
  rate->add_option("--input", rate_input, "Sweep CSV or two-column n,error CSV")->required()->check(CLI::ExistingFile);
  rate->add_option("--estimator", rate_estimator, "Estimator rows to use");
  rate->add_option("--metric", rate_metric, "Metric column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*estimate) {
      Text json;
      if (!est_config.empty()) {
        if (est_n == 0) throw CallError{MP_ERR_INVALID_ARGUMENT, "--n is required with --config"};
        Config cfg;
        check(mp_config_load(est_config.c_str(), &cfg.ptr));
        check(mp_estimate(cfg.ptr, est_name.c_str(), est_n, seed.value_or(0), &json.ptr));
      } else if (!est_samples.empty()) {
        if (est_lower.size() != est_upper.size()) {
          throw CallError{MP_ERR_INVALID_ARGUMENT, "--lower and --upper need the same length"};
        }
        const std::string samples = slurp(est_samples);
        check(mp_kde_fit(samples.c_str(), est_alpha, est_form.c_str(), est_h,
                         est_lower.empty() ? nullptr : est_lower.data(),
                         est_upper.empty() ? nullptr : est_upper.data(), &json.ptr));
      } else {
        throw CallError{MP_ERR_INVALID_ARGUMENT, "estimate needs --config or --samples"};
      }
      deliver(out, json.str());
    } else if (*reduce) {
      Text json;
      const std::string samples = slurp(red_samples);
      check(mp_reduce(samples.c_str(), red_dim, red_centered ? 1 : 0, &json.ptr));
      deliver(out, json.str());
    } else if (*mdp_cmd) {
      Config cfg;
      Mdp m;
      Text json;
      check(mp_config_load(mdp_config.c_str(), &cfg.ptr));
      check(mp_config_map(cfg.ptr, mdp_theta.data(), mdp_theta.size(), &m.ptr));
      check(mp_mdp_to_json(m.ptr, &json.ptr));
      deliver(out, json.str());
    } else if (*plan) {
      Candidates cs;
      Policy pol;
      Text json;
      const std::string text = slurp(plan_candidates);
      check(mp_candidates_parse(text.c_str(), &cs.ptr));
      double value = 0.0;
      std::size_t nodes = 0;
      check(mp_plan(cs.ptr, plan_t, plan_tree ? 0 : 1, plan_reset ? 1 : 0, plan_budget, &pol.ptr, &value, &nodes));
      std::cerr << "Bayes loss " << number(value) << " over " << mp_candidates_size(cs.ptr) << " candidates, "
                << nodes << " nodes\n";
      check(mp_policy_to_json(pol.ptr, &json.ptr));
      deliver(out, json.str());
    } else if (*evaluate) {
      Policy pol;
      const std::string text = slurp(ev_policy);
      check(mp_policy_parse(text.c_str(), &pol.ptr));
      double value = 0.0;
      std::string label;
      if (!ev_mdp.empty()) {
        Mdp m;
        check(mp_mdp_parse(slurp(ev_mdp).c_str(), &m.ptr));
        check(mp_evaluate(pol.ptr, m.ptr, ev_t, &value));
        label = "loss";
      } else if (!ev_candidates.empty()) {
        Candidates cs;
        check(mp_candidates_parse(slurp(ev_candidates).c_str(), &cs.ptr));
        if (ev_regret) {
          check(mp_regret(pol.ptr, cs.ptr, ev_t, &value));
          label = "regret";
        } else {
          check(mp_bayes_loss(pol.ptr, cs.ptr, ev_t, &value));
          label = "bayes_loss";
        }
      } else {
        throw CallError{MP_ERR_INVALID_ARGUMENT, "evaluate needs --mdp or --candidates"};
      }
      deliver(out, "{\"" + label + "\": " + number(value) + "}\n");
    } else if (*bounds) {
      Text json;
      const std::string params = slurp(b_params);
      check(mp_bound(b_which.c_str(), params.c_str(), &json.ptr));
      deliver(out, json.str());
    } else if (*sweep) {
      Config cfg;
      check(mp_config_load(sw_config.c_str(), &cfg.ptr));
      if (seed) check(mp_config_set_seeds(cfg.ptr, &*seed, 1));
      Text summary_json;
      check(mp_config_summary(cfg.ptr, &summary_json.ptr));
      ManifestHandle m;
      check(mp_sweep(cfg.ptr, jobs, &m.ptr));
      Text csv, manifest, summary;
      check(mp_manifest_csv(m.ptr, &csv.ptr));
      check(mp_manifest_json(m.ptr, &manifest.ptr));
      check(mp_manifest_summary(m.ptr, &summary.ptr));
      // Output names come from the config; --out picks the directory.
      auto field = [&](const std::string& key) {
        const std::string s = summary_json.str();
        const auto k = s.find("\"" + key + "\": \"");
        if (k == std::string::npos) return key;
        const auto start = k + key.size() + 5;
        return s.substr(start, s.find('"', start) - start);
      };
      const std::filesystem::path dir = out.empty() ? std::filesystem::path(".") : std::filesystem::path(out);
      std::filesystem::create_directories(dir);
      write_file((dir / field("csv")).string(), csv.str());
      write_file((dir / field("manifest")).string(), manifest.str());
      std::cout << summary.str();
      const std::size_t failed = mp_manifest_failed(m.ptr);
      if (failed > 0) {
        std::cerr << failed << " cell(s) failed\n";
        return kExitFailedCells;
      }
    } else if (*rate) {
      const std::string csv = slurp(rate_input);
      double slope = 0.0, intercept = 0.0, r2 = 0.0;
      check(mp_fit_rate_csv(csv.c_str(), rate_estimator.c_str(), rate_metric.c_str(), &slope, &intercept, &r2));
      deliver(out, "{\"slope\": " + number(slope) + ", \"intercept\": " + number(intercept) + ", \"r2\": " +
                       number(r2) + "}\n");
    }
  } catch (const CallError& e) {
    std::cerr << "error [" << mp_status_name(e.status) << "]: " << e.message << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
