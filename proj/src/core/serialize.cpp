#include "metaprior/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "metaprior/error.hpp"

namespace metaprior {

namespace {

Json tensor3(const std::vector<double>& flat, std::size_t a, std::size_t b, std::size_t c) {
  Json out = Json::array();
  for (std::size_t i = 0; i < a; ++i) {
    Json mid = Json::array();
    for (std::size_t j = 0; j < b; ++j) {
      const auto first = flat.begin() + static_cast<std::ptrdiff_t>((i * b + j) * c);
      mid.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(c)));
    }
    out.push_back(std::move(mid));
  }
  return out;
}

std::vector<double> flatten3(const Json& j, std::size_t a, std::size_t b, std::size_t c, const char* what) {
  std::vector<double> flat;
  flat.reserve(a * b * c);
  auto mismatch = [&] { fail(ErrorCode::DimensionMismatch, std::string(what) + " has the wrong shape"); };
  if (!j.is_array() || j.size() != a) mismatch();
  for (const auto& mid : j) {
    if (!mid.is_array() || mid.size() != b) mismatch();
    for (const auto& row : mid) {
      if (!row.is_array() || row.size() != c) mismatch();
      for (const auto& v : row) flat.push_back(v.get<double>());
    }
  }
  return flat;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  require(j.is_array() && !j.empty(), ErrorCode::Parse, "matrix must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols, ErrorCode::DimensionMismatch,
            "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char* representation_name(PolicyRepresentation r) {
  switch (r) {
    case PolicyRepresentation::BeliefLookup:
      return "belief_lookup";
    case PolicyRepresentation::Tree:
      return "tree";
    case PolicyRepresentation::Markov:
      return "markov";
  }
  return "?";
}

template <typename F>
auto parse_guard(F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

}  // namespace

Json to_json(const DiscreteMdp& mdp) {
  return Json{{"format_version", kFormatVersion},
              {"n_states", mdp.n_states},
              {"n_actions", mdp.n_actions},
              {"cost_values", mdp.cost_values},
              {"horizon", mdp.horizon},
              {"c_max", mdp.c_max},
              {"init_dist", mdp.init_dist},
              {"transition", tensor3(mdp.transition, mdp.n_states, mdp.n_actions, mdp.n_states)},
              {"cost_dist", tensor3(mdp.cost_dist, mdp.n_states, mdp.n_actions, mdp.n_costs())}};
}

DiscreteMdp mdp_from_json(const Json& j) {
  return parse_guard([&] {
    DiscreteMdp m;
    m.n_states = get_required<std::size_t>(j, "n_states");
    m.n_actions = get_required<std::size_t>(j, "n_actions");
    m.cost_values = get_required<std::vector<double>>(j, "cost_values");
    m.horizon = get_required<int>(j, "horizon");
    m.init_dist = get_required<std::vector<double>>(j, "init_dist");
    double hi = 0.0;
    for (double c : m.cost_values) hi = std::max(hi, std::abs(c));
    m.c_max = get_or<double>(j, "c_max", hi);
    m.transition = flatten3(j.at("transition"), m.n_states, m.n_actions, m.n_states, "transition");
    m.cost_dist = flatten3(j.at("cost_dist"), m.n_states, m.n_actions, m.n_costs(), "cost_dist");
    m.validate();
    return m;
  });
}

Json to_json(const CandidateSet& candidates) {
  Json mdps = Json::array();
  for (const auto& m : candidates.mdps()) mdps.push_back(to_json(m));
  return Json{{"format_version", kFormatVersion}, {"weights", candidates.weights()}, {"mdps", std::move(mdps)}};
}

CandidateSet candidates_from_json(const Json& j) {
  return parse_guard([&] {
    std::vector<DiscreteMdp> mdps;
    for (const auto& m : j.at("mdps")) mdps.push_back(mdp_from_json(m));
    return CandidateSet(std::move(mdps), get_required<std::vector<double>>(j, "weights"));
  });
}

Json to_json(const ThetaVector& theta) { return theta.values(); }

ThetaVector theta_from_json(const Json& j) {
  return parse_guard([&] {
    if (j.is_number()) return ThetaVector{j.get<double>()};
    return ThetaVector(j.get<std::vector<double>>());
  });
}

std::vector<ThetaVector> thetas_from_json(const Json& j) {
  require(j.is_array(), ErrorCode::Parse, "expected an array of parameter vectors");
  std::vector<ThetaVector> out;
  out.reserve(j.size());
  for (const auto& t : j) out.push_back(theta_from_json(t));
  return out;
}

Json to_json(const KdeEstimate& est) {
  Json samples = Json::array();
  for (const auto& s : est.samples()) samples.push_back(to_json(s));
  Json out{{"format_version", kFormatVersion},
           {"kind", "kde"},
           {"kernel", "gaussian"},
           {"h", est.bandwidth().h()},
           {"h0", matrix_json(est.bandwidth().h0())},
           {"samples", std::move(samples)},
           {"truncation", nullptr}};
  if (const auto& tr = est.truncation()) {
    out["truncation"] = Json{{"lower", tr->support.lower()},
                             {"upper", tr->support.upper()},
                             {"total_mass", tr->total_mass}};
  }
  return out;
}

KdeEstimate kde_from_json(const Json& j) {
  return parse_guard([&] {
    const auto h = get_required<double>(j, "h");
    const auto bw = BandwidthSpec::with_shape(h, matrix_from_json(j.at("h0")));
    KdeEstimate est = kde_fit(thetas_from_json(j.at("samples")), bw);
    if (j.contains("truncation") && !j.at("truncation").is_null()) {
      const auto& tr = j.at("truncation");
      est = kde_truncate(est, TaskSupport::box(get_required<std::vector<double>>(tr, "lower"),
                                               get_required<std::vector<double>>(tr, "upper")));
    }
    return est;
  });
}

Json to_json(const CategoricalEstimate& est) {
  return Json{{"format_version", kFormatVersion},
              {"kind", "categorical"},
              {"n", est.n()},
              {"counts", est.counts()},
              {"probabilities", est.probabilities()}};
}

Json to_json(const ProjectionMap& map) {
  return Json{{"format_version", kFormatVersion},
              {"w", matrix_json(map.w())},
              {"eigenvalues", vector_json(map.eigenvalues())},
              {"centered", map.centered()},
              {"mean", vector_json(map.mean())},
              {"rank_deficient", map.rank_deficient()}};
}

ProjectionMap projection_from_json(const Json& j) {
  return parse_guard([&] {
    return ProjectionMap::from_parts(matrix_from_json(j.at("w")), vector_from_json(j.at("eigenvalues")),
                                     get_or<bool>(j, "centered", false), vector_from_json(j.at("mean")));
  });
}

Json to_json(const HistoryPolicy& policy) {
  Json out{{"format_version", kFormatVersion},
           {"representation", representation_name(policy.representation())},
           {"total_steps", policy.total_steps()},
           {"horizon", policy.horizon()},
           {"n_actions", policy.n_actions()}};
  switch (policy.representation()) {
    case PolicyRepresentation::BeliefLookup: {
      // Sorted so the file does not depend on hash-table iteration order.
      std::vector<std::pair<DecodedBeliefKey, std::uint8_t>> rows;
      rows.reserve(policy.belief_table().size());
      for (const auto& [k, a] : policy.belief_table()) rows.emplace_back(parse_belief_key(k), a);
      std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
        return std::tie(x.first.t, x.first.s, x.first.quantized) < std::tie(y.first.t, y.first.s, y.first.quantized);
      });
      Json table = Json::array();
      for (const auto& [k, a] : rows) table.push_back(Json{{"t", k.t}, {"s", k.s}, {"belief", k.quantized}, {"a", a}});
      out["candidates"] = to_json(policy.candidates());
      out["reset_belief"] = policy.options().reset_belief;
      out["table"] = std::move(table);
      break;
    }
    case PolicyRepresentation::Tree: {
      std::vector<std::pair<std::vector<std::int32_t>, std::uint8_t>> rows;
      rows.reserve(policy.history_table().size());
      for (const auto& [k, a] : policy.history_table()) rows.emplace_back(parse_history_key(k), a);
      std::sort(rows.begin(), rows.end());
      Json table = Json::array();
      for (const auto& [h, a] : rows) table.push_back(Json{{"history", h}, {"a", a}});
      out["table"] = std::move(table);
      break;
    }
    case PolicyRepresentation::Markov:
      out["actions"] = policy.markov_actions();
      break;
  }
  return out;
}

HistoryPolicy policy_from_json(const Json& j) {
  return parse_guard([&] {
    const auto rep = get_required<std::string>(j, "representation");
    const auto steps = get_required<int>(j, "total_steps");
    const auto horizon = get_required<int>(j, "horizon");
    const auto n_actions = get_required<std::size_t>(j, "n_actions");
    if (rep == "belief_lookup") {
      PlanOptions options;
      options.reset_belief = get_or<bool>(j, "reset_belief", false);
      HistoryPolicy::BeliefTable table;
      for (const auto& row : j.at("table")) {
        table.emplace(make_belief_key(row.at("t").get<int>(), row.at("s").get<std::size_t>(),
                                      row.at("belief").get<std::vector<std::int64_t>>()),
                      row.at("a").get<std::uint8_t>());
      }
      return HistoryPolicy::belief_lookup(candidates_from_json(j.at("candidates")), steps, options,
                                          std::move(table));
    }
    if (rep == "tree") {
      HistoryPolicy::HistoryTable table;
      for (const auto& row : j.at("table")) {
        table.emplace(history_key(row.at("history").get<std::vector<std::int32_t>>()),
                      row.at("a").get<std::uint8_t>());
      }
      return HistoryPolicy::tree(n_actions, steps, horizon, std::move(table));
    }
    if (rep == "markov") {
      return HistoryPolicy::markov(n_actions, horizon, j.at("actions").get<std::vector<std::vector<std::uint8_t>>>());
    }
    fail(ErrorCode::Parse, "unknown policy representation '" + rep + "'");
  });
}

Json to_json(const BoundResult& result) {
  Json terms = Json::object();
  for (const auto& t : result.terms) terms[t.name] = t.value;
  return Json{{"value", result.value},
              {"valid", result.valid},
              {"vacuous", result.vacuous},
              {"flags", result.flags},
              {"terms", std::move(terms)}};
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) { return parse_json(read_text_file(path)); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  out << text;
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path);
}

}  // namespace metaprior
