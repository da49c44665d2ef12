#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "metaprior/bounds.hpp"
#include "metaprior/density.hpp"
#include "metaprior/error.hpp"
#include "metaprior/dimred.hpp"
#include "metaprior/planning.hpp"
#include "metaprior/task_space.hpp"

namespace metaprior {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Tensors are nested arrays in row-major order: transition[s][a][s'],
/// cost_dist[s][a][c].
Json to_json(const DiscreteMdp& mdp);
DiscreteMdp mdp_from_json(const Json& j);

Json to_json(const CandidateSet& candidates);
CandidateSet candidates_from_json(const Json& j);

Json to_json(const ThetaVector& theta);
ThetaVector theta_from_json(const Json& j);
std::vector<ThetaVector> thetas_from_json(const Json& j);

Json to_json(const KdeEstimate& est);
KdeEstimate kde_from_json(const Json& j);

Json to_json(const CategoricalEstimate& est);
Json to_json(const ProjectionMap& map);
ProjectionMap projection_from_json(const Json& j);

Json to_json(const HistoryPolicy& policy);
HistoryPolicy policy_from_json(const Json& j);

Json to_json(const BoundResult& result);

Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Typed field access raising Parse errors that name the key.
template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
T get_required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::Parse, std::string("missing key '") + key + "'");
  return get_or<T>(j, key, T{});
}

}  // namespace metaprior
