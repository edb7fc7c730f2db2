#pragma once

// Helpers shared by the model-zoo unit tests and the acceptance suite.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cvbn/bn.hpp"
#include "cvbn/inference.hpp"
#include "cvbn/model_zoo.hpp"

namespace cvbn::testing {

inline const std::vector<std::string>& zoo_refs() {
  static const std::vector<std::string> refs = {"cacc", "cacc10", "isig", "isig-nosensor",
                                                "isig-pattern8"};
  return refs;
}

/// The sub-network made of `v` and its ancestors. Marginals of `v` without
/// evidence are the same in both networks.
inline BayesNet ancestral_subnet(const BayesNet& net, std::size_t v) {
  const auto keep = detail::ancestral_set(net, {v});
  std::vector<Variable> vars;
  std::vector<Cpt> cpts;
  for (std::size_t u : keep) {
    vars.push_back(net.variable(u));
    cpts.push_back(net.cpt(u));
  }
  return build_network(std::move(vars), std::move(cpts));
}

inline double joint_size(const BayesNet& net) {
  double s = 1.0;
  for (const auto& v : net.variables()) s *= static_cast<double>(v.cardinality());
  return s;
}

inline double linf(const Distribution& a, const Distribution& b) {
  double worst = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) worst = std::max(worst, std::abs(a[s] - b[s]));
  return worst;
}

/// Data directory with the shipped metric tables and a caller-supplied
/// topology file (for reduced models the brute-force oracle can handle).
inline std::string reduced_data_dir(const std::string& tag, const std::string& topology_json) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("cvbn-" + tag);
  fs::create_directories(dir);
  for (const char* f : {"attack_surfaces.json", "node_metrics_cacc.json", "node_metrics_isig.json"})
    fs::copy_file(fs::path(data_dir()) / f, dir / f, fs::copy_options::overwrite_existing);
  std::ofstream(dir / "topology.json") << topology_json;
  return dir.string();
}

/// Minimal platoon: certificate chain shared, one roadside detection path and OBE per vehicle.
inline const char* kReducedCacc = R"({
  "format": "cvbn-topology", "version": 1,
  "models": {"cacc": {"metrics": "cacc", "sink": "OBE", "nodes": [
    {"id": "LTC", "role": "attack", "surface": "LTC", "shared": true},
    {"id": "SDS", "role": "detection", "parents": ["LTC"], "shared": true},
    {"id": "SA", "role": "impact", "parents": ["SDS"], "shared": true},
    {"id": "WSA", "role": "attack", "surface": "WSA"},
    {"id": "RDS", "role": "detection", "parents": ["WSA"]},
    {"id": "OBE", "role": "impact", "parents": ["RDS", "SA"]}]}}
})";

inline const char* kReducedIsig = R"({
  "format": "cvbn-topology", "version": 1,
  "models": {"isig": {"metrics": "isig", "sink": "SC", "sensor": "S", "unsensed_floor": 1,
    "aggregate": {"id": "NET", "transmission": 0.1}, "nodes": [
    {"id": "TMC", "role": "impact3", "parents": [], "shared": true},
    {"id": "WSA", "role": "attack", "surface": "WSA"},
    {"id": "RDS", "role": "detection", "parents": ["WSA"]},
    {"id": "RSE", "role": "impact3", "parents": ["RDS"]},
    {"id": "S", "role": "sensor", "parents": []},
    {"id": "SC", "role": "impact", "parents": ["RSE", "TMC", "S"]}]}}
})";

}  // namespace cvbn::testing
