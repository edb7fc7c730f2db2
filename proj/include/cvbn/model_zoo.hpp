#pragma once

// Builders for the CACC and intelligent-signal networks. Edge lists live in
// data/topology.json; CPT values are synthesized from the metric tables.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cvbn/bn.hpp"
#include "cvbn/cvss.hpp"
#include "cvbn/error.hpp"
#include "cvbn/rng.hpp"

namespace cvbn {

enum class ModelKind { CaccSingle, CaccChain, Isig, IsigPattern };

struct ModelSpec {
  ModelKind kind = ModelKind::CaccSingle;
  std::size_t vehicles = 1;     // platoon length for CaccChain
  bool sensor = true;           // Isig and IsigPattern
  std::size_t controllers = 1;  // signal count for IsigPattern
  std::map<std::string, NodeMetric> overrides;  // keyed by topology node id
  SynthesisMode mode = SynthesisMode::Fixed;
  std::uint64_t seed = 0;
};

/// Short model references used by the CLI and the models/ directory:
/// cacc, caccN, isig, isig-nosensor, isig-patternK (K signals, with sensor).
inline ModelSpec parse_model_ref(std::string_view ref) {
  ModelSpec spec;
  auto count_after = [&](std::string_view prefix) -> std::optional<std::size_t> {
    if (ref.substr(0, prefix.size()) != prefix) return std::nullopt;
    const std::string_view digits = ref.substr(prefix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) return std::nullopt;
    const std::size_t n = std::stoul(std::string(digits));
    if (n == 0) throw Error(ErrorKind::InvalidConfig, "model size must be at least 1");
    return n;
  };
  if (ref == "cacc" || ref == "cacc-single") return spec;
  if (ref == "isig" || ref == "isig-sensor") {
    spec.kind = ModelKind::Isig;
    return spec;
  }
  if (ref == "isig-nosensor") {
    spec.kind = ModelKind::Isig;
    spec.sensor = false;
    return spec;
  }
  if (auto k = count_after("isig-pattern")) {
    spec.kind = ModelKind::IsigPattern;
    spec.controllers = *k;
    return spec;
  }
  if (auto n = count_after("cacc")) {
    spec.kind = *n == 1 ? ModelKind::CaccSingle : ModelKind::CaccChain;
    spec.vehicles = *n;
    return spec;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown model '" + std::string(ref) + "'");
}

inline std::string model_ref(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::CaccSingle: return "cacc";
    case ModelKind::CaccChain: return "cacc" + std::to_string(spec.vehicles);
    case ModelKind::Isig: return spec.sensor ? "isig" : "isig-nosensor";
    case ModelKind::IsigPattern:
      return "isig-pattern" + std::to_string(spec.controllers) + (spec.sensor ? "" : "-nosensor");
  }
  return "";
}

// ---------------------------------------------------------------------------
// Topology file

enum class NodeRole { Attack, Detection, Impact, Impact3, Sensor, Max };

struct TopologyNode {
  std::string id;
  NodeRole role = NodeRole::Impact;
  std::vector<std::string> parents;
  std::string surface;  // attack roots
  std::string metric;   // metric-table key, defaults to id
  bool shared = false;  // one copy across replicas
  std::optional<double> transmission;
  std::optional<double> leak;
  std::vector<std::string> states;  // impact nodes may use a prefix of none..cri
};

struct Topology {
  std::string name;
  std::string metrics;
  std::string sink;
  std::string sensor;
  int unsensed_floor = 0;
  std::string aggregate;
  double aggregate_transmission = 0.1;
  std::vector<TopologyNode> nodes;

  const TopologyNode* find(std::string_view id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
};

inline NodeRole parse_role(std::string_view s) {
  if (s == "attack") return NodeRole::Attack;
  if (s == "detection") return NodeRole::Detection;
  if (s == "impact") return NodeRole::Impact;
  if (s == "impact3") return NodeRole::Impact3;
  if (s == "sensor") return NodeRole::Sensor;
  throw Error(ErrorKind::ParseError, "unknown node role '" + std::string(s) + "'");
}

inline Topology topology_from_json(const nlohmann::json& doc, const std::string& name) {
  detail::expect_format(doc, "cvbn-topology");
  Topology t;
  t.name = name;
  try {
    const auto& m = doc.at("models").at(name);
    t.metrics = m.at("metrics").get<std::string>();
    t.sink = m.at("sink").get<std::string>();
    t.sensor = m.value("sensor", "");
    t.unsensed_floor = m.value("unsensed_floor", 0);
    if (m.contains("aggregate")) {
      t.aggregate = m["aggregate"].at("id").get<std::string>();
      t.aggregate_transmission = m["aggregate"].value("transmission", 0.1);
    }
    for (const auto& j : m.at("nodes")) {
      TopologyNode n;
      n.id = j.at("id").get<std::string>();
      n.role = parse_role(j.at("role").get<std::string>());
      n.parents = j.value("parents", std::vector<std::string>{});
      n.surface = j.value("surface", "");
      n.metric = j.value("metric", n.id);
      n.shared = j.value("shared", false);
      if (j.contains("transmission")) n.transmission = j["transmission"].get<double>();
      if (j.contains("leak")) n.leak = j["leak"].get<double>();
      n.states = j.value("states", std::vector<std::string>{});
      t.nodes.push_back(std::move(n));
    }
  } catch (const nlohmann::json::out_of_range& e) {
    throw Error(ErrorKind::ParseError, "topology " + name + ": " + e.what());
  } catch (const nlohmann::json::type_error& e) {
    throw Error(ErrorKind::ParseError, "topology " + name + ": " + e.what());
  }
  return t;
}

inline Topology load_topology(const std::string& name, const std::string& dir = data_dir()) {
  return topology_from_json(read_json_file(dir + "/topology.json"), name);
}

// ---------------------------------------------------------------------------
// Templates: fixed structure plus a synthesis recipe per variable

struct NodeRecipe {
  NodeRole role = NodeRole::Impact;
  std::string base;  // topology id
  std::vector<AttackSurface> surfaces;
  NodeMetric metric;
  RankMap child_ranks;
  std::vector<RankMap> parent_ranks;
  SusceptibilityOptions options;
};

inline RankMap role_ranks(NodeRole role, const std::vector<std::string>& states) {
  switch (role) {
    case NodeRole::Attack: return kAttackRanks;
    case NodeRole::Detection: return kDetectionRanks;
    case NodeRole::Impact3: return kImpact3Ranks;
    case NodeRole::Sensor: return kSensorRanks;
    case NodeRole::Impact:
    case NodeRole::Max: {
      RankMap r;
      for (const auto& s : states)
        r.push_back(static_cast<int>(
            std::find(kImpactLabels.begin(), kImpactLabels.end(), s) - kImpactLabels.begin()));
      return r;
    }
  }
  return {};
}

inline std::vector<std::string> role_states(NodeRole role, const std::vector<std::string>& custom) {
  switch (role) {
    case NodeRole::Attack:
    case NodeRole::Detection:
    case NodeRole::Impact3: return kLevelLabels;
    case NodeRole::Sensor: return {"true", "false"};
    case NodeRole::Impact:
    case NodeRole::Max: return custom.empty() ? kImpactLabels : custom;
  }
  return {};
}

/// One CPT from its recipe. Fixed mode consumes no random numbers.
inline std::vector<double> synthesize_cpt(const NodeRecipe& r, SynthesisMode mode, Rng& rng) {
  switch (r.role) {
    case NodeRole::Attack: return feasibility_prior(r.surfaces.front(), mode, rng);
    case NodeRole::Detection: {
      std::vector<const AttackSurface*> ptrs;
      for (const auto& s : r.surfaces) ptrs.push_back(&s);
      return detection_cpt(ptrs, mode, rng);
    }
    case NodeRole::Max: {
      std::size_t rows = 1;
      for (const auto& p : r.parent_ranks) rows *= p.size();
      const std::size_t card = r.child_ranks.size();
      std::vector<double> table(rows * card, 0.0);
      std::vector<std::size_t> assign(r.parent_ranks.size(), 0);
      for (std::size_t row = 0; row < rows; ++row) {
        int s = 0;
        for (std::size_t j = 0; j < assign.size(); ++j) s = std::max(s, r.parent_ranks[j][assign[j]]);
        const auto it = std::find(r.child_ranks.begin(), r.child_ranks.end(), s);
        table[row * card + static_cast<std::size_t>(it - r.child_ranks.begin())] = 1.0;
        for (std::size_t j = assign.size(); j-- > 0;) {
          if (++assign[j] < r.parent_ranks[j].size()) break;
          assign[j] = 0;
        }
      }
      return table;
    }
    case NodeRole::Impact:
    case NodeRole::Impact3:
    case NodeRole::Sensor:
      return susceptibility_cpt(r.child_ranks, r.metric, r.parent_ranks, mode, rng, r.options);
  }
  return {};
}

class ModelTemplate {
 public:
  ModelTemplate(ModelSpec spec, BayesNet net, std::vector<NodeRecipe> recipes,
                std::vector<std::string> sinks, std::string aggregate)
      : spec_(std::move(spec)),
        net_(std::move(net)),
        recipes_(std::move(recipes)),
        sinks_(std::move(sinks)),
        aggregate_(std::move(aggregate)) {}

  const ModelSpec& spec() const { return spec_; }
  /// Network carrying the fixed-mode tables.
  const BayesNet& network() const { return net_; }
  const std::vector<NodeRecipe>& recipes() const { return recipes_; }
  /// Sink per replica (OBE or OBE_1..OBE_n, SC or SC_1..SC_k).
  const std::vector<std::string>& sinks() const { return sinks_; }
  /// Network-level aggregate node id, empty when the model has none.
  const std::string& aggregate() const { return aggregate_; }

  /// Fresh tables, one per variable in index order.
  void synthesize(SynthesisMode mode, Rng& rng, std::vector<std::vector<double>>& out) const {
    out.resize(recipes_.size());
    for (std::size_t v = 0; v < recipes_.size(); ++v) out[v] = synthesize_cpt(recipes_[v], mode, rng);
  }

  std::vector<std::vector<double>> synthesize(SynthesisMode mode, Rng& rng) const {
    std::vector<std::vector<double>> out;
    synthesize(mode, rng, out);
    return out;
  }

  BayesNet build(SynthesisMode mode, Rng& rng) const {
    if (mode == SynthesisMode::Fixed) return net_;
    return net_.with_tables(synthesize(mode, rng));
  }

 private:
  ModelSpec spec_;
  BayesNet net_;
  std::vector<NodeRecipe> recipes_;
  std::vector<std::string> sinks_;
  std::string aggregate_;
};

namespace detail {

struct PlannedNode {
  std::string id;
  const TopologyNode* topo = nullptr;  // null for aggregate helpers
  NodeRole role = NodeRole::Impact;
  std::vector<std::string> parents;
  std::vector<std::string> states;
  std::optional<double> transmission;
  std::optional<double> leak;
  int floor_rank = 0;
  std::string metric;
};

}  // namespace detail

inline ModelTemplate make_template(const ModelSpec& spec, const std::string& dir = data_dir()) {
  const bool isig = spec.kind == ModelKind::Isig || spec.kind == ModelKind::IsigPattern;
  const Topology topo = load_topology(isig ? "isig" : "cacc", dir);
  MetricTable metrics = load_node_metrics(topo.metrics, dir);
  const SurfaceTable surfaces = load_attack_surfaces(dir);

  std::size_t replicas = 1;
  if (spec.kind == ModelKind::CaccChain) replicas = spec.vehicles;
  if (spec.kind == ModelKind::IsigPattern) replicas = spec.controllers;
  if (replicas == 0) throw Error(ErrorKind::InvalidConfig, "model size must be at least 1");
  const bool sensor = !isig || topo.sensor.empty() || spec.sensor;

  for (const auto& [node, metric] : spec.overrides) {
    if (!topo.find(node) && node != topo.aggregate)
      throw Error(ErrorKind::InvalidConfig, "override for unknown node " + node);
    NodeMetric m = metric;
    m.node = node;
    metrics[topo.find(node) ? topo.find(node)->metric : node] = m;
  }

  auto name_of = [&](const TopologyNode& n, std::size_t r) {
    return (n.shared || replicas == 1) ? n.id : n.id + "_" + std::to_string(r);
  };

  std::vector<detail::PlannedNode> plan;
  std::vector<std::string> sinks;
  auto add_node = [&](const TopologyNode& n, std::size_t r) {
    detail::PlannedNode p;
    p.id = name_of(n, r);
    p.topo = &n;
    p.role = n.role;
    p.states = role_states(n.role, n.states);
    p.transmission = n.transmission;
    p.leak = n.leak;
    p.metric = n.metric;
    for (const auto& parent : n.parents) {
      if (!sensor && parent == topo.sensor) continue;
      const TopologyNode* pn = topo.find(parent);
      if (!pn) throw Error(ErrorKind::UnknownVariable, parent + " (parent of " + n.id + ")");
      if (n.shared && !pn->shared)
        throw Error(ErrorKind::InvalidConfig, "shared node " + n.id + " has per-replica parent " + parent);
      p.parents.push_back(name_of(*pn, r));
    }
    if (n.id == topo.sink) {
      if (r > 1) p.parents.push_back(name_of(n, r - 1));
      if (!sensor) p.floor_rank = topo.unsensed_floor;
      sinks.push_back(p.id);
    }
    plan.push_back(std::move(p));
  };
  for (const auto& n : topo.nodes)
    if (n.shared && (sensor || n.id != topo.sensor)) add_node(n, 1);
  for (std::size_t r = 1; r <= replicas; ++r)
    for (const auto& n : topo.nodes)
      if (!n.shared && (sensor || n.id != topo.sensor)) add_node(n, r);

  std::string aggregate;
  if (spec.kind == ModelKind::IsigPattern && !topo.aggregate.empty()) {
    // NET = noisy-MAX over all sinks, divorced through a deterministic max chain
    std::string running = sinks.front();
    for (std::size_t r = 1; r < sinks.size(); ++r) {
      detail::PlannedNode m;
      m.id = topo.aggregate + "M_" + std::to_string(r + 1);
      m.role = NodeRole::Max;
      m.states = kImpactLabels;
      m.parents = {running, sinks[r]};
      running = m.id;
      plan.push_back(std::move(m));
    }
    detail::PlannedNode net;
    net.id = topo.aggregate;
    net.role = NodeRole::Impact;
    net.states = kImpactLabels;
    net.parents = {running};
    net.transmission = topo.aggregate_transmission;
    net.metric = topo.aggregate;
    aggregate = net.id;
    plan.push_back(std::move(net));
  }

  // keep ancestors of the sinks (and aggregate) only
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < plan.size(); ++i) pos[plan[i].id] = i;
  std::set<std::string> keep;
  std::vector<std::string> stack = sinks;
  if (!aggregate.empty()) stack.push_back(aggregate);
  while (!stack.empty()) {
    const std::string id = stack.back();
    stack.pop_back();
    if (!keep.insert(id).second) continue;
    const auto it = pos.find(id);
    if (it == pos.end()) throw Error(ErrorKind::UnknownVariable, id);
    for (const auto& p : plan[it->second].parents) stack.push_back(p);
  }

  std::vector<Variable> vars;
  std::vector<Cpt> cpts;
  std::vector<NodeRecipe> recipes;
  std::map<std::string, const detail::PlannedNode*> kept;
  for (const auto& p : plan)
    if (keep.count(p.id)) kept[p.id] = &p;
  for (const auto& p : plan) {
    if (!keep.count(p.id)) continue;
    NodeRecipe rec;
    rec.role = p.role;
    rec.base = p.topo ? p.topo->id : p.id;
    rec.child_ranks = role_ranks(p.role, p.states);
    for (const auto& parent : p.parents) {
      const auto* pp = kept.at(parent);
      rec.parent_ranks.push_back(role_ranks(pp->role, pp->states));
    }
    if (p.role == NodeRole::Attack) {
      const auto it = surfaces.find(p.topo->surface);
      if (it == surfaces.end())
        throw Error(ErrorKind::InvalidConfig, "no attack surface " + p.topo->surface);
      rec.surfaces.push_back(it->second);
    } else if (p.role == NodeRole::Detection) {
      for (const auto& parent : p.parents) {
        const auto* pp = kept.at(parent);
        if (pp->role != NodeRole::Attack)
          throw Error(ErrorKind::InvalidConfig, "detection node " + p.id + " has non-attack parent");
        rec.surfaces.push_back(surfaces.at(pp->topo->surface));
      }
    } else if (p.role != NodeRole::Max) {
      const auto it = metrics.find(p.metric);
      if (it != metrics.end()) {
        rec.metric = it->second;
      } else if (!p.transmission) {
        throw Error(ErrorKind::InvalidConfig, "no metric row for " + p.id);
      }
      rec.options.transmission = p.transmission;
      if (p.leak) rec.options.leak = *p.leak;
      rec.options.floor_rank = p.floor_rank;
    }
    vars.push_back(Variable{p.id, rec.base, p.states});
    Rng unused(0);
    cpts.push_back(Cpt{p.id, p.parents, synthesize_cpt(rec, SynthesisMode::Fixed, unused)});
    recipes.push_back(std::move(rec));
  }
  BayesNet net = build_network(std::move(vars), std::move(cpts));
  net.set_name(model_ref(spec));
  return ModelTemplate(spec, std::move(net), std::move(recipes), std::move(sinks),
                       std::move(aggregate));
}

/// Network for `spec` with tables drawn from the spec's seed (fixed mode
/// ignores the seed).
inline BayesNet build_model(const ModelSpec& spec, const std::string& dir = data_dir()) {
  const ModelTemplate t = make_template(spec, dir);
  Rng rng(derive_seed(spec.seed, stream_tag("model"), 0));
  return t.build(spec.mode, rng);
}

inline BayesNet build_cacc_single(ModelSpec spec) {
  spec.kind = ModelKind::CaccSingle;
  spec.vehicles = 1;
  return build_model(spec);
}

inline BayesNet build_cacc_chain(ModelSpec spec) {
  if (spec.vehicles < 1) throw Error(ErrorKind::InvalidConfig, "platoon needs at least one vehicle");
  spec.kind = spec.vehicles == 1 ? ModelKind::CaccSingle : ModelKind::CaccChain;
  return build_model(spec);
}

inline BayesNet build_isig(ModelSpec spec) {
  spec.kind = ModelKind::Isig;
  return build_model(spec);
}

inline BayesNet build_isig_pattern(ModelSpec spec) {
  if (spec.controllers < 1) throw Error(ErrorKind::InvalidConfig, "pattern needs at least one signal");
  spec.kind = ModelKind::IsigPattern;
  return build_model(spec);
}

/// Resolves a query id against a network, accepting "OBE10" for "OBE_10".
inline std::size_t resolve_variable(const BayesNet& net, std::string_view id) {
  if (auto v = net.find(id)) return *v;
  std::size_t cut = id.size();
  while (cut > 0 && std::isdigit(static_cast<unsigned char>(id[cut - 1]))) --cut;
  if (cut > 0 && cut < id.size()) {
    const std::string alt = std::string(id.substr(0, cut)) + "_" + std::string(id.substr(cut));
    if (auto v = net.find(alt)) return *v;
  }
  throw Error(ErrorKind::UnknownVariable, std::string(id));
}

}  // namespace cvbn
