#pragma once

// Discrete Bayesian network data model: variables, CPTs, validation,
// topological ordering and a brute-force joint-enumeration oracle.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cvbn/error.hpp"

namespace cvbn {

/// Maps the usual abbreviations onto canonical state labels: N/L/M/H/C become
/// none/low/med/high/cri, T/F become true/false. Unknown labels are lowercased.
inline std::string canonical_state(std::string_view label) {
  std::string s(label);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::map<std::string, std::string, std::less<>> aliases = {
      {"n", "none"},     {"none", "none"},      {"l", "low"},      {"low", "low"},
      {"m", "med"},      {"med", "med"},        {"medium", "med"}, {"h", "high"},
      {"high", "high"},  {"c", "cri"},          {"cri", "cri"},    {"critical", "cri"},
      {"t", "true"},     {"true", "true"},      {"f", "false"},    {"false", "false"},
  };
  auto it = aliases.find(s);
  return it == aliases.end() ? s : it->second;
}

struct Variable {
  std::string id;    // unique within a network, e.g. "OBE_3"
  std::string name;  // short code, e.g. "OBE"
  std::vector<std::string> states;

  std::size_t cardinality() const { return states.size(); }
};

/// Conditional probability table as supplied by a caller or a file.
/// `table` is flattened row-major: parent combinations enumerate in row-major
/// order of `parents` (first parent slowest), child state fastest.
struct Cpt {
  std::string child;
  std::vector<std::string> parents;
  std::vector<double> table;
};

/// Index-based family stored inside a validated network.
struct Family {
  std::size_t child = 0;
  std::vector<std::size_t> parents;
  std::vector<double> table;
};

/// Posterior or marginal over the states of one variable.
struct Distribution {
  std::size_t variable = 0;
  std::vector<double> probs;

  double operator[](std::size_t state) const { return probs[state]; }
  std::size_t size() const { return probs.size(); }
};

/// Observed states keyed by variable index.
class Evidence {
 public:
  Evidence() = default;

  void set(std::size_t variable, std::size_t state) { obs_[variable] = state; }
  void erase(std::size_t variable) { obs_.erase(variable); }
  bool contains(std::size_t variable) const { return obs_.count(variable) != 0; }
  std::optional<std::size_t> get(std::size_t variable) const {
    auto it = obs_.find(variable);
    if (it == obs_.end()) return std::nullopt;
    return it->second;
  }
  bool empty() const { return obs_.empty(); }
  std::size_t size() const { return obs_.size(); }
  auto begin() const { return obs_.begin(); }
  auto end() const { return obs_.end(); }

 private:
  std::map<std::size_t, std::size_t> obs_;
};

inline constexpr double kRowTolerance = 1e-9;
inline constexpr double kDefaultEnumerationCap = 1e8;

class BayesNet {
 public:
  BayesNet() = default;

  std::size_t size() const { return variables_.size(); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(std::size_t i) const { return variables_.at(i); }
  const Family& family(std::size_t child) const { return families_.at(child); }
  const std::vector<Family>& families() const { return families_; }
  std::size_t cardinality(std::size_t i) const { return variables_.at(i).cardinality(); }
  const std::vector<std::size_t>& topological_order() const { return topo_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw Error(ErrorKind::UnknownVariable, std::string(id));
  }

  std::size_t state_index(std::size_t variable, std::string_view label) const {
    const auto& states = variables_.at(variable).states;
    const std::string want = canonical_state(label);
    for (std::size_t s = 0; s < states.size(); ++s)
      if (states[s] == want) return s;
    throw Error(ErrorKind::UnknownState,
                std::string(label) + " for " + variables_.at(variable).id);
  }

  /// Evidence entry by id and label; throws UnknownVariable/UnknownState.
  void observe(Evidence& ev, std::string_view id, std::string_view label) const {
    const std::size_t v = index_of(id);
    ev.set(v, state_index(v, label));
  }

  std::vector<std::size_t> children(std::size_t v) const {
    std::vector<std::size_t> out;
    for (const auto& f : families_)
      if (std::find(f.parents.begin(), f.parents.end(), v) != f.parents.end())
        out.push_back(f.child);
    return out;
  }

  /// Returns the caller-facing CPT (ids instead of indices).
  Cpt cpt(std::size_t child) const {
    const Family& f = families_.at(child);
    Cpt c;
    c.child = variables_[f.child].id;
    for (std::size_t p : f.parents) c.parents.push_back(variables_[p].id);
    c.table = f.table;
    return c;
  }

  /// Copy of this network with new CPT values on the same structure.
  /// Tables are validated the same way build_network validates them.
  BayesNet with_tables(std::vector<std::vector<double>> tables) const;

 private:
  friend BayesNet build_network(std::vector<Variable>, std::vector<Cpt>);

  std::string name_;
  std::vector<Variable> variables_;
  std::vector<Family> families_;  // indexed by child
  std::vector<std::size_t> topo_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::size_t row_count(const std::vector<Variable>& vars,
                             const std::vector<std::size_t>& parents) {
  std::size_t rows = 1;
  for (std::size_t p : parents) rows *= vars[p].cardinality();
  return rows;
}

// Checks entries and row sums; rows within tolerance are renormalized.
inline void check_table(const std::vector<Variable>& vars, const Family& f,
                        std::vector<double>& table) {
  const std::size_t card = vars[f.child].cardinality();
  const std::size_t rows = row_count(vars, f.parents);
  if (table.size() != rows * card)
    throw Error(ErrorKind::ArityMismatch,
                vars[f.child].id + " expects " + std::to_string(rows * card) +
                    " entries, got " + std::to_string(table.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t s = 0; s < card; ++s) {
      const double p = table[r * card + s];
      if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorKind::RowNotNormalized,
                    vars[f.child].id + " row " + std::to_string(r) + " has entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw Error(ErrorKind::RowNotNormalized,
                  vars[f.child].id + " row " + std::to_string(r) + " sums to " +
                      std::to_string(sum));
    // Sums already equal to 1 up to round-off are left alone so a reloaded
    // table stays bit-identical.
    if (std::abs(sum - 1.0) > 1e-14)
      for (std::size_t s = 0; s < card; ++s) table[r * card + s] /= sum;
  }
}

// Kahn's algorithm; ready nodes are taken smallest index first.
inline std::vector<std::size_t> kahn_order(const std::vector<Variable>& vars,
                                           const std::vector<Family>& fams) {
  const std::size_t n = vars.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> kids(n);
  for (const auto& f : fams) {
    indegree[f.child] = f.parents.size();
    for (std::size_t p : f.parents) kids[p].push_back(f.child);
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (std::size_t c : kids[v])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() != n) {
    std::string stuck;
    for (std::size_t v = 0; v < n; ++v)
      if (indegree[v] != 0) {
        stuck = vars[v].id;
        break;
      }
    throw Error(ErrorKind::CycleDetected, "cycle through " + stuck);
  }
  return order;
}

}  // namespace detail

/// Validates variables and CPTs and returns an immutable network.
inline BayesNet build_network(std::vector<Variable> variables, std::vector<Cpt> cpts) {
  if (variables.empty()) throw Error(ErrorKind::InvalidVariable, "network has no variables");
  BayesNet net;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    Variable& v = variables[i];
    if (v.id.empty()) throw Error(ErrorKind::InvalidVariable, "empty variable id");
    if (v.name.empty()) v.name = v.id;
    if (v.states.size() < 2)
      throw Error(ErrorKind::InvalidVariable, v.id + " needs at least two states");
    for (auto& s : v.states) s = canonical_state(s);
    auto sorted = v.states;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorKind::InvalidVariable, v.id + " has duplicate state labels");
    if (!net.index_.emplace(v.id, i).second)
      throw Error(ErrorKind::InvalidVariable, "duplicate variable id " + v.id);
  }

  std::vector<std::optional<Family>> slots(variables.size());
  for (auto& c : cpts) {
    auto child = net.index_.find(c.child);
    if (child == net.index_.end()) throw Error(ErrorKind::UnknownVariable, c.child);
    Family f;
    f.child = child->second;
    for (const auto& p : c.parents) {
      auto it = net.index_.find(p);
      if (it == net.index_.end()) throw Error(ErrorKind::UnknownVariable, p);
      if (it->second == f.child) throw Error(ErrorKind::CycleDetected, "self-loop on " + p);
      if (std::find(f.parents.begin(), f.parents.end(), it->second) != f.parents.end())
        throw Error(ErrorKind::ArityMismatch, c.child + " lists parent " + p + " twice");
      f.parents.push_back(it->second);
    }
    if (slots[f.child]) throw Error(ErrorKind::DuplicateCpt, c.child);
    detail::check_table(variables, f, c.table);
    f.table = std::move(c.table);
    slots[f.child] = std::move(f);
  }
  net.families_.reserve(variables.size());
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (!slots[i]) throw Error(ErrorKind::MissingCpt, variables[i].id);
    net.families_.push_back(std::move(*slots[i]));
  }
  net.topo_ = detail::kahn_order(variables, net.families_);
  net.variables_ = std::move(variables);
  return net;
}

inline BayesNet BayesNet::with_tables(std::vector<std::vector<double>> tables) const {
  if (tables.size() != families_.size())
    throw Error(ErrorKind::ArityMismatch, "expected one table per variable");
  BayesNet out = *this;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    detail::check_table(variables_, out.families_[i], tables[i]);
    out.families_[i].table = std::move(tables[i]);
  }
  return out;
}

inline std::vector<std::size_t> topological_order(const BayesNet& net) {
  return net.topological_order();
}

inline void validate_evidence(const BayesNet& net, const Evidence& ev) {
  for (const auto& [v, s] : ev) {
    if (v >= net.size()) throw Error(ErrorKind::UnknownVariable, std::to_string(v));
    if (s >= net.cardinality(v)) throw Error(ErrorKind::UnknownState, net.variable(v).id);
  }
}

/// P(all evidence) and the unnormalized query marginal by summing the full
/// factored joint. Test oracle for the inference engines.
struct Enumeration {
  std::vector<double> joint;  // P(query = q, evidence) per state q
  double evidence_probability = 0.0;
};

inline Enumeration enumerate_joint(const BayesNet& net, std::size_t query, const Evidence& ev,
                                   double cap = kDefaultEnumerationCap) {
  const std::size_t n = net.size();
  if (query >= n) throw Error(ErrorKind::UnknownVariable, std::to_string(query));
  double total = 1.0;
  for (std::size_t v = 0; v < n; ++v) total *= static_cast<double>(net.cardinality(v));
  if (total > cap)
    throw Error(ErrorKind::StateSpaceTooLarge,
                std::to_string(total) + " joint entries exceed cap " + std::to_string(cap));

  validate_evidence(net, ev);
  std::vector<std::size_t> assign(n, 0);
  std::vector<std::size_t> free_vars;
  for (std::size_t v = 0; v < n; ++v) {
    if (auto s = ev.get(v)) {
      assign[v] = *s;
    } else {
      free_vars.push_back(v);
    }
  }

  Enumeration out;
  out.joint.assign(net.cardinality(query), 0.0);
  while (true) {
    double p = 1.0;
    for (const Family& f : net.families()) {
      std::size_t row = 0;
      for (std::size_t par : f.parents) row = row * net.cardinality(par) + assign[par];
      p *= f.table[row * net.cardinality(f.child) + assign[f.child]];
      if (p == 0.0) break;
    }
    out.joint[assign[query]] += p;
    out.evidence_probability += p;

    std::size_t k = 0;
    for (; k < free_vars.size(); ++k) {
      const std::size_t v = free_vars[k];
      if (++assign[v] < net.cardinality(v)) break;
      assign[v] = 0;
    }
    if (k == free_vars.size()) break;
  }
  return out;
}

inline Distribution joint_enumerate(const BayesNet& net, std::size_t query, const Evidence& ev,
                                    double cap = kDefaultEnumerationCap) {
  Enumeration e = enumerate_joint(net, query, ev, cap);
  if (!(e.evidence_probability > 0.0))
    throw Error(ErrorKind::InconsistentEvidence, "evidence has probability zero");
  Distribution d{query, std::move(e.joint)};
  for (double& p : d.probs) p /= e.evidence_probability;
  return d;
}

inline Distribution joint_enumerate(const BayesNet& net, std::string_view query,
                                    const Evidence& ev, double cap = kDefaultEnumerationCap) {
  return joint_enumerate(net, net.index_of(query), ev, cap);
}

}  // namespace cvbn
