#pragma once

// Exact inference on discrete Bayesian networks: variable elimination with a
// greedy min-fill order, and Hugin-style junction-tree propagation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "cvbn/bn.hpp"
#include "cvbn/factor.hpp"

namespace cvbn {

enum class OrderStrategy { MinFill, MinDegree };

namespace detail {

using Graph = std::vector<std::set<std::size_t>>;

inline void connect_clique(Graph& g, const std::vector<std::size_t>& vars) {
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      g[vars[i]].insert(vars[j]);
      g[vars[j]].insert(vars[i]);
    }
}

inline std::size_t fill_in(const Graph& g, std::size_t v) {
  std::size_t fill = 0;
  for (auto a = g[v].begin(); a != g[v].end(); ++a)
    for (auto b = std::next(a); b != g[v].end(); ++b)
      if (!g[*a].count(*b)) ++fill;
  return fill;
}

// Greedy elimination of `targets` on `g` (modified in place). Ties are broken
// by the smaller variable index. Returns the order; `cliques` receives each
// eliminated variable together with its neighbours at elimination time.
inline std::vector<std::size_t> greedy_order(Graph& g, std::vector<std::size_t> targets,
                                             OrderStrategy strategy,
                                             std::vector<std::vector<std::size_t>>* cliques) {
  std::sort(targets.begin(), targets.end());
  std::vector<char> pending(g.size(), 0);
  for (std::size_t v : targets) pending[v] = 1;
  std::vector<std::size_t> order;
  order.reserve(targets.size());
  for (std::size_t round = 0; round < targets.size(); ++round) {
    std::size_t best = 0;
    std::size_t best_cost = std::numeric_limits<std::size_t>::max();
    for (std::size_t v : targets) {
      if (!pending[v]) continue;
      const std::size_t cost = strategy == OrderStrategy::MinFill ? fill_in(g, v) : g[v].size();
      if (cost < best_cost) {
        best_cost = cost;
        best = v;
      }
    }
    std::vector<std::size_t> nbrs(g[best].begin(), g[best].end());
    if (cliques) {
      auto c = nbrs;
      c.push_back(best);
      std::sort(c.begin(), c.end());
      cliques->push_back(std::move(c));
    }
    connect_clique(g, nbrs);
    for (std::size_t u : nbrs) g[u].erase(best);
    g[best].clear();
    pending[best] = 0;
    order.push_back(best);
  }
  return order;
}

inline std::vector<std::size_t> ancestral_set(const BayesNet& net,
                                              const std::vector<std::size_t>& seeds) {
  std::vector<char> mark(net.size(), 0);
  std::vector<std::size_t> stack = seeds;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (mark[v]) continue;
    mark[v] = 1;
    for (std::size_t p : net.family(v).parents) stack.push_back(p);
  }
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < net.size(); ++v)
    if (mark[v]) out.push_back(v);
  return out;
}

}  // namespace detail

/// Structure-only part of a variable-elimination query: the relevant
/// (ancestral) variables and the elimination order. Reusable across CPT values
/// and across evidence with the same observed variable set.
struct QueryPlan {
  std::size_t query = 0;
  std::vector<std::size_t> relevant;
  std::vector<std::size_t> observed;
  std::vector<std::size_t> order;
};

inline QueryPlan plan_query(const BayesNet& net, std::size_t query, const Evidence& ev,
                            OrderStrategy strategy = OrderStrategy::MinFill) {
  if (query >= net.size()) throw Error(ErrorKind::UnknownVariable, std::to_string(query));
  validate_evidence(net, ev);
  if (ev.contains(query))
    throw Error(ErrorKind::QueryObserved, net.variable(query).id + " is observed");
  QueryPlan plan;
  plan.query = query;
  for (const auto& [v, s] : ev) plan.observed.push_back(v);
  std::vector<std::size_t> seeds = plan.observed;
  seeds.push_back(query);
  plan.relevant = detail::ancestral_set(net, seeds);

  detail::Graph g(net.size());
  std::vector<std::size_t> targets;
  for (std::size_t v : plan.relevant) {
    std::vector<std::size_t> fam;
    for (std::size_t p : net.family(v).parents)
      if (!ev.contains(p)) fam.push_back(p);
    if (!ev.contains(v)) fam.push_back(v);
    detail::connect_clique(g, fam);
    if (v != query && !ev.contains(v)) targets.push_back(v);
  }
  plan.order = detail::greedy_order(g, std::move(targets), strategy, nullptr);
  return plan;
}

/// Unnormalized P(query, evidence) per query state, using `tables` in place of
/// the network's own CPT values (one flattened table per variable).
inline std::vector<double> run_plan_unnormalized(const BayesNet& net, const QueryPlan& plan,
                                                 const Evidence& ev,
                                                 std::span<const std::vector<double>> tables) {
  std::vector<Factor> pool;
  pool.reserve(plan.relevant.size() * 2);
  for (std::size_t v : plan.relevant) {
    Factor f = family_factor(net, v, tables[v]);
    for (const auto& [ov, os] : ev)
      if (f.contains(ov)) f = reduce(f, ov, os);
    pool.push_back(std::move(f));
  }
  std::vector<char> alive(pool.size(), 1);
  std::vector<const Factor*> bucket;
  for (std::size_t v : plan.order) {
    bucket.clear();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!alive[i] || !pool[i].contains(v)) continue;
      bucket.push_back(&pool[i]);
      alive[i] = 0;
      for (std::size_t u : pool[i].scope)
        if (u != v) keep.push_back(u);
    }
    if (bucket.empty()) continue;
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    Factor msg = combine(bucket, keep);
    pool.push_back(std::move(msg));
    alive.push_back(1);
  }
  bucket.clear();
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (alive[i]) bucket.push_back(&pool[i]);
  Factor last = combine(bucket, {plan.query});
  if (last.scope.empty()) {
    // query is in the relevant set, so this only happens for degenerate input
    throw Error(ErrorKind::UnknownVariable, net.variable(plan.query).id);
  }
  return last.values;
}

namespace detail {

inline Distribution normalize_posterior(const BayesNet& net, std::size_t query,
                                        std::vector<double> joint) {
  const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
  if (!(z > 0.0) || !std::isfinite(z))
    throw Error(ErrorKind::InconsistentEvidence,
                "evidence has probability zero (query " + net.variable(query).id + ")");
  for (double& p : joint) p /= z;
  return Distribution{query, std::move(joint)};
}

inline std::span<const std::vector<double>> own_tables(const BayesNet& net,
                                                       std::vector<std::vector<double>>& buf) {
  buf.clear();
  buf.reserve(net.size());
  for (const auto& f : net.families()) buf.push_back(f.table);
  return buf;
}

}  // namespace detail

inline Distribution run_plan(const BayesNet& net, const QueryPlan& plan, const Evidence& ev,
                             std::span<const std::vector<double>> tables) {
  return detail::normalize_posterior(net, plan.query,
                                     run_plan_unnormalized(net, plan, ev, tables));
}

/// Exact posterior of `query` given `ev` by variable elimination.
inline Distribution eliminate(const BayesNet& net, std::size_t query, const Evidence& ev = {},
                              OrderStrategy strategy = OrderStrategy::MinFill) {
  const QueryPlan plan = plan_query(net, query, ev, strategy);
  std::vector<std::vector<double>> buf;
  return run_plan(net, plan, ev, detail::own_tables(net, buf));
}

inline Distribution eliminate(const BayesNet& net, std::string_view query,
                              const Evidence& ev = {},
                              OrderStrategy strategy = OrderStrategy::MinFill) {
  return eliminate(net, net.index_of(query), ev, strategy);
}

/// P(evidence) by variable elimination (1 for empty evidence).
inline double evidence_probability(const BayesNet& net, const Evidence& ev) {
  validate_evidence(net, ev);
  if (ev.empty()) return 1.0;
  // Pick an unobserved variable as a dummy query; summing its joint gives P(e).
  std::size_t dummy = net.size();
  for (std::size_t v = 0; v < net.size(); ++v)
    if (!ev.contains(v)) {
      dummy = v;
      break;
    }
  if (dummy == net.size()) {
    double p = 1.0;
    for (const auto& f : net.families()) {
      std::size_t row = 0;
      for (std::size_t par : f.parents) row = row * net.cardinality(par) + *ev.get(par);
      p *= f.table[row * net.cardinality(f.child) + *ev.get(f.child)];
    }
    return p;
  }
  const QueryPlan plan = plan_query(net, dummy, ev);
  std::vector<std::vector<double>> buf;
  const auto joint = run_plan_unnormalized(net, plan, ev, detail::own_tables(net, buf));
  return std::accumulate(joint.begin(), joint.end(), 0.0);
}

/// Row g holds P(target | given = g).
inline std::vector<Distribution> conditional_table(const BayesNet& net, std::size_t target,
                                                   std::size_t given) {
  if (target == given)
    throw Error(ErrorKind::QueryObserved, "target and given are both " + net.variable(target).id);
  std::vector<Distribution> rows;
  for (std::size_t g = 0; g < net.cardinality(given); ++g) {
    Evidence ev;
    ev.set(given, g);
    rows.push_back(eliminate(net, target, ev));
  }
  return rows;
}

inline std::vector<Distribution> conditional_table(const BayesNet& net, std::string_view target,
                                                   std::string_view given) {
  return conditional_table(net, net.index_of(target), net.index_of(given));
}

// ---------------------------------------------------------------------------
// Compiled queries

/// A QueryPlan lowered to flat gather/multiply/accumulate steps. Index arrays
/// are built once; run() then touches only raw tables, so repeated queries
/// with fresh CPT values (Monte Carlo cycles) skip all scope bookkeeping.
class CompiledQuery {
 public:
  struct Workspace {
    std::vector<std::vector<double>> buffers;
  };

  CompiledQuery() = default;

  CompiledQuery(const BayesNet& net, const QueryPlan& plan, const Evidence& ev = {})
      : query_(plan.query), card_(net.cardinality(plan.query)) {
    struct Sym {
      std::size_t slot;  // < net.size(): variable table; otherwise buffer slot + net.size()
      std::size_t base;
      std::vector<std::size_t> scope;    // sorted
      std::vector<std::size_t> strides;  // per scope entry
    };
    tables_ = net.size();
    std::vector<Sym> pool;
    for (std::size_t v : plan.relevant) {
      const Family& fam = net.family(v);
      std::vector<std::size_t> natural = fam.parents;
      natural.push_back(v);
      std::vector<std::size_t> nat_stride(natural.size());
      std::size_t s = 1;
      for (std::size_t i = natural.size(); i-- > 0;) {
        nat_stride[i] = s;
        s *= net.cardinality(natural[i]);
      }
      Sym f{v, 0, {}, {}};
      std::vector<std::pair<std::size_t, std::size_t>> free;
      for (std::size_t i = 0; i < natural.size(); ++i) {
        if (auto st = ev.get(natural[i])) {
          f.base += nat_stride[i] * *st;
        } else {
          free.emplace_back(natural[i], nat_stride[i]);
        }
      }
      std::sort(free.begin(), free.end());
      for (auto [u, st] : free) {
        f.scope.push_back(u);
        f.strides.push_back(st);
      }
      pool.push_back(std::move(f));
    }

    auto emit = [&](const std::vector<std::size_t>& members, const std::vector<std::size_t>& keep) {
      std::vector<std::size_t> uscope;
      for (std::size_t m : members) uscope.insert(uscope.end(), pool[m].scope.begin(), pool[m].scope.end());
      std::sort(uscope.begin(), uscope.end());
      uscope.erase(std::unique(uscope.begin(), uscope.end()), uscope.end());
      std::vector<std::size_t> ucards;
      for (std::size_t u : uscope) ucards.push_back(net.cardinality(u));

      Sym out{tables_ + sizes_.size(), 0, {}, {}};
      for (std::size_t u : uscope)
        if (std::binary_search(keep.begin(), keep.end(), u)) out.scope.push_back(u);
      out.strides.resize(out.scope.size());
      std::size_t out_size = 1;
      for (std::size_t i = out.scope.size(); i-- > 0;) {
        out.strides[i] = out_size;
        out_size *= net.cardinality(out.scope[i]);
      }
      sizes_.push_back(out_size);

      auto strides_of = [&](const Sym& f) {
        std::vector<std::size_t> st(uscope.size(), 0);
        for (std::size_t i = 0; i < f.scope.size(); ++i) {
          const auto pos = std::lower_bound(uscope.begin(), uscope.end(), f.scope[i]) - uscope.begin();
          st[static_cast<std::size_t>(pos)] = f.strides[i];
        }
        return st;
      };
      Op op;
      op.out = out.slot - tables_;
      std::vector<std::vector<std::size_t>> st;
      std::vector<std::size_t> idx;
      for (std::size_t m : members) {
        op.inputs.push_back(pool[m].slot);
        st.push_back(strides_of(pool[m]));
        idx.push_back(pool[m].base);
      }
      const std::vector<std::size_t> ost = strides_of(out);
      std::size_t total = 1;
      for (std::size_t c : ucards) total *= c;
      const std::size_t k = members.size();
      op.steps = total;
      op.index.reserve(total * (k + 1));
      std::vector<std::size_t> assign(uscope.size(), 0);
      std::size_t oidx = 0;
      for (std::size_t step = 0; step < total; ++step) {
        op.index.push_back(static_cast<std::uint32_t>(oidx));
        for (std::size_t j = 0; j < k; ++j) op.index.push_back(static_cast<std::uint32_t>(idx[j]));
        for (std::size_t d = uscope.size(); d-- > 0;) {
          if (++assign[d] < ucards[d]) {
            for (std::size_t j = 0; j < k; ++j) idx[j] += st[j][d];
            oidx += ost[d];
            break;
          }
          const std::size_t back = ucards[d] - 1;
          assign[d] = 0;
          for (std::size_t j = 0; j < k; ++j) idx[j] -= st[j][d] * back;
          oidx -= ost[d] * back;
        }
      }
      ops_.push_back(std::move(op));
      return out;
    };

    std::vector<char> alive(pool.size(), 1);
    for (std::size_t v : plan.order) {
      std::vector<std::size_t> members;
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!alive[i] || !std::binary_search(pool[i].scope.begin(), pool[i].scope.end(), v)) continue;
        members.push_back(i);
        alive[i] = 0;
        for (std::size_t u : pool[i].scope)
          if (u != v) keep.push_back(u);
      }
      if (members.empty()) continue;
      std::sort(keep.begin(), keep.end());
      keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
      Sym msg = emit(members, keep);
      pool.push_back(std::move(msg));
      alive.push_back(1);
    }
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (alive[i]) rest.push_back(i);
    emit(rest, {plan.query});
    if (sizes_.back() != card_) throw Error(ErrorKind::UnknownVariable, net.variable(plan.query).id);
  }

  std::size_t query() const { return query_; }

  /// Unnormalized P(query, evidence) written into `out`.
  void run_unnormalized(std::span<const std::vector<double>> tables, Workspace& ws,
                        std::vector<double>& out) const {
    ws.buffers.resize(sizes_.size());
    std::vector<const double*> in;
    for (std::size_t o = 0; o < ops_.size(); ++o) {
      const Op& op = ops_[o];
      in.clear();
      for (std::size_t slot : op.inputs)
        in.push_back(slot < tables_ ? tables[slot].data() : ws.buffers[slot - tables_].data());
      auto& dst = ws.buffers[op.out];
      dst.assign(sizes_[op.out], 0.0);
      const std::size_t k = in.size();
      const std::uint32_t* ix = op.index.data();
      if (k == 1) {
        for (std::size_t s = 0; s < op.steps; ++s, ix += 2) dst[ix[0]] += in[0][ix[1]];
      } else if (k == 2) {
        for (std::size_t s = 0; s < op.steps; ++s, ix += 3) dst[ix[0]] += in[0][ix[1]] * in[1][ix[2]];
      } else {
        for (std::size_t s = 0; s < op.steps; ++s, ix += k + 1) {
          double p = in[0][ix[1]];
          for (std::size_t j = 1; j < k; ++j) p *= in[j][ix[j + 1]];
          dst[ix[0]] += p;
        }
      }
    }
    out = ws.buffers[ops_.back().out];
  }

  /// Normalized posterior of the query variable.
  void run(std::span<const std::vector<double>> tables, Workspace& ws, std::vector<double>& out) const {
    run_unnormalized(tables, ws, out);
    double z = 0.0;
    for (double p : out) z += p;
    if (!(z > 0.0) || !std::isfinite(z))
      throw Error(ErrorKind::InconsistentEvidence, "evidence has probability zero");
    for (double& p : out) p /= z;
  }

  std::size_t steps() const {
    std::size_t n = 0;
    for (const auto& op : ops_) n += op.steps;
    return n;
  }

 private:
  struct Op {
    std::vector<std::size_t> inputs;
    std::size_t out = 0;
    std::size_t steps = 0;
    std::vector<std::uint32_t> index;  // per step: output index, then one index per input
  };

  std::size_t query_ = 0;
  std::size_t card_ = 0;
  std::size_t tables_ = 0;
  std::vector<std::size_t> sizes_;
  std::vector<Op> ops_;
};

// ---------------------------------------------------------------------------
// Junction tree

struct JunctionTree {
  struct Edge {
    std::size_t a = 0;
    std::size_t b = 0;
    std::vector<std::size_t> separator;
  };

  std::vector<std::vector<std::size_t>> cliques;  // sorted variable indices
  std::vector<Edge> edges;
  std::vector<std::size_t> family_home;  // clique holding each CPT family
  std::vector<Factor> potentials;
  std::vector<Factor> separators;  // one per edge, meaningful after propagation
  bool calibrated = false;
  double evidence_probability = 1.0;

  /// Rebuilds clique potentials from CPT values (one table per variable).
  void load_tables(const BayesNet& net, std::span<const std::vector<double>> tables) {
    potentials.clear();
    for (const auto& c : cliques) {
      Factor f;
      f.scope = c;
      std::size_t size = 1;
      for (std::size_t v : c) {
        f.cards.push_back(net.cardinality(v));
        size *= net.cardinality(v);
      }
      f.values.assign(size, 1.0);
      potentials.push_back(std::move(f));
    }
    for (std::size_t v = 0; v < net.size(); ++v) {
      const Factor fam = family_factor(net, v, tables[v]);
      Factor& pot = potentials[family_home[v]];
      pot = combine({&pot, &fam}, pot.scope);
    }
    separators.assign(edges.size(), Factor{});
    calibrated = false;
    evidence_probability = 1.0;
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(cliques.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[edges[e].a].push_back(e);
      adj[edges[e].b].push_back(e);
    }
    return adj;
  }
};

/// Moralizes, triangulates (greedy min-fill unless told otherwise), collects
/// maximal cliques and joins them by a maximum-weight spanning tree on
/// separator size, which yields the running-intersection property.
inline JunctionTree build_junction_tree(const BayesNet& net,
                                        OrderStrategy strategy = OrderStrategy::MinFill) {
  detail::Graph g(net.size());
  for (const auto& f : net.families()) {
    auto fam = f.parents;
    fam.push_back(f.child);
    detail::connect_clique(g, fam);
  }
  std::vector<std::size_t> all(net.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> raw;
  detail::greedy_order(g, all, strategy, &raw);

  JunctionTree jt;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < raw.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool subset = std::includes(raw[j].begin(), raw[j].end(), raw[i].begin(), raw[i].end());
      // among equal cliques keep the first one
      if (subset && (raw[j].size() > raw[i].size() || j < i)) dominated = true;
    }
    if (!dominated) jt.cliques.push_back(raw[i]);
  }

  struct Candidate {
    std::size_t weight, a, b;
  };
  std::vector<Candidate> cand;
  for (std::size_t a = 0; a < jt.cliques.size(); ++a)
    for (std::size_t b = a + 1; b < jt.cliques.size(); ++b) {
      std::vector<std::size_t> sep;
      std::set_intersection(jt.cliques[a].begin(), jt.cliques[a].end(), jt.cliques[b].begin(),
                            jt.cliques[b].end(), std::back_inserter(sep));
      cand.push_back({sep.size(), a, b});
    }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Candidate& x, const Candidate& y) { return x.weight > y.weight; });
  std::vector<std::size_t> root(jt.cliques.size());
  std::iota(root.begin(), root.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  for (const auto& c : cand) {
    const std::size_t ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    root[ra] = rb;
    JunctionTree::Edge e{c.a, c.b, {}};
    std::set_intersection(jt.cliques[c.a].begin(), jt.cliques[c.a].end(),
                          jt.cliques[c.b].begin(), jt.cliques[c.b].end(),
                          std::back_inserter(e.separator));
    jt.edges.push_back(std::move(e));
  }

  jt.family_home.assign(net.size(), 0);
  for (std::size_t v = 0; v < net.size(); ++v) {
    auto fam = net.family(v).parents;
    fam.push_back(v);
    std::sort(fam.begin(), fam.end());
    std::size_t best = jt.cliques.size();
    for (std::size_t c = 0; c < jt.cliques.size(); ++c)
      if (std::includes(jt.cliques[c].begin(), jt.cliques[c].end(), fam.begin(), fam.end()) &&
          (best == jt.cliques.size() || jt.cliques[c].size() < jt.cliques[best].size()))
        best = c;
    jt.family_home[v] = best;
  }
  std::vector<std::vector<double>> buf;
  jt.load_tables(net, detail::own_tables(net, buf));
  return jt;
}

namespace detail {

inline Factor divide(const Factor& num, const Factor& den) {
  Factor out = num;
  if (den.values.empty()) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = den.values[i] == 0.0 ? 0.0 : num.values[i] / den.values[i];
  return out;
}

inline void absorb(JunctionTree& jt, std::size_t edge, std::size_t from, std::size_t to) {
  const auto& sep = jt.edges[edge].separator;
  Factor msg = marginal(jt.potentials[from], sep);
  const Factor ratio = divide(msg, jt.separators[edge]);
  Factor& target = jt.potentials[to];
  target = combine({&target, &ratio}, target.scope);
  jt.separators[edge] = std::move(msg);
}

}  // namespace detail

/// Collect + distribute pass. The returned tree's clique and separator
/// potentials are normalized joint marginals P(vars | evidence).
inline JunctionTree propagate(JunctionTree jt, const BayesNet& net, const Evidence& ev = {}) {
  validate_evidence(net, ev);
  for (const auto& [v, s] : ev) apply_indicator(jt.potentials[jt.family_home[v]], v, s);
  for (auto& sep : jt.separators) sep = Factor{};

  const auto adj = jt.adjacency();
  const std::size_t n = jt.cliques.size();
  // BFS from clique 0; edges_in_order[k] links visit[k] to its parent
  std::vector<std::size_t> visit{0}, via_edge{n}, parent{n};
  std::vector<char> seen(n, 0);
  seen[0] = 1;
  for (std::size_t k = 0; k < visit.size(); ++k) {
    const std::size_t c = visit[k];
    for (std::size_t e : adj[c]) {
      const std::size_t o = jt.edges[e].a == c ? jt.edges[e].b : jt.edges[e].a;
      if (seen[o]) continue;
      seen[o] = 1;
      visit.push_back(o);
      via_edge.push_back(e);
      parent.push_back(c);
    }
  }
  for (std::size_t k = visit.size(); k-- > 1;)
    detail::absorb(jt, via_edge[k], visit[k], parent[k]);
  double z = jt.potentials[0].sum();
  // disconnected components are joined by empty separators, so z covers all
  if (!(z > 0.0) || !std::isfinite(z))
    throw Error(ErrorKind::InconsistentEvidence, "evidence has probability zero");
  for (std::size_t k = 1; k < visit.size(); ++k)
    detail::absorb(jt, via_edge[k], parent[k], visit[k]);
  for (auto& p : jt.potentials)
    for (double& x : p.values) x /= z;
  for (auto& s : jt.separators)
    for (double& x : s.values) x /= z;
  jt.calibrated = true;
  jt.evidence_probability = z;
  return jt;
}

/// Posterior of one variable from the smallest calibrated clique holding it.
inline Distribution jt_marginal(const JunctionTree& jt, std::size_t var) {
  std::size_t best = jt.cliques.size();
  for (std::size_t c = 0; c < jt.cliques.size(); ++c)
    if (std::binary_search(jt.cliques[c].begin(), jt.cliques[c].end(), var) &&
        (best == jt.cliques.size() || jt.cliques[c].size() < jt.cliques[best].size()))
      best = c;
  if (best == jt.cliques.size()) throw Error(ErrorKind::UnknownVariable, std::to_string(var));
  Factor m = marginal(jt.potentials[best], {var});
  const double z = m.sum();
  for (double& x : m.values) x /= z;
  return Distribution{var, std::move(m.values)};
}

/// Largest disagreement between the two sides of any separator.
inline double separator_discrepancy(const JunctionTree& jt) {
  double worst = 0.0;
  for (const auto& e : jt.edges) {
    const Factor ma = marginal(jt.potentials[e.a], e.separator);
    const Factor mb = marginal(jt.potentials[e.b], e.separator);
    for (std::size_t i = 0; i < ma.size(); ++i)
      worst = std::max(worst, std::abs(ma.values[i] - mb.values[i]));
  }
  return worst;
}

/// True when every variable shared by two cliques appears in every clique on
/// the tree path between them.
inline bool has_running_intersection(const JunctionTree& jt) {
  const std::size_t n = jt.cliques.size();
  const auto adj = jt.adjacency();
  std::set<std::size_t> vars;
  for (const auto& c : jt.cliques) vars.insert(c.begin(), c.end());
  for (std::size_t v : vars) {
    // cliques containing v must form a connected subtree
    std::vector<std::size_t> holders;
    for (std::size_t c = 0; c < n; ++c)
      if (std::binary_search(jt.cliques[c].begin(), jt.cliques[c].end(), v)) holders.push_back(c);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{holders.front()};
    seen[holders.front()] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      ++reached;
      for (std::size_t e : adj[c]) {
        const std::size_t o = jt.edges[e].a == c ? jt.edges[e].b : jt.edges[e].a;
        if (seen[o] || !std::binary_search(jt.cliques[o].begin(), jt.cliques[o].end(), v))
          continue;
        seen[o] = 1;
        stack.push_back(o);
      }
    }
    if (reached != holders.size()) return false;
  }
  return jt.edges.size() + 1 == n;
}

}  // namespace cvbn
