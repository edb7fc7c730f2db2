#include <gtest/gtest.h>

#include <random>

#include "cvbn/bn.hpp"
#include "cvbn/bn_io.hpp"
#include "test_nets.hpp"

namespace cvbn {
namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::ParseError;
}

TEST(BuildNetwork, MinimalChainIsValid) {
  const BayesNet net = testing::toy_chain();
  EXPECT_EQ(net.size(), 2u);
  EXPECT_EQ(topological_order(net), (std::vector<std::size_t>{0, 1}));
}

TEST(BuildNetwork, SelfLoopIsCycle) {
  EXPECT_EQ(kind_of([] {
              build_network({{"A", "A", {"t", "f"}}}, {{"A", {"A"}, {0.5, 0.5, 0.5, 0.5}}});
            }),
            ErrorKind::CycleDetected);
}

TEST(BuildNetwork, TwoNodeCycle) {
  EXPECT_EQ(kind_of([] {
              build_network({{"A", "A", {"t", "f"}}, {"B", "B", {"t", "f"}}},
                            {{"A", {"B"}, {0.5, 0.5, 0.5, 0.5}},
                             {"B", {"A"}, {0.5, 0.5, 0.5, 0.5}}});
            }),
            ErrorKind::CycleDetected);
}

TEST(BuildNetwork, RowThatSumsPastOneIsRejected) {
  EXPECT_EQ(kind_of([] { build_network({{"A", "A", {"t", "f"}}}, {{"A", {}, {0.5, 0.6}}}); }),
            ErrorKind::RowNotNormalized);
}

TEST(BuildNetwork, RoundOffIsRenormalized) {
  const BayesNet net =
      build_network({{"A", "A", {"t", "f"}}}, {{"A", {}, {0.3 + 4e-10, 0.7}}});
  EXPECT_NEAR(net.family(0).table[0] + net.family(0).table[1], 1.0, 1e-15);
}

TEST(BuildNetwork, StructuralErrors) {
  EXPECT_EQ(kind_of([] { build_network({{"A", "A", {"t", "f"}}}, {}); }), ErrorKind::MissingCpt);
  EXPECT_EQ(kind_of([] { build_network({{"A", "A", {"t", "f"}}}, {{"A", {}, {1.0}}}); }),
            ErrorKind::ArityMismatch);
  EXPECT_EQ(kind_of([] { build_network({{"A", "A", {"t", "f"}}}, {{"A", {"Z"}, {0.5, 0.5}}}); }),
            ErrorKind::UnknownVariable);
  EXPECT_EQ(kind_of([] { build_network({{"A", "A", {"t"}}}, {{"A", {}, {1.0}}}); }),
            ErrorKind::InvalidVariable);
  EXPECT_EQ(kind_of([] { build_network({{"A", "A", {"T", "true"}}}, {{"A", {}, {0.5, 0.5}}}); }),
            ErrorKind::InvalidVariable);
  EXPECT_EQ(kind_of([] {
              build_network({{"A", "A", {"t", "f"}}},
                            {{"A", {}, {0.5, 0.5}}, {"A", {}, {0.5, 0.5}}});
            }),
            ErrorKind::DuplicateCpt);
  EXPECT_EQ(kind_of([] { build_network({}, {}); }), ErrorKind::InvalidVariable);
}

TEST(BuildNetwork, StateLabelsAreCanonical) {
  const BayesNet net = build_network({{"SC", "SC", {"N", "L", "M", "H", "C"}}},
                                     {{"SC", {}, {0.2, 0.2, 0.2, 0.2, 0.2}}});
  EXPECT_EQ(net.variable(0).states,
            (std::vector<std::string>{"none", "low", "med", "high", "cri"}));
  EXPECT_EQ(net.state_index(0, "Critical"), 4u);
  EXPECT_EQ(canonical_state("F"), "false");
}

TEST(TopologicalOrder, Chain) {
  const BayesNet net = build_network(
      {{"C", "C", {"a", "b"}}, {"A", "A", {"a", "b"}}, {"B", "B", {"a", "b"}}},
      {{"A", {}, {0.5, 0.5}}, {"B", {"A"}, {1, 0, 0, 1}}, {"C", {"B"}, {1, 0, 0, 1}}});
  const auto order = topological_order(net);
  EXPECT_EQ(order, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(TopologicalOrder, Diamond) {
  const BayesNet net = build_network(
      {{"A", "A", {"a", "b"}}, {"B", "B", {"a", "b"}}, {"C", "C", {"a", "b"}},
       {"D", "D", {"a", "b"}}},
      {{"A", {}, {0.5, 0.5}},
       {"B", {"A"}, {1, 0, 0, 1}},
       {"C", {"A"}, {1, 0, 0, 1}},
       {"D", {"B", "C"}, {1, 0, 1, 0, 1, 0, 0, 1}}});
  const auto order = topological_order(net);
  EXPECT_EQ(order.front(), 0u);
  EXPECT_EQ(order.back(), 3u);
}

TEST(TopologicalOrder, ParentsPrecedeChildrenOnRandomNets) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const BayesNet net = testing::random_net(rng);
    std::vector<std::size_t> pos(net.size());
    const auto order = topological_order(net);
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& f : net.families())
      for (std::size_t p : f.parents) EXPECT_LT(pos[p], pos[f.child]);
  }
}

TEST(JointEnumerate, HandComputedMarginal) {
  const BayesNet net = testing::toy_chain();
  const Distribution b = joint_enumerate(net, "B", {});
  EXPECT_NEAR(b[0], 0.55, 1e-12);
  EXPECT_NEAR(b[1], 0.45, 1e-12);
}

TEST(JointEnumerate, BayesRuleByHand) {
  const BayesNet net = testing::toy_chain();
  Evidence ev;
  net.observe(ev, "B", "low");
  const Distribution a = joint_enumerate(net, "A", ev);
  EXPECT_NEAR(a[0], 0.45 / 0.55, 1e-12);
}

TEST(JointEnumerate, Errors) {
  const BayesNet net = testing::toy_chain();
  EXPECT_EQ(kind_of([&] { joint_enumerate(net, "Q", {}); }), ErrorKind::UnknownVariable);
  EXPECT_EQ(kind_of([&] { joint_enumerate(net, "A", {}, 3.0); }), ErrorKind::StateSpaceTooLarge);
  const BayesNet det = build_network({{"A", "A", {"a", "b"}}, {"B", "B", {"a", "b"}}},
                                     {{"A", {}, {1.0, 0.0}}, {"B", {"A"}, {1, 0, 0, 1}}});
  Evidence ev;
  ev.set(1, 1);
  EXPECT_EQ(kind_of([&] { joint_enumerate(det, "A", ev); }), ErrorKind::InconsistentEvidence);
}

// Property: adding one back-edge to any random DAG is rejected.
TEST(Properties, BackEdgeIsAlwaysRejected) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto parts = testing::random_net_parts(rng);
    // find an existing edge p -> c and add c as a parent of p
    auto it = std::find_if(parts.cpts.begin(), parts.cpts.end(),
                           [](const Cpt& c) { return !c.parents.empty(); });
    if (it == parts.cpts.end()) continue;
    const std::string child = it->child;
    const std::string parent = it->parents.front();
    for (auto& c : parts.cpts)
      if (c.child == parent) {
        c.parents.push_back(child);
        const std::size_t card =
            std::find_if(parts.vars.begin(), parts.vars.end(),
                         [&](const Variable& v) { return v.id == child; })
                ->cardinality();
        std::vector<double> grown;
        const std::size_t own =
            std::find_if(parts.vars.begin(), parts.vars.end(),
                         [&](const Variable& v) { return v.id == parent; })
                ->cardinality();
        const std::size_t rows = c.table.size() / own;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t k = 0; k < card; ++k)
            for (std::size_t s = 0; s < own; ++s) grown.push_back(c.table[r * own + s]);
        c.table = std::move(grown);
      }
    EXPECT_EQ(kind_of([&] { build_network(parts.vars, parts.cpts); }), ErrorKind::CycleDetected);
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

// Property: the factored joint sums to one.
TEST(Properties, JointSumsToOne) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const BayesNet net = testing::random_net(rng);
    const Enumeration e = enumerate_joint(net, 0, {});
    EXPECT_NEAR(e.evidence_probability, 1.0, 1e-6);
  }
}

// Property: evidence on a disconnected variable leaves every marginal alone.
TEST(Properties, MarginalInvarianceUnderIndependentEvidence) {
  std::mt19937_64 rng(17);
  testing::RandomNetOptions opt;
  opt.max_vars = 10;
  opt.zero_entry_rate = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    auto parts = testing::random_net_parts(rng, opt);
    parts.vars.push_back({"ISO", "ISO", {"x", "y", "z"}});
    parts.cpts.push_back({"ISO", {}, {0.2, 0.3, 0.5}});
    const BayesNet net = build_network(parts.vars, parts.cpts);
    const std::size_t iso = net.index_of("ISO");
    Evidence ev;
    ev.set(iso, trial % 3);
    for (std::size_t q = 0; q < net.size(); ++q) {
      if (q == iso) continue;
      const Distribution a = joint_enumerate(net, q, {});
      const Distribution b = joint_enumerate(net, q, ev);
      for (std::size_t s = 0; s < a.size(); ++s) EXPECT_NEAR(a[s], b[s], 1e-12);
    }
  }
}

TEST(Serialization, RoundTripIsByteStable) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    BayesNet net = testing::random_net(rng);
    net.set_name("random-" + std::to_string(trial));
    const std::string first = save_network(net);
    const BayesNet again = load_network(first);
    const std::string second = save_network(again);
    EXPECT_EQ(first, second);
    EXPECT_EQ(save_network(load_network(second)), second);
    for (std::size_t v = 0; v < net.size(); ++v)
      EXPECT_EQ(net.family(v).table, again.family(v).table);
  }
}

TEST(Serialization, RejectsForeignDocuments) {
  EXPECT_EQ(kind_of([] { load_network("{\"format\": \"other\"}"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { load_network("not json"); }), ErrorKind::ParseError);
}

}  // namespace
}  // namespace cvbn
