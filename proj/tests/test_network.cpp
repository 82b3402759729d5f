#include <gtest/gtest.h>

#include <cmath>

#include "branchflow/construct.hpp"
#include "branchflow/network.hpp"
#include "test_support.hpp"

using namespace branchflow;

namespace {

struct Chain {
  TransportNetwork g{Point{0, 0}, 1.0, 1e-9};
  VertexId o = g.root();
  VertexId a = g.add_vertex({1, 0});
  VertexId b = g.add_vertex({2, 0}, 1.0);
  Chain() {
    g.link(o, a, 1.0);
    g.link(a, b, 1.0);
  }
};

TransportNetwork y_network() {
  TransportNetwork g(Point{0, 0}, 1.0, 1e-9);
  const auto b = g.add_vertex({1, 0});
  g.link(g.root(), b, 1.0);
  g.link(b, g.add_vertex({2, 1}, 0.5), 0.5);
  g.link(b, g.add_vertex({2, -1}, 0.5), 0.5);
  return g;
}

// Random tree: each new vertex hangs below a random existing one; leaves carry demand.
TransportNetwork random_tree(test_util::Rng& rng, int n) {
  TransportNetwork g(rng.point(2), 1.0, 1e-12);
  std::vector<VertexId> ids{g.root()};
  for (int i = 0; i < n; ++i) {
    const VertexId p = ids[static_cast<std::size_t>(rng.integer(0, static_cast<int>(ids.size()) - 1))];
    const VertexId v = g.add_vertex(rng.point(2));
    g.link(p, v, 1.0);
    ids.push_back(v);
  }
  // Assign demands to leaves, then weights bottom-up.
  const auto order = g.bfs_order();
  double total = 0.0;
  for (VertexId v : order)
    if (g.children(v).empty() && v != g.root()) {
      g.set_demand(v, rng.uniform(0.1, 1.0));
      total += g.demand(v);
    }
  for (VertexId v : order) g.set_demand(v, g.demand(v) / total);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (*it == g.root()) continue;
    double w = g.demand(*it);
    for (VertexId c : g.children(*it)) w += g.weight(c);
    g.set_weight(*it, w);
  }
  return g;
}

AtomicMeasure targets_of(const TransportNetwork& g) {
  AtomicMeasure b;
  for (VertexId v : g.vertices())
    if (g.demand(v) > 0) b.atoms.push_back({g.point(v), g.demand(v)});
  return b;
}

}  // namespace

TEST(Cost, SingleEdgeAndY) {
  TransportNetwork g(Point{0, 0}, 1.0, 1e-9);
  g.link(g.root(), g.add_vertex({2, 0}, 1.0), 1.0);
  for (double alpha : {0.2, 0.5, 1.0}) EXPECT_DOUBLE_EQ(cost_m_alpha(g, alpha), 2.0);
  EXPECT_NEAR(cost_m_alpha(y_network(), 0.5), 3.0, 1e-14);
  EXPECT_EQ(cost_m_alpha(TransportNetwork(Point{0, 0}, 1.0, 1e-9), 0.5), 0.0);
}

TEST(Cost, MonotoneInWeights) {
  auto g = y_network();
  const double base = cost_m_alpha(g, 0.5);
  const auto leaf = g.children(g.children(g.root()).front()).front();
  g.set_weight(leaf, 0.6);
  EXPECT_GT(cost_m_alpha(g, 0.5), base);
}

TEST(Balance, SingleEdge) {
  TransportNetwork g(Point{0, 0}, 2.0, 1e-9);
  const auto y = g.add_vertex({1, 1}, 2.0);
  g.link(g.root(), y, 2.0);
  const AtomicMeasure a{{{{0, 0}, 2.0}}};
  const AtomicMeasure b{{{{1, 1}, 2.0}}};
  EXPECT_EQ(check_balance(g, a, b).max_abs(), 0.0);

  g.set_weight(y, 1.0);
  const auto report = check_balance(g, a, b);
  for (const auto& e : report.entries) {
    if (e.vertex == g.root()) {
      EXPECT_DOUBLE_EQ(e.residual, 1.0);
    } else if (e.vertex == y) {
      EXPECT_DOUBLE_EQ(e.residual, -1.0);
    }
  }
}

TEST(Balance, MissingTargetIsReportedNotThrown) {
  auto g = y_network();
  const AtomicMeasure a{{{{0, 0}, 1.0}}};
  AtomicMeasure b{{{{2, 1}, 0.5}, {{2, -1}, 0.5}, {{5, 5}, 0.25}}};
  const auto report = check_balance(g, a, b);
  bool found = false;
  for (const auto& e : report.entries)
    if (!e.vertex) {
      found = true;
      EXPECT_DOUBLE_EQ(e.residual, -0.25);
    }
  EXPECT_TRUE(found);
}

TEST(Balance, SubdivisionOutputBalances) {
  test_util::Rng rng(3);
  const auto b = rng.measure(100, 2, 1.0, 0.0, 1.0, false);
  const auto g = build_subdivision(Point{0, 0}, 1.0, b, 0.7);
  EXPECT_LE(check_balance(g, {{{{0, 0}, 1.0}}}, b).max_abs(), 1e-9);
  EXPECT_TRUE(structure_violations(g).empty());
}

TEST(EdgeMass, ChainRootAndLeaves) {
  Chain c;
  EXPECT_EQ(edge_mass(c.g, c.b), 1.0);
  EXPECT_EQ(edge_mass(c.g, c.o), 1.0);
  const auto y = y_network();
  for (VertexId v : y.vertices())
    if (y.children(v).empty()) {
      EXPECT_EQ(edge_mass(y, v), 0.5);
    }
  EXPECT_THROW(edge_mass(c.g, VertexId{99}), std::out_of_range);
}

TEST(EdgeMass, EqualsSubtreeDemand) {
  test_util::Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto g = random_tree(rng, 30);
    for (VertexId u : g.vertices()) {
      if (u == g.root()) continue;
      double below = 0.0;
      for (VertexId w : g.subtree(u)) below += g.demand(w);
      EXPECT_NEAR(edge_mass(g, u), below, 1e-12);
    }
  }
}

TEST(Ancestry, Chain) {
  Chain c;
  EXPECT_TRUE(is_descendant(c.g, c.b, c.a));
  EXPECT_FALSE(is_descendant(c.g, c.a, c.b));
  EXPECT_TRUE(is_descendant(c.g, c.a, c.a));
  for (VertexId v : c.g.vertices()) EXPECT_TRUE(is_descendant(c.g, v, c.o));
  EXPECT_THROW(is_descendant(c.g, c.a, VertexId{42}), std::out_of_range);
}

TEST(PathToRoot, ChainAndRandomTrees) {
  Chain c;
  EXPECT_EQ(path_to_root(c.g, c.o), std::vector<VertexId>{c.o});
  EXPECT_EQ(path_to_root(c.g, c.b), (std::vector<VertexId>{c.o, c.a, c.b}));
  test_util::Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto g = random_tree(rng, 40);
    for (VertexId u : g.vertices()) {
      const auto path = path_to_root(g, u);
      EXPECT_EQ(path.front(), g.root());
      EXPECT_EQ(path.back(), u);
      for (std::size_t i = 1; i < path.size(); ++i) EXPECT_EQ(g.parent(path[i]), path[i - 1]);
    }
  }
}

TEST(Structure, DetectsBrokenTrees) {
  EXPECT_TRUE(structure_violations(y_network()).empty());
  auto g = y_network();
  const auto b = g.children(g.root()).front();
  g.set_weight(b, 0.0);
  EXPECT_FALSE(structure_violations(g).empty());
  auto h = y_network();
  h.unlink(h.children(h.root()).front());
  EXPECT_FALSE(structure_violations(h).empty());
  auto k = y_network();
  const auto junction = k.children(k.root()).front();
  k.unlink(junction);
  k.link(k.children(junction).front(), junction, 1.0);  // cycle off the root
  EXPECT_FALSE(structure_violations(k).empty());
}

TEST(Canonicalize, PrunesZeroWeightEdges) {
  Chain c;
  const auto extra = c.g.add_vertex({0, 1});
  c.g.link(c.o, extra, 0.0);
  const auto g = canonicalize(c.g);
  EXPECT_FALSE(g.contains(extra));
  EXPECT_EQ(g.edge_count(), 2u);
}

TEST(Canonicalize, MergesCoincidentSiblings) {
  TransportNetwork g(Point{0, 0}, 1.0, 1e-9);
  const auto v1 = g.add_vertex({1, 1}, 0.4);
  const auto v2 = g.add_vertex({1, 1}, 0.6);
  g.link(g.root(), v1, 0.4);
  g.link(g.root(), v2, 0.6);
  const auto c = canonicalize(g);
  EXPECT_EQ(c.vertex_count(), 2u);
  ASSERT_EQ(c.edge_count(), 1u);
  EXPECT_DOUBLE_EQ(c.edges().front().weight, 1.0);
  EXPECT_DOUBLE_EQ(c.demand(v1), 1.0);
}

TEST(Canonicalize, MergesDescendantIntoAncestor) {
  // O -> A -> B -> C with C sitting on top of A.
  TransportNetwork g(Point{0, 0}, 1.0, 1e-9);
  const auto a = g.add_vertex({1, 0});
  const auto b = g.add_vertex({2, 0}, 0.5);
  const auto c = g.add_vertex({1, 0}, 0.5);
  g.link(g.root(), a, 1.0);
  g.link(a, b, 1.0);
  g.link(b, c, 0.5);
  canonicalize_in_place(g);
  EXPECT_FALSE(g.contains(c));
  EXPECT_DOUBLE_EQ(g.demand(a), 0.5);
  EXPECT_DOUBLE_EQ(g.weight(b), 0.5);
  EXPECT_LE(check_balance(g, {{{{0, 0}, 1.0}}}, {{{{2, 0}, 0.5}, {{1, 0}, 0.5}}}).max_abs(), 1e-12);
}

TEST(Canonicalize, UnrelatedCoincidenceIsAnError) {
  TransportNetwork g(Point{0, 0}, 1.0, 1e-9);
  const auto a = g.add_vertex({1, 0});
  const auto b = g.add_vertex({0, 1});
  g.link(g.root(), a, 0.5);
  g.link(g.root(), b, 0.5);
  g.link(a, g.add_vertex({5, 5}, 0.5), 0.5);
  g.link(b, g.add_vertex({5, 5.0 + 1e-12}, 0.5), 0.5);
  EXPECT_THROW(canonicalize(g), InvariantViolation);
}

TEST(Canonicalize, CollapsesPassThroughOnRequest) {
  Chain c;
  EXPECT_EQ(canonicalize(c.g).vertex_count(), 3u);
  const auto g = canonicalize(c.g, {.collapse_passthrough = true});
  EXPECT_EQ(g.vertex_count(), 2u);
  EXPECT_EQ(g.parent(c.b), c.o);
}

TEST(Canonicalize, Idempotent) {
  test_util::Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    auto g = random_tree(rng, 25);
    const auto once = canonicalize(g, {.collapse_passthrough = true});
    const auto twice = canonicalize(once, {.collapse_passthrough = true});
    EXPECT_EQ(once.vertex_count(), twice.vertex_count());
    EXPECT_EQ(once.edge_count(), twice.edge_count());
    EXPECT_DOUBLE_EQ(cost_m_alpha(once, 0.5), cost_m_alpha(twice, 0.5));
    EXPECT_TRUE(structure_violations(twice).empty());
    EXPECT_LE(check_balance(twice, {{{g.point(g.root()), 1.0}}}, targets_of(g)).max_abs(), 1e-9);
  }
}
