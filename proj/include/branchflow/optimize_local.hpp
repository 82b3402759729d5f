#pragma once

#include <optional>
#include <vector>

#include "config.hpp"
#include "construct.hpp"
#include "measures.hpp"
#include "network.hpp"

namespace branchflow {

// The edges meeting a vertex u, seen as a transport problem from p(u) (mass
// m(u)) to u's children. Target mass absorbed at u itself is kept as an extra
// terminal located at u so that both sides balance.
struct VertexStar {
  VertexId center;
  VertexId parent;
  Atom source;
  AtomicMeasure sinks;
  std::vector<VertexId> sink_ids;
  double old_cost = 0.0;
};

// Empty for the root and for leaves, where there is nothing to rebuild.
inline std::optional<VertexStar> extract_star(const TransportNetwork& g, VertexId u, double alpha) {
  if (u == g.root() || !g.parent(u) || g.children(u).empty()) return std::nullopt;
  VertexStar star;
  star.center = u;
  star.parent = *g.parent(u);
  star.source = {g.point(star.parent), g.weight(u)};
  const Point& at = g.point(u);
  star.old_cost = std::pow(g.weight(u), alpha) * distance(star.source.point, at);
  for (VertexId h : g.children(u)) {
    star.sinks.atoms.push_back({g.point(h), g.weight(h)});
    star.sink_ids.push_back(h);
    star.old_cost += std::pow(g.weight(h), alpha) * distance(at, g.point(h));
  }
  if (g.demand(u) > g.balance_tol()) {
    star.sinks.atoms.push_back({at, g.demand(u)});
    star.sink_ids.push_back(u);
  }
  return star;
}

// Replaces the star of u by the greedy construction from p(u) to its sinks
// when that is cheaper by more than 1e-9 of the star's cost. The whole network
// cost is recomputed after the splice and the move is undone if it did not pay.
inline bool improve_vertex(TransportNetwork& g, VertexId u, double alpha, const Observer& observer = {}) {
  const auto star = extract_star(g, u, alpha);
  if (!star) return false;
  const detail::SmallTree tree = detail::small_tree(star->source.point, star->sinks.atoms, alpha);
  const double eps = 1e-9 * star->old_cost;
  if (!(tree.cost < star->old_cost - eps)) return false;

  const double before = cost_m_alpha(g, alpha);
  TransportNetwork backup = g;
  const bool keeps_demand = g.demand(u) > g.balance_tol();
  for (VertexId h : star->sink_ids)
    if (h != u) g.unlink(h);
  g.unlink(u);
  if (!keeps_demand) g.remove_vertex(u);
  detail::splice_small_tree(g, star->parent, star->sink_ids, tree);
  canonicalize_in_place(g);

  const double after = cost_m_alpha(g, alpha);
  const bool paid = after < before - eps;
  observer.move({MoveRecord::Kind::Local, u, before, after, eps, !paid});
  if (!paid) g = std::move(backup);
  return paid;
}

// Breadth-first sweeps of improve_vertex until a sweep gains less than
// rel_tol of the cost, or max_local_sweeps is reached. Returns the sweep count.
inline int local_sweep(TransportNetwork& g, double alpha, const OptimizeConfig& config, int round = 0) {
  int sweeps = 0;
  while (sweeps < config.max_local_sweeps) {
    const double start = cost_m_alpha(g, alpha);
    for (VertexId u : g.bfs_order())
      if (g.contains(u)) improve_vertex(g, u, alpha, config.observer);
    ++sweeps;
    const double end = cost_m_alpha(g, alpha);
    config.observer.stage({Stage::LocalSweep, round, sweeps, end}, g);
    if (!(start - end >= config.rel_tol * start)) break;
  }
  return sweeps;
}

}  // namespace branchflow
