#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "config.hpp"
#include "construct.hpp"
#include "measures.hpp"
#include "network.hpp"
#include "optimize_local.hpp"

namespace branchflow {

// P_G(u, t): change of cost when a mass t is withdrawn (t > 0) or pushed
// (t < 0) along the root path of u. Withdrawing more than m(u) is an error.
inline double potential(const TransportNetwork& g, VertexId u, double t, double alpha) {
  if (!g.contains(u)) throw std::out_of_range("unknown vertex " + to_string(u));
  if (u == g.root()) return 0.0;
  if (t > edge_mass(g, u) + g.balance_tol())
    throw std::domain_error("cannot withdraw " + std::to_string(t) + " at vertex " + to_string(u));
  double total = 0.0;
  for (auto w = std::optional<VertexId>{u}; w && g.parent(*w); w = g.parent(*w)) {
    const double m = g.weight(*w);
    total += distance(g.point(*g.parent(*w)), g.point(*w)) * (std::pow(m, alpha) - std::pow(std::max(0.0, m - t), alpha));
  }
  return total;
}

// R(G; t, u): subtracts t from every edge on the root path of u. Edges that
// drop to (numerically) zero are deleted, which may leave u's part detached.
inline TransportNetwork shift_mass(TransportNetwork g, double t, VertexId u) {
  if (t > edge_mass(g, u) + g.balance_tol())
    throw std::domain_error("cannot withdraw " + std::to_string(t) + " at vertex " + to_string(u));
  std::vector<VertexId> dropped;
  for (auto w = std::optional<VertexId>{u}; w && g.parent(*w); w = g.parent(*w)) {
    g.set_weight(*w, g.weight(*w) - t);
    if (g.weight(*w) <= g.balance_tol()) dropped.push_back(*w);
  }
  for (VertexId w : dropped) g.unlink(w);
  return g;
}

// Splits every edge longer than factor x (mean edge length) at its midpoint,
// in ascending order of the head vertex, while the vertex count is under the cap.
inline std::size_t subdivide_long_edges(TransportNetwork& g, double factor, std::size_t max_vertices) {
  const auto edges = g.edges();
  if (edges.empty()) return 0;
  double mean = 0.0;
  for (const Edge& e : edges) mean += distance(g.point(e.from), g.point(e.to));
  mean /= static_cast<double>(edges.size());
  std::size_t split = 0;
  for (const Edge& e : edges) {
    if (g.vertex_count() >= max_vertices) break;
    if (!(distance(g.point(e.from), g.point(e.to)) > factor * mean)) continue;
    const VertexId mid = g.add_vertex(lerp(g.point(e.from), g.point(e.to), 0.5));
    g.unlink(e.to);
    g.link(e.from, mid, e.weight);
    g.link(mid, e.to, e.weight);
    ++split;
  }
  return split;
}

struct CandidateParents {
  double sigma = 0.0;
  std::vector<VertexId> vertices;
};

namespace detail {

inline std::vector<char> subtree_mask(const TransportNetwork& g, VertexId u) {
  std::vector<char> mask(g.id_bound(), 0);
  for (VertexId w : g.subtree(u)) mask[w.value] = 1;
  return mask;
}

}  // namespace detail

// L(u): vertices within sigma = P_G(u, m(u)) / m(u)^alpha of u that do not
// descend from u. The current parent always qualifies.
inline CandidateParents candidate_parents(const TransportNetwork& g, VertexId u, double alpha) {
  if (u == g.root()) throw std::invalid_argument("the root has no parent");
  const double m = edge_mass(g, u);
  CandidateParents out;
  out.sigma = potential(g, u, m, alpha) / std::pow(m, alpha);
  const auto below = detail::subtree_mask(g, u);
  const Point& at = g.point(u);
  // Slack so that p(u) survives rounding when the whole path is straight.
  const double radius = out.sigma * (1.0 + 1e-12) + g.merge_tol();
  for (VertexId v : g.vertices())
    if (!below[v.value] && distance(g.point(v), at) <= radius) out.vertices.push_back(v);
  return out;
}

// Costs of detaching u from its parent and re-attaching it elsewhere, all
// evaluated on the withdrawn network R(G; m(u), u) without materialising it.
class RerouteEvaluator {
 public:
  RerouteEvaluator(const TransportNetwork& g, VertexId u, double alpha)
      : g_(g), u_(u), alpha_(alpha), mass_(edge_mass(g, u)), ma_(std::pow(mass_, alpha)),
        on_path_(g.id_bound(), 0), memo_(g.id_bound(), std::numeric_limits<double>::quiet_NaN()) {
    for (VertexId w : path_to_root(g, u)) on_path_[w.value] = 1;
    saved_ = potential(g, u, mass_, alpha);
  }

  double mass() const { return mass_; }
  // S = P_G(u, m(u)).
  double saved() const { return saved_; }

  // c(v) = -P_{G~}(v, -m(u)).
  double extra_cost(VertexId v) {
    std::vector<VertexId> pending;
    VertexId w = v;
    while (std::isnan(memo_[w.value])) {
      if (w == g_.root()) {
        memo_[w.value] = 0.0;
        break;
      }
      pending.push_back(w);
      w = *g_.parent(w);
    }
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) {
      const VertexId x = *it;
      const VertexId p = *g_.parent(x);
      const double reduced = on_path_[x.value] ? std::max(0.0, g_.weight(x) - mass_) : g_.weight(x);
      memo_[x.value] = memo_[p.value] + distance(g_.point(p), g_.point(x)) *
                                            (std::pow(reduced + mass_, alpha_) - std::pow(reduced, alpha_));
    }
    return memo_[v.value];
  }

  // T(v) = c(v) + |v - u| m(u)^alpha.
  double reroute_cost(VertexId v) { return extra_cost(v) + distance(g_.point(v), g_.point(u_)) * ma_; }

  // S - T(v): the cost decrease of moving u under v.
  double gain(VertexId v) { return saved_ - reroute_cost(v); }

 private:
  const TransportNetwork& g_;
  VertexId u_;
  double alpha_;
  double mass_;
  double ma_;
  double saved_ = 0.0;
  std::vector<char> on_path_;
  std::vector<double> memo_;
};

struct ReparentProposal {
  VertexId child;
  VertexId new_parent;
  double gain = 0.0;
  double sigma = 0.0;
  double saved = 0.0;
  double reroute_cost = 0.0;
};

inline double reparent_gain(const TransportNetwork& g, VertexId u, VertexId v, double alpha) {
  return RerouteEvaluator(g, u, alpha).gain(v);
}

// Best new parent v* = argmin T(v) over L(u) \ {p(u)}; a proposal only when
// S - T(v*) exceeds 1e-9 S.
inline std::optional<ReparentProposal> evaluate_reparent(const TransportNetwork& g, VertexId u, double alpha,
                                                         unsigned threads = 1) {
  if (u == g.root() || !g.parent(u)) return std::nullopt;
  const CandidateParents cands = candidate_parents(g, u, alpha);
  RerouteEvaluator eval(g, u, alpha);
  const VertexId current = *g.parent(u);

  std::vector<VertexId> pool;
  pool.reserve(cands.vertices.size());
  for (VertexId v : cands.vertices)
    if (v != current) pool.push_back(v);
  if (pool.empty()) return std::nullopt;

  // Fill the memo serially along each root path, then score in parallel.
  std::vector<double> costs(pool.size());
  for (VertexId v : pool) eval.extra_cost(v);
  auto score = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) costs[i] = eval.reroute_cost(pool[i]);
  };
  if (threads > 1 && pool.size() >= 1024) {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (pool.size() + threads - 1) / threads;
    for (std::size_t lo = 0; lo < pool.size(); lo += chunk)
      workers.emplace_back(score, lo, std::min(pool.size(), lo + chunk));
  } else {
    score(0, pool.size());
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (costs[i] < costs[best]) best = i;
  const double gain = eval.saved() - costs[best];
  if (!(gain > 1e-9 * eval.saved())) return std::nullopt;
  return ReparentProposal{u, pool[best], gain, cands.sigma, eval.saved(), costs[best]};
}

// G* = R(G~; -m(u), v) + m(u)[v, u]. Only the edges below the common ancestor
// of u and v change; vertices left without flow are cleaned up.
inline void apply_reparent(TransportNetwork& g, VertexId u, VertexId v) {
  if (is_descendant(g, v, u)) throw InvariantViolation("new parent descends from the vertex being moved");
  const double m = g.weight(u);
  std::vector<char> above_v(g.id_bound(), 0);
  for (VertexId w : path_to_root(g, v)) above_v[w.value] = 1;
  VertexId w = *g.parent(u);
  while (!above_v[w.value]) {
    g.set_weight(w, g.weight(w) - m);
    w = *g.parent(w);
  }
  const VertexId junction = w;
  for (VertexId x = v; x != junction; x = *g.parent(x)) g.set_weight(x, g.weight(x) + m);
  g.unlink(u);
  g.link(v, u, m);
  canonicalize_in_place(g);
}

// One breadth-first pass of reparenting; returns the number of accepted moves.
inline std::size_t reparent_sweep(TransportNetwork& g, double alpha, const OptimizeConfig& config) {
  std::size_t accepted = 0;
  for (VertexId u : g.bfs_order()) {
    if (!g.contains(u) || u == g.root()) continue;
    const auto prop = evaluate_reparent(g, u, alpha, config.threads);
    if (!prop) continue;
    const double before = cost_m_alpha(g, alpha);
    TransportNetwork backup = g;
    apply_reparent(g, u, prop->new_parent);
    const double after = cost_m_alpha(g, alpha);
    const double eps = 1e-9 * prop->saved;
    const bool paid = after < before - eps;
    config.observer.move({MoveRecord::Kind::Global, u, before, after, eps, !paid});
    if (paid)
      ++accepted;
    else
      g = std::move(backup);
  }
  return accepted;
}

inline TransportNetwork initial_network(const Atom& source, const AtomicMeasure& targets, double alpha,
                                        Initializer init) {
  switch (init) {
    case Initializer::Star: return build_star(source.point, source.mass, targets);
    case Initializer::Small: return build_small(source.point, source.mass, targets, alpha);
    case Initializer::Subdivision: break;
  }
  return build_subdivision(source.point, source.mass, targets, alpha);
}

// Construct, then alternate local star replacement, long-edge subdivision and
// reparenting until a round gains less than rel_tol of the cost.
inline TransportNetwork global_optimize(const AtomicMeasure& source, const AtomicMeasure& targets, double alpha,
                                        const OptimizeConfig& config = {}) {
  require_alpha(alpha);
  if (source.size() != 1) throw InputError("exactly one source atom is required");
  const Atom& a = source.atoms.front();
  TransportNetwork g = initial_network(a, targets, alpha, config.initializer);
  config.observer.stage({Stage::Init, 0, 0, cost_m_alpha(g, alpha)}, g);

  const std::size_t max_vertices = std::max<std::size_t>(config.max_vertices_per_target * targets.size(), 1);
  for (int round = 1; round <= config.max_rounds; ++round) {
    const double start = cost_m_alpha(g, alpha);
    local_sweep(g, alpha, config, round);
    // With alpha = 1 every junction collapses and the star is already optimal.
    if (alpha < 1.0) {
      subdivide_long_edges(g, config.subdivide_factor, max_vertices);
      config.observer.stage({Stage::Subdivide, round, 0, cost_m_alpha(g, alpha)}, g);
      reparent_sweep(g, alpha, config);
      config.observer.stage({Stage::Reparent, round, 0, cost_m_alpha(g, alpha)}, g);
    }
    const double end = cost_m_alpha(g, alpha);
    if (!(start - end >= config.rel_tol * start)) break;
  }
  canonicalize_in_place(g, {.collapse_passthrough = true});
  config.observer.stage({Stage::Final, 0, 0, cost_m_alpha(g, alpha)}, g);
  return g;
}

}  // namespace branchflow
