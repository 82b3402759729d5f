#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bifurcation.hpp"
#include "errors.hpp"
#include "measures.hpp"
#include "network.hpp"
#include "point.hpp"

namespace branchflow {

// lambda cells per axis and K = lambda^d cells per split.
struct SubdivisionParams {
  int lambda = 3;
  int K = 9;

  static SubdivisionParams for_dimension(std::size_t d) {
    if (d < 2) throw InputError("dimension must be at least 2");
    SubdivisionParams p;
    p.lambda = d == 2 ? 3 : 2;
    p.K = 1;
    for (std::size_t i = 0; i < d; ++i) p.K *= p.lambda;
    return p;
  }
};

namespace detail {

// Node of a tree produced by the greedy pair merge, before it is spliced into a
// network: the root, one of the input terminals, or a new junction.
struct SmallNode {
  enum class Kind { Root, Terminal, Junction };
  Kind kind;
  std::size_t index = 0;
};

struct SmallLink {
  SmallNode from;
  SmallNode to;
  double weight;
};

struct SmallTree {
  std::vector<Point> junctions;
  std::vector<SmallLink> links;
  double cost = 0.0;
};

inline double small_tree_cost(const Point& root, const std::vector<Atom>& terminals, const SmallTree& tree,
                              double alpha) {
  auto at = [&](SmallNode n) -> const Point& {
    switch (n.kind) {
      case SmallNode::Kind::Root: return root;
      case SmallNode::Kind::Terminal: return terminals[n.index].point;
      case SmallNode::Kind::Junction: return tree.junctions[n.index];
    }
    return root;
  };
  double c = 0.0;
  for (const SmallLink& l : tree.links) c += std::pow(l.weight, alpha) * distance(at(l.from), at(l.to));
  return c;
}

// Greedy junctions are placed as if fed from the root. Re-solve each junction
// against its actual parent and children until the positions settle.
inline void refine_junctions(const Point& root, const std::vector<Atom>& terminals, SmallTree& tree, double alpha) {
  const std::size_t nj = tree.junctions.size();
  if (nj == 0) return;
  struct Block {
    std::optional<SmallNode> parent;
    std::vector<const SmallLink*> kids;
  };
  std::vector<Block> blocks(nj);
  for (const SmallLink& l : tree.links) {
    if (l.to.kind == SmallNode::Kind::Junction) blocks[l.to.index].parent = l.from;
    if (l.from.kind == SmallNode::Kind::Junction) blocks[l.from.index].kids.push_back(&l);
  }
  std::vector<Point> pos = tree.junctions;
  auto at = [&](SmallNode n) -> const Point& {
    switch (n.kind) {
      case SmallNode::Kind::Root: return root;
      case SmallNode::Kind::Terminal: return terminals[n.index].point;
      case SmallNode::Kind::Junction: return pos[n.index];
    }
    return root;
  };
  double scale = 0.0;
  for (const Atom& a : terminals) scale = std::max(scale, distance(root, a.point));
  for (int pass = 0; pass < 200; ++pass) {
    double moved = 0.0;
    for (std::size_t j = nj; j-- > 0;) {
      const Block& b = blocks[j];
      if (!b.parent || b.kids.size() != 2) continue;
      const SmallLink& l1 = *b.kids[0];
      const SmallLink& l2 = *b.kids[1];
      Point next = at(l1.to);
      if (!(at(l1.to) == at(l2.to)))
        next = solve_two_targets({at(*b.parent), at(l1.to), at(l2.to), l1.weight, l2.weight, alpha}).b_star;
      moved = std::max(moved, distance(next, pos[j]));
      pos[j] = std::move(next);
    }
    if (!(moved > 1e-12 * scale)) break;
  }
  SmallTree refined{pos, tree.links, 0.0};
  refined.cost = small_tree_cost(root, terminals, refined, alpha);
  if (refined.cost < tree.cost) tree = std::move(refined);
}

// Greedy pair merging: repeatedly join the pair of open items with the largest
// Y-over-V advantage at their branch point, until no pair gains; the survivors
// attach straight to the root.
inline SmallTree greedy_tree(const Point& root, const std::vector<Atom>& terminals, double alpha,
                             std::optional<std::pair<std::size_t, std::size_t>> first = std::nullopt) {
  struct Item {
    Point pos;
    double mass;
    SmallNode node;
    bool open;
  };
  std::vector<Item> items;
  items.reserve(2 * terminals.size());
  for (std::size_t i = 0; i < terminals.size(); ++i)
    items.push_back({terminals[i].point, terminals[i].mass, {SmallNode::Kind::Terminal, i}, true});

  SmallTree tree;
  auto link_cost = [&](const Point& a, const Point& b, double w) { return std::pow(w, alpha) * distance(a, b); };

  auto pair_input = [&](std::size_t i, std::size_t j) {
    return BifurcationInput{root, items[i].pos, items[j].pos, items[i].mass, items[j].mass, alpha};
  };
  // Advantage of a pair, zero when it is not worth a junction.
  auto gain = [&](std::size_t i, std::size_t j) {
    if (items[i].pos == items[j].pos) return 0.0;
    const BifurcationInput in = pair_input(i, j);
    const double g = advantage(in);
    return g > cost_tolerance(in) ? g : 0.0;
  };

  std::vector<std::vector<double>> gains(items.capacity(), std::vector<double>());
  for (std::size_t j = 0; j < items.size(); ++j) {
    gains[j].resize(j, 0.0);
    for (std::size_t i = 0; i < j; ++i) gains[j][i] = gain(i, j);
  }

  for (;;) {
    double best = 0.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i].open) continue;
      for (std::size_t j = i + 1; j < items.size(); ++j)
        if (items[j].open && gains[j][i] > best) {
          best = gains[j][i];
          bi = i;
          bj = j;
        }
    }
    if (first) {
      bi = first->first;
      bj = first->second;
      best = gains[bj][bi];
      first.reset();
    }
    if (best <= 0.0) break;

    const BifurcationResult r = solve_two_targets(pair_input(bi, bj));
    const SmallNode junction{SmallNode::Kind::Junction, tree.junctions.size()};
    tree.junctions.push_back(r.b_star);
    for (std::size_t k : {bi, bj}) {
      tree.links.push_back({junction, items[k].node, items[k].mass});
      tree.cost += link_cost(r.b_star, items[k].pos, items[k].mass);
      items[k].open = false;
    }
    items.push_back({r.b_star, items[bi].mass + items[bj].mass, junction, true});
    const std::size_t n = items.size() - 1;
    if (gains.size() <= n) gains.resize(n + 1);
    gains[n].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (items[i].open) gains[n][i] = gain(i, n);
  }

  for (const Item& it : items) {
    if (!it.open) continue;
    tree.links.push_back({{SmallNode::Kind::Root, 0}, it.node, it.mass});
    tree.cost += link_cost(root, it.pos, it.mass);
  }
  refine_junctions(root, terminals, tree, alpha);
  return tree;
}

// The greedy tree, and for three or four terminals also every tree whose
// first merge is a fixed pair; the cheapest wins, earlier candidates on ties.
inline SmallTree small_tree(const Point& root, const std::vector<Atom>& terminals, double alpha) {
  SmallTree best = greedy_tree(root, terminals, alpha);
  if (terminals.size() < 3 || terminals.size() > 4) return best;
  for (std::size_t j = 1; j < terminals.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) {
      SmallTree t = greedy_tree(root, terminals, alpha, std::pair{i, j});
      if (t.cost < best.cost * (1.0 - 1e-12)) best = std::move(t);
    }
  return best;
}

// Adds the junctions and links of `tree` to `g`, with the tree root mapped to
// `root` and terminal i mapped to `terminals[i]`.
inline void splice_small_tree(TransportNetwork& g, VertexId root, const std::vector<VertexId>& terminals,
                              const SmallTree& tree) {
  std::vector<VertexId> junctions;
  junctions.reserve(tree.junctions.size());
  for (const Point& p : tree.junctions) junctions.push_back(g.add_vertex(p));
  auto resolve = [&](SmallNode n) {
    switch (n.kind) {
      case SmallNode::Kind::Root: return root;
      case SmallNode::Kind::Terminal: return terminals[n.index];
      case SmallNode::Kind::Junction: return junctions[n.index];
    }
    return root;
  };
  for (const SmallLink& l : tree.links) g.link(resolve(l.from), resolve(l.to), l.weight);
}

inline std::vector<Point> all_points(const Point& source, const AtomicMeasure& targets) {
  std::vector<Point> pts{source};
  for (const Atom& a : targets.atoms) pts.push_back(a.point);
  return pts;
}

inline void check_targets(const Point& source, double source_mass, const AtomicMeasure& targets) {
  if (targets.empty()) throw InputError("target measure is empty");
  if (!(source_mass > 0.0)) throw InputError("source mass must be positive");
  const auto violations = validate(targets);
  if (!violations.empty())
    throw InputError(std::string("invalid target measure: ") + to_string(violations.front().kind) + " at atom " +
                     std::to_string(violations.front().index));
  if (targets.dim() != source.dim()) throw InputError("source and targets differ in dimension");
  if (targets.dim() < 2) throw InputError("dimension must be at least 2");
  const double total = total_mass(targets);
  if (std::abs(total - source_mass) > 1e-9 * source_mass)
    throw InputError("mass mismatch: source " + std::to_string(source_mass) + " vs targets " + std::to_string(total));
}

inline std::vector<VertexId> add_targets(TransportNetwork& g, const std::vector<Atom>& atoms) {
  std::vector<VertexId> ids;
  ids.reserve(atoms.size());
  for (const Atom& a : atoms) ids.push_back(g.add_vertex(a.point, a.mass));
  return ids;
}

}  // namespace detail

// Greedy small-N construction: a single edge for one target, the exact
// bifurcation for two, pairwise merging of the best advantage beyond that.
inline TransportNetwork build_small(const Point& source_point, double source_mass, const AtomicMeasure& targets,
                                    double alpha) {
  require_alpha(alpha);
  detail::check_targets(source_point, source_mass, targets);
  TransportNetwork g(source_point, source_mass, merge_tolerance(detail::all_points(source_point, targets)));
  const auto terminals = detail::add_targets(g, targets.atoms);
  detail::splice_small_tree(g, g.root(), terminals, detail::small_tree(source_point, targets.atoms, alpha));
  canonicalize_in_place(g);
  return g;
}

// Sum m_i [O, y_i].
inline TransportNetwork build_star(const Point& source_point, double source_mass, const AtomicMeasure& targets) {
  detail::check_targets(source_point, source_mass, targets);
  TransportNetwork g(source_point, source_mass, merge_tolerance(detail::all_points(source_point, targets)));
  for (const Atom& a : targets.atoms) g.link(g.root(), g.add_vertex(a.point, a.mass), a.mass);
  canonicalize_in_place(g);
  return g;
}

namespace detail {

constexpr int kMaxSubdivisionDepth = 32;

inline void subdivide(TransportNetwork& g, VertexId src, const AtomicMeasure& targets, const Box& cube, int depth,
                      const SubdivisionParams& params, double alpha) {
  const Point origin = g.point(src);
  if (targets.size() <= static_cast<std::size_t>(params.K)) {
    splice_small_tree(g, src, add_targets(g, targets.atoms), small_tree(origin, targets.atoms, alpha));
    return;
  }
  if (depth >= kMaxSubdivisionDepth) {
    for (const Atom& a : targets.atoms) g.link(src, g.add_vertex(a.point, a.mass), a.mass);
    return;
  }
  std::vector<Atom> centers;
  std::vector<AtomicMeasure> parts;
  std::vector<Box> cells;
  for (Box& cell : cube.split(params.lambda)) {
    AtomicMeasure part = restrict(targets, cell);
    if (part.empty()) continue;
    centers.push_back({cell.center(), total_mass(part)});
    parts.push_back(std::move(part));
    cells.push_back(std::move(cell));
  }
  std::vector<VertexId> hubs;
  for (const Atom& c : centers) hubs.push_back(g.add_vertex(c.point));
  splice_small_tree(g, src, hubs, small_tree(origin, centers, alpha));
  for (std::size_t i = 0; i < hubs.size(); ++i) subdivide(g, hubs[i], parts[i], cells[i], depth + 1, params, alpha);
}

// Splits high-degree vertices by pulling pairs of children onto a new junction
// (or onto each other when the bifurcation collapses) until degree <= K.
inline void limit_degree(TransportNetwork& g, std::size_t max_degree, double alpha) {
  for (VertexId v : g.bfs_order()) {
    while (g.degree(v) > max_degree) {
      const std::vector<VertexId> kids = g.children(v);
      const Point& at = g.point(v);
      double best_gain = -1.0;
      double best_angle = std::numeric_limits<double>::infinity();
      std::size_t bi = 0, bj = 1, ai = 0, aj = 1;
      for (std::size_t i = 0; i < kids.size(); ++i)
        for (std::size_t j = i + 1; j < kids.size(); ++j) {
          const Point& pi = g.point(kids[i]);
          const Point& pj = g.point(kids[j]);
          const double gij = advantage({at, pi, pj, g.weight(kids[i]), g.weight(kids[j]), alpha});
          if (gij > best_gain) {
            best_gain = gij;
            bi = i;
            bj = j;
          }
          const double ang = angle_at(at, pi, pj);
          if (ang < best_angle) {
            best_angle = ang;
            ai = i;
            aj = j;
          }
        }
      const VertexId h1 = kids[bi];
      const VertexId h2 = kids[bj];
      const double m1 = g.weight(h1);
      const double m2 = g.weight(h2);
      const BifurcationResult r = solve_two_targets({at, g.point(h1), g.point(h2), m1, m2, alpha});
      if (best_gain > 0.0 && r.kind == BifurcationCase::CollapseToP) {
        g.unlink(h2);
        g.link(h1, h2, m2);
        g.set_weight(h1, m1 + m2);
      } else if (best_gain > 0.0 && r.kind == BifurcationCase::CollapseToQ) {
        g.unlink(h1);
        g.link(h2, h1, m1);
        g.set_weight(h2, m1 + m2);
      } else {
        // No pair gains from branching: fork the narrowest pair halfway to the nearer child.
        VertexId a = kids[ai], b = kids[aj];
        Point fork = r.b_star;
        if (!(best_gain > 0.0 && r.kind == BifurcationCase::InteriorY)) {
          const VertexId nearer = distance(at, g.point(a)) <= distance(at, g.point(b)) ? a : b;
          fork = lerp(at, g.point(nearer), 0.5);
        } else {
          a = h1;
          b = h2;
        }
        const double wa = g.weight(a);
        const double wb = g.weight(b);
        const VertexId j = g.add_vertex(fork);
        g.unlink(a);
        g.unlink(b);
        g.link(v, j, wa + wb);
        g.link(j, a, wa);
        g.link(j, b, wb);
      }
    }
  }
}

}  // namespace detail

// Recursive cube subdivision: targets are bucketed into K = lambda^d cells,
// the source feeds the cell centers with the greedy construction, and each
// cell is solved recursively from its center. Every vertex ends with degree <= K.
inline TransportNetwork build_subdivision(const Point& source_point, double source_mass, const AtomicMeasure& targets,
                                          double alpha) {
  require_alpha(alpha);
  detail::check_targets(source_point, source_mass, targets);
  const SubdivisionParams params = SubdivisionParams::for_dimension(source_point.dim());
  if (targets.size() <= static_cast<std::size_t>(params.K)) return build_small(source_point, source_mass, targets, alpha);

  const auto pts = detail::all_points(source_point, targets);
  TransportNetwork g(source_point, source_mass, merge_tolerance(pts));
  detail::subdivide(g, g.root(), targets, bounding_cube(pts, 0.01), 0, params, alpha);
  canonicalize_in_place(g);
  detail::limit_degree(g, static_cast<std::size_t>(params.K), alpha);
  canonicalize_in_place(g);
  return g;
}

inline TransportNetwork build_subdivision(const AtomicMeasure& source, const AtomicMeasure& targets, double alpha) {
  if (source.size() != 1) throw InputError("subdivision requires a single source atom");
  return build_subdivision(source.atoms.front().point, source.atoms.front().mass, targets, alpha);
}

}  // namespace branchflow
