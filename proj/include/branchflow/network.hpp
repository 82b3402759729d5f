#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "measures.hpp"
#include "point.hpp"

namespace branchflow {

struct VertexId {
  std::uint32_t value = 0;
  friend auto operator<=>(const VertexId&, const VertexId&) = default;
};

inline std::string to_string(VertexId v) { return std::to_string(v.value); }

struct Edge {
  VertexId from;
  VertexId to;
  double weight;
};

// Weighted directed tree rooted at the single source. Each non-root vertex
// stores its unique parent together with the weight m(u) of the edge
// [p(u), u]; a vertex may additionally absorb target mass (`demand`).
//
// Ids are never reused. Mutators keep the parent/child lists consistent but do
// not enforce balance: transient states produced by mass shifting may be forests.
class TransportNetwork {
 public:
  TransportNetwork(Point source, double source_mass, double merge_tol)
      : source_mass_(source_mass), merge_tol_(merge_tol) {
    root_ = add_vertex(std::move(source));
  }

  VertexId root() const { return root_; }
  std::size_t dim() const { return v_[root_.value].point.dim(); }
  double source_mass() const { return source_mass_; }
  double merge_tol() const { return merge_tol_; }
  double balance_tol() const { return 1e-9 * source_mass_; }

  VertexId add_vertex(Point p, double demand = 0.0) {
    if (!v_.empty() && p.dim() != dim()) throw std::invalid_argument("vertex dimension mismatch");
    VertexId id{static_cast<std::uint32_t>(v_.size())};
    v_.push_back(Vertex{std::move(p), std::nullopt, 0.0, demand, {}, true});
    ++alive_;
    return id;
  }

  void link(VertexId parent, VertexId child, double weight) {
    Vertex& c = at(child);
    Vertex& p = at(parent);
    if (c.parent) throw InvariantViolation("vertex " + to_string(child) + " already has a parent");
    if (child == root_) throw InvariantViolation("root cannot have a parent");
    if (parent == child) throw InvariantViolation("self loop at " + to_string(child));
    c.parent = parent;
    c.weight = weight;
    p.children.insert(std::lower_bound(p.children.begin(), p.children.end(), child), child);
  }

  void unlink(VertexId child) {
    Vertex& c = at(child);
    if (!c.parent) return;
    auto& siblings = at(*c.parent).children;
    siblings.erase(std::lower_bound(siblings.begin(), siblings.end(), child));
    c.parent.reset();
    c.weight = 0.0;
  }

  void set_weight(VertexId child, double w) { at(child).weight = w; }
  void set_demand(VertexId v, double d) { at(v).demand = d; }

  // Vertex must be detached (no parent, no children) and not the root.
  void remove_vertex(VertexId id) {
    Vertex& x = at(id);
    if (id == root_) throw InvariantViolation("cannot remove the root");
    if (x.parent || !x.children.empty())
      throw InvariantViolation("cannot remove attached vertex " + to_string(id));
    x.alive = false;
    x.children.shrink_to_fit();
    --alive_;
  }

  bool contains(VertexId id) const { return id.value < v_.size() && v_[id.value].alive; }
  const Point& point(VertexId id) const { return at(id).point; }
  std::optional<VertexId> parent(VertexId id) const { return at(id).parent; }
  const std::vector<VertexId>& children(VertexId id) const { return at(id).children; }
  // Weight of the incoming edge; zero when there is none.
  double weight(VertexId id) const { return at(id).weight; }
  double demand(VertexId id) const { return at(id).demand; }
  std::size_t degree(VertexId id) const {
    const Vertex& x = at(id);
    return x.children.size() + (x.parent ? 1 : 0);
  }

  std::size_t vertex_count() const { return alive_; }
  // Exclusive upper bound on ids, for sizing per-vertex scratch arrays.
  std::size_t id_bound() const { return v_.size(); }

  std::vector<VertexId> vertices() const {
    std::vector<VertexId> out;
    out.reserve(alive_);
    for (std::uint32_t i = 0; i < v_.size(); ++i)
      if (v_[i].alive) out.push_back(VertexId{i});
    return out;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::uint32_t i = 0; i < v_.size(); ++i)
      if (v_[i].alive && v_[i].parent) out.push_back(Edge{*v_[i].parent, VertexId{i}, v_[i].weight});
    return out;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const Vertex& x : v_) n += (x.alive && x.parent) ? 1 : 0;
    return n;
  }

  // Vertices reachable from the root, breadth first, children by ascending id.
  std::vector<VertexId> bfs_order() const { return bfs_from(root_); }

  // `top` and everything below it.
  std::vector<VertexId> subtree(VertexId top) const { return bfs_from(top); }

 private:
  struct Vertex {
    Point point;
    std::optional<VertexId> parent;
    double weight;
    double demand;
    std::vector<VertexId> children;
    bool alive;
  };

  Vertex& at(VertexId id) {
    if (!contains(id)) throw std::out_of_range("unknown vertex " + to_string(id));
    return v_[id.value];
  }
  const Vertex& at(VertexId id) const {
    if (!contains(id)) throw std::out_of_range("unknown vertex " + to_string(id));
    return v_[id.value];
  }

  std::vector<VertexId> bfs_from(VertexId top) const {
    std::vector<VertexId> order{top};
    for (std::size_t i = 0; i < order.size() && order.size() <= v_.size(); ++i)
      for (VertexId c : at(order[i]).children) order.push_back(c);
    return order;
  }

  std::vector<Vertex> v_;
  VertexId root_{};
  std::size_t alive_ = 0;
  double source_mass_;
  double merge_tol_;
};

// 1e-9 of the diameter of the points' bounding box.
inline double merge_tolerance(const std::vector<Point>& points) {
  if (points.empty()) return 1e-9;
  Point lo = points.front();
  Point hi = points.front();
  for (const Point& p : points)
    for (std::size_t i = 0; i < p.dim(); ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  const double diam = distance(lo, hi);
  return diam > 0.0 ? 1e-9 * diam : 1e-9;
}

inline double cost_m_alpha(const TransportNetwork& g, double alpha) {
  double total = 0.0;
  for (const Edge& e : g.edges())
    total += std::pow(e.weight, alpha) * distance(g.point(e.from), g.point(e.to));
  return total;
}

// m(u): the incoming edge weight, or the total source mass at the root.
inline double edge_mass(const TransportNetwork& g, VertexId u) {
  if (!g.contains(u)) throw std::out_of_range("unknown vertex " + to_string(u));
  return u == g.root() ? g.source_mass() : g.weight(u);
}

// True iff there is a directed path u -> ... -> v. A vertex descends from itself.
inline bool is_descendant(const TransportNetwork& g, VertexId v, VertexId u) {
  if (!g.contains(u)) throw std::out_of_range("unknown vertex " + to_string(u));
  std::optional<VertexId> cur = v;
  std::size_t steps = 0;
  while (cur) {
    if (*cur == u) return true;
    cur = g.parent(*cur);
    if (++steps > g.id_bound()) throw InvariantViolation("cycle in parent map");
  }
  return false;
}

// Root-first list of vertices ending at u. For a detached vertex the list
// starts at the top of its component instead.
inline std::vector<VertexId> path_to_root(const TransportNetwork& g, VertexId u) {
  std::vector<VertexId> path;
  std::optional<VertexId> cur = u;
  while (cur) {
    path.push_back(*cur);
    if (path.size() > g.id_bound()) throw InvariantViolation("cycle in parent map");
    cur = g.parent(*cur);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline std::size_t max_degree(const TransportNetwork& g) {
  std::size_t d = 0;
  for (VertexId v : g.vertices()) d = std::max(d, g.degree(v));
  return d;
}

// Tree invariants: unique parents, consistent child lists, positive weights,
// every vertex reachable from the root exactly once. Empty when healthy.
inline std::vector<std::string> structure_violations(const TransportNetwork& g) {
  std::vector<std::string> out;
  const VertexId root = g.root();
  if (g.parent(root)) out.push_back("root has a parent");
  for (VertexId v : g.vertices()) {
    if (v != root) {
      const auto p = g.parent(v);
      if (!p) {
        out.push_back("vertex " + to_string(v) + " has no parent");
      } else if (!g.contains(*p)) {
        out.push_back("vertex " + to_string(v) + " has a dead parent");
      } else {
        const auto& sib = g.children(*p);
        if (!std::binary_search(sib.begin(), sib.end(), v))
          out.push_back("vertex " + to_string(v) + " missing from its parent's child list");
      }
      if (!(g.weight(v) > 0.0)) out.push_back("non-positive weight into " + to_string(v));
    }
    for (VertexId c : g.children(v))
      if (!g.contains(c) || g.parent(c) != v)
        out.push_back("child list of " + to_string(v) + " is inconsistent");
  }
  // Reachability walk; a revisit means a cycle.
  std::vector<char> seen(g.id_bound(), 0);
  std::deque<VertexId> queue{root};
  std::size_t visited = 0;
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    if (seen[v.value]) {
      out.push_back("cycle through vertex " + to_string(v));
      break;
    }
    seen[v.value] = 1;
    ++visited;
    for (VertexId c : g.children(v))
      if (g.contains(c)) queue.push_back(c);
  }
  if (visited != g.vertex_count()) out.push_back("not every vertex is reachable from the root");
  return out;
}

struct BalanceReport {
  struct Entry {
    Point location;
    std::optional<VertexId> vertex;  // empty when an atom has no vertex
    double residual;                  // inflow - outflow - expected net inflow
  };
  std::vector<Entry> entries;

  double max_abs() const {
    double m = 0.0;
    for (const Entry& e : entries) m = std::max(m, std::abs(e.residual));
    return m;
  }
};

namespace detail {

// Sorted by first coordinate, for tolerance lookups.
class PointIndex {
 public:
  explicit PointIndex(const TransportNetwork& g) : g_(g) {
    for (VertexId v : g.vertices()) items_.push_back({g.point(v)[0], v});
    std::sort(items_.begin(), items_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
  }

  std::optional<VertexId> nearest(const Point& p, double tol) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), p[0] - tol,
                               [](const auto& item, double x) { return item.first < x; });
    std::optional<VertexId> best;
    double best_d = 0.0;
    for (; it != items_.end() && it->first <= p[0] + tol; ++it) {
      const double d = distance(g_.point(it->second), p);
      if (d <= tol && (!best || d < best_d)) {
        best = it->second;
        best_d = d;
      }
    }
    return best;
  }

 private:
  const TransportNetwork& g_;
  std::vector<std::pair<double, VertexId>> items_;
};

}  // namespace detail

// Residual of the balance equation at every vertex and at every atom location
// not represented by a vertex. Source atoms count as supply, target atoms as
// demand; atoms are matched to vertices within the network's merge tolerance.
inline BalanceReport check_balance(const TransportNetwork& g, const AtomicMeasure& source,
                                   const AtomicMeasure& target) {
  std::vector<double> expected(g.id_bound(), 0.0);
  BalanceReport report;
  const detail::PointIndex index(g);
  const double tol = std::max(g.merge_tol(), 0.0);
  auto attach = [&](const Atom& a, double sign) {
    if (auto v = index.nearest(a.point, tol))
      expected[v->value] += sign * a.mass;
    else
      report.entries.push_back({a.point, std::nullopt, -sign * a.mass});
  };
  for (const Atom& a : source.atoms) attach(a, -1.0);
  for (const Atom& a : target.atoms) attach(a, +1.0);
  for (VertexId v : g.vertices()) {
    double net = g.weight(v);
    for (VertexId c : g.children(v)) net -= g.weight(c);
    report.entries.push_back({g.point(v), v, net - expected[v.value]});
  }
  return report;
}

struct CanonicalizeOptions {
  bool collapse_passthrough = false;
};

namespace detail {

inline void drop_subtree(TransportNetwork& g, VertexId top) {
  auto nodes = g.subtree(top);
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    g.unlink(*it);
    g.remove_vertex(*it);
  }
}

inline void reattach_children(TransportNetwork& g, VertexId from, VertexId to) {
  const std::vector<VertexId> kids = g.children(from);
  for (VertexId c : kids) {
    const double w = g.weight(c);
    g.unlink(c);
    g.link(to, c, w);
  }
}

// Folds `desc` into its ancestor `anc`: the flow that used to travel from anc
// down to desc is withdrawn and desc's children and demand move to anc.
inline void merge_into_ancestor(TransportNetwork& g, VertexId anc, VertexId desc) {
  const double m = g.weight(desc);
  for (auto w = g.parent(desc); w && *w != anc; w = g.parent(*w)) g.set_weight(*w, g.weight(*w) - m);
  g.unlink(desc);
  reattach_children(g, desc, anc);
  g.set_demand(anc, g.demand(anc) + g.demand(desc));
  g.remove_vertex(desc);
}

inline std::optional<std::pair<VertexId, VertexId>> find_coincident(const TransportNetwork& g) {
  const double tol = g.merge_tol();
  std::vector<std::pair<double, VertexId>> items;
  for (VertexId v : g.vertices()) items.push_back({g.point(v)[0], v});
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first || (a.first == b.first && a.second < b.second); });
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = i + 1; j < items.size() && items[j].first - items[i].first <= tol; ++j)
      if (distance(g.point(items[i].second), g.point(items[j].second)) <= tol)
        return std::pair{std::min(items[i].second, items[j].second), std::max(items[i].second, items[j].second)};
  return std::nullopt;
}

inline void merge_pair(TransportNetwork& g, VertexId a, VertexId b) {
  if (is_descendant(g, b, a)) return merge_into_ancestor(g, a, b);
  if (is_descendant(g, a, b)) return merge_into_ancestor(g, b, a);
  const auto pa = g.parent(a);
  if (pa && pa == g.parent(b)) {
    // Parallel edges from a common parent: sum them onto the smaller id.
    const VertexId keep = std::min(a, b);
    const VertexId drop = std::max(a, b);
    g.set_weight(keep, g.weight(keep) + g.weight(drop));
    g.unlink(drop);
    reattach_children(g, drop, keep);
    g.set_demand(keep, g.demand(keep) + g.demand(drop));
    g.remove_vertex(drop);
    return;
  }
  throw InvariantViolation("merging coincident vertices " + to_string(a) + " and " + to_string(b) +
                           " would create a cycle");
}

}  // namespace detail

// Prunes zero-weight edges, merges coincident vertices, removes isolated
// Steiner vertices and optionally collapses flow-through vertices.
inline void canonicalize_in_place(TransportNetwork& g, CanonicalizeOptions opts = {}) {
  const double tol = g.balance_tol();
  for (bool changed = true; changed;) {
    changed = false;
    for (VertexId v : g.vertices()) {
      if (!g.contains(v) || !g.parent(v) || g.weight(v) > tol) continue;
      bool carries_demand = false;
      for (VertexId s : g.subtree(v)) carries_demand = carries_demand || g.demand(s) > tol;
      if (carries_demand)
        g.unlink(v);
      else
        detail::drop_subtree(g, v);
      changed = true;
    }
    if (auto pair = detail::find_coincident(g)) {
      detail::merge_pair(g, pair->first, pair->second);
      changed = true;
      continue;
    }
    for (VertexId v : g.vertices()) {
      if (v == g.root() || g.parent(v) || !g.children(v).empty() || g.demand(v) > tol) continue;
      g.remove_vertex(v);
      changed = true;
    }
    if (!opts.collapse_passthrough) continue;
    for (VertexId v : g.vertices()) {
      if (!g.contains(v) || v == g.root() || !g.parent(v) || g.demand(v) > tol) continue;
      if (g.children(v).size() != 1) continue;
      const VertexId c = g.children(v).front();
      if (std::abs(g.weight(v) - g.weight(c)) > tol) continue;
      const VertexId p = *g.parent(v);
      const double w = g.weight(c);
      g.unlink(c);
      g.unlink(v);
      g.remove_vertex(v);
      g.link(p, c, w);
      changed = true;
    }
  }
}

inline TransportNetwork canonicalize(TransportNetwork g, CanonicalizeOptions opts = {}) {
  canonicalize_in_place(g, opts);
  return g;
}

}  // namespace branchflow
