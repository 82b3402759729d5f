#pragma once

// Brute-force references for the closed-form and heuristic solvers. Nothing in
// the solver pipeline depends on this header.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "bifurcation.hpp"
#include "errors.hpp"
#include "measures.hpp"
#include "network.hpp"
#include "point.hpp"

namespace branchflow::oracle {

struct GridMinimum {
  Point point;
  double value = 0.0;
};

// Minimizes f over the triangle OPQ (the segment hull when it is flat): a
// barycentric grid with `resolution` steps per edge, then 20 rounds of a
// shrinking 9-point stencil around the best point.
inline GridMinimum grid_minimize_f(const BifurcationInput& in, int resolution) {
  resolution = std::max(resolution, 64);
  const Point e_p = in.p - in.o;
  const Point e_q = in.q - in.o;
  const double area2 = std::sqrt(std::max(0.0, dot(e_p, e_p) * dot(e_q, e_q) - dot(e_p, e_q) * dot(e_p, e_q)));
  const bool flat = area2 <= 1e-12 * norm(e_p) * norm(e_q) || norm(e_p) == 0.0 || norm(e_q) == 0.0;

  // Parametrisation B(s, t) = base + s * u + t * v over the feasible set.
  Point base = in.o;
  Point u = e_p;
  Point v = e_q;
  if (flat) {
    // Hull of collinear points is the segment between the farthest pair.
    const std::array<const Point*, 3> pts{&in.o, &in.p, &in.q};
    std::size_t bi = 0, bj = 1;
    double far = -1.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j)
        if (distance(*pts[i], *pts[j]) > far) {
          far = distance(*pts[i], *pts[j]);
          bi = i;
          bj = j;
        }
    base = *pts[bi];
    u = *pts[bj] - *pts[bi];
    v = Point(in.o.dim());
  }
  auto feasible = [&](double s, double t) { return s >= 0.0 && t >= 0.0 && s + t <= 1.0 + 1e-15 && (!flat || t == 0.0); };
  auto at = [&](double s, double t) { return base + u * s + v * t; };
  auto eval = [&](double s, double t) { return objective_f(at(s, t), in); };

  double best_s = 0.0, best_t = 0.0;
  double best = std::numeric_limits<double>::infinity();
  const double h0 = 1.0 / resolution;
  for (int i = 0; i <= resolution; ++i) {
    for (int j = 0; j + i <= resolution; ++j) {
      if (flat && j > 0) break;
      const double s = i * h0;
      const double t = j * h0;
      const double val = eval(s, t);
      if (val < best) {
        best = val;
        best_s = s;
        best_t = t;
      }
    }
  }

  double h = h0;
  for (int round = 0; round < 20; ++round) {
    for (int moves = 0; moves < 4096; ++moves) {
      double cand_s = best_s, cand_t = best_t, cand = best;
      for (int ds = -1; ds <= 1; ++ds)
        for (int dt = -1; dt <= 1; ++dt) {
          if (ds == 0 && dt == 0) continue;
          const double s = best_s + ds * h;
          const double t = best_t + dt * h;
          if (!feasible(s, t)) continue;
          const double val = eval(s, t);
          if (val < cand) {
            cand = val;
            cand_s = s;
            cand_t = t;
          }
        }
      if (!(cand < best)) break;
      best = cand;
      best_s = cand_s;
      best_t = cand_t;
    }
    h *= 0.5;
  }
  return {at(best_s, best_t), best};
}

// Rooted binary tree shape over N labelled leaves. Node 0 is the source,
// nodes 1..N the targets, the remaining N-1 nodes junctions.
struct Topology {
  std::size_t leaves = 0;
  std::vector<std::size_t> parent;  // parent[0] unused
};

// All (2N-3)!! shapes, built by inserting each new leaf into every edge.
// Degenerate trees (junctions at the source, at a target or at each other)
// are covered as limits of these.
inline std::vector<Topology> topology_catalog(std::size_t n) {
  if (n == 0) return {};
  std::vector<Topology> shapes{Topology{1, {0, 0}}};
  for (std::size_t k = 2; k <= n; ++k) {
    std::vector<Topology> next;
    for (const Topology& t : shapes) {
      for (std::size_t c = 1; c < t.parent.size(); ++c) {
        Topology grown;
        grown.leaves = k;
        // Renumber: leaves 1..k, then the old junctions, then the new one.
        auto renum = [&](std::size_t x) { return x <= k - 1 ? x : x + 1; };
        const std::size_t old_nodes = t.parent.size();
        grown.parent.assign(old_nodes + 2, 0);
        for (std::size_t x = 1; x < old_nodes; ++x) grown.parent[renum(x)] = renum(t.parent[x]);
        const std::size_t junction = old_nodes + 1;
        const std::size_t leaf = k;
        grown.parent[junction] = grown.parent[renum(c)];
        grown.parent[renum(c)] = junction;
        grown.parent[leaf] = junction;
        next.push_back(std::move(grown));
      }
    }
    shapes = std::move(next);
  }
  return shapes;
}

struct OracleResult {
  TransportNetwork network;
  double cost = 0.0;
  bool converged = true;
  std::size_t topologies = 0;
};

namespace detail {

struct ShapeFit {
  std::vector<Point> pos;
  double cost = 0.0;
  bool converged = true;
};

// Junction coordinates for one shape: smoothed Weiszfeld sweeps to reach the
// basin of the (convex) optimum, then exact block coordinate descent, each
// block being the closed-form bifurcation at one junction.
inline ShapeFit fit_shape(const Topology& t, const Point& source, const AtomicMeasure& targets, double alpha) {
  const std::size_t n = t.leaves;
  const std::size_t nodes = t.parent.size();
  std::vector<double> mass(nodes, 0.0);
  std::vector<std::vector<std::size_t>> kids(nodes);
  for (std::size_t x = 1; x < nodes; ++x) kids[t.parent[x]].push_back(x);
  std::vector<Point> pos(nodes, source);
  for (std::size_t i = 1; i <= n; ++i) {
    pos[i] = targets.atoms[i - 1].point;
    for (std::size_t x = i; x != 0; x = t.parent[x]) mass[x] += targets.atoms[i - 1].mass;
  }
  double scale = 0.0;
  for (std::size_t i = 1; i <= n; ++i) scale = std::max(scale, distance(source, pos[i]));
  if (scale == 0.0) scale = 1.0;

  // Initial junctions: centroid of the source and the leaves below.
  for (std::size_t j = n + 1; j < nodes; ++j) {
    Point c = source;
    std::size_t count = 1;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t x = i; x != 0; x = t.parent[x])
        if (x == j) {
          c += pos[i];
          ++count;
          break;
        }
    pos[j] = c * (1.0 / static_cast<double>(count));
  }

  auto weight = [&](std::size_t x) { return std::pow(mass[x], alpha); };
  ShapeFit fit;
  for (double smoothing : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double eps2 = (smoothing * scale) * (smoothing * scale);
    for (int it = 0; it < 500; ++it) {
      double moved = 0.0;
      for (std::size_t j = n + 1; j < nodes; ++j) {
        Point num(source.dim());
        double den = 0.0;
        auto pull = [&](std::size_t other, double w) {
          const Point d = pos[other] - pos[j];
          const double r = std::sqrt(dot(d, d) + eps2);
          num += pos[other] * (w / r);
          den += w / r;
        };
        pull(t.parent[j], weight(j));
        for (std::size_t c : kids[j]) pull(c, weight(c));
        const Point next = num * (1.0 / den);
        moved = std::max(moved, distance(next, pos[j]));
        pos[j] = next;
      }
      if (moved < 1e-13 * scale) break;
    }
  }

  fit.converged = false;
  for (int it = 0; it < 10000; ++it) {
    double moved = 0.0;
    for (std::size_t j = n + 1; j < nodes; ++j) {
      const std::size_t a = kids[j][0];
      const std::size_t b = kids[j][1];
      Point next = pos[a];
      if (!(pos[a] == pos[b]))
        next = solve_two_targets({pos[t.parent[j]], pos[a], pos[b], mass[a], mass[b], alpha}).b_star;
      moved = std::max(moved, distance(next, pos[j]));
      pos[j] = std::move(next);
    }
    if (moved < 1e-10 * scale) {
      fit.converged = true;
      break;
    }
  }
  for (std::size_t x = 1; x < nodes; ++x) fit.cost += weight(x) * distance(pos[t.parent[x]], pos[x]);
  fit.pos = std::move(pos);
  return fit;
}

}  // namespace detail

// Minimum-cost tree over every shape in the catalog (N <= 4).
inline OracleResult enumerate_optimal(const AtomicMeasure& source, const AtomicMeasure& targets, double alpha) {
  require_alpha(alpha);
  if (source.size() != 1) throw InputError("oracle requires a single source atom");
  if (targets.empty() || targets.size() > 4) throw InputError("oracle supports 1 to 4 targets");
  const Point& o = source.atoms.front().point;
  const double m = source.atoms.front().mass;

  const auto shapes = topology_catalog(targets.size());
  std::size_t best = 0;
  detail::ShapeFit best_fit;
  best_fit.cost = std::numeric_limits<double>::infinity();
  bool converged = true;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    detail::ShapeFit fit = detail::fit_shape(shapes[s], o, targets, alpha);
    converged = converged && fit.converged;
    if (fit.cost < best_fit.cost) {
      best_fit = std::move(fit);
      best = s;
    }
  }

  const Topology& t = shapes[best];
  std::vector<Point> pts{o};
  for (const Atom& a : targets.atoms) pts.push_back(a.point);
  TransportNetwork g(o, m, merge_tolerance(pts));
  std::vector<VertexId> ids(t.parent.size());
  ids[0] = g.root();
  for (std::size_t x = 1; x < t.parent.size(); ++x)
    ids[x] = g.add_vertex(best_fit.pos[x], x <= t.leaves ? targets.atoms[x - 1].mass : 0.0);
  std::vector<double> mass(t.parent.size(), 0.0);
  for (std::size_t i = 1; i <= t.leaves; ++i)
    for (std::size_t x = i; x != 0; x = t.parent[x]) mass[x] += targets.atoms[i - 1].mass;
  for (std::size_t x = 1; x < t.parent.size(); ++x) g.link(ids[t.parent[x]], ids[x], mass[x]);
  TransportNetwork raw = g;
  try {
    canonicalize_in_place(g);
  } catch (const InvariantViolation&) {
    g = std::move(raw);
  }
  return OracleResult{std::move(g), best_fit.cost, converged, shapes.size()};
}

}  // namespace branchflow::oracle
