#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "point.hpp"

namespace branchflow {

struct Atom {
  Point point;
  double mass = 0.0;
};

// Finite weighted sum of Dirac masses.
struct AtomicMeasure {
  std::vector<Atom> atoms;

  std::size_t size() const { return atoms.size(); }
  bool empty() const { return atoms.empty(); }
  std::size_t dim() const { return atoms.empty() ? 0 : atoms.front().point.dim(); }
};

inline double total_mass(const AtomicMeasure& mu) {
  return std::accumulate(mu.atoms.begin(), mu.atoms.end(), 0.0,
                         [](double s, const Atom& a) { return s + a.mass; });
}

struct MeasureViolation {
  enum class Kind { DuplicatePoint, NonPositiveMass, NonFiniteCoordinate, DimensionMismatch };
  Kind kind;
  std::size_t index;  // offending atom (the later one for duplicates)
};

inline const char* to_string(MeasureViolation::Kind k) {
  switch (k) {
    case MeasureViolation::Kind::DuplicatePoint: return "DuplicatePoint";
    case MeasureViolation::Kind::NonPositiveMass: return "NonPositiveMass";
    case MeasureViolation::Kind::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case MeasureViolation::Kind::DimensionMismatch: return "DimensionMismatch";
  }
  return "?";
}

inline std::vector<MeasureViolation> validate(const AtomicMeasure& mu) {
  using Kind = MeasureViolation::Kind;
  std::vector<MeasureViolation> out;
  const std::size_t d = mu.dim();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Atom& a = mu.atoms[i];
    if (a.point.dim() != d)
      out.push_back({Kind::DimensionMismatch, i});
    else if (!a.point.finite())
      out.push_back({Kind::NonFiniteCoordinate, i});
    if (!(a.mass > 0.0) || !std::isfinite(a.mass)) out.push_back({Kind::NonPositiveMass, i});
  }
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto coords_less = [&](std::size_t i, std::size_t j) {
    const auto a = mu.atoms[i].point.coords();
    const auto b = mu.atoms[j].point.coords();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };
  std::stable_sort(order.begin(), order.end(), coords_less);
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (mu.atoms[order[k - 1]].point == mu.atoms[order[k]].point)
      out.push_back({Kind::DuplicatePoint, std::max(order[k - 1], order[k])});
  }
  return out;
}

// Axis-aligned box. Membership is half-open [lo, hi) per axis, except that axes
// flagged in `closed_upper` include their upper face. Cells produced by split()
// inherit the flag only on the outermost layer, so a split partitions the parent.
struct Box {
  Point lo;
  Point hi;
  std::vector<bool> closed_upper;

  std::size_t dim() const { return lo.dim(); }
  double side(std::size_t axis) const { return hi[axis] - lo[axis]; }
  Point center() const { return lerp(lo, hi, 0.5); }

  bool contains(const Point& p) const {
    for (std::size_t i = 0; i < dim(); ++i) {
      if (p[i] < lo[i]) return false;
      if (p[i] > hi[i]) return false;
      if (p[i] == hi[i] && !closed_upper[i]) return false;
    }
    return true;
  }

  // lambda^d sub-boxes, axis 0 varying fastest.
  std::vector<Box> split(int lambda) const {
    const std::size_t d = dim();
    std::size_t count = 1;
    for (std::size_t i = 0; i < d; ++i) count *= static_cast<std::size_t>(lambda);
    std::vector<Box> cells;
    cells.reserve(count);
    std::vector<int> idx(d, 0);
    auto edge = [&](std::size_t axis, int k) {
      if (k == lambda) return hi[axis];
      return lo[axis] + side(axis) * static_cast<double>(k) / lambda;
    };
    for (std::size_t c = 0; c < count; ++c) {
      Box b{Point(d), Point(d), std::vector<bool>(d, false)};
      for (std::size_t i = 0; i < d; ++i) {
        b.lo[i] = edge(i, idx[i]);
        b.hi[i] = edge(i, idx[i] + 1);
        b.closed_upper[i] = closed_upper[i] && idx[i] == lambda - 1;
      }
      cells.push_back(std::move(b));
      for (std::size_t i = 0; i < d; ++i) {
        if (++idx[i] < lambda) break;
        idx[i] = 0;
      }
    }
    return cells;
  }
};

// Smallest axis-aligned cube containing `points`, scaled about its center by
// (1 + inflate). All faces closed.
inline Box bounding_cube(const std::vector<Point>& points, double inflate = 0.01) {
  const std::size_t d = points.front().dim();
  Point lo = points.front();
  Point hi = points.front();
  for (const Point& p : points) {
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  double side = 0.0;
  for (std::size_t i = 0; i < d; ++i) side = std::max(side, hi[i] - lo[i]);
  if (side == 0.0) side = 1.0;
  side *= 1.0 + inflate;
  const Point c = lerp(lo, hi, 0.5);
  Box box{Point(d), Point(d), std::vector<bool>(d, true)};
  for (std::size_t i = 0; i < d; ++i) {
    box.lo[i] = c[i] - 0.5 * side;
    box.hi[i] = c[i] + 0.5 * side;
  }
  return box;
}

inline AtomicMeasure restrict(const AtomicMeasure& mu, const Box& cube) {
  AtomicMeasure out;
  for (const Atom& a : mu.atoms)
    if (cube.contains(a.point)) out.atoms.push_back(a);
  return out;
}

}  // namespace branchflow
