#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "errors.hpp"
#include "point.hpp"

namespace branchflow {

// One source O with mass m_P + m_Q routed to targets P and Q.
struct BifurcationInput {
  Point o;
  Point p;
  Point q;
  double mass_p = 0.0;
  double mass_q = 0.0;
  double alpha = 1.0;

  double mass_o() const { return mass_p + mass_q; }
};

enum class BifurcationCase { InteriorY, VShapeAtO, CollapseToP, CollapseToQ };

inline const char* to_string(BifurcationCase c) {
  switch (c) {
    case BifurcationCase::InteriorY: return "InteriorY";
    case BifurcationCase::VShapeAtO: return "VShapeAtO";
    case BifurcationCase::CollapseToP: return "CollapseToP";
    case BifurcationCase::CollapseToQ: return "CollapseToQ";
  }
  return "?";
}

// Angles at an interior branch point B: ∠OBP, ∠OBQ and ∠PBQ.
struct BranchAngles {
  double at_op = 0.0;
  double at_oq = 0.0;
  double at_pq = 0.0;
};

struct BifurcationResult {
  BifurcationCase kind = BifurcationCase::VShapeAtO;
  Point b_star;
  double cost = 0.0;
  BranchAngles angles;
};

namespace detail {

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

struct AngleCosines {
  double op, oq, pq;
};

inline AngleCosines branch_cosines(double mass_p, double mass_q, double mass_o, double alpha) {
  const double k1 = std::pow(mass_p / mass_o, 2.0 * alpha);
  const double k2 = std::pow(mass_q / mass_o, 2.0 * alpha);
  return {clamp_unit((k2 - k1 - 1.0) / (2.0 * std::sqrt(k1))),
          clamp_unit((k1 - k2 - 1.0) / (2.0 * std::sqrt(k2))),
          clamp_unit((1.0 - k1 - k2) / (2.0 * std::sqrt(k1 * k2)))};
}

}  // namespace detail

inline BranchAngles branch_angles(double mass_p, double mass_q, double mass_o, double alpha) {
  const auto c = detail::branch_cosines(mass_p, mass_q, mass_o, alpha);
  return {std::acos(c.op), std::acos(c.oq), std::acos(c.pq)};
}

inline double objective_f(const Point& b, const BifurcationInput& in) {
  return std::pow(in.mass_o(), in.alpha) * distance(in.o, b) +
         std::pow(in.mass_p, in.alpha) * distance(b, in.p) +
         std::pow(in.mass_q, in.alpha) * distance(b, in.q);
}

// Relative cost tolerance of a two-target problem.
inline double cost_tolerance(const BifurcationInput& in) {
  return 1e-9 * (distance(in.o, in.p) + distance(in.o, in.q)) * std::pow(in.mass_o(), in.alpha);
}

namespace detail {

using Vec2 = std::array<double, 2>;

inline Vec2 sub(Vec2 a, Vec2 b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 add(Vec2 a, Vec2 b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 scale(Vec2 a, double s) { return {a[0] * s, a[1] * s}; }
inline double dot2(Vec2 a, Vec2 b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(Vec2 a) { return std::hypot(a[0], a[1]); }

// Closest point of the triangle (0, p, q) to x, all in plane coordinates.
inline Vec2 project_onto_triangle(Vec2 x, Vec2 p, Vec2 q) {
  const Vec2 o{0.0, 0.0};
  const double det = p[0] * q[1] - p[1] * q[0];
  const double s = (x[0] * q[1] - x[1] * q[0]) / det;
  const double t = (p[0] * x[1] - p[1] * x[0]) / det;
  if (s >= 0.0 && t >= 0.0 && s + t <= 1.0) return x;
  auto on_segment = [&](Vec2 a, Vec2 b) {
    const Vec2 ab = sub(b, a);
    const double u = std::clamp(dot2(sub(x, a), ab) / dot2(ab, ab), 0.0, 1.0);
    return add(a, scale(ab, u));
  };
  Vec2 best = on_segment(o, p);
  for (Vec2 c : {on_segment(o, q), on_segment(p, q)})
    if (norm2(sub(c, x)) < norm2(sub(best, x))) best = c;
  return best;
}

}  // namespace detail

// Optimal branch point of the Y-shaped path O -> B -> {P, Q}. Cases are tested
// in the order V-shape, collapse to Q, collapse to P; ties go to the earlier one.
// The closed form is evaluated in the plane of the triangle, so any d >= 2 works.
inline BifurcationResult solve_two_targets(const BifurcationInput& in) {
  require_alpha(in.alpha);
  if (!(in.mass_p > 0.0 && in.mass_q > 0.0)) throw InputError("bifurcation masses must be positive");
  if (in.p == in.q) throw DegenerateInput("targets P and Q coincide");

  BifurcationResult res;
  const auto cosines = detail::branch_cosines(in.mass_p, in.mass_q, in.mass_o(), in.alpha);
  res.angles = {std::acos(cosines.op), std::acos(cosines.oq), std::acos(cosines.pq)};
  auto finish = [&](BifurcationCase kind, Point b) {
    res.kind = kind;
    res.b_star = std::move(b);
    res.cost = objective_f(res.b_star, in);
    return res;
  };

  const double len_op = distance(in.o, in.p);
  const double len_oq = distance(in.o, in.q);
  if (len_op == 0.0 || len_oq == 0.0) return finish(BifurcationCase::VShapeAtO, in.o);

  if (angle_at(in.o, in.p, in.q) >= res.angles.at_pq) return finish(BifurcationCase::VShapeAtO, in.o);
  if (angle_at(in.q, in.o, in.p) >= res.angles.at_op) return finish(BifurcationCase::CollapseToQ, in.q);
  if (angle_at(in.p, in.o, in.q) >= res.angles.at_oq) return finish(BifurcationCase::CollapseToP, in.p);

  // Orthonormal frame of the triangle's plane with O at the origin.
  const Point op = in.p - in.o;
  const Point oq = in.q - in.o;
  const Point e1 = op * (1.0 / len_op);
  Point e2 = oq - e1 * dot(oq, e1);
  const double height = norm(e2);
  e2 *= 1.0 / height;
  const detail::Vec2 p2{len_op, 0.0};
  const detail::Vec2 q2{dot(oq, e1), height};

  using detail::add;
  using detail::scale;
  using detail::sub;
  const double pq_dot = detail::dot2(p2, q2);
  const detail::Vec2 qm = sub(scale(p2, pq_dot / (len_op * len_op)), q2);
  const detail::Vec2 ph = sub(scale(q2, pq_dot / (len_oq * len_oq)), p2);
  auto cot = [](double c) { return c / std::sqrt(std::max(0.0, 1.0 - c * c)); };
  const detail::Vec2 r =
      sub(scale(p2, 0.5), scale(qm, 0.5 * cot(cosines.op) * len_op / detail::norm2(qm)));
  const detail::Vec2 s =
      sub(scale(q2, 0.5), scale(ph, 0.5 * cot(cosines.oq) * len_oq / detail::norm2(ph)));
  const detail::Vec2 rs = sub(s, r);
  const detail::Vec2 ro = scale(r, -1.0);
  const double lambda = detail::dot2(ro, rs) / detail::dot2(rs, rs);
  detail::Vec2 b2 = scale(add(scale(r, 1.0 - lambda), scale(s, lambda)), 2.0);
  b2 = detail::project_onto_triangle(b2, p2, q2);

  return finish(BifurcationCase::InteriorY, in.o + e1 * b2[0] + e2 * b2[1]);
}

// f(O) - f(B*): the saving of a Y-shaped path over the V-shaped one.
inline double advantage(const BifurcationInput& in) {
  const BifurcationResult r = solve_two_targets(in);
  if (r.kind == BifurcationCase::VShapeAtO) return 0.0;
  return std::max(0.0, objective_f(in.o, in) - r.cost);
}

}  // namespace branchflow
