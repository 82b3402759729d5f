#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace branchflow {

// A point (or displacement) in R^d with runtime dimension. Up to four
// coordinates are stored inline, so copying low-dimensional points is cheap.
class Point {
 public:
  Point() = default;
  explicit Point(std::size_t dim) : dim_(dim) {
    if (dim > kInline) big_.assign(dim, 0.0);
  }
  Point(std::initializer_list<double> coords) : Point(coords.size()) { std::copy(coords.begin(), coords.end(), data()); }
  explicit Point(const std::vector<double>& coords) : Point(coords.size()) {
    std::copy(coords.begin(), coords.end(), data());
  }

  std::size_t dim() const { return dim_; }
  double operator[](std::size_t i) const { return data()[i]; }
  double& operator[](std::size_t i) { return data()[i]; }
  std::span<const double> coords() const { return {data(), dim_}; }

  bool finite() const {
    return std::all_of(data(), data() + dim_, [](double x) { return std::isfinite(x); });
  }

  Point& operator+=(const Point& o) {
    assert(o.dim() == dim());
    for (std::size_t i = 0; i < dim_; ++i) (*this)[i] += o[i];
    return *this;
  }
  Point& operator-=(const Point& o) {
    assert(o.dim() == dim());
    for (std::size_t i = 0; i < dim_; ++i) (*this)[i] -= o[i];
    return *this;
  }
  Point& operator*=(double s) {
    for (std::size_t i = 0; i < dim_; ++i) (*this)[i] *= s;
    return *this;
  }

  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(Point a, double s) { return a *= s; }
  friend Point operator*(double s, Point a) { return a *= s; }
  friend bool operator==(const Point& a, const Point& b) {
    return a.dim_ == b.dim_ && std::equal(a.data(), a.data() + a.dim_, b.data());
  }

 private:
  static constexpr std::size_t kInline = 4;
  const double* data() const { return dim_ <= kInline ? small_.data() : big_.data(); }
  double* data() { return dim_ <= kInline ? small_.data() : big_.data(); }

  std::size_t dim_ = 0;
  std::array<double, kInline> small_{};
  std::vector<double> big_;
};

inline double dot(const Point& a, const Point& b) {
  assert(a.dim() == b.dim());
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

inline double distance(const Point& a, const Point& b) {
  assert(a.dim() == b.dim());
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Affine combination (1 - t) a + t b.
inline Point lerp(const Point& a, const Point& b, double t) {
  Point r(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) r[i] = (1.0 - t) * a[i] + t * b[i];
  return r;
}

// Angle at `apex` between rays towards `a` and `b`, in [0, pi]. Zero-length rays give 0.
inline double angle_at(const Point& apex, const Point& a, const Point& b) {
  const Point u = a - apex;
  const Point v = b - apex;
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  // Kahan's form: accurate near 0 and pi, unlike acos of the cosine.
  const Point uh = u * (1.0 / nu);
  const Point vh = v * (1.0 / nv);
  return 2.0 * std::atan2(norm(uh - vh), norm(uh + vh));
}

}  // namespace branchflow
