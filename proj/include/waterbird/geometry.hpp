/* Copyright 2026 The Waterbird Count Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include "waterbird/errors.hpp"

namespace waterbird {

/// Axis-aligned box in continuous pixel coordinates (origin top-left, y down).
/// Boxes are closed-open rectangles with strictly positive area; a zero-width
/// or zero-height box cannot be constructed.
class BoundingBox {
 public:
  BoundingBox(double x_min, double y_min, double x_max, double y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
        !std::isfinite(y_max)) {
      throw InvalidBox("box has non-finite coordinates");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw InvalidBox("degenerate box [" + std::to_string(x_min) + "," +
                       std::to_string(y_min) + "," + std::to_string(x_max) + "," +
                       std::to_string(y_max) + "]");
    }
  }

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }

  /// True when `other` lies entirely inside this box (shared edges allowed).
  bool contains(const BoundingBox& other) const noexcept {
    return other.x_min_ >= x_min_ && other.y_min_ >= y_min_ && other.x_max_ <= x_max_ &&
           other.y_max_ <= y_max_;
  }

  std::array<double, 4> coords() const noexcept { return {x_min_, y_min_, x_max_, y_max_}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  friend auto operator<=>(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

inline std::ostream& operator<<(std::ostream& os, const BoundingBox& b) {
  return os << '[' << b.x_min() << ',' << b.y_min() << ',' << b.x_max() << ',' << b.y_max()
            << ']';
}

/// Overlap rectangle, or nullopt when the interiors are disjoint. Boxes that
/// only share an edge are disjoint.
inline std::optional<BoundingBox> intersect(const BoundingBox& a, const BoundingBox& b) {
  const double x0 = std::max(a.x_min(), b.x_min());
  const double y0 = std::max(a.y_min(), b.y_min());
  const double x1 = std::min(a.x_max(), b.x_max());
  const double y1 = std::min(a.y_max(), b.y_max());
  if (x0 >= x1 || y0 >= y1) return std::nullopt;
  return BoundingBox(x0, y0, x1, y1);
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Intersection over union. Exactly 0 for disjoint boxes, exactly 1 for
/// identical boxes, and symmetric in its arguments.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

/// (x, y) -> (a*x + b*y + c, d*x + e*y + f). Must be invertible.
class AffineTransform {
 public:
  constexpr AffineTransform() = default;

  AffineTransform(double a, double b, double c, double d, double e, double f)
      : a_(a), b_(b), c_(c), d_(d), e_(e), f_(f) {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d) ||
        !std::isfinite(e) || !std::isfinite(f) || determinant() == 0.0) {
      throw NonInvertibleTransform();
    }
  }

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double dx, double dy) {
    return AffineTransform(1, 0, dx, 0, 1, dy);
  }

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double c() const noexcept { return c_; }
  double d() const noexcept { return d_; }
  double e() const noexcept { return e_; }
  double f() const noexcept { return f_; }
  std::array<double, 6> coefficients() const noexcept { return {a_, b_, c_, d_, e_, f_}; }

  double determinant() const noexcept { return a_ * e_ - b_ * d_; }

  /// True when the linear part maps axis-aligned boxes to axis-aligned boxes
  /// (scalings, mirrorings and quarter-turn rotations).
  bool axis_preserving() const noexcept {
    return (b_ == 0.0 && d_ == 0.0) || (a_ == 0.0 && e_ == 0.0);
  }

  std::array<double, 2> apply(double x, double y) const noexcept {
    return {a_ * x + b_ * y + c_, d_ * x + e_ * y + f_};
  }

  /// Composition: (*this)(other(p)).
  AffineTransform after(const AffineTransform& other) const {
    return AffineTransform(a_ * other.a_ + b_ * other.d_, a_ * other.b_ + b_ * other.e_,
                           a_ * other.c_ + b_ * other.f_ + c_, d_ * other.a_ + e_ * other.d_,
                           d_ * other.b_ + e_ * other.e_, d_ * other.c_ + e_ * other.f_ + f_);
  }

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;

 private:
  double a_ = 1, b_ = 0, c_ = 0, d_ = 0, e_ = 1, f_ = 0;
};

inline AffineTransform invert(const AffineTransform& t) {
  const double det = t.determinant();
  if (det == 0.0) throw NonInvertibleTransform();
  // Pure translations invert without rounding in the coefficients.
  if (t.a() == 1.0 && t.b() == 0.0 && t.d() == 0.0 && t.e() == 1.0) {
    return AffineTransform::translation(-t.c(), -t.f());
  }
  const double ia = t.e() / det;
  const double ib = -t.b() / det;
  const double id = -t.d() / det;
  const double ie = t.a() / det;
  return AffineTransform(ia, ib, -(ia * t.c() + ib * t.f()), id, ie,
                         -(id * t.c() + ie * t.f()));
}

/// Maps the four corners through t and returns their bounding box. For
/// axis-preserving transforms this is the exact image of the box.
inline BoundingBox apply_transform(const AffineTransform& t, const BoundingBox& b) {
  if (t.determinant() == 0.0) throw NonInvertibleTransform();
  const std::array<std::array<double, 2>, 4> corners = {
      t.apply(b.x_min(), b.y_min()), t.apply(b.x_max(), b.y_min()),
      t.apply(b.x_min(), b.y_max()), t.apply(b.x_max(), b.y_max())};
  double x0 = corners[0][0], x1 = x0, y0 = corners[0][1], y1 = y0;
  for (const auto& p : corners) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  return BoundingBox(x0, y0, x1, y1);
}

}  // namespace waterbird
