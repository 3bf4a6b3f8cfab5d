// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#include "npspec/geometry.hpp"

#include <cmath>

namespace npspec::geom {

using dispersion::kPi;

namespace {

const double kGauss8X[8] = {-0.9602898564975363, -0.7966664774136267,
                            -0.5255324099163290, -0.1834346424956498,
                            0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
const double kGauss8W[8] = {0.1012285362903763, 0.2223810344533745,
                            0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

class DiskCurve final : public BoundaryCurve {
 public:
  explicit DiskCurve(double r) : r_(r) {
    if (!(r > 0.0)) throw MeshGenerationFailure("disk radius must be positive");
  }
  Vec2 position(double t) const override {
    const double a = 2.0 * kPi * t;
    return {r_ * std::cos(a), r_ * std::sin(a)};
  }
  Vec2 velocity(double t) const override {
    const double a = 2.0 * kPi * t;
    return {-2.0 * kPi * r_ * std::sin(a), 2.0 * kPi * r_ * std::cos(a)};
  }
  double curvature(double) const override { return 1.0 / r_; }
  double perimeter() const override { return 2.0 * kPi * r_; }

 private:
  double r_;
};

class EllipseCurve final : public BoundaryCurve {
 public:
  EllipseCurve(double a, double b) : a_(a), b_(b) {
    if (!(a >= b) || !(b > 0.0)) {
      throw MeshGenerationFailure("ellipse requires a >= b > 0");
    }
    // Perimeter by composite Gauss on the analytic speed.
    double per = 0.0;
    const int panels = 256;
    for (int s = 0; s < panels; ++s) {
      for (int g = 0; g < 8; ++g) {
        const double t = (s + 0.5 * (kGauss8X[g] + 1.0)) / panels;
        per += kGauss8W[g] * 0.5 / panels * velocity(t).norm();
      }
    }
    perimeter_ = per;
  }
  Vec2 position(double t) const override {
    const double u = 2.0 * kPi * t;
    return {a_ * std::cos(u), b_ * std::sin(u)};
  }
  Vec2 velocity(double t) const override {
    const double u = 2.0 * kPi * t;
    return {-2.0 * kPi * a_ * std::sin(u), 2.0 * kPi * b_ * std::cos(u)};
  }
  double curvature(double t) const override {
    const double u = 2.0 * kPi * t;
    const double s = std::sin(u), c = std::cos(u);
    const double den = std::pow(a_ * a_ * s * s + b_ * b_ * c * c, 1.5);
    return a_ * b_ / den;
  }
  double perimeter() const override { return perimeter_; }

 private:
  double a_, b_, perimeter_;
};

// Quintic smoothstep and its antiderivative.
double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}
double smoothstep_int(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return x - 0.5;
  const double x4 = x * x * x * x;
  return x4 * (2.5 + x * (-3.0 + x));  // x^6 - 3x^5 + 2.5x^4
}

// Drop-shaped corner domain. Travel order (CCW, interior left): lower edge
// from the origin out along theta = -alpha/2, closure arc, upper edge back
// into the origin along theta = +alpha/2.
//
// The closure is a rounded sector cap built in tangent-angle form: the
// curvature profile consists of two quintic fillet humps turning pi/2 each
// (blending the straight edges into the cap) separated by a constant
// plateau turning alpha (the cap arc), so the total turning is exactly
// pi + alpha. The profile is symmetric, which closes the chord component
// along the bisector automatically; the closure length then follows in
// closed form from the chord between the edge tips. Unlike a single
// convex bump, this profile stays well conditioned for nearly flat
// corners (alpha -> pi), where it degenerates gracefully into a rounded
// half-disk cap.
class DropCurve final : public BoundaryCurve {
 public:
  DropCurve(CornerAngle alpha, double R0) : alpha_(alpha.value()), r0_(R0) {
    if (!(R0 > 0.0) || !(R0 < 1.0)) {
      throw MeshGenerationFailure("corner drop requires 0 < R0 < 1");
    }
    edge_len_ = 2.0 * R0;
    plateau_ = alpha_ / (1.0 - kFillet);
    hump_ = kPi / kFillet;

    // Chord moment of the unit-length closure. Cells are aligned with the
    // profile junctions, so every panel sees an analytic integrand.
    double vy = 0.0;
    for (int s = 0; s < kTable; ++s) {
      const double u0 = static_cast<double>(s) / kTable;
      const double du = 1.0 / kTable;
      for (int g = 0; g < 8; ++g) {
        const double u = u0 + 0.5 * du * (kGauss8X[g] + 1.0);
        vy += kGauss8W[g] * 0.5 * du * std::sin(tangent_angle(u));
      }
    }
    if (!(vy > 1e-3)) {
      throw MeshGenerationFailure("closure arc does not close for this angle");
    }
    const double chord = 2.0 * edge_len_ * std::sin(alpha_ / 2.0);
    closure_len_ = chord / vy;

    total_len_ = 2.0 * edge_len_ + closure_len_;
    t_lower_ = edge_len_ / total_len_;
    t_closure_ = (edge_len_ + closure_len_) / total_len_;

    // Cumulative closure positions on a fine uniform table.
    tip_lower_ =
        edge_len_ * Vec2{std::cos(alpha_ / 2.0), -std::sin(alpha_ / 2.0)};
    table_.resize(kTable + 1);
    table_[0] = tip_lower_;
    Vec2 acc = tip_lower_;
    for (int cell = 0; cell < kTable; ++cell) {
      const double u0 = static_cast<double>(cell) / kTable;
      acc += segment_integral(u0, u0 + 1.0 / kTable);
      table_[cell + 1] = acc;
    }
    tip_upper_ = table_[kTable];

    // Sanity: the closure lands on the upper edge tip and stays clear of
    // the corner ball (straight edges only inside B_{2 R0}).
    const Vec2 expect =
        edge_len_ * Vec2{std::cos(alpha_ / 2.0), std::sin(alpha_ / 2.0)};
    if ((tip_upper_ - expect).norm() > 1e-9 * total_len_) {
      throw MeshGenerationFailure("closure arc failed to close");
    }
    for (int i = 0; i <= kTable; ++i) {
      if (table_[i].norm() < 1.4 * r0_) {
        throw MeshGenerationFailure("closure arc enters the corner ball");
      }
    }
  }

  Vec2 position(double t) const override {
    t = wrap(t);
    if (t <= t_lower_) {
      return (t / t_lower_) * tip_lower_;
    }
    if (t >= t_closure_) {
      const double s = (t - t_closure_) / (1.0 - t_closure_);
      return (1.0 - s) * tip_upper_;
    }
    const double u = (t - t_lower_) / (t_closure_ - t_lower_);
    const double scaled = u * kTable;
    const int cell = std::min(static_cast<int>(scaled), kTable - 1);
    const double u0 = static_cast<double>(cell) / kTable;
    return table_[cell] + segment_integral(u0, u);
  }

  Vec2 velocity(double t) const override {
    t = wrap(t);
    if (t <= t_lower_) {
      return total_len_ * tip_lower_.normalized();
    }
    if (t >= t_closure_) {
      return -total_len_ * tip_upper_.normalized();
    }
    const double u = (t - t_lower_) / (t_closure_ - t_lower_);
    const double psi = tangent_angle(u);
    return total_len_ * Vec2{std::cos(psi), std::sin(psi)};
  }

  double curvature(double t) const override {
    t = wrap(t);
    if (t <= t_lower_ || t >= t_closure_) return 0.0;
    const double u = (t - t_lower_) / (t_closure_ - t_lower_);
    return kappa_unit(u) / closure_len_;
  }

  double perimeter() const override { return total_len_; }
  bool has_corner() const override { return true; }
  double corner_angle() const override { return alpha_; }
  double corner_radius() const override { return r0_; }

 private:
  static double wrap(double t) { return t - std::floor(t); }

  // Fillet hump shape on [0,1]: quintic rise to 1, quintic fall; mass 1/2.
  static double hump_shape(double x) {
    return x < 0.5 ? smoothstep(2.0 * x) : smoothstep(2.0 * (1.0 - x));
  }
  static double hump_shape_int(double x) {
    if (x <= 0.0) return 0.0;
    if (x < 0.5) return 0.5 * smoothstep_int(2.0 * x);
    if (x >= 1.0) return 0.5;
    return 0.5 - 0.5 * smoothstep_int(2.0 * (1.0 - x));
  }

  // Curvature profile of the unit-length closure (turning per unit u):
  // fillet pieces rise from zero onto the plateau level while adding a
  // hump of extra turning (pi/2 each); the plateau contributes alpha in
  // total. Continuously differentiable everywhere.
  double kappa_unit(double u) const {
    if (u < kFillet) {
      const double x = u / kFillet;
      return plateau_ * smoothstep(x) + hump_ * hump_shape(x);
    }
    if (u > 1.0 - kFillet) {
      const double x = (1.0 - u) / kFillet;
      return plateau_ * smoothstep(x) + hump_ * hump_shape(x);
    }
    return plateau_;
  }
  // Cumulative turning; kappa_unit integrates exactly to pi + alpha.
  double turn_int(double u) const {
    if (u <= 0.0) return 0.0;
    if (u > 0.5) return (kPi + alpha_) - turn_int(1.0 - u);
    if (u < kFillet) {
      const double x = u / kFillet;
      return kFillet * (plateau_ * smoothstep_int(x) + hump_ * hump_shape_int(x));
    }
    const double head = kFillet * (plateau_ * 0.5 + hump_ * 0.5);
    return head + plateau_ * (u - kFillet);
  }
  double tangent_angle(double u) const { return -alpha_ / 2.0 + turn_int(u); }

  Vec2 segment_integral(double ua, double ub) const {
    Vec2 inc{0.0, 0.0};
    const double du = ub - ua;
    if (du <= 0.0) return inc;
    for (int g = 0; g < 8; ++g) {
      const double u = ua + 0.5 * du * (kGauss8X[g] + 1.0);
      const double psi = tangent_angle(u);
      inc += kGauss8W[g] * 0.5 * du * closure_len_ *
             Vec2{std::cos(psi), std::sin(psi)};
    }
    return inc;
  }

  // Fillet span fraction; kTable is a multiple of 1/kFillet cell counts so
  // the profile junctions land exactly on table cell edges.
  static constexpr double kFillet = 0.18;
  static constexpr int kTable = 2000;

  double alpha_, r0_, edge_len_;
  double plateau_ = 0.0, hump_ = 0.0;
  double closure_len_ = 0.0, total_len_ = 0.0;
  double t_lower_ = 0.0, t_closure_ = 0.0;
  Vec2 tip_lower_, tip_upper_;
  std::vector<Vec2> table_;
};

}  // namespace

std::shared_ptr<BoundaryCurve> make_disk(double radius) {
  return std::make_shared<DiskCurve>(radius);
}

std::shared_ptr<BoundaryCurve> make_ellipse(double a, double b) {
  return std::make_shared<EllipseCurve>(a, b);
}

std::shared_ptr<BoundaryCurve> make_corner_drop(CornerAngle alpha, double R0) {
  return std::make_shared<DropCurve>(alpha, R0);
}

BoundaryMesh graded_mesh(std::shared_ptr<const BoundaryCurve> curve, int N,
                         double grading_q) {
  if (N < 16 || N % 2 != 0) {
    throw ConfigError("mesh size must be even and at least 16");
  }
  if (!(grading_q >= 1.0) || !(grading_q <= 6.0)) {
    throw ConfigError("grading exponent must lie in [1, 6]");
  }
  const bool corner = curve->has_corner();
  const double q = corner ? grading_q : 1.0;

  BoundaryMesh mesh;
  mesh.curve = curve;
  mesh.grading = q;
  mesh.nodes.resize(2, N);
  mesh.normals.resize(2, N);
  mesh.weights.resize(N);
  mesh.curvature.resize(N);
  mesh.param.resize(N);
  mesh.speed.resize(N);
  mesh.corner_arc_distance.resize(N);

  const double h = 1.0 / N;
  const double per = curve->perimeter();
  for (int i = 0; i < N; ++i) {
    const double t = (i + 0.5) * h;
    double w, dw;
    if (q == 1.0) {
      w = t;
      dw = 1.0;
    } else {
      const double tq = std::pow(t, q), sq = std::pow(1.0 - t, q);
      w = tq / (tq + sq);
      dw = q * std::pow(t * (1.0 - t), q - 1.0) / ((tq + sq) * (tq + sq));
    }
    const Vec2 p = curve->position(w);
    const Vec2 v = curve->velocity(w);
    mesh.nodes.col(i) = p;
    mesh.normals.col(i) = curve->normal(w);
    mesh.curvature(i) = curve->curvature(w);
    mesh.param(i) = 2.0 * kPi * t;
    // speed in the computational parameter tau = 2*pi*t
    mesh.speed(i) = v.norm() * dw / (2.0 * kPi);
    mesh.weights(i) = mesh.speed(i) * (2.0 * kPi * h);
    mesh.corner_arc_distance(i) = corner ? per * std::min(w, 1.0 - w) : 0.0;
  }
  return mesh;
}

bool is_simple(const BoundaryCurve& curve, int samples) {
  std::vector<Vec2> pts(samples);
  for (int i = 0; i < samples; ++i) {
    pts[i] = curve.position(static_cast<double>(i) / samples);
  }
  auto segments_cross = [](const Vec2& a, const Vec2& b, const Vec2& c,
                           const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
      return (q.x() - p.x()) * (r.y() - p.y()) -
             (q.y() - p.y()) * (r.x() - p.x());
    };
    // Signed areas below the roundoff floor count as collinear, not as a
    // crossing (collinear samples occur on the straight edges).
    const double scale = (b - a).norm() * (d - c).norm();
    auto sgn = [&](double o) {
      if (o > 1e-13 * scale) return 1;
      if (o < -1e-13 * scale) return -1;
      return 0;
    };
    const int o1 = sgn(orient(a, b, c)), o2 = sgn(orient(a, b, d));
    const int o3 = sgn(orient(c, d, a)), o4 = sgn(orient(c, d, b));
    return o1 * o2 < 0 && o3 * o4 < 0;
  };
  for (int i = 0; i < samples; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % samples];
    for (int j = i + 2; j < samples; ++j) {
      if (i == 0 && j == samples - 1) continue;  // shared endpoint
      if (segments_cross(a, b, pts[j], pts[(j + 1) % samples])) return false;
    }
  }
  return true;
}

double winding_number(const BoundaryCurve& curve, const Vec2& point,
                      int samples) {
  double total = 0.0;
  Vec2 prev = curve.position(0.0) - point;
  for (int i = 1; i <= samples; ++i) {
    Vec2 cur = curve.position(static_cast<double>(i % samples) / samples) - point;
    total += std::atan2(prev.x() * cur.y() - prev.y() * cur.x(),
                        prev.dot(cur));
    prev = cur;
  }
  return total / (2.0 * kPi);
}

}  // namespace npspec::geom
