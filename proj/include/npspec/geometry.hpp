// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "npspec/corner_dispersion.hpp"
#include "npspec/errors.hpp"

namespace npspec::geom {

using dispersion::CornerAngle;
using Vec2 = Eigen::Vector2d;

// Closed, positively oriented plane curve parametrized over [0,1).
// Corner curves place their single corner at parameter 0 (== 1), which is
// also the origin of the plane.
class BoundaryCurve {
 public:
  virtual ~BoundaryCurve() = default;

  virtual Vec2 position(double t) const = 0;
  virtual Vec2 velocity(double t) const = 0;  // dp/dt
  virtual double curvature(double t) const = 0;  // signed, CCW positive
  virtual double perimeter() const = 0;

  virtual bool has_corner() const { return false; }
  virtual double corner_angle() const { return 0.0; }
  virtual double corner_radius() const { return 0.0; }  // straight-edge radius

  // Outward unit normal (interior lies left of the velocity).
  Vec2 normal(double t) const {
    Vec2 v = velocity(t).normalized();
    return {v.y(), -v.x()};
  }
};

std::shared_ptr<BoundaryCurve> make_disk(double radius);
std::shared_ptr<BoundaryCurve> make_ellipse(double a, double b);

// Corner domain satisfying the sector condition: two straight edges of
// length 2*R0 meeting at the origin with interior opening alpha (interior
// bisector along +x), closed by a C2 convex arc whose curvature ramps
// smoothly from zero. The intersection with the ball of radius R0 is
// exactly the two rays theta = +-alpha/2.
std::shared_ptr<BoundaryCurve> make_corner_drop(CornerAngle alpha, double R0);

// Quadrature mesh on a boundary curve: midpoint nodes in a (possibly
// graded) computational parameter, arclength weights, outward normals and
// signed curvature per node.
struct BoundaryMesh {
  Eigen::Matrix2Xd nodes;
  Eigen::Matrix2Xd normals;
  Eigen::VectorXd weights;    // arclength quadrature weights
  Eigen::VectorXd curvature;  // signed curvature at nodes
  // Computational-parameter data (tau in [0, 2pi), uniform spacing): the
  // substituted curve parameter and the parametrization speed |dx/dtau|.
  Eigen::VectorXd param;
  Eigen::VectorXd speed;
  Eigen::VectorXd corner_arc_distance;  // arc distance to the corner (corner curves)

  double grading = 1.0;
  std::shared_ptr<const BoundaryCurve> curve;

  int size() const { return static_cast<int>(nodes.cols()); }
  bool has_corner() const { return curve && curve->has_corner(); }
};

// N midpoint nodes; for corner curves the parameter is graded with the
// substitution w(t) = t^q / (t^q + (1-t)^q), which vanishes to order q at
// the corner parameter on both sides. The corner itself is never a node.
BoundaryMesh graded_mesh(std::shared_ptr<const BoundaryCurve> curve, int N,
                         double grading_q);

// Sampled simplicity check (segment intersection over a uniform sampling).
bool is_simple(const BoundaryCurve& curve, int samples = 1024);

// Winding number of the sampled curve around a point (+1 for CCW).
double winding_number(const BoundaryCurve& curve, const Vec2& point,
                      int samples = 4096);

}  // namespace npspec::geom
