// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "npspec/corner_dispersion.hpp"
#include "npspec/fem.hpp"
#include "npspec/geometry.hpp"

namespace npspec::weyl {

using dispersion::CornerAngle;
using geom::Vec2;

// Which real part of the oscillatory radial factor enters the field: the
// real part of the full product r^{i xi} phi(theta) (default; the only
// choice that preserves the transmission conditions for complex angular
// coefficients) or the literal cos(xi ln r) times Re phi.
enum class Convention { FullProductReal, RadialRealOnly };

// Cutoff black-hole wave u_eps = s_eps chi1(r/eps) chi2(r) Re(r^{i xi} phi),
// supported on the annulus eps <= r <= 2 r0 around the corner, normalized
// to unit H1 seminorm. The frame places the corner at `center` with the
// interior bisector rotated by `rotation` from +x.
struct WeylField {
  double k = 0.0, beta = 0.0;
  double xi = 0.0;
  double eps = 0.0, r0 = 0.0;
  double s_eps = 0.0, m_eps = 0.0;
  CornerAngle alpha{1.0};
  dispersion::ProfileCoeffs profile;
  Convention convention = Convention::FullProductReal;
  Vec2 center{0.0, 0.0};
  double rotation = 0.0;

  // Uncut singular wave Re(r^{i xi} phi(theta)) in the local frame.
  double singular_value(double r, double theta) const;
  // Cutoff profile chi1(r/eps) chi2(r).
  double cutoff(double r) const;
  double cutoff_derivative(double r) const;

  double value_polar(double r, double theta) const;
  double value(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;
};

WeylField build_weyl_field(double k, CornerAngle alpha, double eps, double r0,
                           Convention convention = Convention::FullProductReal,
                           const Vec2& center = {0.0, 0.0},
                           double rotation = 0.0);

// Energy of the uncut singular wave on the annulus [eps, r0]; grows like
// log(r0/eps).
double m_eps(double k, CornerAngle alpha, double eps, double r0);

// H1 seminorm of the cutoff field by quadrature (the normalization makes
// this 1); panel counts are doubled with `refine` for convergence checks.
double field_energy(const WeylField& field, int refine = 0);

// L2 quantities over the support annulus.
double field_l2_norm(const WeylField& field);
double integrate_against(const WeylField& field,
                         const std::function<double(const Vec2&)>& test);

// || beta u - T_D u ||_{H1} for the field interpolated on the context mesh;
// requires the mesh to resolve the inner cutoff (element size <= eps/4 at
// the corner / focus node).
double weyl_residual(const WeylField& field, const fem::FemContext& ctx);

struct DecayReport {
  std::vector<double> eps;
  std::vector<double> m;
  std::vector<double> s;
  std::vector<double> residual;
  std::vector<double> l2;
  double fitted_slope = 0.0;  // residual against (ln 1/eps)^{-1/2}
};

DecayReport weyl_sweep(double k, CornerAngle alpha,
                       const std::vector<double>& eps_list, double r0,
                       const std::function<fem::FemContext(double)>& ctx_factory);

}  // namespace npspec::weyl
