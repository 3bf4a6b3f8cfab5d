// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <complex>

#include "npspec/errors.hpp"

namespace npspec::dispersion {

inline constexpr double kPi = 3.14159265358979323846;

// Interior opening angle of the corner, restricted to the open interval
// (0, pi). The two material interfaces are the rays theta = +-alpha/2.
class CornerAngle {
 public:
  explicit CornerAngle(double radians);

  double value() const { return alpha_; }
  // Opening of the complementary (background) sector, 2*pi - alpha.
  double exterior() const { return 2.0 * kPi - alpha_; }
  // Aspect ratio A = alpha / (2*pi - alpha), in (0,1).
  double aspect_ratio() const { return alpha_ / exterior(); }

 private:
  double alpha_;
};

// The three equivalent descriptions of one material contrast:
// conductivity ratio k, spectral parameter lambda = (k+1)/(2(k-1)),
// and variational parameter beta = 1/2 - lambda.
struct ContrastTriple {
  double k;
  double lambda;
  double beta;
};

ContrastTriple contrast_from_k(double k);
ContrastTriple contrast_from_lambda(double lambda);
ContrastTriple contrast_from_beta(double beta);

// Endpoints of the critical contrast interval for a given corner angle:
// k_plus = -(2pi-alpha)/alpha, k_minus = -alpha/(2pi-alpha) (so
// k_plus < k_minus < 0 and k_plus*k_minus = 1), and the matching spectral
// interval lambda_plus = (1/2)(1 - alpha/pi) = -lambda_minus.
struct CriticalSet {
  double k_plus;
  double k_minus;
  double lambda_minus;
  double lambda_plus;
};

CriticalSet critical_contrasts(CornerAngle alpha);

// Dispersion function for real exponents eta in [0,1]:
//   F(eta, alpha) = sin(alpha*eta) sin((2pi-alpha)*eta)
//                   / (cos(alpha*eta) cos((2pi-alpha)*eta) - 1),
// evaluated in the cancellation-free equivalent form
//   (sin^2((pi-alpha/2... see implementation). F is strictly increasing,
// F(0,alpha) = -2a(2pi-a)/(a^2+(2pi-a)^2) and F(1,alpha) = 1.
double eval_F(double eta, CornerAngle alpha);

// Verbatim textbook orientation (opposite denominator sign), kept for
// side-by-side comparison behind the CLI --opposite-sign flag.
double eval_F_opposite(double eta, CornerAngle alpha);

// Hyperbolic dispersion function for imaginary exponents eta = i*xi:
//   Ftilde(xi, alpha) = sinh(alpha*xi) sinh((2pi-alpha)*xi)
//                       / (1 - cosh(alpha*xi) cosh((2pi-alpha)*xi)).
// Strictly decreasing on [0, inf), Ftilde(0) = F(0), limit -1 (never
// attained).
double eval_Ftilde(double xi, CornerAngle alpha);

// Ftilde(xi, alpha) + 1, computed without cancellation:
//   Ftilde + 1 = 2 sinh^2((pi-alpha)*xi) / (sinh^2(pi*xi) + sinh^2((pi-alpha)*xi)).
// Stays strictly positive and strictly decreasing long after eval_Ftilde
// itself rounds to -1.0 in double precision.
double eval_Ftilde_plus_one(double xi, CornerAngle alpha);

enum class RootKind { Real, Imaginary };

// A solution of the dispersion relation 2k/(k^2+1) = F(eta, alpha):
// either a real exponent eta in (0,1) or a pure imaginary exponent
// eta = i*xi with xi > 0.
struct DispersionRoot {
  RootKind kind;
  double value;  // eta if Real, xi if Imaginary

  std::complex<double> exponent() const {
    return kind == RootKind::Real ? std::complex<double>(value, 0.0)
                                  : std::complex<double>(0.0, value);
  }
};

DispersionRoot solve_dispersion_real(double k, CornerAngle alpha);
DispersionRoot solve_dispersion_imag(double k, CornerAngle alpha);

// 4x4 transmission system for the angular profile coefficients
// (a1, b1, a2, b2). Rows: continuity at theta = -alpha/2 (through 2pi),
// continuity at theta = alpha/2, flux at -alpha/2, flux at alpha/2.
Eigen::Matrix4cd dispersion_matrix(std::complex<double> eta, double k,
                                   CornerAngle alpha);

// Angular profile phi(theta) = a cos(eta(theta+alpha/2)) + b sin(...),
// piecewise on (-alpha/2, alpha/2) and (alpha/2, 2pi-alpha/2), with
// coefficient vector of unit Euclidean norm.
struct ProfileCoeffs {
  std::complex<double> a1, b1, a2, b2;
  std::complex<double> eta;
  double alpha;

  // Evaluate phi (and its theta derivative); theta is wrapped into
  // [-alpha/2, 2pi - alpha/2).
  std::complex<double> eval(double theta) const;
  std::complex<double> deriv(double theta) const;

  Eigen::Vector4cd coeffs() const { return {a1, b1, a2, b2}; }
};

ProfileCoeffs angular_profile(const DispersionRoot& root, double k,
                              CornerAngle alpha);

// Weighted angular mean  int_0^{2pi} a(theta) phi(theta) dtheta  with
// a = k on |theta| < alpha/2 and 1 otherwise; vanishes for black-hole
// profiles.
std::complex<double> profile_weighted_mean(const ProfileCoeffs& profile,
                                           double k, CornerAngle alpha);

}  // namespace npspec::dispersion
