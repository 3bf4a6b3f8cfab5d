// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#include "npspec/corner_dispersion.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace npspec::dispersion {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Bisection on a monotone function with a guaranteed sign change over
// [lo, hi]; 200 halvings take the bracket to machine width.
double bisect_monotone(const std::function<double(double)>& f, double lo,
                       double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CornerAngle::CornerAngle(double radians) : alpha_(radians) {
  if (!(radians > 0.0) || !(radians < kPi)) {
    throw InvalidAngle("corner angle must lie strictly in (0, pi), got " +
                       fmt(radians));
  }
}

ContrastTriple contrast_from_k(double k) {
  if (k == 1.0) {
    throw DegenerateContrast("k = 1 is a homogeneous medium, lambda undefined");
  }
  const double lambda = (k + 1.0) / (2.0 * (k - 1.0));
  return {k, lambda, 0.5 - lambda};
}

ContrastTriple contrast_from_lambda(double lambda) {
  if (lambda == 0.5) {
    throw DegenerateContrast("lambda = 1/2 corresponds to k = infinity");
  }
  // Invert lambda = (k+1)/(2(k-1)).
  const double k = (2.0 * lambda + 1.0) / (2.0 * lambda - 1.0);
  return {k, lambda, 0.5 - lambda};
}

ContrastTriple contrast_from_beta(double beta) {
  return contrast_from_lambda(0.5 - beta);
}

CriticalSet critical_contrasts(CornerAngle alpha) {
  const double a = alpha.value();
  const double b = alpha.exterior();
  CriticalSet c;
  c.k_plus = -b / a;
  c.k_minus = -a / b;
  c.lambda_plus = 0.5 * (1.0 - a / kPi);
  c.lambda_minus = -c.lambda_plus;
  return c;
}

// Both dispersion functions are evaluated through the product-to-sum
// identities
//   sin(a*t) sin(b*t)     = sin^2(pi*t) - sin^2((pi-alpha)*t)
//   cos(a*t) cos(b*t) - 1 = -(sin^2(pi*t) + sin^2((pi-alpha)*t))
// with a = alpha, b = 2pi - alpha (so (a+b)/2 = pi, (b-a)/2 = pi - alpha).
// These forms are exact and free of the catastrophic cancellation the
// literal cos*cos - 1 suffers near eta = 0.
double eval_F(double eta, CornerAngle alpha) {
  const double p = std::sin(kPi * eta);
  const double q = std::sin((kPi - alpha.value()) * eta);
  const double num = q * q - p * p;
  const double den = p * p + q * q;
  if (den == 0.0) {
    // eta = 0 limit: -2ab/(a^2+b^2).
    const double a = alpha.value(), b = alpha.exterior();
    return -2.0 * a * b / (a * a + b * b);
  }
  return num / den;
}

double eval_F_opposite(double eta, CornerAngle alpha) {
  return -eval_F(eta, alpha);
}

double eval_Ftilde(double xi, CornerAngle alpha) {
  return eval_Ftilde_plus_one(xi, alpha) - 1.0;
}

double eval_Ftilde_plus_one(double xi, CornerAngle alpha) {
  if (xi == 0.0) {
    const double a = alpha.value(), b = alpha.exterior();
    return 1.0 - 2.0 * a * b / (a * a + b * b);
  }
  // Ftilde + 1 = 2 / (R^2 + 1) with R = sinh(pi*xi)/sinh((pi-alpha)*xi).
  // R is evaluated in exponential form so it neither overflows nor loses
  // digits for large xi.
  const double p = kPi * xi;
  const double q = (kPi - alpha.value()) * xi;
  double ratio;
  if (p < 350.0) {
    ratio = std::sinh(p) / std::sinh(q);
  } else {
    ratio = std::exp(p - q) * (1.0 - std::exp(-2.0 * p)) /
            (1.0 - std::exp(-2.0 * q));
  }
  const double r2 = ratio * ratio;
  if (!std::isfinite(r2)) return 0.0;
  return 2.0 / (r2 + 1.0);
}

DispersionRoot solve_dispersion_real(double k, CornerAngle alpha) {
  if (k == 1.0) {
    throw DegenerateContrast("k = 1 is a homogeneous medium");
  }
  const double target = 2.0 * k / (k * k + 1.0);
  const double floor = eval_F(0.0, alpha);
  if (target <= floor) {
    throw NoRealRoot("2k/(k^2+1) = " + fmt(target) +
                     " <= F(0,alpha) = " + fmt(floor) +
                     "; contrast inside the critical interval");
  }
  const double lo = 1e-12, hi = 1.0 - 1e-12;
  double eta = bisect_monotone(
      [&](double e) { return eval_F(e, alpha) - target; }, lo, hi);
  return {RootKind::Real, eta};
}

DispersionRoot solve_dispersion_imag(double k, CornerAngle alpha) {
  if (k == -1.0) {
    throw DegenerateContrast("k = -1 (lambda = 0) is never attained");
  }
  const CriticalSet cs = critical_contrasts(alpha);
  if (!(k > cs.k_plus && k < cs.k_minus)) {
    throw NoImaginaryRoot("k = " + fmt(k) + " outside (" + fmt(cs.k_plus) +
                          ", " + fmt(cs.k_minus) + ")");
  }
  const double target = 2.0 * k / (k * k + 1.0);
  const double lo = 1e-12, hi = 60.0;
  // Ftilde decreases from F(0,alpha) to -1; target+1 > 0 by k != -1.
  if (eval_Ftilde(hi, alpha) > target) {
    throw DegenerateContrast(
        "k = " + fmt(k) +
        " too close to -1: imaginary root beyond the search interval");
  }
  double xi = bisect_monotone(
      [&](double x) { return eval_Ftilde(x, alpha) - target; }, lo, hi);
  return {RootKind::Imaginary, xi};
}

Eigen::Matrix4cd dispersion_matrix(std::complex<double> eta, double k,
                                   CornerAngle alpha) {
  using cd = std::complex<double>;
  const cd sa = std::sin(alpha.value() * eta);
  const cd ca = std::cos(alpha.value() * eta);
  const cd s2 = std::sin(2.0 * kPi * eta);
  const cd c2 = std::cos(2.0 * kPi * eta);
  Eigen::Matrix4cd m;
  // Unknowns (a1, b1, a2, b2); rows are value continuity at the two
  // interfaces followed by the flux conditions k dphi1 = dphi2.
  m << cd(1.0), cd(0.0), -c2, -s2,                // phi1(-a/2) = phi2(2pi-a/2)
      ca, sa, -ca, -sa,                           // phi1(a/2)  = phi2(a/2)
      cd(0.0), cd(k), s2, -c2,                    // flux at -a/2
      -k * sa, k * ca, sa, -ca;                   // flux at +a/2
  return m;
}

std::complex<double> ProfileCoeffs::eval(double theta) const {
  double t = theta;
  // Wrap into [-alpha/2, 2pi - alpha/2).
  while (t < -alpha / 2.0) t += 2.0 * kPi;
  while (t >= 2.0 * kPi - alpha / 2.0) t -= 2.0 * kPi;
  const std::complex<double> arg = eta * (t + alpha / 2.0);
  if (t < alpha / 2.0) {
    return a1 * std::cos(arg) + b1 * std::sin(arg);
  }
  return a2 * std::cos(arg) + b2 * std::sin(arg);
}

std::complex<double> ProfileCoeffs::deriv(double theta) const {
  double t = theta;
  while (t < -alpha / 2.0) t += 2.0 * kPi;
  while (t >= 2.0 * kPi - alpha / 2.0) t -= 2.0 * kPi;
  const std::complex<double> arg = eta * (t + alpha / 2.0);
  if (t < alpha / 2.0) {
    return eta * (-a1 * std::sin(arg) + b1 * std::cos(arg));
  }
  return eta * (-a2 * std::sin(arg) + b2 * std::cos(arg));
}

ProfileCoeffs angular_profile(const DispersionRoot& root, double k,
                              CornerAngle alpha) {
  const Eigen::Matrix4cd m = dispersion_matrix(root.exponent(), k, alpha);
  Eigen::JacobiSVD<Eigen::Matrix4cd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(3) > 1e-6 * sv(0)) {
    throw NotSingular("transmission system is not singular: sigma_min/sigma_max = " +
                      fmt(sv(3) / sv(0)));
  }
  Eigen::Vector4cd x = svd.matrixV().col(3);
  x /= x.norm();
  // Canonical phase: rotate the null vector so its largest coefficient is
  // real and positive (the phase is a free symmetry of the profile).
  int imax = 0;
  for (int i = 1; i < 4; ++i) {
    if (std::abs(x(i)) > std::abs(x(imax))) imax = i;
  }
  x *= std::conj(x(imax)) / std::abs(x(imax));
  ProfileCoeffs p;
  p.a1 = x(0);
  p.b1 = x(1);
  p.a2 = x(2);
  p.b2 = x(3);
  p.eta = root.exponent();
  p.alpha = alpha.value();
  return p;
}

std::complex<double> profile_weighted_mean(const ProfileCoeffs& profile,
                                           double k, CornerAngle alpha) {
  // Gauss-Legendre panels per smooth branch; the profile is analytic on
  // each branch so a fixed composite rule converges far past 1e-12.
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267,
                               -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,
                               0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745,
                               0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873,
                               0.2223810344533745, 0.1012285362903763};
  auto integrate = [&](double lo, double hi, double weight) {
    std::complex<double> acc = 0.0;
    const int panels = 24;
    const double hseg = (hi - lo) / panels;
    for (int s = 0; s < panels; ++s) {
      const double a = lo + s * hseg;
      for (int g = 0; g < 8; ++g) {
        const double t = a + 0.5 * hseg * (gx[g] + 1.0);
        acc += gw[g] * 0.5 * hseg * profile.eval(t);
      }
    }
    return weight * acc;
  };
  const double half = alpha.value() / 2.0;
  return integrate(-half, half, k) + integrate(half, 2.0 * kPi - half, 1.0);
}

}  // namespace npspec::dispersion
