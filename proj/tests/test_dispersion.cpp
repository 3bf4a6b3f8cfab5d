// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "npspec/corner_dispersion.hpp"

using namespace npspec;
using namespace npspec::dispersion;
using cd = std::complex<double>;

namespace {
const CornerAngle kRightAngle(kPi / 2.0);

// Row-norm-scaled determinant magnitude, so "zero" is scale free.
double scaled_det(const Eigen::Matrix4cd& m) {
  double scale = 1.0;
  for (int i = 0; i < 4; ++i) scale *= m.row(i).norm();
  return std::abs(m.determinant()) / scale;
}
}  // namespace

TEST_CASE("contrast conversion: closed forms and degeneracies") {
  // k = -3 sits exactly at the right-angle critical contrast.
  auto c = contrast_from_k(-3.0);
  CHECK(c.lambda == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(c.beta == doctest::Approx(0.25).epsilon(1e-15));

  c = contrast_from_k(-1.0);
  CHECK(c.lambda == 0.0);
  CHECK(c.beta == 0.5);

  c = contrast_from_k(0.0);  // insulating limit
  CHECK(c.lambda == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(c.beta == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(contrast_from_k(1.0), DegenerateContrast);
  CHECK_THROWS_AS(contrast_from_lambda(0.5), DegenerateContrast);

  // Round trips between the three parameters.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uk(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    double k = uk(rng);
    if (std::abs(k - 1.0) < 1e-3) continue;
    auto t = contrast_from_k(k);
    auto t2 = contrast_from_lambda(t.lambda);
    auto t3 = contrast_from_beta(t.beta);
    CHECK(t2.k == doctest::Approx(k).epsilon(1e-13));
    CHECK(t3.k == doctest::Approx(k).epsilon(1e-13));
    CHECK(t.beta == doctest::Approx(0.5 - t.lambda).epsilon(1e-15));
  }
}

TEST_CASE("critical contrasts at reference angles") {
  auto cs = critical_contrasts(kRightAngle);
  CHECK(cs.k_plus == doctest::Approx(-3.0).epsilon(1e-15));
  CHECK(cs.k_minus == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(cs.lambda_plus == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(cs.lambda_minus == doctest::Approx(-0.25).epsilon(1e-15));

  auto cs3 = critical_contrasts(CornerAngle(kPi / 3.0));
  CHECK(cs3.k_plus == doctest::Approx(-5.0).epsilon(1e-15));
  CHECK(cs3.k_minus == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(cs3.lambda_plus == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // Flat-interface limit.
  auto csf = critical_contrasts(CornerAngle(kPi - 1e-9));
  CHECK(csf.k_plus == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(csf.k_minus == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(std::abs(csf.lambda_plus) < 1e-7);

  // k_plus * k_minus = 1 across a grid of angles.
  for (int i = 1; i <= 50; ++i) {
    CornerAngle a(0.05 + (kPi - 0.1) * i / 51.0);
    auto s = critical_contrasts(a);
    CHECK(s.k_plus * s.k_minus == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.lambda_plus > 0.0);
    CHECK(s.lambda_plus < 0.5);
  }

  CHECK_THROWS_AS(critical_contrasts(CornerAngle(0.0)), InvalidAngle);
  CHECK_THROWS_AS(critical_contrasts(CornerAngle(kPi)), InvalidAngle);
}

TEST_CASE("dispersion function F: anchor values") {
  CHECK(eval_F(0.0, kRightAngle) == doctest::Approx(-0.6).epsilon(1e-14));
  CHECK(eval_F(0.5, kRightAngle) ==
        doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  for (int i = 1; i <= 20; ++i) {
    CornerAngle a(0.1 + (kPi - 0.2) * i / 21.0);
    CHECK(eval_F(1.0, a) == doctest::Approx(1.0).epsilon(1e-12));
    // Continuity extension value.
    double av = a.value(), bv = a.exterior();
    CHECK(eval_F(0.0, a) ==
          doctest::Approx(-2.0 * av * bv / (av * av + bv * bv)).epsilon(1e-14));
  }
  // The opposite orientation is the reflection.
  CHECK(eval_F_opposite(0.0, kRightAngle) ==
        doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("dispersion function F: smoothness near zero") {
  // The identity-based evaluation must be smooth through small eta; the
  // quadratic Taylor model predicts the local increments.
  double f0 = eval_F(0.0, kRightAngle);
  double f1 = eval_F(1e-6, kRightAngle);
  double f2 = eval_F(2e-6, kRightAngle);
  double d1 = f1 - f0, d2 = f2 - f1;
  CHECK(d1 > 0.0);
  CHECK(d2 / d1 == doctest::Approx(3.0).epsilon(1e-3));  // c(4-1)e-12 vs c*1e-12
}

TEST_CASE("F monotone increasing with |F| <= 1 on the full grid") {
  for (int ia = 0; ia < 50; ++ia) {
    CornerAngle a(0.05 + (kPi - 0.1) * ia / 49.0);
    double prev = eval_F(0.0, a);
    CHECK(std::abs(prev) <= 1.0 + 1e-12);
    for (int ie = 1; ie <= 200; ++ie) {
      double f = eval_F(ie / 200.0, a);
      CHECK(std::abs(f) <= 1.0 + 1e-12);
      CHECK(f - prev > -1e-12);
      prev = f;
    }
  }
}

TEST_CASE("edge inequalities of the derivative factorization") {
  // cos((2pi-a)eta) - cos(a*eta) < 0 and
  // a*sin((2pi-a)eta) - (2pi-a)*sin(a*eta) < 0. Both are strict on the
  // open interval only: at eta = 1 the first difference is exactly zero
  // (cos(2pi-a) = cos a), so the grid stays strictly inside (0,1).
  for (int ia = 0; ia < 50; ++ia) {
    double a = 0.05 + (kPi - 0.1) * ia / 49.0;
    double b = 2.0 * kPi - a;
    for (int ie = 1; ie <= 200; ++ie) {
      double eta = (ie - 0.5) / 200.0;
      CHECK(std::cos(b * eta) - std::cos(a * eta) < 0.0);
      CHECK(a * std::sin(b * eta) - b * std::sin(a * eta) < 0.0);
    }
  }
}

TEST_CASE("Ftilde: anchors, monotonicity, range") {
  CHECK(eval_Ftilde(0.0, kRightAngle) == doctest::Approx(-0.6).epsilon(1e-14));
  // Frozen regression value, fixed by quadruple-checked scalar evaluation.
  CHECK(eval_Ftilde(0.5, kRightAngle) ==
        doctest::Approx(-0.750572341609816).epsilon(1e-13));
  CHECK(eval_Ftilde(0.5, kRightAngle) > -1.0);
  CHECK(eval_Ftilde(0.5, kRightAngle) < -0.6);

  // Limit -1 is approached but never attained: assert through the
  // cancellation-free Ftilde+1, which stays representable.
  double tail = eval_Ftilde_plus_one(50.0, kRightAngle);
  CHECK(tail > 0.0);
  CHECK(tail < 1e-8);

  for (int ia = 0; ia < 20; ++ia) {
    CornerAngle a(0.1 + (kPi - 0.2) * ia / 19.0);
    double f0 = eval_F(0.0, a);
    CHECK(eval_Ftilde(0.0, a) == doctest::Approx(f0).epsilon(1e-14));
    double prev = eval_Ftilde_plus_one(1e-9, a);
    for (int ix = 1; ix <= 100; ++ix) {
      double xi = 20.0 * ix / 100.0;
      double fp1 = eval_Ftilde_plus_one(xi, a);
      CHECK(fp1 < prev);               // strictly decreasing
      CHECK(fp1 > 0.0);                // range above -1
      double f = eval_Ftilde(xi, a);
      CHECK(f >= -1.0);
      CHECK(f <= f0 + 1e-15);
      prev = fp1;
    }
  }
}

TEST_CASE("solve_dispersion_real: closed-form and frozen roots") {
  // k^2 + 6k + 1 = 0 => 2k/(k^2+1) = -1/3 = F(1/2, pi/2).
  double kq = -3.0 - 2.0 * std::sqrt(2.0);
  auto root = solve_dispersion_real(kq, kRightAngle);
  CHECK(root.kind == RootKind::Real);
  CHECK(root.value == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::abs(eval_F(root.value, kRightAngle) - 2.0 * kq / (kq * kq + 1.0)) <=
        1e-12);

  auto r2 = solve_dispersion_real(2.0, kRightAngle);
  CHECK(std::abs(eval_F(r2.value, kRightAngle) - 0.8) <= 1e-12);
  // Frozen bisection oracle value.
  CHECK(r2.value == doctest::Approx(0.893399241923773).epsilon(1e-12));

  CHECK_THROWS_AS(solve_dispersion_real(-1.0, kRightAngle), NoRealRoot);
  CHECK_THROWS_AS(solve_dispersion_real(1.0, kRightAngle), DegenerateContrast);
}

TEST_CASE("solve_dispersion_imag: frozen roots and error taxonomy") {
  auto root = solve_dispersion_imag(-2.0, kRightAngle);
  CHECK(root.kind == RootKind::Imaginary);
  CHECK(std::abs(eval_Ftilde(root.value, kRightAngle) + 0.8) <= 1e-12);
  CHECK(root.value == doctest::Approx(0.612697925060066).epsilon(1e-12));

  auto r15 = solve_dispersion_imag(-1.5, kRightAngle);
  CHECK(r15.value == doctest::Approx(0.997455373587076).epsilon(1e-12));

  CHECK_THROWS_AS(solve_dispersion_imag(-1.0, kRightAngle),
                  DegenerateContrast);
  CHECK_THROWS_AS(solve_dispersion_imag(-5.0, kRightAngle), NoImaginaryRoot);
  CHECK_THROWS_AS(solve_dispersion_imag(2.0, kRightAngle), NoImaginaryRoot);
}

TEST_CASE("round trip: solver then dispersion function, both branches") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.3, kPi - 0.3);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  int real_checked = 0, imag_checked = 0;
  while (real_checked < 100 || imag_checked < 100) {
    CornerAngle a(ua(rng));
    auto cs = critical_contrasts(a);
    if (real_checked < 100) {
      // Sample k outside [k_plus, k_minus], away from k = 1.
      double k = (uu(rng) < 0.5) ? cs.k_plus - 0.05 - 8.0 * uu(rng)
                                 : cs.k_minus + 0.05 + 8.0 * uu(rng);
      if (std::abs(k - 1.0) > 1e-3) {
        auto r = solve_dispersion_real(k, a);
        CHECK(std::abs(eval_F(r.value, a) - 2.0 * k / (k * k + 1.0)) <= 1e-10);
        CHECK(r.value > 0.0);
        CHECK(r.value < 1.0);
        ++real_checked;
      }
    }
    if (imag_checked < 100) {
      double t = uu(rng);
      double k = cs.k_plus + (cs.k_minus - cs.k_plus) * (0.02 + 0.96 * t);
      if (std::abs(k + 1.0) > 1e-3) {
        auto r = solve_dispersion_imag(k, a);
        CHECK(std::abs(eval_Ftilde(r.value, a) - 2.0 * k / (k * k + 1.0)) <=
              1e-10);
        CHECK(r.value > 0.0);
        ++imag_checked;
      }
    }
  }
}

TEST_CASE("dispersion matrix: determinant structure") {
  // Global harmonic r*sin(theta+alpha/2): singular at eta=1, k=1 with null
  // vector (0,1,0,1), for any angle.
  for (int ia = 0; ia < 20; ++ia) {
    CornerAngle a(0.15 + (kPi - 0.3) * ia / 19.0);
    auto m = dispersion_matrix(cd(1.0, 0.0), 1.0, a);
    CHECK(scaled_det(m) <= 1e-12);
    Eigen::Vector4cd v(0.0, 1.0, 0.0, 1.0);
    CHECK((m * v).norm() <= 1e-12 * m.norm());
  }

  // Singular at the closed-form real root.
  double kq = -3.0 - 2.0 * std::sqrt(2.0);
  CHECK(scaled_det(dispersion_matrix(cd(0.5, 0.0), kq, kRightAngle)) <= 1e-9);

  // Regular away from roots.
  CHECK(scaled_det(dispersion_matrix(cd(0.3, 0.0), 5.0, kRightAngle)) > 1e-6);
}

TEST_CASE("dispersion matrix: determinant vanishes at solver roots") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ua(0.3, kPi - 0.3);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    CornerAngle a(ua(rng));
    auto cs = critical_contrasts(a);
    double kreal = cs.k_minus + 0.1 + 5.0 * uu(rng);
    if (std::abs(kreal - 1.0) < 1e-2) continue;
    auto rr = solve_dispersion_real(kreal, a);
    CHECK(scaled_det(dispersion_matrix(rr.exponent(), kreal, a)) <= 1e-8);

    double kim = cs.k_plus + (cs.k_minus - cs.k_plus) * (0.05 + 0.9 * uu(rng));
    if (std::abs(kim + 1.0) < 1e-2) continue;
    auto ri = solve_dispersion_imag(kim, a);
    CHECK(scaled_det(dispersion_matrix(ri.exponent(), kim, a)) <= 1e-8);
  }
}

TEST_CASE("angular profile: null vector, continuity, flux jump") {
  // Trivial root: (0,1,0,1) solves the system. The null space there is
  // two dimensional (cos and sin global harmonics), so the returned
  // profile is checked as a null vector, and the reference vector as a
  // member of the near-null span.
  DispersionRoot triv{RootKind::Real, 1.0};
  auto p = angular_profile(triv, 1.0, kRightAngle);
  Eigen::Vector4cd ref(0.0, 1.0, 0.0, 1.0);
  ref /= ref.norm();
  auto m = dispersion_matrix(cd(1.0, 0.0), 1.0, kRightAngle);
  CHECK((m * p.coeffs()).norm() <= 1e-10 * m.norm());
  CHECK((m * ref).norm() <= 1e-12 * m.norm());
  Eigen::JacobiSVD<Eigen::Matrix4cd> svd(m, Eigen::ComputeFullV);
  const double proj = std::sqrt(std::norm(svd.matrixV().col(2).dot(ref)) +
                                std::norm(svd.matrixV().col(3).dot(ref)));
  CHECK(proj == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(p.coeffs().norm() == doctest::Approx(1.0).epsilon(1e-13));

  // Black-hole profile for k=-2: continuity and flux transmission.
  double k = -2.0;
  auto root = solve_dispersion_imag(k, kRightAngle);
  auto bh = angular_profile(root, k, kRightAngle);
  double half = kPi / 4.0;
  CHECK(std::abs(bh.eval(half - 1e-13) - bh.eval(half + 1e-13)) <= 1e-9);

  // Flux jump via one-sided finite differences in theta.
  double fd = 1e-7;
  cd din = (bh.eval(half - fd) - bh.eval(half - 2.0 * fd)) / fd;
  cd dout = (bh.eval(half + 2.0 * fd) - bh.eval(half + fd)) / fd;
  CHECK(std::abs(k * din - dout) <= 1e-6);
  // And through the analytic derivative, at the tighter tolerance.
  CHECK(std::abs(k * bh.deriv(half - 1e-12) - bh.deriv(half + 1e-12)) <= 1e-8);

  // Not singular away from roots.
  DispersionRoot bogus{RootKind::Real, 0.3};
  CHECK_THROWS_AS(angular_profile(bogus, 5.0, kRightAngle), NotSingular);
}

TEST_CASE("weighted angular mean vanishes for black-hole profiles") {
  for (double k : {-2.0, -1.5}) {
    auto root = solve_dispersion_imag(k, kRightAngle);
    auto prof = angular_profile(root, k, kRightAngle);
    CHECK(std::abs(profile_weighted_mean(prof, k, kRightAngle)) <= 1e-10);
  }

  // Quadrature sanity: a constant profile integrates to k*alpha + (2pi-alpha).
  ProfileCoeffs flat;
  flat.a1 = flat.a2 = 1.0;
  flat.b1 = flat.b2 = 0.0;
  flat.eta = 0.0;
  flat.alpha = kPi / 2.0;
  double k = -2.0;
  cd m = profile_weighted_mean(flat, k, kRightAngle);
  CHECK(m.real() == doctest::Approx(k * kPi / 2.0 + 3.0 * kPi / 2.0)
                        .epsilon(1e-12));
  CHECK(std::abs(m.imag()) <= 1e-12);
}

TEST_CASE("weighted angular mean vanishes across the critical interval") {
  // Ten contrasts spread through (k_plus, k_minus) \ {-1}.
  auto cs = critical_contrasts(kRightAngle);
  for (int i = 1; i <= 10; ++i) {
    double t = i / 11.0;
    double k = cs.k_plus + (cs.k_minus - cs.k_plus) * t;
    if (std::abs(k + 1.0) < 5e-2) k += 0.08;
    auto root = solve_dispersion_imag(k, kRightAngle);
    auto prof = angular_profile(root, k, kRightAngle);
    CHECK(std::abs(profile_weighted_mean(prof, k, kRightAngle)) <= 1e-10);
  }
}
