// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "npspec/fem.hpp"
#include "npspec/np_operator.hpp"

using namespace npspec;
using namespace npspec::fem;
using dispersion::kPi;

namespace {

const CornerAngle kRight(kPi / 2.0);

// Exact concentric-disk eigenvalues: beta_n = (1 - (r/R)^{2n}) / 2, each
// of multiplicity two (cos/sin pairs in the angular variable).
double oracle_beta(double r, double R, int n) {
  return 0.5 * (1.0 - std::pow(r / R, 2.0 * n));
}

Eigen::VectorXd random_interior_field(const FemContext& ctx,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ctx.tri.node_count());
  for (int i : ctx.interior) u(i) = gauss(rng);
  return u;
}

}  // namespace

TEST_CASE("fem context: containment of the quadratic forms") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.08);
  REQUIRE(ctx.interior_count() >= 200);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd u = random_interior_field(ctx, 100 + trial);
    const double qd = u.dot(ctx.K_D * u);
    const double qo = u.dot(ctx.K_omega * u);
    CHECK(qd >= -1e-12 * qo);
    CHECK(qd <= qo * (1.0 + 1e-12));
  }
}

TEST_CASE("fem context: constant-on-inclusion fields are stiffness-free") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.08);
  // 1 on closed-inclusion nodes, tapered to 0 at the outer boundary.
  Eigen::VectorXd u(ctx.tri.node_count());
  const double r = 0.5, R = 1.0;
  for (int i = 0; i < ctx.tri.node_count(); ++i) {
    const double ri = ctx.tri.nodes.col(i).norm();
    u(i) = ri <= r + 1e-12 ? 1.0 : (R - ri) / (R - r);
  }
  Eigen::VectorXd kd = ctx.K_D * u;
  // Zero rows on nodes incident only to inclusion triangles.
  for (int i = 0; i < ctx.tri.node_count(); ++i) {
    if (ctx.tri.nodes.col(i).norm() < r - ctx.h) {
      CHECK(std::abs(kd(i)) <= 1e-12);
    }
  }
  // T_D of such a field vanishes.
  CHECK(apply_td(ctx, u).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("dirichlet elimination: solves vanish on the outer boundary") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.1);
  Eigen::VectorXd u = random_interior_field(ctx, 7);
  Eigen::VectorXd tu = apply_td(ctx, u);
  for (int i = 0; i < ctx.tri.node_count(); ++i) {
    if (ctx.tri.on_outer[i]) CHECK(tu(i) == 0.0);
  }
}

TEST_CASE("apply_td: projection identities and selfadjointness") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.08);

  // Fields supported strictly inside D are fixed points.
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ctx.tri.node_count());
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < ctx.tri.node_count(); ++i) {
    if (ctx.tri.nodes.col(i).norm() < 0.5 - 2.5 * ctx.h) u(i) = gauss(rng);
  }
  REQUIRE(u.cwiseAbs().maxCoeff() > 0.0);
  CHECK((apply_td(ctx, u) - u).cwiseAbs().maxCoeff() <= 1e-10);

  // Variational identity and selfadjointness in the K_omega inner product.
  Eigen::VectorXd a = random_interior_field(ctx, 31);
  Eigen::VectorXd b = random_interior_field(ctx, 32);
  const double lhs = a.dot(ctx.K_omega * apply_td(ctx, a));
  const double rhs = a.dot(ctx.K_D * a);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  const double s1 = a.dot(ctx.K_omega * apply_td(ctx, b));
  const double s2 = b.dot(ctx.K_omega * apply_td(ctx, a));
  CHECK(std::abs(s1 - s2) <= 1e-10 * std::max(std::abs(s1), 1.0));
}

TEST_CASE("td spectrum: containment and the concentric-disk oracle") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.08);
  auto all = td_spectrum(ctx, 0);
  for (double b : all) {
    CHECK(b >= -1e-8);
    CHECK(b <= 1.0 + 1e-8);
  }

  // The eigenvalues nearest the oracle values must match within the
  // discretization error, with multiplicity two.
  for (int n = 1; n <= 3; ++n) {
    const double target = oracle_beta(0.5, 1.0, n);
    std::vector<double> close;
    for (double b : all) {
      if (std::abs(b - target) < 8e-3) close.push_back(b);
    }
    CHECK(close.size() >= 2);
  }
}

TEST_CASE("td spectrum: first-order-or-better convergence to the oracle") {
  const double target = oracle_beta(0.5, 1.0, 1);
  auto err = [&](double h) {
    auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), h);
    // The n = 1 mode is the nontrivial eigenvalue farthest from 1/2.
    auto vals = td_nontrivial_spectrum(ctx, 4);
    double best = 1e300;
    for (double b : vals) best = std::min(best, std::abs(b - target));
    return best;
  };
  const double e1 = err(0.1);
  const double e2 = err(0.05);
  if (e2 > 1e-12) {
    CHECK(e1 / e2 >= 1.8);
  } else {
    CHECK(e1 <= 1e-9);
  }
}

TEST_CASE("td spectrum: iterative path agrees with the dense path") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.08);
  auto dense = td_spectrum(ctx, 0);  // full spectrum
  auto lanczos = td_spectrum(ctx, 10, true);
  REQUIRE(lanczos.size() >= 6);
  // Compare the sets on the leading entries (both sorted by |beta - 1/2|).
  for (int i = 0; i < 6; ++i) {
    double best = 1e300;
    for (double d : dense) best = std::min(best, std::abs(d - lanczos[i]));
    CHECK(best <= 1e-7);
  }
}

TEST_CASE("spectral correspondence against the poisson-kernel spectrum") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.08);
  auto mesh = geom::graded_mesh(geom::make_disk(0.5), 128, 1.0);
  auto K = bem::assemble_np_matrix(mesh, bem::KernelMode::disk_poisson(1.0));
  auto bem_rep = bem::np_spectrum(K);

  auto rows = spectral_correspondence(ctx, bem_rep.eigenvalues, 3);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.mismatch <= 5e-2);
    CHECK(row.beta > 0.02);
    CHECK(row.beta < 0.98);
  }
  // Leading pair is the n=1 mode: lambda = 1/8.
  CHECK(rows[0].lambda_bem == doctest::Approx(0.125).epsilon(1e-5));
  CHECK(rows[0].lambda_fem == doctest::Approx(0.125).epsilon(0.05));
}

TEST_CASE("coercivity certificate: frozen rational examples") {
  // k = -0.2, alpha = pi/2: A = 1/3, branch d = -A k = 1/15, p = 0.
  auto cert = coercivity_certificate(-0.2, kRight);
  CHECK(cert.d == doctest::Approx(1.0 / 15.0).epsilon(1e-13));
  CHECK(std::abs(cert.p) <= 1e-13);
  CHECK(cert.disc1 ==
        doctest::Approx(4.0 / 225.0 - 4.0 / 15.0).epsilon(1e-12));
  CHECK(cert.disc2 ==
        doctest::Approx(4.0 / 225.0 - 4.0 / 135.0).epsilon(1e-12));
  CHECK(cert.disc1 < 0.0);
  CHECK(cert.disc2 < 0.0);
  auto rep = certificate_form_check(cert, -0.2, kRight, 100000);
  CHECK(rep.pass);
  CHECK(rep.min_sample > 0.0);

  // k = -5, alpha = pi/2: branch d = A^2 + kA = -14/9; the generated p is
  // the midpoint of (f-, f+) cap (g-, g+) = (-5.2589.., -1.1855..).
  auto cert5 = coercivity_certificate(-5.0, kRight);
  CHECK(cert5.d == doctest::Approx(-14.0 / 9.0).epsilon(1e-13));
  CHECK(cert5.f_lo == doctest::Approx((-29.0 - 4.0 * std::sqrt(21.0)) / 9.0)
                          .epsilon(1e-12));
  CHECK(cert5.f_hi == doctest::Approx((-29.0 + 4.0 * std::sqrt(21.0)) / 9.0)
                          .epsilon(1e-12));
  CHECK(cert5.g_lo == doctest::Approx(-57.0).epsilon(1e-12));
  CHECK(cert5.g_hi == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cert5.p > cert5.f_lo);
  CHECK(cert5.p < cert5.f_hi);
  CHECK(cert5.disc1 < 0.0);
  CHECK(cert5.disc2 < 0.0);
  CHECK(certificate_form_check(cert5, -5.0, kRight, 100000).pass);

  // The frozen reference parameters (p = -3, q = 1, d = -14/9) are a valid
  // certificate with the documented rational discriminants.
  CoercivityCertificate frozen;
  frozen.p = -3.0;
  frozen.q = 1.0;
  frozen.d = -14.0 / 9.0;
  frozen.A = kRight.aspect_ratio();
  frozen.k = -5.0;
  auto frep = certificate_form_check(frozen, -5.0, kRight, 100000);
  CHECK(frep.pass);
  CHECK(frep.min_eig_form1 > 1e-3);
  CHECK(frep.min_eig_form2 > 1e-3);
  const double A = 1.0 / 3.0;
  const double d1 = std::pow(A * -5.0 - frozen.d + frozen.p, 2) -
                    4.0 * (A * -5.0 * frozen.p + frozen.d);
  const double d2 = std::pow(A * -5.0 - frozen.d + A * A * frozen.p, 2) -
                    4.0 * A * A * (A * -5.0 * frozen.p + frozen.d);
  CHECK(d1 == doctest::Approx(-332.0 / 81.0).epsilon(1e-12));
  CHECK(d2 == doctest::Approx(-108.0 / 81.0).epsilon(1e-12));
}

TEST_CASE("coercivity certificate: degenerate probe fails the form check") {
  CoercivityCertificate bad;
  bad.p = 0.0;
  bad.q = 1.0;
  bad.d = 0.0;
  auto rep = certificate_form_check(bad, -0.2, kRight, 20000);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("coercivity certificate: critical contrasts are rejected") {
  CHECK_THROWS_AS(coercivity_certificate(-1.0, kRight), CriticalContrast);
  CHECK_THROWS_AS(coercivity_certificate(-3.0, kRight), CriticalContrast);
  CHECK_THROWS_AS(coercivity_certificate(-1.0 / 3.0, kRight),
                  CriticalContrast);

  // Elliptic branch marker for k > 0.
  auto cert = coercivity_certificate(2.0, kRight);
  CHECK(cert.elliptic_branch);
  CHECK(cert.p == 0.0);
  CHECK(cert.d == 1.0);
}

TEST_CASE("coercivity certificate: sweep over contrasts and angles") {
  for (int ia = 0; ia < 20; ++ia) {
    CornerAngle alpha(0.15 + (kPi - 0.3) * ia / 19.0);
    auto cs = dispersion::critical_contrasts(alpha);
    const double A = alpha.aspect_ratio();
    for (int ik = 0; ik < 50; ++ik) {
      // log grids on both admissible negative branches
      const double t = static_cast<double>(ik) / 49.0;
      const double k_steep = cs.k_plus * std::pow(50.0, t);  // k < k_plus
      const double k_mild = cs.k_minus * std::pow(50.0, -t); // (k_minus, 0)
      for (double k : {k_steep * 1.02, k_mild * 0.98}) {
        auto cert = coercivity_certificate(k, alpha);
        auto rep = certificate_form_check(cert, k, alpha, 2000, 99);
        CHECK(rep.pass);
      }
      // Inside the interval both proof branches have non-real roots and
      // the constructor refuses.
      const double kin = cs.k_plus + (cs.k_minus - cs.k_plus) * (0.02 + 0.96 * t);
      for (double d : {-A * kin, A * A + kin * A}) {
        CHECK(std::min(d * (1.0 + A * kin), d * (1.0 + kin / A)) < 0.0);
      }
      CHECK_THROWS_AS(coercivity_certificate(kin, alpha), CriticalContrast);
    }
  }
}

TEST_CASE("sector solver: manufactured solution converges in energy") {
  const double rho = 1.0, k = -5.0;
  const double alpha = kPi / 2.0;
  const double c = 2.0 * kPi / alpha;
  auto wex = [&](double r, double th) {
    return (rho - r) * r * std::cos(c * th);
  };
  auto f = [&](double r, double th) {
    return (rho / r - 4.0 - c * c * (rho - r) / r) * std::cos(c * th);
  };
  const double A = CornerAngle(alpha).aspect_ratio();
  auto g = [&](double r, double th) {
    return (rho / r - 4.0 - A * A * c * c * (rho - r) / r) * std::cos(c * th);
  };

  auto energy_err = [&](double h) {
    auto sol = sector_system_solve(f, g, k, CornerAngle(alpha), rho, h);
    // H1-seminorm error on the grid by second-order differencing against
    // the exact fields, midpoints of cells.
    double acc = 0.0;
    for (int i = 0; i + 1 < sol.radii.size(); ++i) {
      const double ra = sol.radii(i), rb = sol.radii(i + 1);
      for (int j = 0; j + 1 < sol.thetas.size(); ++j) {
        const double ta = sol.thetas(j), tb = sol.thetas(j + 1);
        const double rm = 0.5 * (ra + rb), tm = 0.5 * (ta + tb);
        const double area = (rb - ra) * (tb - ta) * rm;
        // discrete gradient of w on the cell
        const double wr_h =
            (sol.w(i + 1, j) + sol.w(i + 1, j + 1) - sol.w(i, j) - sol.w(i, j + 1)) /
            (2.0 * (rb - ra));
        const double wt_h =
            (sol.w(i, j + 1) + sol.w(i + 1, j + 1) - sol.w(i, j) - sol.w(i + 1, j)) /
            (2.0 * (tb - ta));
        const double wr_e = ((wex(rb, tm) - wex(ra, tm))) / (rb - ra);
        const double wt_e = ((wex(rm, tb) - wex(rm, ta))) / (tb - ta);
        const double vr_h =
            (sol.v(i + 1, j) + sol.v(i + 1, j + 1) - sol.v(i, j) - sol.v(i, j + 1)) /
            (2.0 * (rb - ra));
        const double vt_h =
            (sol.v(i, j + 1) + sol.v(i + 1, j + 1) - sol.v(i, j) - sol.v(i + 1, j)) /
            (2.0 * (tb - ta));
        acc += area * (std::pow(wr_h - wr_e, 2) +
                       std::pow((wt_h - wt_e) / rm, 2) +
                       std::pow(vr_h - wr_e, 2) +
                       std::pow((vt_h - wt_e) / rm, 2));
      }
    }
    return std::sqrt(acc);
  };

  const double e1 = energy_err(0.1);
  const double e2 = energy_err(0.05);
  const double e3 = energy_err(0.025);
  CHECK(e1 / e2 >= 1.5);
  CHECK(e2 / e3 >= 1.5);
}

TEST_CASE("sector solver: zero data gives the zero solution") {
  auto zero = [](double, double) { return 0.0; };
  auto sol = sector_system_solve(zero, zero, -5.0, kRight, 1.0, 0.1);
  CHECK(sol.w.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(sol.v.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(sol.energy <= 1e-10);
}

TEST_CASE("sector solver: critical contrast is rejected") {
  auto zero = [](double, double) { return 0.0; };
  CHECK_THROWS_AS(sector_system_solve(zero, zero, -1.0, kRight, 1.0, 0.1),
                  CriticalContrast);
}

TEST_CASE("sector solver: stability constant bounded across mesh levels") {
  const double rho = 1.0, k = -5.0;
  const double c = 2.0 * kPi / (kPi / 2.0);
  auto f = [&](double r, double th) { return std::cos(c * th) * r; };
  auto g = [&](double r, double th) { return std::sin(2.0 * c * th) + r; };
  double s_prev = 0.0;
  for (double h : {0.1, 0.05, 0.025}) {
    auto sol = sector_system_solve(f, g, k, kRight, rho, h);
    CHECK(sol.stability < 10.0);
    if (s_prev > 0.0) {
      CHECK(sol.stability <= 2.0 * s_prev);  // no blow-up under refinement
    }
    s_prev = sol.stability;
  }
}

TEST_CASE("sector solver: folded singular pair solves the system") {
  // k admitting a real dispersion root; the folded pair
  // w = r^eta phi(theta), v = r^eta phi(pi - theta/A) satisfies the
  // homogeneous system away from the outer ring.
  const double k = 2.0;
  auto root = dispersion::solve_dispersion_real(k, kRight);
  auto prof = dispersion::angular_profile(root, k, kRight);
  // Rotate the complex null vector onto the real axis.
  std::complex<double> phase = prof.a1;
  if (std::abs(prof.b1) > std::abs(phase)) phase = prof.b1;
  phase /= std::abs(phase);
  const double A = kRight.aspect_ratio();
  const double eta = root.value;
  auto wex = [&](double r, double th) {
    return std::pow(r, eta) * (prof.eval(th) / phase).real();
  };
  auto vex = [&](double r, double th) {
    return std::pow(r, eta) * (prof.eval(kPi - th / A) / phase).real();
  };
  for (double h : {0.1, 0.05}) {
    const double res = sector_residual(wex, vex, k, kRight, 1.0, h);
    CHECK(res <= 10.0 * h);
  }
}

TEST_CASE("drop context: corner vertex is a node and resolution is tracked") {
  auto g = FemGeometry::drop_in_disk(kPi / 2.0, 0.25, 1.0, 4e-3);
  auto ctx = build_fem_context(g, 0.07);
  REQUIRE(ctx.tri.special_node >= 0);
  CHECK(ctx.tri.nodes.col(ctx.tri.special_node).norm() <= 1e-14);
  CHECK(ctx.corner_resolution <= 4.0 * 4e-3);
  auto vals = td_spectrum(ctx, 24);
  for (double b : vals) {
    CHECK(b >= -1e-8);
    CHECK(b <= 1.0 + 1e-8);
  }
}

TEST_CASE("mesh text format: round trip reproduces the operator") {
  auto ctx = build_fem_context(FemGeometry::disk_in_disk(0.5, 1.0), 0.12);
  const std::string path =
      (std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp")) +
      "/npspec_mesh_rt.txt";
  write_triangulation(path, ctx.tri);
  auto tri2 = read_triangulation(path);
  REQUIRE(tri2.node_count() == ctx.tri.node_count());
  REQUIRE(tri2.tri_count() == ctx.tri.tri_count());
  auto ctx2 = build_fem_context(std::move(tri2));
  auto a = td_spectrum(ctx, 8);
  auto b = td_spectrum(ctx2, 8);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_triangulation("/nonexistent/mesh.txt"), ConfigError);
}
