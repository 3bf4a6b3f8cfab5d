// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "npspec/corner_dispersion.hpp"
#include "npspec/errors.hpp"
#include "npspec/geometry.hpp"

namespace npspec::fem {

using dispersion::CornerAngle;
using geom::Vec2;
using SpMat = Eigen::SparseMatrix<double>;

// Conforming P1 triangulation of the container Omega with the inclusion
// boundary resolved as mesh edges.
struct Triangulation {
  Eigen::Matrix2Xd nodes;
  Eigen::Matrix3Xi tris;
  std::vector<int> region;          // per triangle: 1 inside D, 0 outside
  std::vector<bool> on_outer;       // per node: Dirichlet boundary of Omega
  int special_node = -1;            // corner vertex / refinement focus

  int node_count() const { return static_cast<int>(nodes.cols()); }
  int tri_count() const { return static_cast<int>(tris.cols()); }
};

// Geometry descriptors for the built-in mapped structured meshes.
struct FemGeometry {
  enum class Kind { DiskInDisk, EllipseInDisk, DropInDisk };
  Kind kind = Kind::DiskInDisk;
  double R_omega = 1.0;  // container disk radius
  double r = 0.5;        // inclusion disk radius
  double a = 0.0, b = 0.0;            // inclusion ellipse semiaxes
  double alpha = 0.0, R0 = 0.0;       // corner sector data
  double focus_resolution = 0.0;      // graded resolution at corner / focus
  std::optional<double> focus_angle;  // boundary refinement focus (smooth ctrl)

  static FemGeometry disk_in_disk(double r, double R) {
    FemGeometry g;
    g.kind = Kind::DiskInDisk;
    g.r = r;
    g.R_omega = R;
    return g;
  }
  static FemGeometry ellipse_in_disk(double a, double b, double R) {
    FemGeometry g;
    g.kind = Kind::EllipseInDisk;
    g.a = a;
    g.b = b;
    g.R_omega = R;
    return g;
  }
  static FemGeometry drop_in_disk(double alpha, double R0, double R,
                                  double corner_res) {
    FemGeometry g;
    g.kind = Kind::DropInDisk;
    g.alpha = alpha;
    g.R0 = R0;
    g.R_omega = R;
    g.focus_resolution = corner_res;
    return g;
  }
  // Disk-in-disk with local refinement around the boundary point at the
  // given polar angle (negative-control geometry for the Weyl runs).
  static FemGeometry disk_in_disk_refined(double r, double R, double angle,
                                          double res) {
    FemGeometry g;
    g.kind = Kind::DiskInDisk;
    g.r = r;
    g.R_omega = R;
    g.focus_angle = angle;
    g.focus_resolution = res;
    return g;
  }
};

// Assembled P1 context: full stiffness matrices of Omega and of the
// inclusion part, interior (non-Dirichlet) indexing, and the factorized
// interior Dirichlet form.
class FemContext {
 public:
  Triangulation tri;
  SpMat K_omega, K_D;  // full node space
  std::vector<int> interior;          // interior node ids
  std::vector<int> node_to_interior;  // -1 for boundary nodes
  SpMat K_omega_ii, K_D_ii;
  FemGeometry geometry;
  double h = 0.0;
  double corner_resolution = 0.0;  // max edge among special-node elements

  int interior_count() const { return static_cast<int>(interior.size()); }
  const Eigen::SimplicialLLT<SpMat>& factorization() const { return *llt_; }
  void factorize();

 private:
  std::shared_ptr<Eigen::SimplicialLLT<SpMat>> llt_;
};

// P1 stiffness assembly over all triangles (K_omega) and the inclusion
// triangles (K_D). The parallel path accumulates per-thread element
// contributions and merges; the serial path is the reference used by the
// consistency tests and the benchmark.
void assemble_stiffness(const Triangulation& tri, SpMat* K_omega, SpMat* K_D,
                        bool parallel);

FemContext build_fem_context(const FemGeometry& g, double h);

// Text mesh exchange format: first line "N_nodes N_tris", then one line
// per node "x y region_flag boundary_flag", then one line per triangle
// "i j k region" (zero-based indices). The node region flag is written as
// 1 when the node touches an inclusion triangle; it is informational and
// ignored on input.
Triangulation read_triangulation(const std::string& path);
void write_triangulation(const std::string& path, const Triangulation& tri);

// Context assembled on an externally supplied triangulation.
FemContext build_fem_context(Triangulation tri);

// Generalized symmetric eigenvalues of K_D u = beta K_omega u on interior
// dofs, sorted by distance from 1/2. Small problems are solved densely,
// large ones by shift-invert Lanczos around 1/2 (count values).
std::vector<double> td_spectrum(const FemContext& ctx, int count,
                                bool force_iterative = false);

// T_D u through the variational identity K_omega (T u) = K_D u; u is a full
// nodal vector vanishing on the outer boundary.
Eigen::VectorXd apply_td(const FemContext& ctx, const Eigen::VectorXd& u);

// Nontrivial spectrum (kernels at 0 and 1 excluded), ordered by distance
// from 1/2 descending, i.e. by |lambda| = |1/2 - beta| descending.
std::vector<double> td_nontrivial_spectrum(const FemContext& ctx, int count);

struct CorrespondenceRow {
  double beta;
  double lambda_fem;
  double lambda_bem;
  double mismatch;
};

// Pairs the top FEM eigenvalues (as lambda = 1/2 - beta) with the nearest
// eigenvalues of a DiskPoisson BEM run on the inclusion boundary.
std::vector<CorrespondenceRow> spectral_correspondence(
    const FemContext& ctx, const std::vector<double>& bem_eigenvalues,
    int pairs);

// Coercivity certificate (p, q=1, d) for the folded-sector quadratic form.
struct CoercivityCertificate {
  double p = 0.0, q = 1.0, d = 0.0;
  double A = 0.0, k = 0.0;
  double disc1 = 0.0, disc2 = 0.0;
  double f_lo = 0.0, f_hi = 0.0, g_lo = 0.0, g_hi = 0.0;
  bool elliptic_branch = false;  // k > 0: classical ellipticity marker
};

CoercivityCertificate coercivity_certificate(double k, CornerAngle alpha);

struct FormCheckReport {
  double min_sample = 0.0;    // min of e over random unit 4-vectors
  double min_eig_form1 = 0.0;
  double min_eig_form2 = 0.0;
  bool pass = false;
};

FormCheckReport certificate_form_check(const CoercivityCertificate& cert,
                                       double k, CornerAngle alpha,
                                       int samples, std::uint64_t seed = 1);

// Coupled folded-sector system on {innermost < r < rho, |theta| < alpha/2}
// with bilinear Q1 elements on the polar tensor grid; trial functions
// satisfy w = v on the edges and w = v = 0 at r = rho, test functions
// satisfy phi = A k psi on the edges.
struct SectorSolution {
  Eigen::VectorXd radii;   // ring radii (ascending, innermost > 0)
  Eigen::VectorXd thetas;  // angular grid over [-alpha/2, alpha/2]
  Eigen::MatrixXd w, v;    // fields indexed (radial, angular)
  double energy = 0.0;     // combined H1-seminorm of (w, v)
  double rhs_norm = 0.0;   // L2 norm of (f, g)
  double stability = 0.0;  // energy / rhs_norm (0 for zero data)
};

using ScalarField = std::function<double(double r, double theta)>;

SectorSolution sector_system_solve(const ScalarField& f, const ScalarField& g,
                                   double k, CornerAngle alpha, double rho,
                                   double h);

// Discrete residual of a trial pair against the homogeneous sector system,
// tested against all test functions supported away from the outer ring.
// Used to check that folded singular pairs r^eta phi(theta) solve the
// system up to outer-boundary forcing.
double sector_residual(const ScalarField& w_exact, const ScalarField& v_exact,
                       double k, CornerAngle alpha, double rho, double h);

}  // namespace npspec::fem
