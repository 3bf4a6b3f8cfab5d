// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "npspec/geometry.hpp"

namespace npspec::bem {

using geom::BoundaryMesh;
using geom::Vec2;

// Kernel family: free-space Green function, or the Dirichlet Green
// function (Poisson kernel) of the disk B_R centered at the origin,
// where the image correction is available in closed form.
struct KernelMode {
  enum class Variant { FreeSpace, DiskPoisson };
  Variant variant = Variant::FreeSpace;
  double R = 0.0;  // container disk radius (DiskPoisson)

  static KernelMode free_space() { return {Variant::FreeSpace, 0.0}; }
  static KernelMode disk_poisson(double R) {
    return {Variant::DiskPoisson, R};
  }
  bool is_free() const { return variant == Variant::FreeSpace; }
};

// Adjoint double-layer (Neumann-Poincare) kernel dP/dnu_x (x, y): the
// free-space part is <x-y, nu_x> / (2 pi |x-y|^2); DiskPoisson adds the
// smooth image-source correction. The diagonal limit is kappa(x)/(4 pi)
// plus the correction evaluated at y = x.
double np_kernel(const Vec2& x, const Vec2& y, const Vec2& nu_x,
                 const KernelMode& mode);
double np_kernel_diagonal(const Vec2& x, const Vec2& nu_x, double curvature,
                          const KernelMode& mode);

// Green kernel P(x, y) itself (off the diagonal) and its x-gradient.
double green_kernel(const Vec2& x, const Vec2& y, const KernelMode& mode);
Vec2 green_kernel_gradient(const Vec2& x, const Vec2& y,
                           const KernelMode& mode);

// Square Nystrom matrix with the quadrature weights of its mesh attached.
struct DenseOperator {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd weights;
  KernelMode mode;
};

// Nystrom matrix of the NP operator: entry (i,j) = kernel(x_i, x_j) w_j,
// diagonal through the curvature limit. The parallel version distributes
// rows over OpenMP threads; the serial one is the reference used by the
// consistency tests and the benchmark.
DenseOperator assemble_np_matrix(const BoundaryMesh& mesh,
                                 const KernelMode& mode);
DenseOperator assemble_np_matrix_serial(const BoundaryMesh& mesh,
                                        const KernelMode& mode);

// Single layer matrix mapping nodal densities to boundary potentials.
// The logarithmic part is integrated with the spectral product quadrature
// for periodic log kernels (exact on trigonometric polynomials), the
// smooth remainder with the midpoint rule; DiskPoisson adds the smooth
// image correction.
DenseOperator assemble_single_layer(const BoundaryMesh& mesh,
                                    const KernelMode& mode);
DenseOperator assemble_single_layer_serial(const BoundaryMesh& mesh,
                                           const KernelMode& mode);

// Spectrum of the NP matrix compressed to the discretely mean-zero
// subspace sum_i w_i phi_i = 0.
struct SpectralReport {
  std::vector<double> eigenvalues;      // real parts, ascending
  std::vector<double> sym_eigenvalues;  // S-inner-product variant, ascending
  double residual_imag = 0.0;           // max |Im| before taking real parts
  int mesh_size = 0;
  double lambda_minus = 0.0, lambda_plus = 0.0;
  double delta = 0.0, delta_prime = 0.0;
  double zero_tol = 0.0;  // cluster exclusion around 0 for count_inside
  int count_inside = 0;   // eigenvalues in (lambda_- + delta, lambda_+ - delta), |ev| > zero_tol
  int count_outside = 0;  // eigenvalues outside [lambda_- - delta', lambda_+ + delta']
};

// Plain compressed eigenvalues; optionally also the generalized symmetric
// eigenproblem in the single-layer inner product <phi,psi> = -phi' W S psi
// (requires S assembled on the same mesh).
SpectralReport np_spectrum(const DenseOperator& K,
                           const DenseOperator* S = nullptr);

// Count of values strictly inside (lo, hi), excluding the cluster at zero
// when zero_tol > 0. The zero exclusion is what distinguishes interval
// filling from the eigenvalue accumulation at 0 that every discretized
// compact operator produces as N grows.
int count_in_window(const std::vector<double>& values, double lo, double hi,
                    double zero_tol = 0.0);

// Eigenvalue counts against the critical interval of the corner angle,
// for a sweep of mesh sizes on one corner curve.
std::vector<SpectralReport> essential_spectrum_study(
    std::shared_ptr<const geom::BoundaryCurve> curve,
    const std::vector<int>& n_list, double grading, double delta,
    double delta_prime, const KernelMode& mode = KernelMode::free_space(),
    double zero_tol = 1e-3);

// Harmonic background field: a point source outside the inclusion or a
// low-degree harmonic polynomial.
struct HarmonicSource {
  enum class Kind { PointSource, X1, X2, XXmYY, XY };
  Kind kind = Kind::X1;
  Vec2 source_point{0.0, 0.0};

  static HarmonicSource point(const Vec2& z0) {
    return {Kind::PointSource, z0};
  }
  static HarmonicSource poly_x1() { return {Kind::X1, {0.0, 0.0}}; }
  static HarmonicSource poly_x2() { return {Kind::X2, {0.0, 0.0}}; }

  double value(const Vec2& z) const;
  Vec2 gradient(const Vec2& z) const;
};

// Off-boundary single layer evaluation with the density trigonometrically
// upsampled in the computational parameter (controls the near-boundary
// quadrature error).
struct LayerEvaluator {
  BoundaryMesh fine;            // upsampled quadrature mesh
  Eigen::VectorXd fine_density;
  KernelMode mode;

  double potential(const Vec2& z) const;
  Vec2 gradient(const Vec2& z) const;
};

LayerEvaluator make_layer_evaluator(const BoundaryMesh& mesh,
                                    const Eigen::VectorXd& density,
                                    const KernelMode& mode, int upsample = 0);

// Solution of (lambda I - K*) phi = dH/dnu with the representation
// u = S phi + H evaluable off the boundary.
struct TransmissionSolution {
  Eigen::VectorXd density;
  double lambda = 0.0;
  double condition = 0.0;
  HarmonicSource source;
  LayerEvaluator layer;

  double field(const Vec2& z) const {
    return layer.potential(z) + source.value(z);
  }
  Vec2 field_gradient(const Vec2& z) const {
    return layer.gradient(z) + source.gradient(z);
  }
};

TransmissionSolution transmission_solve(const BoundaryMesh& mesh,
                                        const DenseOperator& K, double lambda,
                                        const HarmonicSource& source,
                                        int upsample = 0);

}  // namespace npspec::bem
