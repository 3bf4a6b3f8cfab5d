// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#include "npspec/np_operator.hpp"

#include <algorithm>
#include <cmath>

#include "npspec/corner_dispersion.hpp"

namespace npspec::bem {

using dispersion::kPi;

namespace {

// Image point of y in the circle of radius R (for the disk Green function).
Vec2 image_point(const Vec2& y, double R) {
  const double n2 = y.squaredNorm();
  return (R * R / n2) * y;
}

// Smooth correction kernel of the disk Green function,
// R_x(y) = -(1/2pi) ln(|x - y*| |y| / R).
double poisson_correction(const Vec2& x, const Vec2& y, double R) {
  const double ynorm = y.norm();
  if (ynorm < 1e-300) {
    return -std::log(R) / (2.0 * kPi);
  }
  const Vec2 ystar = image_point(y, R);
  return -std::log((x - ystar).norm() * ynorm / R) / (2.0 * kPi);
}

Vec2 poisson_correction_gradient_x(const Vec2& x, const Vec2& y, double R) {
  const double ynorm = y.norm();
  if (ynorm < 1e-300) return {0.0, 0.0};
  const Vec2 d = x - image_point(y, R);
  return -d / (2.0 * kPi * d.squaredNorm());
}

void check_inside(const BoundaryMesh& mesh, const KernelMode& mode) {
  if (mode.is_free()) return;
  for (int i = 0; i < mesh.size(); ++i) {
    if (mesh.nodes.col(i).norm() >= mode.R) {
      throw MeshGenerationFailure(
          "curve must lie strictly inside the Poisson disk");
    }
  }
}

// Log-kernel product quadrature weights for N equispaced (midpoint) nodes:
// (1/2pi) int_0^{2pi} ln(4 sin^2((t_i - tau)/2)) f(tau) dtau
//   ~ sum_j R[(i-j) mod N] f(t_j),
// exact for trigonometric polynomials of degree < N/2.
Eigen::VectorXd log_quadrature_weights(int N) {
  Eigen::VectorXd R(N);
  const int n = N / 2;
  for (int d = 0; d < N; ++d) {
    double acc = 0.0;
    for (int m = 1; m < n; ++m) {
      acc += std::cos(2.0 * kPi * m * d / N) / m;
    }
    R(d) = -(2.0 / N) * acc - (d % 2 == 0 ? 1.0 : -1.0) / (2.0 * n * n);
  }
  return R;
}

double np_entry(const BoundaryMesh& mesh, const KernelMode& mode, int i,
                int j) {
  const Vec2 xi = mesh.nodes.col(i);
  const Vec2 nui = mesh.normals.col(i);
  double k;
  if (i == j) {
    k = np_kernel_diagonal(xi, nui, mesh.curvature(i), mode);
  } else {
    k = np_kernel(xi, mesh.nodes.col(j), nui, mode);
  }
  return k * mesh.weights(j);
}

DenseOperator assemble_np_impl(const BoundaryMesh& mesh,
                               const KernelMode& mode, bool parallel) {
  check_inside(mesh, mode);
  const int N = mesh.size();
  DenseOperator op;
  op.mode = mode;
  op.weights = mesh.weights;
  op.matrix.resize(N, N);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) op.matrix(i, j) = np_entry(mesh, mode, i, j);
    }
  } else {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) op.matrix(i, j) = np_entry(mesh, mode, i, j);
    }
  }
  return op;
}

DenseOperator assemble_sl_impl(const BoundaryMesh& mesh,
                               const KernelMode& mode, bool parallel) {
  check_inside(mesh, mode);
  const int N = mesh.size();
  const Eigen::VectorXd R = log_quadrature_weights(N);
  const double h = 2.0 * kPi / N;

  DenseOperator op;
  op.mode = mode;
  op.weights = mesh.weights;
  op.matrix.resize(N, N);

  auto entry = [&](int i, int j) {
    const Vec2 xi = mesh.nodes.col(i);
    const Vec2 yj = mesh.nodes.col(j);
    // Smooth remainder of the log kernel in the computational parameter.
    double smooth;
    if (i == j) {
      smooth = std::log(mesh.speed(i)) / (2.0 * kPi);
    } else {
      const double ds = 2.0 * std::abs(std::sin(0.5 * (mesh.param(i) - mesh.param(j))));
      smooth = std::log((xi - yj).norm() / ds) / (2.0 * kPi);
    }
    double val = (0.5 * R((i - j + N) % N) + h * smooth) * mesh.speed(j);
    if (!mode.is_free()) {
      val += h * poisson_correction(xi, yj, mode.R) * mesh.speed(j);
    }
    return val;
  };

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) op.matrix(i, j) = entry(i, j);
    }
  } else {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) op.matrix(i, j) = entry(i, j);
    }
  }
  return op;
}

// Orthonormal basis of the discretely mean-zero subspace {w' phi = 0}.
Eigen::MatrixXd mean_zero_basis(const Eigen::VectorXd& w) {
  const int N = static_cast<int>(w.size());
  Eigen::MatrixXd wcol = w;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(wcol);
  Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(N, N);
  return Qfull.rightCols(N - 1);
}

}  // namespace

double np_kernel(const Vec2& x, const Vec2& y, const Vec2& nu_x,
                 const KernelMode& mode) {
  const Vec2 d = x - y;
  double k = d.dot(nu_x) / (2.0 * kPi * d.squaredNorm());
  if (!mode.is_free()) {
    k += poisson_correction_gradient_x(x, y, mode.R).dot(nu_x);
  }
  return k;
}

double np_kernel_diagonal(const Vec2& x, const Vec2& nu_x, double curvature,
                          const KernelMode& mode) {
  double k = curvature / (4.0 * kPi);
  if (!mode.is_free()) {
    k += poisson_correction_gradient_x(x, x, mode.R).dot(nu_x);
  }
  return k;
}

double green_kernel(const Vec2& x, const Vec2& y, const KernelMode& mode) {
  double g = std::log((x - y).norm()) / (2.0 * kPi);
  if (!mode.is_free()) g += poisson_correction(x, y, mode.R);
  return g;
}

Vec2 green_kernel_gradient(const Vec2& x, const Vec2& y,
                           const KernelMode& mode) {
  const Vec2 d = x - y;
  Vec2 g = d / (2.0 * kPi * d.squaredNorm());
  if (!mode.is_free()) g += poisson_correction_gradient_x(x, y, mode.R);
  return g;
}

DenseOperator assemble_np_matrix(const BoundaryMesh& mesh,
                                 const KernelMode& mode) {
  return assemble_np_impl(mesh, mode, true);
}
DenseOperator assemble_np_matrix_serial(const BoundaryMesh& mesh,
                                        const KernelMode& mode) {
  return assemble_np_impl(mesh, mode, false);
}
DenseOperator assemble_single_layer(const BoundaryMesh& mesh,
                                    const KernelMode& mode) {
  return assemble_sl_impl(mesh, mode, true);
}
DenseOperator assemble_single_layer_serial(const BoundaryMesh& mesh,
                                           const KernelMode& mode) {
  return assemble_sl_impl(mesh, mode, false);
}

SpectralReport np_spectrum(const DenseOperator& K, const DenseOperator* S) {
  const int N = static_cast<int>(K.matrix.rows());
  const Eigen::MatrixXd Q = mean_zero_basis(K.weights);
  const Eigen::MatrixXd Av = Q.transpose() * K.matrix * Q;

  Eigen::EigenSolver<Eigen::MatrixXd> es(Av);
  if (es.info() != Eigen::Success) {
    throw EigensolveFailure("nonsymmetric eigensolve did not converge");
  }

  SpectralReport rep;
  rep.mesh_size = N;
  rep.eigenvalues.resize(N - 1);
  for (int i = 0; i < N - 1; ++i) {
    rep.eigenvalues[i] = es.eigenvalues()(i).real();
    rep.residual_imag =
        std::max(rep.residual_imag, std::abs(es.eigenvalues()(i).imag()));
  }
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end());

  if (S != nullptr) {
    // Generalized symmetric problem in the single-layer inner product:
    // (-W S A) phi = lambda (-W S) phi restricted to the subspace.
    const Eigen::MatrixXd W = K.weights.asDiagonal();
    const Eigen::MatrixXd B = -(W * S->matrix);
    Eigen::MatrixXd Bv = Q.transpose() * B * Q;
    Bv = 0.5 * (Bv + Bv.transpose()).eval();
    Eigen::MatrixXd Gv = Q.transpose() * (B * K.matrix) * Q;
    Gv = 0.5 * (Gv + Gv.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Gv, Bv);
    if (ges.info() != Eigen::Success) {
      throw EigensolveFailure("generalized symmetric eigensolve failed");
    }
    rep.sym_eigenvalues.assign(ges.eigenvalues().data(),
                               ges.eigenvalues().data() + N - 1);
    std::sort(rep.sym_eigenvalues.begin(), rep.sym_eigenvalues.end());
  }
  return rep;
}

int count_in_window(const std::vector<double>& values, double lo, double hi,
                    double zero_tol) {
  int c = 0;
  for (double v : values) {
    if (v > lo && v < hi && std::abs(v) > zero_tol) ++c;
  }
  return c;
}

std::vector<SpectralReport> essential_spectrum_study(
    std::shared_ptr<const geom::BoundaryCurve> curve,
    const std::vector<int>& n_list, double grading, double delta,
    double delta_prime, const KernelMode& mode, double zero_tol) {
  if (!curve->has_corner()) {
    throw ConfigError("essential spectrum study requires a corner curve");
  }
  const auto cs =
      dispersion::critical_contrasts(
          dispersion::CornerAngle(curve->corner_angle()));

  std::vector<SpectralReport> out;
  for (int n : n_list) {
    auto mesh = geom::graded_mesh(curve, n, grading);
    auto K = assemble_np_matrix(mesh, mode);
    SpectralReport rep = np_spectrum(K);
    rep.lambda_minus = cs.lambda_minus;
    rep.lambda_plus = cs.lambda_plus;
    rep.delta = delta;
    rep.delta_prime = delta_prime;
    rep.zero_tol = zero_tol;
    rep.count_inside =
        count_in_window(rep.eigenvalues, cs.lambda_minus + delta,
                        cs.lambda_plus - delta, zero_tol);
    rep.count_outside = static_cast<int>(std::count_if(
        rep.eigenvalues.begin(), rep.eigenvalues.end(), [&](double v) {
          return v < cs.lambda_minus - delta_prime ||
                 v > cs.lambda_plus + delta_prime;
        }));
    out.push_back(std::move(rep));
  }
  return out;
}

double HarmonicSource::value(const Vec2& z) const {
  switch (kind) {
    case Kind::PointSource:
      return std::log((z - source_point).norm()) / (2.0 * kPi);
    case Kind::X1:
      return z.x();
    case Kind::X2:
      return z.y();
    case Kind::XXmYY:
      return z.x() * z.x() - z.y() * z.y();
    case Kind::XY:
      return z.x() * z.y();
  }
  return 0.0;
}

Vec2 HarmonicSource::gradient(const Vec2& z) const {
  switch (kind) {
    case Kind::PointSource: {
      const Vec2 d = z - source_point;
      return d / (2.0 * kPi * d.squaredNorm());
    }
    case Kind::X1:
      return {1.0, 0.0};
    case Kind::X2:
      return {0.0, 1.0};
    case Kind::XXmYY:
      return {2.0 * z.x(), -2.0 * z.y()};
    case Kind::XY:
      return {z.y(), z.x()};
  }
  return {0.0, 0.0};
}

double LayerEvaluator::potential(const Vec2& z) const {
  double acc = 0.0;
  for (int j = 0; j < fine.size(); ++j) {
    acc += green_kernel(z, fine.nodes.col(j), mode) * fine_density(j) *
           fine.weights(j);
  }
  return acc;
}

Vec2 LayerEvaluator::gradient(const Vec2& z) const {
  Vec2 acc{0.0, 0.0};
  for (int j = 0; j < fine.size(); ++j) {
    acc += green_kernel_gradient(z, fine.nodes.col(j), mode) *
           fine_density(j) * fine.weights(j);
  }
  return acc;
}

LayerEvaluator make_layer_evaluator(const BoundaryMesh& mesh,
                                    const Eigen::VectorXd& density,
                                    const KernelMode& mode, int upsample) {
  const int N = mesh.size();
  int M = upsample > 0 ? upsample : std::max(16384, 8 * N);
  if (M % 2 != 0) ++M;

  LayerEvaluator ev;
  ev.mode = mode;
  // The curve handle is required to resample; meshes built by graded_mesh
  // always carry it.
  ev.fine = geom::graded_mesh(mesh.curve, M, mesh.grading);

  // Trigonometric interpolation of the density from the N midpoint nodes
  // onto the fine midpoint grid (both uniform in the computational
  // parameter).
  const int half = N / 2;
  Eigen::VectorXcd coef(N);
  for (int m = -half; m < half; ++m) {
    std::complex<double> acc = 0.0;
    for (int j = 0; j < N; ++j) {
      acc += density(j) *
             std::exp(std::complex<double>(0.0, -m * mesh.param(j)));
    }
    coef(m + half) = acc / static_cast<double>(N);
  }
  ev.fine_density.resize(M);
  for (int j = 0; j < M; ++j) {
    std::complex<double> acc = 0.0;
    for (int m = -half; m < half; ++m) {
      acc += coef(m + half) *
             std::exp(std::complex<double>(0.0, m * ev.fine.param(j)));
    }
    ev.fine_density(j) = acc.real();
  }
  return ev;
}

TransmissionSolution transmission_solve(const BoundaryMesh& mesh,
                                        const DenseOperator& K, double lambda,
                                        const HarmonicSource& source,
                                        int upsample) {
  const int N = mesh.size();
  Eigen::VectorXd rhs(N);
  for (int i = 0; i < N; ++i) {
    rhs(i) = source.gradient(mesh.nodes.col(i)).dot(mesh.normals.col(i));
  }
  Eigen::MatrixXd M =
      lambda * Eigen::MatrixXd::Identity(N, N) - K.matrix;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  const double cond =
      svd.singularValues()(0) / svd.singularValues()(N - 1);
  if (!(cond < 1e12)) {
    throw NearSingularSystem("lambda too close to the discrete spectrum");
  }

  TransmissionSolution sol;
  sol.lambda = lambda;
  sol.condition = cond;
  sol.source = source;
  sol.density = M.partialPivLu().solve(rhs);
  sol.layer = make_layer_evaluator(mesh, sol.density, K.mode, upsample);
  return sol;
}

}  // namespace npspec::bem
