// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0
//
// Assembly benchmark: OpenMP kernels against their serial reference
// implementations, with a consistency check on each pair.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "npspec/fem.hpp"
#include "npspec/np_operator.hpp"

using namespace npspec;
using dispersion::kPi;

namespace {

double seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void report(const char* name, double ts, double tp, double maxdiff) {
  std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  maxdiff %.2e\n",
              name, ts, tp, ts / tp, maxdiff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; both paths run serially\n");
#endif

  auto drop = geom::make_corner_drop(dispersion::CornerAngle(kPi / 2.0), 0.3);
  auto mesh = geom::graded_mesh(drop, 1024, 3.0);
  const auto mode = bem::KernelMode::free_space();

  {
    bem::DenseOperator Ks, Kp;
    const double ts = seconds([&] { Ks = bem::assemble_np_matrix_serial(mesh, mode); });
    const double tp = seconds([&] { Kp = bem::assemble_np_matrix(mesh, mode); });
    report("np matrix (N=1024)", ts, tp,
           (Ks.matrix - Kp.matrix).cwiseAbs().maxCoeff());
  }
  {
    bem::DenseOperator Ss, Sp;
    const double ts =
        seconds([&] { Ss = bem::assemble_single_layer_serial(mesh, mode); });
    const double tp = seconds([&] { Sp = bem::assemble_single_layer(mesh, mode); });
    report("single layer (N=1024)", ts, tp,
           (Ss.matrix - Sp.matrix).cwiseAbs().maxCoeff());
  }
  {
    auto ctx_geom = fem::FemGeometry::drop_in_disk(kPi / 2.0, 0.65, 2.0, 1e-4);
    auto ctx = fem::build_fem_context(ctx_geom, 0.02);
    fem::SpMat Ao, Ad, Bo, Bd;
    const double ts =
        seconds([&] { fem::assemble_stiffness(ctx.tri, &Ao, &Ad, false); });
    const double tp =
        seconds([&] { fem::assemble_stiffness(ctx.tri, &Bo, &Bd, true); });
    fem::SpMat D = Ao - Bo;
    double diff = 0.0;
    for (int c = 0; c < D.outerSize(); ++c) {
      for (fem::SpMat::InnerIterator it(D, c); it; ++it) {
        diff = std::max(diff, std::abs(it.value()));
      }
    }
    std::printf("fem stiffness: %d nodes, %d triangles\n", ctx.tri.node_count(),
                ctx.tri.tri_count());
    report("p1 stiffness", ts, tp, diff);
  }
  return 0;
}
