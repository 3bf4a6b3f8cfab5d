// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: dispersion tables, boundary meshes, NP spectra,
// essential-spectrum studies, FEM spectra, cross validation, Weyl decay
// sweeps, coercivity certificates, and the folded sector solver.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "npspec/corner_dispersion.hpp"
#include "npspec/fem.hpp"
#include "npspec/geometry.hpp"
#include "npspec/np_operator.hpp"
#include "npspec/weyl.hpp"

using json = nlohmann::json;
using namespace npspec;
using dispersion::CornerAngle;
using dispersion::kPi;

namespace {

constexpr const char* kVersion = "0.2.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Manifest {
  json config;
  std::vector<std::pair<std::string, double>> stages;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point tstage = t0;

  void stage(const std::string& name) {
    auto now = std::chrono::steady_clock::now();
    stages.emplace_back(name,
                        std::chrono::duration<double, std::milli>(now - tstage).count());
    tstage = now;
  }
  void write(const std::string& out_dir) {
    json j;
    j["version"] = kVersion;
    j["config"] = config;
    j["outputs"] = outputs;
    json st = json::object();
    for (auto& [k, v] : stages) st[k] = v;
    st["total_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    j["wall_ms"] = st;
    std::ofstream f(out_dir + "/manifest.json");
    f << j.dump(2) << "\n";
  }
};

std::string out_path(const std::string& dir, const std::string& name) {
  return dir.empty() || dir == "." ? name : dir + "/" + name;
}

// key=value,key=value parser for shape descriptors.
std::map<std::string, double> parse_kv(const std::string& s) {
  std::map<std::string, double> kv;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t eq = s.find('=', pos);
    if (eq == std::string::npos) {
      throw ConfigError("malformed key=value list: '" + s + "'");
    }
    size_t comma = s.find(',', eq);
    if (comma == std::string::npos) comma = s.size();
    kv[s.substr(pos, eq - pos)] = std::stod(s.substr(eq + 1, comma - eq - 1));
    pos = comma + 1;
  }
  return kv;
}

std::shared_ptr<geom::BoundaryCurve> parse_shape(const std::string& spec) {
  const size_t colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  auto kv = colon == std::string::npos
                ? std::map<std::string, double>{}
                : parse_kv(spec.substr(colon + 1));
  if (kind == "disk") {
    if (!kv.count("r")) throw ConfigError("disk shape needs r=");
    return geom::make_disk(kv["r"]);
  }
  if (kind == "ellipse") {
    if (!kv.count("a") || !kv.count("b")) {
      throw ConfigError("ellipse shape needs a=,b=");
    }
    return geom::make_ellipse(kv["a"], kv["b"]);
  }
  if (kind == "drop") {
    if (!kv.count("alpha") || !kv.count("R0")) {
      throw ConfigError("drop shape needs alpha=,R0=");
    }
    return geom::make_corner_drop(CornerAngle(kv["alpha"]), kv["R0"]);
  }
  throw ConfigError("unknown shape kind '" + kind + "'");
}

bem::KernelMode parse_mode(const std::string& spec) {
  if (spec == "free") return bem::KernelMode::free_space();
  if (spec.rfind("disk:", 0) == 0) {
    auto kv = parse_kv(spec.substr(5));
    if (!kv.count("R")) throw ConfigError("disk mode needs R=");
    return bem::KernelMode::disk_poisson(kv["R"]);
  }
  throw ConfigError("unknown kernel mode '" + spec + "'");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

// eps list: either "2^-4:2^-8" (all dyadic steps) or a comma list of values.
std::vector<double> parse_eps_list(const std::string& s) {
  std::vector<double> out;
  const size_t colon = s.find(':');
  auto parse_pow = [](const std::string& t) {
    if (t.rfind("2^", 0) == 0) return std::pow(2.0, std::stod(t.substr(2)));
    return std::stod(t);
  };
  if (colon != std::string::npos && s.find(',') == std::string::npos) {
    const double a = parse_pow(s.substr(0, colon));
    const double b = parse_pow(s.substr(colon + 1));
    double hi = std::max(a, b), lo = std::min(a, b);
    for (double v = hi; v >= lo * (1.0 - 1e-12); v /= 2.0) out.push_back(v);
  } else {
    size_t pos = 0;
    while (pos < s.size()) {
      size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      out.push_back(parse_pow(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  if (out.empty()) throw ConfigError("empty eps list");
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand payloads
// ---------------------------------------------------------------------------

struct DispersionCmd {
  double alpha = -1.0;
  double k = std::nan("");
  double lambda = std::nan("");
  std::string sweep;
  std::string out = "dispersion.csv";
  bool opposite_sign = false;
  bool gnuplot = false;
};

void write_gnuplot(const std::string& csv_path, const std::string& gp_path,
                   int xcol, int ycol, const std::string& title) {
  std::ofstream f(gp_path);
  f << "set datafile separator ','\n";
  f << "set key off\n";
  f << "set title '" << title << "'\n";
  f << "plot '" << csv_path << "' using " << xcol << ":" << ycol
    << " every ::1 with linespoints\n";
}

void run_dispersion(const DispersionCmd& cmd, Manifest& man,
                    const std::string& out_dir) {
  if (!(cmd.alpha > 0.0)) throw ConfigError("dispersion requires --alpha");
  CornerAngle alpha(cmd.alpha);

  std::vector<double> ks;
  if (!cmd.sweep.empty()) {
    // format: k=a:b:n
    if (cmd.sweep.rfind("k=", 0) != 0) {
      throw ConfigError("sweep format is k=a:b:n");
    }
    const std::string body = cmd.sweep.substr(2);
    const size_t c1 = body.find(':');
    const size_t c2 = body.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ConfigError("sweep format is k=a:b:n");
    }
    const double a = std::stod(body.substr(0, c1));
    const double b = std::stod(body.substr(c1 + 1, c2 - c1 - 1));
    const int n = std::stoi(body.substr(c2 + 1));
    if (n < 1) throw ConfigError("sweep needs at least one point");
    for (int i = 0; i < n; ++i) {
      ks.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
    }
  } else if (!std::isnan(cmd.k)) {
    ks.push_back(cmd.k);
  } else if (!std::isnan(cmd.lambda)) {
    ks.push_back(dispersion::contrast_from_lambda(cmd.lambda).k);
  } else {
    throw ConfigError("dispersion requires --k, --lambda or --sweep");
  }

  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << "alpha,k,lambda,beta,branch,root,residual";
  if (cmd.opposite_sign) f << ",opposite_sign_value";
  f << "\n";
  for (double k : ks) {
    std::string branch = "none", root = "", residual = "", opposite = "";
    double lambda = std::nan(""), beta = std::nan("");
    try {
      auto triple = dispersion::contrast_from_k(k);
      lambda = triple.lambda;
      beta = triple.beta;
      try {
        auto r = dispersion::solve_dispersion_real(k, alpha);
        branch = "real";
        root = fmt(r.value);
        residual = fmt(std::abs(dispersion::eval_F(r.value, alpha) -
                                2.0 * k / (k * k + 1.0)));
        if (cmd.opposite_sign) opposite = fmt(dispersion::eval_F_opposite(r.value, alpha));
      } catch (const NoRealRoot&) {
        auto r = dispersion::solve_dispersion_imag(k, alpha);
        branch = "imaginary";
        root = fmt(r.value);
        residual = fmt(std::abs(dispersion::eval_Ftilde(r.value, alpha) -
                                2.0 * k / (k * k + 1.0)));
        if (cmd.opposite_sign) opposite = fmt(-dispersion::eval_Ftilde(r.value, alpha));
      }
    } catch (const Error&) {
      branch = "none";  // degenerate or critical contrast: row kept
    }
    f << fmt(alpha.value()) << "," << fmt(k) << ","
      << (std::isnan(lambda) ? "" : fmt(lambda)) << ","
      << (std::isnan(beta) ? "" : fmt(beta)) << "," << branch << "," << root
      << "," << residual;
    if (cmd.opposite_sign) f << "," << opposite;
    f << "\n";
  }
  man.outputs.push_back(path);
  if (cmd.gnuplot) {
    const std::string gp = path + ".gp";
    write_gnuplot(path, gp, 2, 6, "dispersion root vs contrast");
    man.outputs.push_back(gp);
  }
  man.stage("dispersion");
}

struct MeshCmd {
  std::string shape = "disk:r=1";
  int n = 128;
  double grading = 3.0;
  std::string out = "mesh.json";
};

void run_mesh(const MeshCmd& cmd, Manifest& man, const std::string& out_dir) {
  auto curve = parse_shape(cmd.shape);
  auto mesh = geom::graded_mesh(curve, cmd.n, cmd.grading);
  json j;
  j["nodes"] = json::array();
  j["weights"] = json::array();
  j["normals"] = json::array();
  j["curvature"] = json::array();
  for (int i = 0; i < mesh.size(); ++i) {
    j["nodes"].push_back({mesh.nodes(0, i), mesh.nodes(1, i)});
    j["weights"].push_back(mesh.weights(i));
    j["normals"].push_back({mesh.normals(0, i), mesh.normals(1, i)});
    j["curvature"].push_back(mesh.curvature(i));
  }
  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << j.dump() << "\n";
  man.outputs.push_back(path);
  man.stage("mesh");
}

struct SpectrumBemCmd {
  std::string shape = "disk:r=1";
  int n = 128;
  double grading = 3.0;
  std::string mode = "free";
  std::string out = "spectrum_bem.csv";
  bool with_symmetrized = false;
};

void run_spectrum_bem(const SpectrumBemCmd& cmd, Manifest& man,
                      const std::string& out_dir, bool as_json) {
  auto curve = parse_shape(cmd.shape);
  auto mode = parse_mode(cmd.mode);
  auto mesh = geom::graded_mesh(curve, cmd.n, cmd.grading);
  auto K = bem::assemble_np_matrix(mesh, mode);
  man.stage("assemble");
  bem::SpectralReport rep;
  if (cmd.with_symmetrized) {
    auto S = bem::assemble_single_layer(mesh, mode);
    rep = bem::np_spectrum(K, &S);
  } else {
    rep = bem::np_spectrum(K);
  }
  man.stage("eigensolve");

  const std::string path = out_path(out_dir, cmd.out);
  if (as_json) {
    json j;
    j["N"] = rep.mesh_size;
    j["imag_residual"] = rep.residual_imag;
    j["eigenvalues"] = rep.eigenvalues;
    if (!rep.sym_eigenvalues.empty()) j["sym_eigenvalues"] = rep.sym_eigenvalues;
    std::ofstream f(path);
    f << j.dump() << "\n";
  } else {
    std::ofstream f(path);
    f << "N,index,eigenvalue,imag_residual\n";
    for (size_t i = 0; i < rep.eigenvalues.size(); ++i) {
      f << rep.mesh_size << "," << i << "," << fmt(rep.eigenvalues[i]) << ","
        << fmt(rep.residual_imag) << "\n";
    }
  }
  man.outputs.push_back(path);
  man.stage("write");
}

struct EssStudyCmd {
  double alpha = -1.0;
  std::string n_list = "64,128,256";
  double delta = 0.02;
  double delta_prime = 0.02;
  double grading = 3.0;
  double R0 = 0.3;
  double zero_tol = 1e-3;
  std::string out = "ess_study.json";
};

void run_ess_study(const EssStudyCmd& cmd, Manifest& man,
                   const std::string& out_dir) {
  if (!(cmd.alpha > 0.0)) throw ConfigError("ess-study requires --alpha");
  auto curve = geom::make_corner_drop(CornerAngle(cmd.alpha), cmd.R0);
  auto reports = bem::essential_spectrum_study(
      curve, parse_int_list(cmd.n_list), cmd.grading, cmd.delta,
      cmd.delta_prime, bem::KernelMode::free_space(), cmd.zero_tol);
  man.stage("study");

  json rows = json::array();
  for (const auto& rep : reports) {
    rows.push_back({{"N", rep.mesh_size},
                    {"inside", rep.count_inside},
                    {"outside", rep.count_outside},
                    {"lambda_minus", rep.lambda_minus},
                    {"lambda_plus", rep.lambda_plus},
                    {"delta", rep.delta},
                    {"delta_prime", rep.delta_prime},
                    {"zero_tol", rep.zero_tol},
                    {"imag_residual", rep.residual_imag}});
  }
  json j;
  j["alpha"] = cmd.alpha;
  j["grading"] = cmd.grading;
  j["counts"] = rows;
  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  man.outputs.push_back(path);
  man.stage("write");
}

struct SpectrumFemCmd {
  std::string geometry = "disk-in-disk:r=0.5,R=1";
  std::string mesh_file;  // external triangulation in the text format
  std::string dump_mesh;  // write the generated triangulation
  double h = 0.08;
  int count = 24;
  std::string out = "spectrum_fem.csv";
};

fem::FemGeometry parse_fem_geometry(const std::string& spec) {
  const size_t colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  auto kv = colon == std::string::npos
                ? std::map<std::string, double>{}
                : parse_kv(spec.substr(colon + 1));
  if (kind == "disk-in-disk") {
    return fem::FemGeometry::disk_in_disk(kv.count("r") ? kv["r"] : 0.5,
                                          kv.count("R") ? kv["R"] : 1.0);
  }
  if (kind == "ellipse-in-disk") {
    return fem::FemGeometry::ellipse_in_disk(kv["a"], kv["b"],
                                             kv.count("R") ? kv["R"] : 4.0);
  }
  if (kind == "drop-in-disk") {
    return fem::FemGeometry::drop_in_disk(
        kv["alpha"], kv.count("R0") ? kv["R0"] : 0.3,
        kv.count("R") ? kv["R"] : 1.0,
        kv.count("res") ? kv["res"] : 0.0);
  }
  throw ConfigError("unknown fem geometry '" + kind + "'");
}

void run_spectrum_fem(const SpectrumFemCmd& cmd, Manifest& man,
                      const std::string& out_dir) {
  fem::FemContext ctx =
      cmd.mesh_file.empty()
          ? fem::build_fem_context(parse_fem_geometry(cmd.geometry), cmd.h)
          : fem::build_fem_context(fem::read_triangulation(cmd.mesh_file));
  if (!cmd.dump_mesh.empty()) {
    const std::string mp = out_path(out_dir, cmd.dump_mesh);
    fem::write_triangulation(mp, ctx.tri);
    man.outputs.push_back(mp);
  }
  man.stage("assemble");
  auto betas = fem::td_spectrum(ctx, cmd.count);
  man.stage("eigensolve");
  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << "index,beta,lambda\n";
  for (size_t i = 0; i < betas.size(); ++i) {
    f << i << "," << fmt(betas[i]) << "," << fmt(0.5 - betas[i]) << "\n";
  }
  man.outputs.push_back(path);
  man.stage("write");
}

struct CrossValidateCmd {
  double r = 0.5, R = 1.0;
  double h = 0.08;
  int n = 128;
  int pairs = 3;
  std::string out = "cross_validate.json";
};

void run_cross_validate(const CrossValidateCmd& cmd, Manifest& man,
                        const std::string& out_dir) {
  auto ctx =
      fem::build_fem_context(fem::FemGeometry::disk_in_disk(cmd.r, cmd.R), cmd.h);
  man.stage("fem");
  auto mesh = geom::graded_mesh(geom::make_disk(cmd.r), cmd.n, 1.0);
  auto K = bem::assemble_np_matrix(mesh, bem::KernelMode::disk_poisson(cmd.R));
  auto rep = bem::np_spectrum(K);
  man.stage("bem");
  auto rows = fem::spectral_correspondence(ctx, rep.eigenvalues, cmd.pairs);
  man.stage("pairing");

  json j;
  j["pairs"] = json::array();
  double worst = 0.0;
  for (const auto& row : rows) {
    worst = std::max(worst, row.mismatch);
    j["pairs"].push_back({{"beta", row.beta},
                          {"lambda_fem", row.lambda_fem},
                          {"lambda_bem", row.lambda_bem},
                          {"mismatch", row.mismatch}});
  }
  j["max_mismatch"] = worst;
  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  man.outputs.push_back(path);
  man.stage("write");
}

struct WeylCmd {
  bool gnuplot = false;
  double k = -2.0;
  double alpha = kPi / 2.0;
  std::string eps = "2^-4:2^-8";
  double r0 = 0.45;
  double R0 = 0.95;
  double R_omega = 2.0;
  double h = 0.05;
  std::string out = "weyl.csv";
};

void run_weyl(const WeylCmd& cmd, Manifest& man, const std::string& out_dir) {
  CornerAngle alpha(cmd.alpha);
  auto eps_list = parse_eps_list(cmd.eps);
  auto factory = [&](double eps) {
    return fem::build_fem_context(
        fem::FemGeometry::drop_in_disk(cmd.alpha, cmd.R0, cmd.R_omega, eps / 5.0),
        cmd.h);
  };
  auto rep = weyl::weyl_sweep(cmd.k, alpha, eps_list, cmd.r0, factory);
  man.stage("sweep");

  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << "eps,m_eps,s_eps,residual,l2_norm\n";
  for (size_t i = 0; i < rep.eps.size(); ++i) {
    f << fmt(rep.eps[i]) << "," << fmt(rep.m[i]) << "," << fmt(rep.s[i]) << ","
      << fmt(rep.residual[i]) << "," << fmt(rep.l2[i]) << "\n";
  }
  man.outputs.push_back(path);
  if (cmd.gnuplot) {
    const std::string gp = path + ".gp";
    write_gnuplot(path, gp, 1, 4, "weyl residual vs eps");
    man.outputs.push_back(gp);
  }
  man.stage("write");
}

struct CertificateCmd {
  double k = std::nan("");
  double alpha = -1.0;
  int samples = 20000;
  std::string out = "certificate.json";
};

void run_certificate(const CertificateCmd& cmd, Manifest& man,
                     const std::string& out_dir, std::uint64_t seed) {
  if (std::isnan(cmd.k) || !(cmd.alpha > 0.0)) {
    throw ConfigError("certificate requires --k and --alpha");
  }
  CornerAngle alpha(cmd.alpha);
  auto cert = fem::coercivity_certificate(cmd.k, alpha);
  auto check = fem::certificate_form_check(cert, cmd.k, alpha, cmd.samples, seed);
  man.stage("certificate");

  json j;
  j["k"] = cmd.k;
  j["alpha"] = cmd.alpha;
  j["A"] = cert.A;
  j["p"] = cert.p;
  j["q"] = cert.q;
  j["d"] = cert.d;
  j["disc1"] = cert.disc1;
  j["disc2"] = cert.disc2;
  j["elliptic_branch"] = cert.elliptic_branch;
  if (!cert.elliptic_branch) {
    j["f_interval"] = {cert.f_lo, cert.f_hi};
    j["g_interval"] = {cert.g_lo, cert.g_hi};
  }
  j["form_check"] = {{"min_sample", check.min_sample},
                     {"min_eig_form1", check.min_eig_form1},
                     {"min_eig_form2", check.min_eig_form2},
                     {"pass", check.pass}};
  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  man.outputs.push_back(path);
  man.stage("write");
}

struct SectorCmd {
  double k = -5.0;
  double alpha = kPi / 2.0;
  double rho = 1.0;
  double h = 0.05;
  std::string out = "sector.json";
};

void run_sector(const SectorCmd& cmd, Manifest& man,
                const std::string& out_dir) {
  CornerAngle alpha(cmd.alpha);
  // Manufactured data with all couplings satisfied; the solver report
  // carries the energy and the observed stability constant.
  const double c = 2.0 * kPi / cmd.alpha;
  const double rho = cmd.rho;
  const double A = alpha.aspect_ratio();
  auto f = [&](double r, double th) {
    return (rho / r - 4.0 - c * c * (rho - r) / r) * std::cos(c * th);
  };
  auto g = [&](double r, double th) {
    return (rho / r - 4.0 - A * A * c * c * (rho - r) / r) * std::cos(c * th);
  };
  auto sol = fem::sector_system_solve(f, g, cmd.k, alpha, cmd.rho, cmd.h);
  man.stage("solve");

  json j;
  j["k"] = cmd.k;
  j["alpha"] = cmd.alpha;
  j["rho"] = cmd.rho;
  j["h"] = cmd.h;
  j["rings"] = static_cast<int>(sol.radii.size());
  j["angles"] = static_cast<int>(sol.thetas.size());
  j["energy"] = sol.energy;
  j["rhs_norm"] = sol.rhs_norm;
  j["stability"] = sol.stability;
  const std::string path = out_path(out_dir, cmd.out);
  std::ofstream f2(path);
  f2 << j.dump(2) << "\n";
  man.outputs.push_back(path);
  man.stage("write");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"npspec: spectra of the Neumann-Poincare operator on corner domains"};
  app.require_subcommand(1);
  // --h is a real option on several subcommands, so only the long help
  // flag is registered anywhere.
  app.set_help_flag("--help", "print help");

  std::string config_path, out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 0;
  bool want_json = false, want_csv = false;
  app.add_option("--config", config_path, "JSON config with option defaults");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for randomized checks");
  app.add_option("--threads", threads, "OpenMP thread count (0 = default)");
  app.add_flag("--json", want_json, "prefer JSON output");
  app.add_flag("--csv", want_csv, "prefer CSV output");

  DispersionCmd disp;
  auto* cdisp = app.add_subcommand("dispersion", "dispersion roots and sweeps");
  cdisp->set_help_flag("--help", "print help");
  cdisp->add_option("--alpha", disp.alpha, "corner angle (rad)");
  cdisp->add_option("--k", disp.k, "conductivity contrast");
  cdisp->add_option("--lambda", disp.lambda, "spectral parameter");
  cdisp->add_option("--sweep", disp.sweep, "k=a:b:n sweep");
  cdisp->add_option("--out", disp.out, "output CSV");
  cdisp->add_flag("--opposite-sign", disp.opposite_sign,
                  "also tabulate the opposite-orientation dispersion value");
  cdisp->add_flag("--gnuplot", disp.gnuplot, "emit a gnuplot script next to the CSV");

  MeshCmd meshc;
  auto* cmesh = app.add_subcommand("mesh", "graded boundary quadrature mesh");
  cmesh->set_help_flag("--help", "print help");
  cmesh->add_option("--shape", meshc.shape, "drop:alpha=..,R0=.. | disk:r=.. | ellipse:a=..,b=..");
  cmesh->add_option("--n", meshc.n, "node count");
  cmesh->add_option("--grading", meshc.grading, "grading exponent");
  cmesh->add_option("--out", meshc.out, "output JSON");

  SpectrumBemCmd sbem;
  auto* csbem = app.add_subcommand("spectrum-bem", "Nystrom NP spectrum");
  csbem->set_help_flag("--help", "print help");
  csbem->add_option("--shape", sbem.shape, "boundary shape");
  csbem->add_option("--n", sbem.n, "node count");
  csbem->add_option("--grading", sbem.grading, "grading exponent");
  csbem->add_option("--mode", sbem.mode, "free | disk:R=..");
  csbem->add_option("--out", sbem.out, "output file");
  csbem->add_flag("--symmetrized", sbem.with_symmetrized,
                  "also solve the single-layer inner product variant");

  EssStudyCmd ess;
  auto* cess = app.add_subcommand("ess-study", "essential spectrum filling study");
  cess->set_help_flag("--help", "print help");
  cess->add_option("--alpha", ess.alpha, "corner angle (rad)");
  cess->add_option("--n-list", ess.n_list, "comma list of mesh sizes");
  cess->add_option("--delta", ess.delta, "window shrink");
  cess->add_option("--delta-prime", ess.delta_prime, "window inflation");
  cess->add_option("--grading", ess.grading, "grading exponent");
  cess->add_option("--R0", ess.R0, "drop edge ball radius");
  cess->add_option("--zero-tol", ess.zero_tol, "cluster exclusion around 0");
  cess->add_option("--out", ess.out, "output JSON");

  SpectrumFemCmd sfem;
  auto* csfem = app.add_subcommand("spectrum-fem", "variational operator spectrum");
  csfem->set_help_flag("--help", "print help");
  csfem->add_option("--geometry", sfem.geometry,
                    "disk-in-disk:r=..,R=.. | ellipse-in-disk:a=..,b=..,R=.. | drop-in-disk:alpha=..,R0=..,R=..,res=..");
  csfem->add_option("--h", sfem.h, "target mesh size");
  csfem->add_option("--mesh-file", sfem.mesh_file, "external mesh (text format)");
  csfem->add_option("--dump-mesh", sfem.dump_mesh, "write the triangulation (text format)");
  csfem->add_option("--count", sfem.count, "eigenvalue count (0 = all, dense only)");
  csfem->add_option("--out", sfem.out, "output CSV");

  CrossValidateCmd cross;
  auto* ccross = app.add_subcommand("cross-validate",
                                    "pair FEM and Poisson-kernel BEM spectra");
  ccross->set_help_flag("--help", "print help");
  ccross->add_option("--r", cross.r, "inclusion disk radius");
  ccross->add_option("--R", cross.R, "container disk radius");
  ccross->add_option("--h", cross.h, "FEM mesh size");
  ccross->add_option("--n", cross.n, "BEM node count");
  ccross->add_option("--pairs", cross.pairs, "pair count");
  ccross->add_option("--out", cross.out, "output JSON");

  WeylCmd weylc;
  auto* cweyl = app.add_subcommand("weyl", "singular Weyl sequence decay sweep");
  cweyl->set_help_flag("--help", "print help");
  cweyl->add_option("--k", weylc.k, "contrast inside the critical interval");
  cweyl->add_option("--alpha", weylc.alpha, "corner angle (rad)");
  cweyl->add_option("--eps", weylc.eps, "eps list, e.g. 2^-4:2^-8");
  cweyl->add_option("--r0", weylc.r0, "outer cutoff scale");
  cweyl->add_option("--R0", weylc.R0, "drop edge ball radius");
  cweyl->add_option("--R-omega", weylc.R_omega, "container radius");
  cweyl->add_option("--h", weylc.h, "FEM mesh size");
  cweyl->add_option("--out", weylc.out, "output CSV");
  cweyl->add_flag("--gnuplot", weylc.gnuplot, "emit a gnuplot script next to the CSV");

  CertificateCmd cert;
  auto* ccert = app.add_subcommand("certificate", "coercivity certificate");
  ccert->set_help_flag("--help", "print help");
  ccert->add_option("--k", cert.k, "contrast");
  ccert->add_option("--alpha", cert.alpha, "corner angle (rad)");
  ccert->add_option("--samples", cert.samples, "random form samples");
  ccert->add_option("--out", cert.out, "output JSON");

  SectorCmd sect;
  auto* csect = app.add_subcommand("sector", "folded sector system solve");
  csect->set_help_flag("--help", "print help");
  csect->add_option("--k", sect.k, "contrast");
  csect->add_option("--alpha", sect.alpha, "corner angle (rad)");
  csect->add_option("--rho", sect.rho, "sector radius");
  csect->add_option("--h", sect.h, "mesh size");
  csect->add_option("--out", sect.out, "output JSON");

  // Config file values act as defaults; explicit flags win.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  }
  json cfg = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) {
      std::fprintf(stderr, "config error: cannot open '%s'\n", config_path.c_str());
      return 1;
    }
    try {
      f >> cfg;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 1;
    }
    auto getd = [&](const char* key, double& slot) {
      if (cfg.contains(key) && cfg[key].is_number()) slot = cfg[key];
    };
    auto geti = [&](const char* key, int& slot) {
      if (cfg.contains(key) && cfg[key].is_number_integer()) slot = cfg[key];
    };
    auto gets = [&](const char* key, std::string& slot) {
      if (cfg.contains(key) && cfg[key].is_string()) slot = cfg[key];
    };
    getd("alpha", disp.alpha);
    getd("k", disp.k);
    getd("lambda", disp.lambda);
    gets("sweep", disp.sweep);
    gets("shape", meshc.shape);
    geti("n", meshc.n);
    getd("grading", meshc.grading);
    gets("shape", sbem.shape);
    geti("n", sbem.n);
    getd("grading", sbem.grading);
    gets("mode", sbem.mode);
    getd("alpha", ess.alpha);
    gets("n-list", ess.n_list);
    getd("delta", ess.delta);
    gets("geometry", sfem.geometry);
    getd("h", sfem.h);
    geti("count", sfem.count);
    getd("h", cross.h);
    geti("n", cross.n);
    getd("k", weylc.k);
    getd("alpha", weylc.alpha);
    gets("eps", weylc.eps);
    getd("r0", weylc.r0);
    getd("k", cert.k);
    getd("alpha", cert.alpha);
    geti("samples", cert.samples);
    getd("k", sect.k);
    getd("alpha", sect.alpha);
    getd("rho", sect.rho);
    getd("h", sect.h);
    if (cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
  }

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  Manifest man;
  man.config = cfg;
  man.config["argv"] = json::array();
  for (int i = 0; i < argc; ++i) man.config["argv"].push_back(argv[i]);
  man.config["seed"] = seed;

  try {
    if (cdisp->parsed()) run_dispersion(disp, man, out_dir);
    if (cmesh->parsed()) run_mesh(meshc, man, out_dir);
    if (csbem->parsed()) run_spectrum_bem(sbem, man, out_dir, want_json && !want_csv);
    if (cess->parsed()) run_ess_study(ess, man, out_dir);
    if (csfem->parsed()) run_spectrum_fem(sfem, man, out_dir);
    if (ccross->parsed()) run_cross_validate(cross, man, out_dir);
    if (cweyl->parsed()) run_weyl(weylc, man, out_dir);
    if (ccert->parsed()) run_certificate(cert, man, out_dir, seed);
    if (csect->parsed()) run_sector(sect, man, out_dir);
    man.write(out_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const EigensolveFailure& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const SolveFailure& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const NearSingularSystem& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "precondition violated: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
