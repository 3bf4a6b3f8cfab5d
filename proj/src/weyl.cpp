// Copyright the npspec authors.
// SPDX-License-Identifier: Apache-2.0

#include "npspec/weyl.hpp"

#include <cmath>
#include <complex>

namespace npspec::weyl {

using cd = std::complex<double>;
using dispersion::kPi;

namespace {

const double kGauss12X[12] = {
    -0.9815606342467192, -0.9041172563704748, -0.7699026741943047,
    -0.5873179542866175, -0.3678314989981802, -0.1252334085114689,
    0.1252334085114689,  0.3678314989981802,  0.5873179542866175,
    0.7699026741943047,  0.9041172563704748,  0.9815606342467192};
const double kGauss12W[12] = {
    0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
    0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
    0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
    0.1600783285433462, 0.1069393259953184, 0.0471753363865118};

double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}
double smoothstep_d(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return 30.0 * x * x * (1.0 - x) * (1.0 - x);
}

// Angular quadrature panels aligned with the interface rays.
struct ThetaRule {
  std::vector<double> nodes, weights;
};

ThetaRule theta_rule(double alpha, int panels_per_branch) {
  ThetaRule rule;
  auto add = [&](double lo, double hi, int panels) {
    for (int s = 0; s < panels; ++s) {
      const double a = lo + (hi - lo) * s / panels;
      const double b = lo + (hi - lo) * (s + 1) / panels;
      for (int g = 0; g < 12; ++g) {
        rule.nodes.push_back(a + 0.5 * (b - a) * (kGauss12X[g] + 1.0));
        rule.weights.push_back(0.5 * (b - a) * kGauss12W[g]);
      }
    }
  };
  add(-alpha / 2.0, alpha / 2.0, panels_per_branch);
  add(alpha / 2.0, 2.0 * kPi - alpha / 2.0, 3 * panels_per_branch);
  return rule;
}

// Radial log-coordinate panels aligned with the cutoff breakpoints.
std::vector<std::pair<double, double>> sigma_panels(double lo, double hi,
                                                    std::vector<double> breaks,
                                                    double max_width) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  std::vector<std::pair<double, double>> panels;
  for (size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = std::max(breaks[i], lo), b = std::min(breaks[i + 1], hi);
    if (b - a <= 1e-14) continue;
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
    for (int s = 0; s < n; ++s) {
      panels.emplace_back(a + (b - a) * s / n, a + (b - a) * (s + 1) / n);
    }
  }
  return panels;
}

}  // namespace

double WeylField::singular_value(double r, double theta) const {
  if (r <= 0.0) return 0.0;
  const cd radial = std::exp(cd(0.0, xi * std::log(r)));
  if (convention == Convention::FullProductReal) {
    return (radial * profile.eval(theta)).real();
  }
  return radial.real() * profile.eval(theta).real();
}

double WeylField::cutoff(double r) const {
  double c1;
  if (r <= eps) {
    c1 = 0.0;
  } else if (r >= 2.0 * eps) {
    c1 = 1.0;
  } else {
    c1 = smoothstep(r / eps - 1.0);
  }
  double c2;
  if (r <= r0) {
    c2 = 1.0;
  } else if (r >= 2.0 * r0) {
    c2 = 0.0;
  } else {
    c2 = 1.0 - smoothstep(r / r0 - 1.0);
  }
  return c1 * c2;
}

double WeylField::cutoff_derivative(double r) const {
  double c1 = 1.0, dc1 = 0.0;
  if (r <= eps) {
    c1 = 0.0;
  } else if (r < 2.0 * eps) {
    c1 = smoothstep(r / eps - 1.0);
    dc1 = smoothstep_d(r / eps - 1.0) / eps;
  }
  double c2 = 1.0, dc2 = 0.0;
  if (r >= 2.0 * r0) {
    c2 = 0.0;
  } else if (r > r0) {
    c2 = 1.0 - smoothstep(r / r0 - 1.0);
    dc2 = -smoothstep_d(r / r0 - 1.0) / r0;
  }
  return dc1 * c2 + c1 * dc2;
}

double WeylField::value_polar(double r, double theta) const {
  if (r <= eps || r >= 2.0 * r0) return 0.0;
  return s_eps * cutoff(r) * singular_value(r, theta);
}

double WeylField::value(const Vec2& x) const {
  const Vec2 d = x - center;
  const double r = d.norm();
  if (r <= eps || r >= 2.0 * r0) return 0.0;
  const double theta = std::atan2(d.y(), d.x()) - rotation;
  return value_polar(r, theta);
}

Vec2 WeylField::gradient(const Vec2& x) const {
  const Vec2 d = x - center;
  const double r = d.norm();
  if (r <= eps || r >= 2.0 * r0) return {0.0, 0.0};
  const double theta = std::atan2(d.y(), d.x()) - rotation;

  const cd radial = std::exp(cd(0.0, xi * std::log(r)));
  const cd phi = profile.eval(theta);
  const cd dphi = profile.deriv(theta);
  double u_sing, du_r, du_t;
  if (convention == Convention::FullProductReal) {
    u_sing = (radial * phi).real();
    du_r = (cd(0.0, xi / r) * radial * phi).real();
    du_t = (radial * dphi).real();
  } else {
    u_sing = radial.real() * phi.real();
    du_r = (cd(0.0, xi / r) * radial).real() * phi.real();
    du_t = radial.real() * dphi.real();
  }
  const double g = cutoff(r), dg = cutoff_derivative(r);
  const double ur = s_eps * (dg * u_sing + g * du_r);
  const double ut = s_eps * g * du_t / r;

  const double ca = std::cos(theta + rotation), sa = std::sin(theta + rotation);
  return {ur * ca - ut * sa, ur * sa + ut * ca};
}

double field_energy(const WeylField& f, int refine) {
  const int pb = 12 << refine;
  const ThetaRule th = theta_rule(f.alpha.value(), pb);
  const double lo = std::log(f.eps), hi = std::log(2.0 * f.r0);
  const auto panels =
      sigma_panels(lo, hi, {std::log(2.0 * f.eps), std::log(f.r0)},
                   0.35 / (1 << refine));

  double acc = 0.0;
  for (const auto& [a, b] : panels) {
    for (int g = 0; g < 12; ++g) {
      const double sig = a + 0.5 * (b - a) * (kGauss12X[g] + 1.0);
      const double wr = 0.5 * (b - a) * kGauss12W[g];
      const double r = std::exp(sig);
      const cd radial = std::exp(cd(0.0, f.xi * sig));
      const double cg = f.cutoff(r), dcg = f.cutoff_derivative(r);
      for (size_t q = 0; q < th.nodes.size(); ++q) {
        const cd phi = f.profile.eval(th.nodes[q]);
        const cd dphi = f.profile.deriv(th.nodes[q]);
        double us, dur, dut;
        if (f.convention == Convention::FullProductReal) {
          us = (radial * phi).real();
          dur = (cd(0.0, f.xi / r) * radial * phi).real();
          dut = (radial * dphi).real() / r;
        } else {
          us = radial.real() * phi.real();
          dur = (cd(0.0, f.xi / r) * radial).real() * phi.real();
          dut = radial.real() * dphi.real() / r;
        }
        const double gr = dcg * us + cg * dur;
        const double gt = cg * dut;
        // |grad|^2 r dr dtheta = (...) r^2 dsigma dtheta
        acc += wr * th.weights[q] * (gr * gr + gt * gt) * r * r;
      }
    }
  }
  return std::sqrt(acc) * f.s_eps;
}

WeylField build_weyl_field(double k, CornerAngle alpha, double eps, double r0,
                           Convention convention, const Vec2& center,
                           double rotation) {
  if (!(4.0 * eps < r0)) {
    throw ConfigError("cutoff scales must satisfy 4 eps < r0");
  }
  WeylField f;
  f.k = k;
  f.beta = dispersion::contrast_from_k(k).beta;
  f.alpha = alpha;
  f.eps = eps;
  f.r0 = r0;
  f.convention = convention;
  f.center = center;
  f.rotation = rotation;

  const auto root = dispersion::solve_dispersion_imag(k, alpha);
  f.xi = root.value;
  f.profile = dispersion::angular_profile(root, k, alpha);

  f.m_eps = m_eps(k, alpha, eps, r0);
  f.s_eps = 1.0;
  const double raw = field_energy(f, 0);
  f.s_eps = 1.0 / raw;
  return f;
}

double m_eps(double k, CornerAngle alpha, double eps, double r0) {
  const auto root = dispersion::solve_dispersion_imag(k, alpha);
  const double xi = root.value;
  const auto profile = dispersion::angular_profile(root, k, alpha);

  const ThetaRule th = theta_rule(alpha.value(), 12);
  const auto panels = sigma_panels(std::log(eps), std::log(r0), {}, 0.35);
  double acc = 0.0;
  for (const auto& [a, b] : panels) {
    for (int g = 0; g < 12; ++g) {
      const double sig = a + 0.5 * (b - a) * (kGauss12X[g] + 1.0);
      const double wr = 0.5 * (b - a) * kGauss12W[g];
      const cd radial = std::exp(cd(0.0, xi * sig));
      for (size_t q = 0; q < th.nodes.size(); ++q) {
        const cd phi = profile.eval(th.nodes[q]);
        const cd dphi = profile.deriv(th.nodes[q]);
        const double dur = (cd(0.0, xi) * radial * phi).real();  // r du/dr
        const double dut = (radial * dphi).real();               // du/dtheta
        // |grad u|^2 r dr = (dur^2 + dut^2) dsigma
        acc += wr * th.weights[q] * (dur * dur + dut * dut);
      }
    }
  }
  return acc;
}

double field_l2_norm(const WeylField& f) {
  double acc = 0.0;
  const ThetaRule th = theta_rule(f.alpha.value(), 12);
  const auto panels =
      sigma_panels(std::log(f.eps), std::log(2.0 * f.r0),
                   {std::log(2.0 * f.eps), std::log(f.r0)}, 0.35);
  for (const auto& [a, b] : panels) {
    for (int g = 0; g < 12; ++g) {
      const double sig = a + 0.5 * (b - a) * (kGauss12X[g] + 1.0);
      const double wr = 0.5 * (b - a) * kGauss12W[g];
      const double r = std::exp(sig);
      for (size_t q = 0; q < th.nodes.size(); ++q) {
        const double u = f.value_polar(r, th.nodes[q]);
        acc += wr * th.weights[q] * u * u * r * r;  // u^2 r dr dtheta
      }
    }
  }
  return std::sqrt(acc);
}

double integrate_against(const WeylField& f,
                         const std::function<double(const Vec2&)>& test) {
  double acc = 0.0;
  const ThetaRule th = theta_rule(f.alpha.value(), 12);
  const auto panels =
      sigma_panels(std::log(f.eps), std::log(2.0 * f.r0),
                   {std::log(2.0 * f.eps), std::log(f.r0)}, 0.35);
  const double cr = std::cos(f.rotation), sr = std::sin(f.rotation);
  for (const auto& [a, b] : panels) {
    for (int g = 0; g < 12; ++g) {
      const double sig = a + 0.5 * (b - a) * (kGauss12X[g] + 1.0);
      const double wr = 0.5 * (b - a) * kGauss12W[g];
      const double r = std::exp(sig);
      for (size_t q = 0; q < th.nodes.size(); ++q) {
        const double u = f.value_polar(r, th.nodes[q]);
        const double ct = std::cos(th.nodes[q]), st = std::sin(th.nodes[q]);
        const Vec2 x = f.center + r * Vec2{ct * cr - st * sr, ct * sr + st * cr};
        acc += wr * th.weights[q] * u * test(x) * r * r;
      }
    }
  }
  return acc;
}

double weyl_residual(const WeylField& field, const fem::FemContext& ctx) {
  if (!(ctx.corner_resolution > 0.0) ||
      ctx.corner_resolution > field.eps / 4.0) {
    throw MeshTooCoarse("mesh does not resolve the inner cutoff scale");
  }
  const int n = ctx.tri.node_count();
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u(i) = field.value(ctx.tri.nodes.col(i));
  const Eigen::VectorXd z = field.beta * u - fem::apply_td(ctx, u);
  return std::sqrt(z.dot(ctx.K_omega * z));
}

DecayReport weyl_sweep(double k, CornerAngle alpha,
                       const std::vector<double>& eps_list, double r0,
                       const std::function<fem::FemContext(double)>& ctx_factory) {
  DecayReport rep;
  for (double eps : eps_list) {
    auto field = build_weyl_field(k, alpha, eps, r0);
    auto ctx = ctx_factory(eps);
    rep.eps.push_back(eps);
    rep.m.push_back(field.m_eps);
    rep.s.push_back(field.s_eps);
    rep.residual.push_back(weyl_residual(field, ctx));
    rep.l2.push_back(field_l2_norm(field));
  }
  // Fit residual ~ a + slope * (ln 1/eps)^{-1/2}.
  const int n = static_cast<int>(rep.eps.size());
  if (n >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      const double x = 1.0 / std::sqrt(std::log(1.0 / rep.eps[i]));
      sx += x;
      sy += rep.residual[i];
      sxx += x * x;
      sxy += x * rep.residual[i];
    }
    rep.fitted_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

}  // namespace npspec::weyl
