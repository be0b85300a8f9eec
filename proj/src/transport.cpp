#include "granular/transport.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace granular {

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int depth = 28) {
  auto simpson = [&](double lo, double hi) {
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
  };
  std::function<double(double, double, double, int)> rec = [&](double lo, double hi, double whole,
                                                               int dep) {
    const double mid = 0.5 * (lo + hi);
    const double l = simpson(lo, mid), r = simpson(mid, hi);
    if (dep <= 0 || std::abs(l + r - whole) < 15.0 * tol) return l + r + (l + r - whole) / 15.0;
    return rec(lo, mid, l, dep - 1) + rec(mid, hi, r, dep - 1);
  };
  return rec(a, b, simpson(a, b), depth);
}

}  // namespace

double moment_constant_a(int d) {
  if (d != 2 && d != 3) throw std::invalid_argument("moment_constant_a: d must be 2 or 3");
  const double surf = d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  auto integrand = [d](double r) { return std::pow(r, d + 2) * std::exp(-0.5 * r * r); };
  double radial = 0.0;
  for (int k = 0; k < 40; ++k)  // panelled so the peak cannot be stepped over
    radial += adaptive_simpson(integrand, k, k + 1.0, 1e-14);
  return 2.0 * std::sqrt(2.0) * std::pow(2.0 * std::numbers::pi, -0.5 * d) * surf * radial;
}

Eigen::MatrixXd tensor_A(const Vec& v, int d) {
  Eigen::MatrixXd A(d, d);
  double vsq = 0.0;
  for (int a = 0; a < d; ++a) vsq += v[a] * v[a];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = v[i] * v[j] - (i == j ? vsq / d : 0.0);
  return A;
}

Eigen::VectorXd vector_b(const Vec& v, double theta1, int d) {
  Eigen::VectorXd b(d);
  double vsq = 0.0;
  for (int a = 0; a < d; ++a) vsq += v[a] * v[a];
  for (int i = 0; i < d; ++i) b(i) = 0.5 * (vsq - (d + 2) * theta1) * v[i];
  return b;
}

namespace {

double kernel_component_norm(const Distribution& rhs, double theta1) {
  // worst normalized moment of rhs against the orthonormal invariant basis
  const auto lat = rhs.lat;
  const int d = lat->dim();
  auto M = maxwellian(lat, 1.0, Vec{0, 0, 0}, theta1).f;
  const double w = lat->cell_weight();
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < rhs.size(); ++i) scale += std::abs(rhs.f[i]);
  scale *= w;
  if (scale == 0.0) return 0.0;
  for (int k = 0; k < d + 2; ++k) {
    double c = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      Vec v = lat->velocity(i);
      double psi = 1.0;
      if (k >= 1 && k <= d) psi = v[k - 1] / std::sqrt(theta1);
      if (k == d + 1) psi = (lat->speed_sq()[i] - d * theta1) / (theta1 * std::sqrt(2.0 * d));
      c += rhs.f[i] * psi;
    }
    worst = std::max(worst, std::abs(c * w));
    (void)M;
  }
  return worst / scale;
}

}  // namespace

TransportWorkspace solve_phi_psi(const CollisionTableau& elastic_tab, double theta1, int threads) {
  if (std::abs(elastic_tab.alpha() - 1.0) > 1e-14)
    throw std::invalid_argument("solve_phi_psi: tableau must be elastic (alpha = 1)");
  TransportWorkspace ws;
  ws.lat = elastic_tab.lattice_ptr();
  ws.theta1 = theta1;
  const int d = ws.lat->dim();
  const std::size_t n = ws.lat->size();
  ws.M = maxwellian(ws.lat, 1.0, Vec{0, 0, 0}, theta1).f;

  LinearOperatorMatrix L = assemble_linearized(ws.M, 1.0, 0.0, elastic_tab, threads);
  ws.L1 = std::move(L.A);

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ws.L1);

  auto project_out_kernel = [&](Distribution& g) {
    Distribution pk = kernel_projection_pi0(g, theta1);
    for (std::size_t i = 0; i < n; ++i) g.f[i] -= pk.f[i];
  };

  auto solve_one = [&](const std::vector<double>& field_times_M, double& resid,
                       double& leak) -> Distribution {
    Distribution rhs(ws.lat);
    for (std::size_t i = 0; i < n; ++i) rhs.f[i] = -field_times_M[i];
    leak = std::max(leak, kernel_component_norm(rhs, theta1));
    project_out_kernel(rhs);
    Eigen::Map<const Eigen::VectorXd> b(rhs.f.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd y = cod.solve(b);
    resid = std::max(resid, (ws.L1 * y - b).norm() / b.norm());
    Distribution sol(ws.lat);
    for (std::size_t i = 0; i < n; ++i) sol.f[i] = y[static_cast<Eigen::Index>(i)];
    project_out_kernel(sol);
    // return the prefactor field (solution divided by M); where M underflows
    // the quotient is pure least-squares noise, so it is cut to zero
    double mmax = 0.0;
    for (double x : ws.M.f) mmax = std::max(mmax, x);
    Distribution out(ws.lat);
    for (std::size_t i = 0; i < n; ++i)
      out.f[i] = ws.M.f[i] > 1e-12 * mmax ? sol.f[i] / ws.M.f[i] : 0.0;
    return out;
  };

  // independent components of the symmetric traceless A: (i, j), i <= j,
  // with the last diagonal recovered from tracelessness
  ws.phi.assign(d, std::vector<Distribution>(d));
  std::vector<double> buf(n);
  double leak = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      if (i == j && i == d - 1) continue;  // dependent by trace
      for (std::size_t q = 0; q < n; ++q) {
        Vec v = ws.lat->velocity(q);
        const double Aij = v[i] * v[j] - (i == j ? ws.lat->speed_sq()[q] / d : 0.0);
        buf[q] = Aij * ws.M.f[q];
      }
      ws.phi[i][j] = solve_one(buf, ws.phi_residual, leak);
      if (i != j) ws.phi[j][i] = ws.phi[i][j];
    }
  }
  ws.phi[d - 1][d - 1] = Distribution(ws.lat);
  for (int i = 0; i < d - 1; ++i)
    for (std::size_t q = 0; q < n; ++q) ws.phi[d - 1][d - 1].f[q] -= ws.phi[i][i].f[q];

  ws.psi.assign(d, Distribution(ws.lat));
  for (int i = 0; i < d; ++i) {
    for (std::size_t q = 0; q < n; ++q) {
      Vec v = ws.lat->velocity(q);
      buf[q] = 0.5 * (ws.lat->speed_sq()[q] - (d + 2) * theta1) * v[i] * ws.M.f[q];
    }
    ws.psi[i] = solve_one(buf, ws.psi_residual, leak);
  }
  ws.kernel_leak = leak;
  if (leak > 1e-6)
    throw std::runtime_error("solve_phi_psi: source has a kernel component beyond tolerance");
  return ws;
}

namespace {

// <f, L1 (g M)> with f, g prefactor fields
double quadratic_form(const TransportWorkspace& ws, const Distribution& fpre,
                      const Distribution& gpre) {
  const std::size_t n = ws.lat->size();
  Eigen::VectorXd gm(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) gm[static_cast<Eigen::Index>(i)] = gpre.f[i] * ws.M.f[i];
  Eigen::VectorXd Lgm = ws.L1 * gm;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += fpre.f[i] * Lgm[static_cast<Eigen::Index>(i)];
  return s * ws.lat->cell_weight();
}

double pair_moment(const TransportWorkspace& ws, const Distribution& fpre,
                   const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < ws.lat->size(); ++i) s += fpre.f[i] * g[i];
  return s * ws.lat->cell_weight();
}

}  // namespace

TransportReport viscosity_conductivity(const TransportWorkspace& ws,
                                       const CollisionTableau& elastic_tab) {
  const int d = ws.lat->dim();
  const std::size_t n = ws.lat->size();
  TransportReport r;
  r.d = d;
  r.theta1 = ws.theta1;
  r.a = moment_constant_a(d);
  r.c_bar = r.gamma_b * r.a;
  r.phi_residual = ws.phi_residual;
  r.psi_residual = ws.psi_residual;
  r.N = ws.lat->nodes_per_axis();
  r.R = ws.lat->extent();
  r.directions = static_cast<int>(elastic_tab.quadrature().size());

  // nu = -(1/((d-1)(d+2))) sum_ij <phi^ij L1(phi^ij M)>
  double s_quad = 0.0, s_alt = 0.0;
  std::vector<double> field(n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      s_quad += quadratic_form(ws, ws.phi[i][j], ws.phi[i][j]);
      for (std::size_t q = 0; q < n; ++q) {
        Vec v = ws.lat->velocity(q);
        field[q] = (v[i] * v[j] - (i == j ? ws.lat->speed_sq()[q] / d : 0.0)) * ws.M.f[q];
      }
      s_alt += pair_moment(ws, ws.phi[i][j], field);
    }
  const double cnu = 1.0 / ((d - 1) * (d + 2));
  r.nu = -cnu * s_quad;
  r.nu_alt = cnu * s_alt;

  double g_quad = 0.0, g_alt = 0.0;
  for (int i = 0; i < d; ++i) {
    g_quad += quadratic_form(ws, ws.psi[i], ws.psi[i]);
    for (std::size_t q = 0; q < n; ++q) {
      Vec v = ws.lat->velocity(q);
      field[q] = 0.5 * (ws.lat->speed_sq()[q] - (d + 2) * ws.theta1) * v[i] * ws.M.f[q];
    }
    g_alt += pair_moment(ws, ws.psi[i], field);
  }
  const double cg = 2.0 / (d * (d + 2));
  r.gamma = -cg * g_quad;
  r.gamma_alt = cg * g_alt;

  if (!(r.nu > 0.0) || !(r.gamma > 0.0))
    throw std::runtime_error("viscosity_conductivity: nonpositive transport coefficient");
  return r;
}

Eigen::MatrixXd phi_gram(const TransportWorkspace& ws) {
  const int d = ws.lat->dim();
  Eigen::MatrixXd G(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          G(i * d + j, k * d + l) = quadratic_form(ws, ws.phi[i][j], ws.phi[k][l]);
  return G;
}

Eigen::MatrixXd psi_gram(const TransportWorkspace& ws) {
  const int d = ws.lat->dim();
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = quadratic_form(ws, ws.psi[i], ws.psi[j]);
  return G;
}

std::vector<double> forcing_J0(std::span<const double> rho, std::span<const double> theta,
                               double lambda0, double theta1, double c_bar) {
  if (rho.size() != theta.size()) throw std::invalid_argument("forcing_J0: field size mismatch");
  std::vector<double> out(rho.size());
  const double pref = -lambda0 * c_bar * std::pow(theta1, 1.5);
  for (std::size_t i = 0; i < rho.size(); ++i)
    out[i] = pref * (rho[i] + 0.75 * theta1 * theta[i]);
  return out;
}

ClosureCheck nonlinear_closures(double rho, const Vec& u, double theta,
                                const TransportWorkspace& ws,
                                const CollisionTableau& elastic_tab) {
  const int d = ws.lat->dim();
  const std::size_t n = ws.lat->size();
  const double th1 = ws.theta1;

  Distribution h(ws.lat);
  for (std::size_t q = 0; q < n; ++q) {
    Vec v = ws.lat->velocity(q);
    double uv = 0.0;
    for (int a = 0; a < d; ++a) uv += u[a] * v[a];
    h.f[q] = (rho + uv + 0.5 * theta * (ws.lat->speed_sq()[q] - d * th1)) * ws.M.f[q];
  }
  CollideOptions copts;
  copts.support_cut = 0.0;
  Distribution Q = collide(h, h, elastic_tab, copts);

  ClosureCheck c;
  c.tensor_lhs.resize(d, d);
  c.tensor_rhs.resize(d, d);
  double usq = 0.0;
  for (int a = 0; a < d; ++a) usq += u[a] * u[a];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < n; ++q) s += ws.phi[i][j].f[q] * Q.f[q];
      c.tensor_lhs(i, j) = s * ws.lat->cell_weight();
      c.tensor_rhs(i, j) = th1 * th1 * (u[i] * u[j] - (i == j ? usq / d : 0.0));
    }
  c.vector_lhs.resize(d);
  c.vector_rhs.resize(d);
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t q = 0; q < n; ++q) s += ws.psi[i].f[q] * Q.f[q];
    c.vector_lhs(i) = s * ws.lat->cell_weight();
    c.vector_rhs(i) = 0.5 * (d + 2) * th1 * th1 * th1 * theta * u[i];
  }
  const double tscale = std::max(c.tensor_rhs.norm(), 1e-30);
  const double vscale = std::max(c.vector_rhs.norm(), 1e-30);
  c.tensor_gap = (c.tensor_lhs - c.tensor_rhs).norm() / tscale;
  c.vector_gap = (c.vector_lhs - c.vector_rhs).norm() / vscale;
  return c;
}

}  // namespace granular
