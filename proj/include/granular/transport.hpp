#pragma once

#include <Eigen/Dense>
#include <vector>

#include "granular/collision.hpp"
#include "granular/spectrum.hpp"

namespace granular {

/// a(d) = (2 sqrt2/(2 pi)^{d/2}) int e^{-|v|^2/2} |v|^3 dv by adaptive
/// radial quadrature; int M_theta M_theta |v - v*|^3 = theta^{3/2} a(d).
double moment_constant_a(int d);

/// traceless rate-of-strain tensor A(v) = v (x) v - |v|^2/d Id
Eigen::MatrixXd tensor_A(const Vec& v, int d);
/// heat-flux vector b(v) = (|v|^2 - (d+2) theta1) v / 2
Eigen::VectorXd vector_b(const Vec& v, double theta1, int d);

/// chi_1 A and chi_2 b fields solving L1(phi M) = -A M and L1(psi M) = -b M
/// by least squares restricted to the non-hydrodynamic subspace.
struct TransportWorkspace {
  std::shared_ptr<const VelocityLattice> lat;
  double theta1 = 0.0;
  Eigen::MatrixXd L1;                         // elastic linearized operator
  Distribution M;                             // lattice Maxwellian at theta1
  std::vector<std::vector<Distribution>> phi; // [d][d]
  std::vector<Distribution> psi;              // [d]
  double phi_residual = 0.0;                  // worst relative LS residual
  double psi_residual = 0.0;
  double kernel_leak = 0.0;                   // worst RHS kernel component
};

TransportWorkspace solve_phi_psi(const CollisionTableau& elastic_tab, double theta1,
                                 int threads = 0);

struct TransportReport {
  int d = 0;
  double theta1 = 0.0;
  double nu = 0.0;         // from the quadratic form in L1
  double gamma = 0.0;
  double nu_alt = 0.0;     // from <phi : A M>, <psi . b M>
  double gamma_alt = 0.0;
  double gamma_b = kGammaB;
  double a = 0.0;
  double c_bar = 0.0;      // gamma_b * a
  double phi_residual = 0.0;
  double psi_residual = 0.0;
  // grid provenance
  int N = 0;
  double R = 0.0;
  int directions = 0;
};

/// nu and gamma via both routes; throws if either comes out nonpositive.
TransportReport viscosity_conductivity(const TransportWorkspace& ws,
                                       const CollisionTableau& elastic_tab);

/// <phi^{ij} L1(phi^{kl} M)> for all index pairs, flattened (ij) x (kl)
Eigen::MatrixXd phi_gram(const TransportWorkspace& ws);
/// <psi_i L1(psi_j M)>
Eigen::MatrixXd psi_gram(const TransportWorkspace& ws);

/// J0 = -lambda0 c_bar theta1^{3/2} (rho + (3/4) theta1 theta), pointwise
std::vector<double> forcing_J0(std::span<const double> rho, std::span<const double> theta,
                               double lambda0, double theta1, double c_bar);

struct ClosureCheck {
  Eigen::MatrixXd tensor_lhs, tensor_rhs;  // <phi Q1(h,h)> vs theta1^2 (u(x)u - |u|^2/d Id)
  Eigen::VectorXd vector_lhs, vector_rhs;  // <psi Q1(h,h)> vs (d+2)/2 theta1^3 theta u
  double tensor_gap = 0.0;                 // relative to the closed-form scale
  double vector_gap = 0.0;
};

/// Builds h = (rho + u.v + theta/2 (|v|^2 - d theta1)) M and compares the
/// discrete moments of Q1(h,h) against the closed forms.
ClosureCheck nonlinear_closures(double rho, const Vec& u, double theta,
                                const TransportWorkspace& ws,
                                const CollisionTableau& elastic_tab);

}  // namespace granular
