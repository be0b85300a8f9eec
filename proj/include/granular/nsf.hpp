#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "granular/lattice.hpp"
#include "granular/transport.hpp"

namespace granular {

/// Spectral state of the limiting incompressible flow on the unit torus
/// (d = 2): divergence-free velocity modes, zero-mean temperature modes.
/// The density fluctuation is never stored; rho = -theta1 * theta.
struct FluidState {
  int nx = 0;
  std::vector<std::complex<double>> uhat;  // 2 * nx*nx, component-major
  std::vector<std::complex<double>> that;  // nx*nx
  double time = 0.0;
};

/// Pseudo-spectral solver with 2/3 dealiasing; diffusion and the linear
/// forcing are integrated exactly per mode (integrating factor), advection
/// explicitly (Heun). Every step re-projects onto divergence-free fields
/// and pins the temperature mean to zero.
class NsfSolver {
 public:
  NsfSolver(int nx, const TransportReport& coeffs, double lambda0);
  ~NsfSolver();
  NsfSolver(const NsfSolver&) = delete;
  NsfSolver& operator=(const NsfSolver&) = delete;

  FluidState init(const std::function<void(double, double, double&, double&)>& u0,
                  const std::function<double(double, double)>& theta0) const;

  void leray_project(FluidState& s) const;
  void step(FluidState& s, double dt) const;

  // physical-space fields, cell-centered to match the kinetic grid
  std::vector<double> u_phys(const FluidState& s) const;      // cells * 2
  std::vector<double> theta_phys(const FluidState& s) const;  // cells
  std::vector<double> rho_phys(const FluidState& s) const;    // -theta1 * theta

  double kinetic_energy(const FluidState& s) const;  // (1/2) int |u|^2
  double theta_sq(const FluidState& s) const;        // int theta^2
  double div_norm(const FluidState& s) const;
  double theta_mean(const FluidState& s) const;
  double tail_energy_fraction(const FluidState& s) const;

  double advective_dt(const FluidState& s, double cfl = 0.4) const;

  int nx() const { return nx_; }
  double theta1() const { return th1_; }
  double nu() const { return nu_; }
  double gamma() const { return gamma_; }
  double lambda0() const { return lambda0_; }
  double theta_forcing_rate() const;  // lambda0 cbar sqrt(theta1) / (2(d+2))

 private:
  int nx_;
  double th1_, nu_, gamma_, cbar_, lambda0_;
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;
  mutable std::vector<std::complex<double>> buf_;

  void nonlinear(const FluidState& s, std::vector<std::complex<double>>& nu_out,
                 std::vector<std::complex<double>>& nth_out) const;
  void dealias(std::vector<std::complex<double>>& field, int comps) const;
};

/// Kinetic fluctuation carried by a fluid state:
/// h(x, v) = (rho + u.v + theta (|v|^2 - d theta1)/2) M per cell.
std::vector<double> limit_profile(const NsfSolver& solver, const FluidState& s,
                                  std::shared_ptr<const VelocityLattice> lat);

}  // namespace granular
