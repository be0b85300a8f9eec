#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "granular/collision.hpp"
#include "granular/homogeneous.hpp"
#include "granular/lattice.hpp"

namespace granular {

/// Distribution over the unit torus (nx cells per axis, d = 2) times the
/// velocity lattice; cell-major storage.
struct PhaseField {
  std::shared_ptr<const VelocityLattice> lat;
  int nx = 0;
  double eps = 1.0;
  double alpha = 1.0;
  std::vector<double> data;

  PhaseField() = default;
  PhaseField(std::shared_ptr<const VelocityLattice> l, int nx_, double eps_, double alpha_)
      : lat(std::move(l)), nx(nx_), eps(eps_), alpha(alpha_),
        data(static_cast<std::size_t>(nx_) * nx_ * lat->size(), 0.0) {}

  std::size_t cells() const { return static_cast<std::size_t>(nx) * nx; }
  double* cell(std::size_t c) { return data.data() + c * lat->size(); }
  const double* cell(std::size_t c) const { return data.data() + c * lat->size(); }

  double total_mass() const;
  Vec total_momentum() const;
  double total_energy() const;
};

/// Exact advection x <- x + v dt on the unit torus by per-velocity-node
/// spectral phase shift; unitary, so mass per node is conserved to rounding
/// and the step is reversible.
class Advector {
 public:
  Advector(int nx, std::shared_ptr<const VelocityLattice> lat);
  ~Advector();
  Advector(const Advector&) = delete;
  Advector& operator=(const Advector&) = delete;

  // advances transport over dt (the 1/eps factor is applied internally)
  void step(PhaseField& F, double dt) const;

 private:
  int nx_;
  std::shared_ptr<const VelocityLattice> lat_;
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;
  mutable std::vector<std::complex<double>> buf_;
};

/// Strang composition: half transport, collision + drift per cell, half
/// transport. Cells are independent in the middle stage (parallel map).
struct StrangOptions {
  StepOptions step;
  int threads = 0;
};

StepInfo strang_step(PhaseField& F, double dt, const CollisionTableau& tab, const Advector& adv,
                     const StrangOptions& opts = {});

/// collision+drift-only step (per cell), used for splitting diagnostics
StepInfo collision_stage(PhaseField& F, double dt, const CollisionTableau& tab,
                         const StrangOptions& opts = {});

struct HydroFields {
  int nx = 0;
  int d = 2;
  std::vector<double> rho;    // cells
  std::vector<double> theta;  // cells
  std::vector<double> p;      // cells, (1/d) <|v|^2 h>
  std::vector<double> u;      // cells * d
  std::vector<double> aflux;  // cells * d * d, <A h>
  std::vector<double> bflux;  // cells * d, <b h>
};

/// Moments of the fluctuation h = (F - G)/eps: rho = <h>, u = <v h>/theta1,
/// theta = <(|v|^2 - (d+2) theta1) h> / ((d+2) theta1^2).
HydroFields hydro_moments(const PhaseField& F, const Distribution& G, double theta1);

/// F = G + eps (rho0 + u0.v + theta0 (|v|^2 - d theta1)/2) M; throws if the
/// perturbation drives F negative.
PhaseField init_well_prepared(std::shared_ptr<const VelocityLattice> lat, int nx, double eps,
                              double alpha, const Distribution& G, double theta1,
                              const std::function<double(double, double)>& rho0,
                              const std::function<void(double, double, double&, double&)>& u0,
                              const std::function<double(double, double)>& theta0);

struct BoussinesqResiduals {
  double div_u = 0.0;        // L2 norm of div u over the torus
  double boussinesq = 0.0;   // L2 norm of rho + theta1 * theta, mean-corrected
};

BoussinesqResiduals boussinesq_residuals(const HydroFields& H, double theta1);

struct RelaxationResult {
  double rate = 0.0;          // fitted decay rate of ||f - G||_1 per unit time
  double rate_tau = 0.0;      // same in collision-clock units (t * eps^2)
  bool monotone_tail = false;
  double fit_rms = 0.0;
  std::vector<double> t, dist;
};

/// Relaxation of an energy-mode perturbation of G under the x-homogeneous
/// dynamics (spatially uniform data reduces to the homogeneous module);
/// fits the exponential tail of ||f - G||_1.
RelaxationResult relaxation_experiment(const Distribution& G, double eps,
                                       const CollisionTableau& tab, double amplitude,
                                       double horizon_tau, const StepOptions& opts = {});

}  // namespace granular
