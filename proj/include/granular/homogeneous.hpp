#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "granular/collision.hpp"
#include "granular/lattice.hpp"

namespace granular {

/// Time maps between physical and self-similar variables,
/// tau(t) = log(1 + c t)/c and V(t) = 1 + c t.
struct SelfSimilarFrame {
  double eps = 1.0;
  double c = 0.0;  // (1 - alpha(eps)) / eps^2

  double tau(double t) const;
  double V(double t) const { return 1.0 + c * t; }
  double t_of_tau(double tau) const;
};

/// kappa * div_v(v f) as a flux-form divergence: second-order centered in
/// the interior, one-sided at the hull with zero boundary flux, so the
/// discrete mass of the output telescopes to zero.
Distribution drift_term(const Distribution& f, double kappa);

/// dt bound combining the drift rate kappa R / dv and the measured loss
/// frequency; the ODE is scaled by eps^2.
double stable_dt(const Distribution& f, double kappa, double eps, double safety = 0.5);

struct StepInfo {
  double clipped_mass = 0.0;  // mass removed by positivity clipping (pre-renormalization)
  double skipped_flux_fraction = 0.0;
};

struct StepOptions {
  CollideOptions collide;
  // Hard failure above this clipped-mass fraction per step. The quadratic
  // deposition leaves sign-indefinite tail noise of a few 1e-6 in mass at
  // desk resolutions, so the budget sits at 1e-5.
  double clip_limit = 1e-5;
};

/// Heun step of eps^2 df/dt = Q(f,f) - kappa div(v f); mass is restored
/// exactly by the positivity clip + renormalization.
Distribution step_selfsim(const Distribution& f, double dt, double alpha, double eps,
                          const CollisionTableau& tab, const StepOptions& opts = {},
                          StepInfo* info = nullptr);

/// Same with the drift disabled: eps^2 dF/dt = Q(F,F).
Distribution step_physical(const Distribution& f, double dt, double alpha, double eps,
                           const CollisionTableau& tab, const StepOptions& opts = {},
                           StepInfo* info = nullptr);

/// Mass-deposit rescaling v -> scale * v (unit mass budget preserved; first
/// and second moments map exactly). Out-of-hull deposits are dropped and
/// reported through clipped_mass.
Distribution velocity_scale_map(const Distribution& f, double scale,
                                double* clipped_mass = nullptr);

enum class FrameDirection { ToSelfSimilar, ToPhysical };

/// F(t, v) = V^d f(tau, V v) realized as a mass deposit; ToPhysical shrinks
/// velocities by 1/V, ToSelfSimilar expands them by V.
Distribution self_similar_map(const Distribution& f, double t, const SelfSimilarFrame& frame,
                              FrameDirection dir, double* clipped_mass = nullptr);

struct CoolingState {
  double alpha = 1.0;
  Distribution G;
  double theta = 0.0;
  double residual = 0.0;  // L1 norm of Q(G,G) - kappa div(vG)
  int steps = 0;
  bool converged = false;
};

struct CoolingOptions {
  double tol = 0.0;          // residual target; 0 picks 0.05 * max(kappa, 1e-3)
  double support_cut = 1e-14;
  int threads = 0;
  int max_outer = 12;
  double settle_time = 12.0;     // fast-transient span per outer segment (tau units)
  double dt_safety = 0.5;
  double clip_limit = 1e-5;
  std::function<void(double tau, double theta, double residual)> trace;
};

/// Steady state of the self-similar homogeneous equation by long-time
/// integration. The energy mode relaxes at a rate ~ kappa, so plain
/// integration stalls for alpha near 1; between segments the temperature is
/// jumped to its rate-informed extrapolation via an exact velocity rescale,
/// which removes the slow mode without leaving the integration path.
CoolingState cooling_state(double alpha, const CollisionTableau& tab,
                           const CoolingOptions& opts = {});

struct HaffFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double max_log_residual = 0.0;
};

/// Least-squares fit of log T against log(1 + c t). Requires >= 20 samples
/// spanning at least one decade of (1 + c t).
HaffFit haff_fit(std::span<const double> t, std::span<const double> T, double c);

struct Theta1Estimate {
  double extrapolated = 0.0;
  double closed_form = 0.0;
  bool monotone = true;
};

/// Extrapolation of (alpha, theta_alpha) samples to alpha = 1 by a
/// polynomial fit in (1 - alpha), cross-checked against the moment-balance
/// value 16 d^2 / (gamma_b a)^2.
Theta1Estimate theta1_estimate(std::span<const std::pair<double, double>> samples, int d);

/// Gaussian-closure balance temperature at finite alpha,
/// 64 d^2 / ((1+alpha)^2 (gamma_b a)^2); equals theta1 at alpha = 1.
double theta_balance(int d, double alpha);
double theta1_closed_form(int d);

}  // namespace granular
