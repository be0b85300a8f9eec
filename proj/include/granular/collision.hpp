#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "granular/lattice.hpp"

namespace granular {

/// alpha(eps) = 1 - lambda0 * eps^2 (the o(eps^2) term is taken to be zero),
/// clamped to (0, 1]. kappa = 1 - alpha, c_eps = (1 - alpha)/eps^2.
struct RestitutionLaw {
  double lambda0 = 0.0;

  double alpha(double eps) const {
    double a = 1.0 - lambda0 * eps * eps;
    return a < 1e-6 ? 1e-6 : (a > 1.0 ? 1.0 : a);
  }
  double kappa(double eps) const { return 1.0 - alpha(eps); }
  double c_eps(double eps) const { return (1.0 - alpha(eps)) / (eps * eps); }
  double lambda_bar(double eps) const { return c_eps(eps); }
};

// microscopic transforms
std::pair<Vec, Vec> post_collision_sigma(const Vec& v, const Vec& vs, const Vec& sigma,
                                         double alpha, int d);
std::pair<Vec, Vec> post_collision_normal(const Vec& v, const Vec& vs, const Vec& n,
                                          double alpha, int d);
// kinetic energy change of the pair under the sigma-transform
double energy_loss_sigma(const Vec& v, const Vec& vs, const Vec& sigma, double alpha, int d);
// angular kernel in the impact-direction parametrization, isotropic base kernel
double angular_kernel_n(double x, int d);

// normalized angular dissipation factor; exactly 1/2 for the isotropic kernel
inline constexpr double kGammaB = 0.5;
double gamma_b_quadrature(const SphereQuadrature& q, const Vec& uhat);

/// Deposition stencils for the discrete bilinear collision operator.
///
/// Post-collisional velocities are deposited onto the 3^d lattice nodes
/// around the target with tensor-quadratic weights, which reproduce node
/// sums of 1, v and v (x) v exactly. Mass and momentum of the operator
/// output vanish identically and the pair energy balance matches the
/// microscopic loss formula to rounding, so the dissipation identity holds
/// at machine precision instead of O(dv) (weights are not sign-definite;
/// per-axis weights lie in [-1/8, 1]).
///
/// Pairs whose stencil would extend outside the hull are skipped entirely
/// (gain and loss), keeping conservation exact; the skipped flux fraction
/// is reported. Displacements depend on velocity differences only, so the
/// table is indexed by difference vector and direction. For d=3 the table
/// would not fit in memory and stencils are computed on the fly.
class CollisionTableau {
 public:
  CollisionTableau(std::shared_ptr<const VelocityLattice> lat, SphereQuadrature quad,
                   double alpha);

  const VelocityLattice& lattice() const { return *lat_; }
  std::shared_ptr<const VelocityLattice> lattice_ptr() const { return lat_; }
  const SphereQuadrature& quadrature() const { return quad_; }
  double alpha() const { return alpha_; }

  void save(const std::string& path) const;
  static CollisionTableau load(const std::string& path,
                               std::shared_ptr<const VelocityLattice> lat);

  struct Entry {            // d=2 precomputed stencil pair for one (k, m)
    std::int32_t foff_p;    // flat offset of the v' stencil corner from node i
    std::int32_t foff_q;    // flat offset of the v*' stencil corner from node j
    std::int16_t corner_p[2], corner_q[2];  // per-axis corner offsets (bounds test)
    double wp[9], wq[9];
    double swp, swq;        // realized weight sums (loss matching)
  };

  // internal layout, used by collide()
  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<double>& speed_table() const { return uabs_; }
  std::size_t diff_index(const std::array<int, 3>& ci, const std::array<int, 3>& cj) const {
    std::size_t idx = 0;
    for (int a = 0; a < d_; ++a)
      idx = idx * (2 * N_ - 1) + static_cast<std::size_t>(ci[a] - cj[a] + N_ - 1);
    return idx;
  }
  int dim() const { return d_; }

 private:
  std::shared_ptr<const VelocityLattice> lat_;
  SphereQuadrature quad_;
  double alpha_;
  int d_, N_;
  std::vector<double> uabs_;    // |v_i - v_j| per difference index
  std::vector<Entry> entries_;  // d=2 only: diff index * M + m

  void build_tables();
  friend struct CollideKernel;
};

struct CollideOptions {
  double support_cut = 1e-14;  // drop nodes with |f| below cut * max|f|
  int threads = 0;             // 0: use the OpenMP default
};

struct CollideResult {
  double skipped_flux_fraction = 0.0;  // off-hull pair flux / total pair flux
  double total_flux = 0.0;
};

/// Discrete bilinear collision operator. The antipodal direction set makes
/// the form symmetric in (f, g), so this evaluates both Q(g, f) and the
/// symmetrized operator at once. Parallel over node chunks with private
/// accumulators merged in fixed order; reruns at a fixed thread count are
/// bit-identical.
CollideResult collide(const Distribution& f, const Distribution& g,
                      const CollisionTableau& tab, Distribution& out,
                      const CollideOptions& opts = {});

Distribution collide(const Distribution& f, const Distribution& g,
                     const CollisionTableau& tab, const CollideOptions& opts = {});

/// (gamma_b / 4) * w^2 * sum_{ij} f_i g_j |v_i - v_j|^3
double dissipation(const Distribution& f, const Distribution& g);

}  // namespace granular
