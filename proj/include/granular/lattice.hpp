#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace granular {

using Vec = std::array<double, 3>;  // padded to 3; component d..2 unused for d=2

/// Uniform Cartesian velocity grid on [-R, R]^d with N nodes per axis.
/// N is required odd so that v = 0 is a node; the node set is closed
/// under v -> -v. Node ordering is row-major by axis (axis 0 slowest).
class VelocityLattice {
 public:
  VelocityLattice(int d, int N, double R);

  int dim() const { return d_; }
  int nodes_per_axis() const { return N_; }
  double extent() const { return R_; }
  double spacing() const { return dv_; }
  double cell_weight() const { return w_; }  // dv^d
  std::size_t size() const { return size_; }

  double axis_coord(int i) const { return coords_[i]; }

  // integer coords of node, row-major decode
  std::array<int, 3> decode(std::size_t idx) const {
    std::array<int, 3> c{0, 0, 0};
    for (int a = d_ - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % N_);
      idx /= N_;
    }
    return c;
  }
  std::size_t encode(const std::array<int, 3>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < d_; ++a) idx = idx * N_ + c[a];
    return idx;
  }

  Vec velocity(std::size_t idx) const {
    auto c = decode(idx);
    Vec v{0.0, 0.0, 0.0};
    for (int a = 0; a < d_; ++a) v[a] = coords_[c[a]];
    return v;
  }

  std::size_t mirror(std::size_t idx) const {  // index of -v
    auto c = decode(idx);
    for (int a = 0; a < d_; ++a) c[a] = N_ - 1 - c[a];
    return encode(c);
  }

  const std::vector<double>& speed_sq() const { return vsq_; }

 private:
  int d_, N_;
  double R_, dv_, w_;
  std::size_t size_;
  std::vector<double> coords_;
  std::vector<double> vsq_;  // |v|^2 per node
};

/// Quadrature on S^{d-1} with normalized weights (sum = 1), antipodally
/// symmetric so that sum_m w_m sigma_m = 0.
struct SphereQuadrature {
  int d = 0;
  std::vector<Vec> dirs;
  std::vector<double> weights;
  std::size_t size() const { return dirs.size(); }
};

SphereQuadrature build_sphere_quadrature(int d, int M);

/// Density values on a velocity lattice.
struct Distribution {
  std::shared_ptr<const VelocityLattice> lat;
  std::vector<double> f;

  explicit Distribution(std::shared_ptr<const VelocityLattice> l)
      : lat(std::move(l)), f(lat->size(), 0.0) {}
  Distribution() = default;

  std::size_t size() const { return f.size(); }
  double& operator[](std::size_t i) { return f[i]; }
  double operator[](std::size_t i) const { return f[i]; }
};

std::shared_ptr<const VelocityLattice> build_lattice(int d, int N, double R);

/// w * sum_i psi(i) f_i, fixed row-major summation order.
double moment(const Distribution& f, const std::function<double(std::size_t)>& psi);
double moment(const Distribution& f, std::span<const double> psi);

double mass(const Distribution& f);
Vec momentum(const Distribution& f);
double energy(const Distribution& f);       // <|v|^2 f>
double temperature(const Distribution& f);  // <|v|^2 f> / (d * mass)

struct MaxwellianResult {
  Distribution f;
  double mass_defect = 0.0;   // |rho - discrete mass|
  bool tail_contained = true; // ||u|| + 4 sqrt(theta) <= R
};

MaxwellianResult maxwellian(std::shared_ptr<const VelocityLattice> lat, double rho,
                            const Vec& u, double theta);

// discrete L1 norms; weight <v>^2 = 1 + |v|^2 for the weighted variant
double norm_l1(const Distribution& f);
double norm_l1_w2(const Distribution& f);

}  // namespace granular
