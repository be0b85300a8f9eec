#include "granular/lattice.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace granular {

VelocityLattice::VelocityLattice(int d, int N, double R) : d_(d), N_(N), R_(R) {
  if (d != 2 && d != 3) throw std::invalid_argument("lattice: dimension must be 2 or 3");
  if (N % 2 == 0) throw std::invalid_argument("lattice: N must be odd so v=0 is a node");
  if (N < 9) throw std::invalid_argument("lattice: N must be >= 9");
  if (!(R > 0.0)) throw std::invalid_argument("lattice: extent R must be positive");
  dv_ = 2.0 * R / (N - 1);
  w_ = std::pow(dv_, d);
  size_ = 1;
  for (int a = 0; a < d; ++a) size_ *= static_cast<std::size_t>(N);
  coords_.resize(N);
  for (int i = 0; i < N; ++i) coords_[i] = -R + i * dv_;
  coords_[(N - 1) / 2] = 0.0;  // pin the center node exactly
  vsq_.resize(size_);
  for (std::size_t idx = 0; idx < size_; ++idx) {
    auto c = decode(idx);
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += coords_[c[a]] * coords_[c[a]];
    vsq_[idx] = s;
  }
}

std::shared_ptr<const VelocityLattice> build_lattice(int d, int N, double R) {
  return std::make_shared<const VelocityLattice>(d, N, R);
}

namespace {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p0 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace

SphereQuadrature build_sphere_quadrature(int d, int M) {
  if (d != 2 && d != 3) throw std::invalid_argument("sphere quadrature: dimension must be 2 or 3");
  if (M < 4) throw std::invalid_argument("sphere quadrature: M too small");
  if (M % 2 != 0) throw std::invalid_argument("sphere quadrature: M must be even (antipodal symmetry)");
  SphereQuadrature q;
  q.d = d;
  if (d == 2) {
    q.dirs.resize(M);
    q.weights.assign(M, 1.0 / M);
    for (int m = 0; m < M; ++m) {
      double phi = 2.0 * std::numbers::pi * m / M;
      q.dirs[m] = Vec{std::cos(phi), std::sin(phi), 0.0};
    }
    return q;
  }
  if (M == 6) {
    // octahedron vertices, exact through degree 3
    for (int a = 0; a < 3; ++a)
      for (int s : {-1, 1}) {
        Vec v{0, 0, 0};
        v[a] = static_cast<double>(s);
        q.dirs.push_back(v);
        q.weights.push_back(1.0 / 6.0);
      }
    return q;
  }
  if (M == 14) {
    // octahedron + cube vertices, weights for degree-5 exactness
    for (int a = 0; a < 3; ++a)
      for (int s : {-1, 1}) {
        Vec v{0, 0, 0};
        v[a] = static_cast<double>(s);
        q.dirs.push_back(v);
        q.weights.push_back(1.0 / 15.0);
      }
    const double c = 1.0 / std::sqrt(3.0);
    for (int sx : {-1, 1})
      for (int sy : {-1, 1})
        for (int sz : {-1, 1}) {
          q.dirs.push_back(Vec{sx * c, sy * c, sz * c});
          q.weights.push_back(3.0 / 40.0);
        }
    return q;
  }
  // product rule: Gauss-Legendre in cos(theta) x equispaced phi.
  // Antipodal when n_phi is even. Pick the most isotropic factorization.
  int best_nz = 0, best_nphi = 0;
  for (int nz = static_cast<int>(std::sqrt(static_cast<double>(M) / 2.0)) + 1; nz >= 2; --nz) {
    if (M % nz != 0) continue;
    int nphi = M / nz;
    if (nphi % 2 != 0 || nphi < 4) continue;
    best_nz = nz;
    best_nphi = nphi;
    break;
  }
  if (best_nz == 0)
    throw std::invalid_argument(
        "sphere quadrature: unsupported direction count for d=3 "
        "(use 6, 14, or M = nz*nphi with nphi even >= 4, nz >= 2)");
  std::vector<double> gz, gw;
  gauss_legendre(best_nz, gz, gw);
  for (int iz = 0; iz < best_nz; ++iz) {
    double z = gz[iz];
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int ip = 0; ip < best_nphi; ++ip) {
      double phi = 2.0 * std::numbers::pi * ip / best_nphi;
      q.dirs.push_back(Vec{r * std::cos(phi), r * std::sin(phi), z});
      q.weights.push_back(gw[iz] / (2.0 * best_nphi));
    }
  }
  return q;
}

double moment(const Distribution& f, const std::function<double(std::size_t)>& psi) {
  double s = 0.0;
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i) s += psi(i) * f.f[i];
  return f.lat->cell_weight() * s;
}

double moment(const Distribution& f, std::span<const double> psi) {
  double s = 0.0;
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i) s += psi[i] * f.f[i];
  return f.lat->cell_weight() * s;
}

double mass(const Distribution& f) {
  double s = 0.0;
  for (double x : f.f) s += x;
  return f.lat->cell_weight() * s;
}

Vec momentum(const Distribution& f) {
  const auto& lat = *f.lat;
  Vec p{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) {
    Vec v = lat.velocity(i);
    for (int a = 0; a < lat.dim(); ++a) p[a] += v[a] * f.f[i];
  }
  for (int a = 0; a < lat.dim(); ++a) p[a] *= lat.cell_weight();
  return p;
}

double energy(const Distribution& f) {
  const auto& vsq = f.lat->speed_sq();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += vsq[i] * f.f[i];
  return f.lat->cell_weight() * s;
}

double temperature(const Distribution& f) {
  double m = mass(f);
  return energy(f) / (f.lat->dim() * m);
}

MaxwellianResult maxwellian(std::shared_ptr<const VelocityLattice> lat, double rho,
                            const Vec& u, double theta) {
  if (!(rho > 0.0) || !(theta > 0.0))
    throw std::invalid_argument("maxwellian: rho and theta must be positive");
  MaxwellianResult r;
  r.f = Distribution(lat);
  const int d = lat->dim();
  double unorm = 0.0;
  for (int a = 0; a < d; ++a) unorm += u[a] * u[a];
  unorm = std::sqrt(unorm);
  r.tail_contained = unorm + 4.0 * std::sqrt(theta) <= lat->extent();
  const double pref = rho * std::pow(2.0 * std::numbers::pi * theta, -0.5 * d);
  for (std::size_t i = 0; i < lat->size(); ++i) {
    Vec v = lat->velocity(i);
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += (v[a] - u[a]) * (v[a] - u[a]);
    r.f.f[i] = pref * std::exp(-0.5 * s / theta);
  }
  r.mass_defect = std::abs(rho - mass(r.f));
  return r;
}

double norm_l1(const Distribution& f) {
  double s = 0.0;
  for (double x : f.f) s += std::abs(x);
  return f.lat->cell_weight() * s;
}

double norm_l1_w2(const Distribution& f) {
  const auto& vsq = f.lat->speed_sq();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(f.f[i]) * (1.0 + vsq[i]);
  return f.lat->cell_weight() * s;
}

}  // namespace granular
