#include "granular/spectrum.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace granular {

Eigen::MatrixXd drift_matrix(const VelocityLattice& lat) {
  const int d = lat.dim();
  const int N = lat.nodes_per_axis();
  const double inv2dv = 0.5 / lat.spacing();
  const auto n = static_cast<Eigen::Index>(lat.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);

  std::size_t stride[3] = {0, 0, 0};
  stride[d - 1] = 1;
  for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * N;

  for (std::size_t r = 0; r < lat.size(); ++r) {
    auto c = lat.decode(r);
    for (int a = 0; a < d; ++a) {
      const int ia = c[a];
      // flux difference (F_{+} - F_{-})/dv with zero hull flux
      if (ia < N - 1) {
        D(r, r + stride[a]) += lat.axis_coord(ia + 1) * inv2dv;
        D(r, r) += lat.axis_coord(ia) * inv2dv;
      }
      if (ia > 0) {
        D(r, r) -= lat.axis_coord(ia) * inv2dv;
        D(r, r - stride[a]) -= lat.axis_coord(ia - 1) * inv2dv;
      }
    }
  }
  return D;
}

LinearOperatorMatrix assemble_linearized(const Distribution& G, double alpha, double kappa,
                                         const CollisionTableau& tab, int threads,
                                         double support_cut) {
  if (std::abs(alpha - tab.alpha()) > 1e-14)
    throw std::invalid_argument("assemble_linearized: alpha does not match the tableau");
  if (G.lat->size() != tab.lattice().size())
    throw std::invalid_argument("assemble_linearized: G is not on the tableau lattice");
  const auto n = static_cast<Eigen::Index>(G.size());
  LinearOperatorMatrix L;
  L.lat = G.lat;
  L.alpha = alpha;
  L.kappa = kappa;
  L.A.resize(n, n);

  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
  for (Eigen::Index j = 0; j < n; ++j) {
    Distribution e(G.lat);
    e.f[j] = 1.0;
    CollideOptions copts;
    copts.support_cut = support_cut;
    copts.threads = 1;
    Distribution col = collide(G, e, tab, copts);
    for (Eigen::Index r = 0; r < n; ++r) L.A(r, j) = 2.0 * col.f[r];
  }
  if (kappa != 0.0) L.A.noalias() -= kappa * drift_matrix(*G.lat);
  return L;
}

SpectralReport spectrum_near_zero(const LinearOperatorMatrix& L, double radius,
                                  double residual_tol) {
  if (!(radius > 0.0)) throw std::invalid_argument("spectrum_near_zero: radius must be positive");
  SpectralReport rep;
  rep.radius = radius;
  rep.alpha = L.alpha;
  rep.kappa = L.kappa;
  const int d = L.lat->dim();

  Eigen::EigenSolver<Eigen::MatrixXd> es(L.A);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectrum_near_zero: dense eigensolver failed to converge");
  const auto& vals = es.eigenvalues();
  for (Eigen::Index k = 0; k < vals.size(); ++k) {
    if (std::abs(vals[k]) > radius) continue;
    EigenMode m;
    m.lambda = vals[k];
    m.vec = es.eigenvectors().col(k);
    m.residual = (L.A.cast<std::complex<double>>() * m.vec - m.lambda * m.vec).norm() / m.vec.norm();
    rep.modes.push_back(std::move(m));
  }
  std::sort(rep.modes.begin(), rep.modes.end(),
            [](const EigenMode& a, const EigenMode& b) { return a.lambda.real() > b.lambda.real(); });

  for (const auto& m : rep.modes)
    if (m.residual > residual_tol)
      rep.flags += "residual certificate failed at lambda=" + std::to_string(m.lambda.real()) + "; ";

  const double kappa = L.kappa;
  if (kappa > 0.0) {
    const double tol = 0.25 * kappa;
    double zmax = 0.0;
    double mu_best = 0.0;
    for (int k = 0; k < static_cast<int>(rep.modes.size()); ++k) {
      const auto& m = rep.modes[k];
      const double re = m.lambda.real(), im = std::abs(m.lambda.imag());
      if (std::abs(m.lambda) <= tol) {
        ++rep.n_zero;
        zmax = std::max(zmax, std::abs(m.lambda));
      } else if (std::abs(m.lambda - kappa) <= tol) {
        ++rep.n_kappa;
        rep.kappa_rel_err = std::max(rep.kappa_rel_err, std::abs(m.lambda - kappa) / kappa);
      } else if (re < 0.0 && im <= 0.25 * std::abs(re)) {
        if (!rep.energy_found || re > -mu_best) {
          rep.energy_found = true;
          mu_best = -re;
          rep.energy_index = k;
        }
      } else {
        rep.flags += "unclassified eigenvalue " + std::to_string(re) + "+" +
                     std::to_string(m.lambda.imag()) + "i; ";
      }
    }
    rep.mu = mu_best;
    rep.zero_cluster_width = zmax;
    rep.counts_expected = static_cast<int>(rep.modes.size()) == d + 2 && rep.n_zero == 1 &&
                          rep.n_kappa == d && rep.energy_found;
  } else {
    // elastic: d+2 cluster at zero
    double zmax = 0.0;
    for (const auto& m : rep.modes) {
      if (std::abs(m.lambda) <= 5e-3) {
        ++rep.n_zero;
        zmax = std::max(zmax, std::abs(m.lambda));
      }
    }
    rep.zero_cluster_width = zmax;
    rep.counts_expected =
        static_cast<int>(rep.modes.size()) == d + 2 && rep.n_zero == d + 2;
  }
  if (static_cast<int>(rep.modes.size()) != d + 2)
    rep.flags += "unexpected eigenvalue count in disk: " + std::to_string(rep.modes.size()) +
                 " (expected " + std::to_string(d + 2) + "); ";
  return rep;
}

EnergyEigenfunction energy_eigenfunction(const SpectralReport& rep,
                                         std::shared_ptr<const VelocityLattice> lat,
                                         double theta1) {
  if (!rep.energy_found || rep.energy_index < 0)
    throw std::invalid_argument("energy_eigenfunction: no isolated energy mode in the report");
  const auto& mode = rep.modes[rep.energy_index];
  EnergyEigenfunction out;
  out.phi = Distribution(lat);
  const std::size_t n = lat->size();
  for (std::size_t i = 0; i < n; ++i) out.phi.f[i] = mode.vec[static_cast<Eigen::Index>(i)].real();

  // normalize in L1(<v>^2)
  double nrm = norm_l1_w2(out.phi);
  if (nrm <= 0.0) throw std::runtime_error("energy_eigenfunction: zero eigenvector");
  for (auto& x : out.phi.f) x /= nrm;

  // sign convention: negative at v = 0
  std::array<int, 3> c0{0, 0, 0};
  for (int a = 0; a < lat->dim(); ++a) c0[a] = (lat->nodes_per_axis() - 1) / 2;
  const double at0 = out.phi.f[lat->encode(c0)];
  double mx = 0.0;
  for (double x : out.phi.f) mx = std::max(mx, std::abs(x));
  if (std::abs(at0) < 1e-12 * mx) {
    out.sign_fixed = false;
  } else if (at0 > 0.0) {
    for (auto& x : out.phi.f) x = -x;
  }

  // angle to the limit profile (|v|^2 - d theta1) M
  const int d = lat->dim();
  auto M = maxwellian(lat, 1.0, Vec{0, 0, 0}, theta1).f;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ref = (lat->speed_sq()[i] - d * theta1) * M.f[i];
    dot += out.phi.f[i] * ref;
    na += out.phi.f[i] * out.phi.f[i];
    nb += ref * ref;
  }
  const double cosang = std::abs(dot) / std::sqrt(na * nb);
  out.angle_to_limit = std::acos(std::min(1.0, cosang));
  return out;
}

Distribution kernel_projection_pi0(const Distribution& h, double theta1) {
  if (!(theta1 > 0.0)) throw std::invalid_argument("kernel_projection_pi0: theta1 must be positive");
  const auto lat = h.lat;
  const int d = lat->dim();
  const std::size_t n = lat->size();
  auto M = maxwellian(lat, 1.0, Vec{0, 0, 0}, theta1).f;

  const double inv_sqrt_theta = 1.0 / std::sqrt(theta1);
  const double energy_norm = 1.0 / (theta1 * std::sqrt(2.0 * d));
  // psi_k evaluated on nodes, k = 0..d+1
  std::vector<std::vector<double>> psi(d + 2, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Vec v = lat->velocity(i);
    psi[0][i] = 1.0;
    for (int a = 0; a < d; ++a) psi[1 + a][i] = v[a] * inv_sqrt_theta;
    psi[d + 1][i] = (lat->speed_sq()[i] - d * theta1) * energy_norm;
  }
  Distribution out(lat);
  const double w = lat->cell_weight();
  for (int k = 0; k < d + 2; ++k) {
    double coef = 0.0;
    for (std::size_t i = 0; i < n; ++i) coef += h.f[i] * psi[k][i];
    coef *= w;
    for (std::size_t i = 0; i < n; ++i) out.f[i] += coef * psi[k][i] * M.f[i];
  }
  return out;
}

}  // namespace granular
