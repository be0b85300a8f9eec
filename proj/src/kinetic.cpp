#include "granular/kinetic.hpp"

#include <fftw3.h>
#include <omp.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace granular {

double PhaseField::total_mass() const {
  double s = 0.0;
  for (double x : data) s += x;
  return s * lat->cell_weight() / static_cast<double>(cells());
}

Vec PhaseField::total_momentum() const {
  Vec p{0, 0, 0};
  const int d = lat->dim();
  const std::size_t n = lat->size();
  for (std::size_t c = 0; c < cells(); ++c) {
    const double* f = cell(c);
    for (std::size_t i = 0; i < n; ++i) {
      Vec v = lat->velocity(i);
      for (int a = 0; a < d; ++a) p[a] += v[a] * f[i];
    }
  }
  const double scale = lat->cell_weight() / static_cast<double>(cells());
  for (int a = 0; a < d; ++a) p[a] *= scale;
  return p;
}

double PhaseField::total_energy() const {
  double s = 0.0;
  const std::size_t n = lat->size();
  for (std::size_t c = 0; c < cells(); ++c) {
    const double* f = cell(c);
    for (std::size_t i = 0; i < n; ++i) s += lat->speed_sq()[i] * f[i];
  }
  return s * lat->cell_weight() / static_cast<double>(cells());
}

Advector::Advector(int nx, std::shared_ptr<const VelocityLattice> lat)
    : nx_(nx), lat_(std::move(lat)) {
  if (lat_->dim() != 2)
    throw std::invalid_argument("advector: the phase-space solver supports d = 2");
  buf_.resize(static_cast<std::size_t>(nx_) * nx_);
  auto* in = reinterpret_cast<fftw_complex*>(buf_.data());
  // FFTW_ESTIMATE keeps plans deterministic across runs
  plan_fwd_ = fftw_plan_dft_2d(nx_, nx_, in, in, FFTW_FORWARD, FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft_2d(nx_, nx_, in, in, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Advector::~Advector() {
  if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

void Advector::step(PhaseField& F, double dt) const {
  const std::size_t n = lat_->size();
  const std::size_t nc = F.cells();
  const double factor = dt / F.eps;
  const double two_pi = 2.0 * std::numbers::pi;
  const double norm = 1.0 / static_cast<double>(nc);
  for (std::size_t j = 0; j < n; ++j) {
    Vec v = lat_->velocity(j);
    if (v[0] == 0.0 && v[1] == 0.0) continue;
    for (std::size_t c = 0; c < nc; ++c) buf_[c] = F.data[c * n + j];
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    for (int k0 = 0; k0 < nx_; ++k0) {
      const int m0 = k0 <= nx_ / 2 ? k0 : k0 - nx_;
      for (int k1 = 0; k1 < nx_; ++k1) {
        const int m1 = k1 <= nx_ / 2 ? k1 : k1 - nx_;
        const double phase = -two_pi * factor * (m0 * v[0] + m1 * v[1]);
        buf_[static_cast<std::size_t>(k0) * nx_ + k1] *=
            std::complex<double>(std::cos(phase), std::sin(phase));
      }
    }
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    for (std::size_t c = 0; c < nc; ++c) F.data[c * n + j] = buf_[c].real() * norm;
  }
}

StepInfo collision_stage(PhaseField& F, double dt, const CollisionTableau& tab,
                         const StrangOptions& opts) {
  const std::size_t n = F.lat->size();
  const std::size_t nc = F.cells();
  const int nt = opts.threads > 0 ? opts.threads : omp_get_max_threads();
  std::vector<StepInfo> infos(nc);
  std::vector<std::string> errors(nc);
  StepOptions sopts = opts.step;
  sopts.collide.threads = 1;  // cells are the parallel axis
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::size_t c = 0; c < nc; ++c) {
    try {
      Distribution f(F.lat);
      std::copy(F.cell(c), F.cell(c) + n, f.f.begin());
      Distribution out = step_selfsim(f, dt, F.alpha, F.eps, tab, sopts, &infos[c]);
      std::copy(out.f.begin(), out.f.end(), F.cell(c));
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  }
  for (std::size_t c = 0; c < nc; ++c)
    if (!errors[c].empty())
      throw std::runtime_error("collision stage failed in cell " + std::to_string(c) + ": " +
                               errors[c]);
  StepInfo agg;
  for (const auto& li : infos) {
    agg.clipped_mass += li.clipped_mass;
    agg.skipped_flux_fraction = std::max(agg.skipped_flux_fraction, li.skipped_flux_fraction);
  }
  agg.clipped_mass /= static_cast<double>(nc);
  return agg;
}

StepInfo strang_step(PhaseField& F, double dt, const CollisionTableau& tab, const Advector& adv,
                     const StrangOptions& opts) {
  adv.step(F, 0.5 * dt);
  StepInfo info = collision_stage(F, dt, tab, opts);
  adv.step(F, 0.5 * dt);
  return info;
}

HydroFields hydro_moments(const PhaseField& F, const Distribution& G, double theta1) {
  if (!(F.eps > 0.0)) throw std::invalid_argument("hydro_moments: eps must be positive");
  const auto& lat = *F.lat;
  const int d = lat.dim();
  const std::size_t n = lat.size();
  const std::size_t nc = F.cells();
  HydroFields H;
  H.nx = F.nx;
  H.d = d;
  H.rho.assign(nc, 0.0);
  H.theta.assign(nc, 0.0);
  H.p.assign(nc, 0.0);
  H.u.assign(nc * d, 0.0);
  H.aflux.assign(nc * d * d, 0.0);
  H.bflux.assign(nc * d, 0.0);
  const double w = lat.cell_weight();
  const double inv_eps = 1.0 / F.eps;
  for (std::size_t c = 0; c < nc; ++c) {
    const double* f = F.cell(c);
    double m = 0.0, e = 0.0, th = 0.0;
    Vec mu{0, 0, 0}, bf{0, 0, 0};
    double af[3][3] = {{0}};
    for (std::size_t i = 0; i < n; ++i) {
      const double h = (f[i] - G.f[i]) * inv_eps;
      const double vsq = lat.speed_sq()[i];
      Vec v = lat.velocity(i);
      m += h;
      e += h * vsq;
      th += h * (vsq - (d + 2) * theta1);
      for (int a = 0; a < d; ++a) {
        mu[a] += h * v[a];
        bf[a] += h * 0.5 * (vsq - (d + 2) * theta1) * v[a];
        for (int b = 0; b < d; ++b) af[a][b] += h * (v[a] * v[b] - (a == b ? vsq / d : 0.0));
      }
    }
    H.rho[c] = w * m;
    H.p[c] = w * e / d;
    H.theta[c] = w * th / ((d + 2) * theta1 * theta1);
    for (int a = 0; a < d; ++a) {
      H.u[c * d + a] = w * mu[a] / theta1;
      H.bflux[c * d + a] = w * bf[a];
      for (int b = 0; b < d; ++b) H.aflux[c * d * d + a * d + b] = w * af[a][b];
    }
  }
  return H;
}

PhaseField init_well_prepared(std::shared_ptr<const VelocityLattice> lat, int nx, double eps,
                              double alpha, const Distribution& G, double theta1,
                              const std::function<double(double, double)>& rho0,
                              const std::function<void(double, double, double&, double&)>& u0,
                              const std::function<double(double, double)>& theta0) {
  PhaseField F(lat, nx, eps, alpha);
  const int d = lat->dim();
  const std::size_t n = lat->size();
  auto M = maxwellian(lat, 1.0, Vec{0, 0, 0}, theta1).f;
  for (int cx = 0; cx < nx; ++cx) {
    const double x = (cx + 0.5) / nx;
    for (int cy = 0; cy < nx; ++cy) {
      const double y = (cy + 0.5) / nx;
      double ux = 0.0, uy = 0.0;
      u0(x, y, ux, uy);
      const double r = rho0(x, y), th = theta0(x, y);
      double* f = F.cell(static_cast<std::size_t>(cx) * nx + cy);
      for (std::size_t i = 0; i < n; ++i) {
        Vec v = lat->velocity(i);
        const double h =
            (r + ux * v[0] + uy * v[1] + 0.5 * th * (lat->speed_sq()[i] - d * theta1)) * M.f[i];
        f[i] = G.f[i] + eps * h;
        if (f[i] < 0.0)
          throw std::runtime_error("init_well_prepared: negative phase-space density; "
                                   "reduce the perturbation amplitude or eps");
      }
    }
  }
  return F;
}

namespace {

// mean-zero spectral divergence norm over the torus
double div_norm(const std::vector<double>& u, int nx, int d) {
  if (d != 2) throw std::invalid_argument("boussinesq_residuals: d = 2 only");
  const std::size_t nc = static_cast<std::size_t>(nx) * nx;
  std::vector<std::complex<double>> ux(nc), uy(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    ux[c] = u[c * 2];
    uy[c] = u[c * 2 + 1];
  }
  auto* px = reinterpret_cast<fftw_complex*>(ux.data());
  auto* py = reinterpret_cast<fftw_complex*>(uy.data());
  fftw_plan fx = fftw_plan_dft_2d(nx, nx, px, px, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan fy = fftw_plan_dft_2d(nx, nx, py, py, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(fx);
  fftw_execute(fy);
  fftw_destroy_plan(fx);
  fftw_destroy_plan(fy);
  const double two_pi = 2.0 * std::numbers::pi;
  double acc = 0.0;
  for (int k0 = 0; k0 < nx; ++k0) {
    const int m0 = k0 <= nx / 2 ? k0 : k0 - nx;
    for (int k1 = 0; k1 < nx; ++k1) {
      const int m1 = k1 <= nx / 2 ? k1 : k1 - nx;
      const std::complex<double> div =
          std::complex<double>(0, two_pi * m0) * ux[static_cast<std::size_t>(k0) * nx + k1] +
          std::complex<double>(0, two_pi * m1) * uy[static_cast<std::size_t>(k0) * nx + k1];
      acc += std::norm(div);
    }
  }
  return std::sqrt(acc) / static_cast<double>(nc);
}

}  // namespace

BoussinesqResiduals boussinesq_residuals(const HydroFields& H, double theta1) {
  BoussinesqResiduals r;
  r.div_u = div_norm(H.u, H.nx, H.d);
  const std::size_t nc = H.rho.size();
  double mean = 0.0;
  for (std::size_t c = 0; c < nc; ++c) mean += H.rho[c] + theta1 * H.theta[c];
  mean /= static_cast<double>(nc);
  double acc = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    const double x = H.rho[c] + theta1 * H.theta[c] - mean;
    acc += x * x;
  }
  r.boussinesq = std::sqrt(acc / static_cast<double>(nc));
  return r;
}

RelaxationResult relaxation_experiment(const Distribution& G, double eps,
                                       const CollisionTableau& tab, double amplitude,
                                       double horizon_tau, const StepOptions& opts) {
  const auto lat = G.lat;
  const int d = lat->dim();
  const double alpha = tab.alpha();
  const double theta_G = temperature(G);

  // energy-mode seed: G plus a small mass/momentum-neutral energy bump
  Distribution f(lat);
  for (std::size_t i = 0; i < f.size(); ++i)
    f.f[i] = G.f[i] * (1.0 + amplitude * (lat->speed_sq()[i] / (d * theta_G) - 1.0));
  // positivity of the seed
  for (auto& x : f.f) x = std::max(x, 0.0);

  RelaxationResult res;
  const double dt_tau = stable_dt(f, 1.0 - alpha, 1.0);
  const int n_steps = static_cast<int>(std::ceil(horizon_tau / dt_tau));
  const int sample_every = std::max(1, n_steps / 400);
  Distribution diff(lat);
  for (int s = 0; s <= n_steps; ++s) {
    if (s % sample_every == 0) {
      for (std::size_t i = 0; i < f.size(); ++i) diff.f[i] = f.f[i] - G.f[i];
      res.t.push_back(s * dt_tau * eps * eps);  // physical clock of the rescaled equation
      res.dist.push_back(norm_l1(diff));
    }
    if (s < n_steps) f = step_selfsim(f, dt_tau, alpha, 1.0, tab, opts);
  }

  // fit the tail (second half), require monotone decay there
  const std::size_t m = res.t.size();
  const std::size_t lo = m / 2;
  res.monotone_tail = true;
  for (std::size_t k = lo + 1; k < m; ++k)
    if (res.dist[k] > res.dist[k - 1] * (1.0 + 1e-9)) res.monotone_tail = false;
  if (!res.monotone_tail)
    throw std::runtime_error("relaxation_experiment: non-monotone tail, fit rejected");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(m - lo);
  for (std::size_t k = lo; k < m; ++k) {
    const double x = res.t[k], y = std::log(res.dist[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy * sxx - sx * sxy) / (n * sxx - sx * sx);
  res.rate = -slope;
  res.rate_tau = -slope * eps * eps;
  for (std::size_t k = lo; k < m; ++k) {
    const double r = std::log(res.dist[k]) - (icpt + slope * res.t[k]);
    res.fit_rms += r * r;
  }
  res.fit_rms = std::sqrt(res.fit_rms / n);
  return res;
}

}  // namespace granular
