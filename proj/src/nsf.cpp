#include "granular/nsf.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace granular {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline int freq(int k, int nx) { return k <= nx / 2 ? k : k - nx; }
}  // namespace

NsfSolver::NsfSolver(int nx, const TransportReport& coeffs, double lambda0)
    : nx_(nx), th1_(coeffs.theta1), nu_(coeffs.nu), gamma_(coeffs.gamma), cbar_(coeffs.c_bar),
      lambda0_(lambda0) {
  if (coeffs.d != 2) throw std::invalid_argument("nsf: the fluid solver supports d = 2");
  if (nx_ < 8 || nx_ % 2 != 0) throw std::invalid_argument("nsf: nx must be even and >= 8");
  buf_.resize(static_cast<std::size_t>(nx_) * nx_);
  auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
  plan_fwd_ = fftw_plan_dft_2d(nx_, nx_, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft_2d(nx_, nx_, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
}

NsfSolver::~NsfSolver() {
  if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

double NsfSolver::theta_forcing_rate() const {
  return lambda0_ * cbar_ * std::sqrt(th1_) / (2.0 * (2 + 2));
}

FluidState NsfSolver::init(const std::function<void(double, double, double&, double&)>& u0,
                           const std::function<double(double, double)>& theta0) const {
  FluidState s;
  s.nx = nx_;
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  s.uhat.assign(2 * nc, {0.0, 0.0});
  s.that.assign(nc, {0.0, 0.0});
  const double norm = 1.0 / static_cast<double>(nc);
  for (int comp = 0; comp < 2; ++comp) {
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < nx_; ++j) {
        double ux, uy;
        u0((i + 0.5) / nx_, (j + 0.5) / nx_, ux, uy);
        buf_[static_cast<std::size_t>(i) * nx_ + j] = comp == 0 ? ux : uy;
      }
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    for (std::size_t c = 0; c < nc; ++c) s.uhat[comp * nc + c] = buf_[c] * norm;
  }
  for (int i = 0; i < nx_; ++i)
    for (int j = 0; j < nx_; ++j)
      buf_[static_cast<std::size_t>(i) * nx_ + j] = theta0((i + 0.5) / nx_, (j + 0.5) / nx_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  for (std::size_t c = 0; c < nc; ++c) s.that[c] = buf_[c] * norm;
  // cell-centered sampling carries a phase relative to node-centered modes;
  // undo it so spectral coefficients are exact for band-limited data
  const std::complex<double> I(0.0, 1.0);
  for (int k0 = 0; k0 < nx_; ++k0)
    for (int k1 = 0; k1 < nx_; ++k1) {
      const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
      const double ph = kTwoPi * 0.5 * (freq(k0, nx_) + freq(k1, nx_)) / nx_;
      const std::complex<double> corr = std::exp(-I * ph);
      s.uhat[c] *= corr;
      s.uhat[nc + c] *= corr;
      s.that[c] *= corr;
    }
  leray_project(s);
  s.that[0] = 0.0;
  dealias(s.uhat, 2);
  dealias(s.that, 1);
  return s;
}

void NsfSolver::leray_project(FluidState& s) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  for (int k0 = 0; k0 < nx_; ++k0) {
    const double kx = kTwoPi * freq(k0, nx_);
    for (int k1 = 0; k1 < nx_; ++k1) {
      const double ky = kTwoPi * freq(k1, nx_);
      const double k2 = kx * kx + ky * ky;
      const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
      if (k2 == 0.0) {
        continue;  // mean flow is already divergence-free
      }
      const std::complex<double> kd = (kx * s.uhat[c] + ky * s.uhat[nc + c]) / k2;
      s.uhat[c] -= kx * kd;
      s.uhat[nc + c] -= ky * kd;
    }
  }
}

void NsfSolver::dealias(std::vector<std::complex<double>>& field, int comps) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  const int kmax = nx_ / 3;
  for (int k0 = 0; k0 < nx_; ++k0)
    for (int k1 = 0; k1 < nx_; ++k1) {
      if (std::abs(freq(k0, nx_)) <= kmax && std::abs(freq(k1, nx_)) <= kmax) continue;
      for (int q = 0; q < comps; ++q)
        field[q * nc + static_cast<std::size_t>(k0) * nx_ + k1] = 0.0;
    }
}

void NsfSolver::nonlinear(const FluidState& s, std::vector<std::complex<double>>& nu_out,
                          std::vector<std::complex<double>>& nth_out) const {
  // convective terms -theta1 (u . grad) u and -theta1 u . grad theta,
  // products in physical space on the 2/3-truncated fields
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  nu_out.assign(2 * nc, {0.0, 0.0});
  nth_out.assign(nc, {0.0, 0.0});

  auto to_phys = [&](const std::complex<double>* src, std::vector<double>& out) {
    std::copy(src, src + nc, buf_.begin());
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    out.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) out[c] = buf_[c].real();
  };

  std::vector<std::complex<double>> grad(nc);
  auto deriv = [&](const std::complex<double>* src, int axis, std::vector<double>& out) {
    for (int k0 = 0; k0 < nx_; ++k0)
      for (int k1 = 0; k1 < nx_; ++k1) {
        const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
        const double k = kTwoPi * freq(axis == 0 ? k0 : k1, nx_);
        grad[c] = std::complex<double>(0.0, k) * src[c];
      }
    to_phys(grad.data(), out);
  };

  std::vector<double> ux, uy, dfdx, dfdy;
  to_phys(s.uhat.data(), ux);
  to_phys(s.uhat.data() + nc, uy);

  auto back_to_modes = [&](const std::vector<double>& phys, std::complex<double>* dst) {
    const double norm = 1.0 / static_cast<double>(nc);
    for (std::size_t c = 0; c < nc; ++c) buf_[c] = phys[c];
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    for (std::size_t c = 0; c < nc; ++c) dst[c] = buf_[c] * norm;
  };

  std::vector<double> prod(nc);
  for (int comp = 0; comp < 2; ++comp) {
    deriv(s.uhat.data() + comp * nc, 0, dfdx);
    deriv(s.uhat.data() + comp * nc, 1, dfdy);
    for (std::size_t c = 0; c < nc; ++c) prod[c] = -th1_ * (ux[c] * dfdx[c] + uy[c] * dfdy[c]);
    back_to_modes(prod, nu_out.data() + comp * nc);
  }
  deriv(s.that.data(), 0, dfdx);
  deriv(s.that.data(), 1, dfdy);
  for (std::size_t c = 0; c < nc; ++c) prod[c] = -th1_ * (ux[c] * dfdx[c] + uy[c] * dfdy[c]);
  back_to_modes(prod, nth_out.data());

  dealias(nu_out, 2);
  dealias(nth_out, 1);
}

void NsfSolver::step(FluidState& s, double dt) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  const double fth = theta_forcing_rate();

  auto integrating_factors = [&](double h, std::vector<double>& eu, std::vector<double>& eth) {
    eu.resize(nc);
    eth.resize(nc);
    for (int k0 = 0; k0 < nx_; ++k0) {
      const double kx = kTwoPi * freq(k0, nx_);
      for (int k1 = 0; k1 < nx_; ++k1) {
        const double ky = kTwoPi * freq(k1, nx_);
        const double k2 = kx * kx + ky * ky;
        const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
        eu[c] = std::exp((lambda0_ - nu_ / th1_ * k2) * h);
        eth[c] = std::exp((fth - gamma_ / (th1_ * th1_) * k2) * h);
      }
    }
  };
  std::vector<double> eu, eth;
  integrating_factors(dt, eu, eth);

  std::vector<std::complex<double>> n1u, n1t, n2u, n2t;
  nonlinear(s, n1u, n1t);

  // predictor: exact linear propagation of state and slope
  FluidState p = s;
  for (std::size_t c = 0; c < nc; ++c) {
    p.uhat[c] = eu[c] * (s.uhat[c] + dt * n1u[c]);
    p.uhat[nc + c] = eu[c] * (s.uhat[nc + c] + dt * n1u[nc + c]);
    p.that[c] = eth[c] * (s.that[c] + dt * n1t[c]);
  }
  leray_project(p);
  p.that[0] = 0.0;
  nonlinear(p, n2u, n2t);

  for (std::size_t c = 0; c < nc; ++c) {
    s.uhat[c] = eu[c] * (s.uhat[c] + 0.5 * dt * n1u[c]) + 0.5 * dt * n2u[c];
    s.uhat[nc + c] = eu[c] * (s.uhat[nc + c] + 0.5 * dt * n1u[nc + c]) + 0.5 * dt * n2u[nc + c];
    s.that[c] = eth[c] * (s.that[c] + 0.5 * dt * n1t[c]) + 0.5 * dt * n2t[c];
  }
  leray_project(s);
  s.that[0] = 0.0;
  s.time += dt;

  if (tail_energy_fraction(s) > 0.10)
    throw std::runtime_error("nsf: spectral tail energy above 10%, resolution blown");
}

std::vector<double> NsfSolver::u_phys(const FluidState& s) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  // sample at cell centers (shift by half a cell, matching the kinetic grid)
  const std::complex<double> I(0.0, 1.0);
  std::vector<double> out(2 * nc);
  for (int comp = 0; comp < 2; ++comp) {
    for (int k0 = 0; k0 < nx_; ++k0)
      for (int k1 = 0; k1 < nx_; ++k1) {
        const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
        const double ph = kTwoPi * 0.5 * (freq(k0, nx_) + freq(k1, nx_)) / nx_;
        buf_[c] = s.uhat[comp * nc + c] * std::exp(I * ph);
      }
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    for (std::size_t c = 0; c < nc; ++c) out[c * 2 + comp] = buf_[c].real();
  }
  return out;
}

std::vector<double> NsfSolver::theta_phys(const FluidState& s) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  const std::complex<double> I(0.0, 1.0);
  for (int k0 = 0; k0 < nx_; ++k0)
    for (int k1 = 0; k1 < nx_; ++k1) {
      const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
      const double ph = kTwoPi * 0.5 * (freq(k0, nx_) + freq(k1, nx_)) / nx_;
      buf_[c] = s.that[c] * std::exp(I * ph);
    }
  fftw_execute(static_cast<fftw_plan>(plan_bwd_));
  std::vector<double> out(nc);
  for (std::size_t c = 0; c < nc; ++c) out[c] = buf_[c].real();
  return out;
}

std::vector<double> NsfSolver::rho_phys(const FluidState& s) const {
  auto th = theta_phys(s);
  for (auto& x : th) x *= -th1_;
  return th;
}

double NsfSolver::kinetic_energy(const FluidState& s) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  double e = 0.0;
  for (std::size_t c = 0; c < 2 * nc; ++c) e += std::norm(s.uhat[c]);
  return 0.5 * e;  // Parseval on the unit torus
}

double NsfSolver::theta_sq(const FluidState& s) const {
  double e = 0.0;
  for (const auto& z : s.that) e += std::norm(z);
  return e;
}

double NsfSolver::div_norm(const FluidState& s) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  double acc = 0.0;
  for (int k0 = 0; k0 < nx_; ++k0) {
    const double kx = kTwoPi * freq(k0, nx_);
    for (int k1 = 0; k1 < nx_; ++k1) {
      const double ky = kTwoPi * freq(k1, nx_);
      const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
      acc += std::norm(kx * s.uhat[c] + ky * s.uhat[nc + c]);
    }
  }
  return std::sqrt(acc);
}

double NsfSolver::theta_mean(const FluidState& s) const { return std::abs(s.that[0]); }

double NsfSolver::tail_energy_fraction(const FluidState& s) const {
  const std::size_t nc = static_cast<std::size_t>(nx_) * nx_;
  const int kmax = nx_ / 3;
  double tail = 0.0, total = 0.0;
  for (int k0 = 0; k0 < nx_; ++k0)
    for (int k1 = 0; k1 < nx_; ++k1) {
      const std::size_t c = static_cast<std::size_t>(k0) * nx_ + k1;
      const double e = std::norm(s.uhat[c]) + std::norm(s.uhat[nc + c]) + std::norm(s.that[c]);
      total += e;
      const int m0 = std::abs(freq(k0, nx_)), m1 = std::abs(freq(k1, nx_));
      if (m0 > (2 * kmax) / 3 || m1 > (2 * kmax) / 3) tail += e;
    }
  return total > 0.0 ? tail / total : 0.0;
}

double NsfSolver::advective_dt(const FluidState& s, double cfl) const {
  auto u = u_phys(s);
  double umax = 0.0;
  for (std::size_t c = 0; c < u.size() / 2; ++c)
    umax = std::max(umax, std::hypot(u[2 * c], u[2 * c + 1]));
  const double dx = 1.0 / nx_;
  const double rate = th1_ * std::max(umax, 1e-12) / dx;
  return cfl / rate;
}

std::vector<double> limit_profile(const NsfSolver& solver, const FluidState& s,
                                  std::shared_ptr<const VelocityLattice> lat) {
  const int d = lat->dim();
  const double th1 = solver.theta1();
  auto M = maxwellian(lat, 1.0, Vec{0, 0, 0}, th1).f;
  auto u = solver.u_phys(s);
  auto th = solver.theta_phys(s);
  auto rho = solver.rho_phys(s);
  const std::size_t nc = th.size();
  const std::size_t n = lat->size();
  std::vector<double> h(nc * n);
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      Vec v = lat->velocity(i);
      h[c * n + i] = (rho[c] + u[2 * c] * v[0] + u[2 * c + 1] * v[1] +
                      0.5 * th[c] * (lat->speed_sq()[i] - d * th1)) *
                     M.f[i];
    }
  return h;
}

}  // namespace granular
