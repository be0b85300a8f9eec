#include "granular/homogeneous.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "granular/deposit.hpp"
#include "granular/transport.hpp"

namespace granular {

double SelfSimilarFrame::tau(double t) const {
  if (c == 0.0) return t;
  return std::log1p(c * t) / c;
}

double SelfSimilarFrame::t_of_tau(double tau) const {
  if (c == 0.0) return tau;
  return std::expm1(c * tau) / c;
}

Distribution drift_term(const Distribution& f, double kappa) {
  if (kappa < 0.0) throw std::invalid_argument("drift_term: kappa must be nonnegative");
  const auto& lat = *f.lat;
  const int d = lat.dim();
  const int N = lat.nodes_per_axis();
  const double inv_dv = 1.0 / lat.spacing();
  Distribution out(f.lat);
  if (kappa == 0.0) return out;

  std::size_t stride[3] = {0, 0, 0};
  stride[d - 1] = 1;
  for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * N;

  for (std::size_t n = 0; n < f.size(); ++n) {
    auto c = lat.decode(n);
    double acc = 0.0;
    for (int a = 0; a < d; ++a) {
      const int ia = c[a];
      double fp = 0.0, fm = 0.0;  // zero flux through the hull
      if (ia < N - 1)
        fp = 0.5 * (lat.axis_coord(ia + 1) * f.f[n + stride[a]] + lat.axis_coord(ia) * f.f[n]);
      if (ia > 0)
        fm = 0.5 * (lat.axis_coord(ia) * f.f[n] + lat.axis_coord(ia - 1) * f.f[n - stride[a]]);
      acc += (fp - fm) * inv_dv;
    }
    out.f[n] = kappa * acc;
  }
  return out;
}

double stable_dt(const Distribution& f, double kappa, double eps, double safety) {
  const auto& lat = *f.lat;
  const double w = lat.cell_weight();
  double mx = 0.0;
  for (double x : f.f) mx = std::max(mx, std::abs(x));
  double m0 = 0.0, m1 = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fi = std::abs(f.f[i]);
    m0 += fi;
    const double speed = std::sqrt(lat.speed_sq()[i]);
    m1 += fi * speed;
    if (fi > 1e-14 * mx) vmax = std::max(vmax, speed);
  }
  m0 *= w;
  m1 *= w;
  const double loss_rate = m0 * vmax + m1;           // bound on the discrete loss frequency
  const double drift_rate = kappa * vmax / lat.spacing();
  const double rate = loss_rate + drift_rate;
  if (rate <= 0.0) return 1e30;
  return safety * eps * eps / rate;
}

namespace {

// Multiply f by (1 + A + C.v + B|v|^2) so that its discrete mass, momentum
// and energy match the given targets; the correction is O(defect) small.
void restore_moments(Distribution& f, double m_target, const Vec& p_target, double e_target) {
  const auto& lat = *f.lat;
  const int d = lat.dim();
  const int nm = d + 2;
  double mom[5] = {0, 0, 0, 0, 0};
  double gram[5][5] = {{0}};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fi = f.f[i];
    if (fi == 0.0) continue;
    Vec v = lat.velocity(i);
    double basis[5];
    basis[0] = 1.0;
    for (int a = 0; a < d; ++a) basis[1 + a] = v[a];
    basis[d + 1] = lat.speed_sq()[i];
    for (int r = 0; r < nm; ++r) {
      mom[r] += fi * basis[r];
      for (int c = r; c < nm; ++c) gram[r][c] += fi * basis[r] * basis[c];
    }
  }
  for (int r = 0; r < nm; ++r)
    for (int c = 0; c < r; ++c) gram[r][c] = gram[c][r];
  const double w = lat.cell_weight();
  double target[5];
  target[0] = m_target / w - mom[0];
  for (int a = 0; a < d; ++a) target[1 + a] = p_target[a] / w - mom[1 + a];
  target[d + 1] = e_target / w - mom[d + 1];

  double A[5][6];
  for (int r = 0; r < nm; ++r) {
    for (int c = 0; c < nm; ++c) A[r][c] = gram[r][c];
    A[r][nm] = target[r];
  }
  for (int k = 0; k < nm; ++k) {
    int piv = k;
    for (int r = k + 1; r < nm; ++r)
      if (std::abs(A[r][k]) > std::abs(A[piv][k])) piv = r;
    if (std::abs(A[piv][k]) < 1e-14 * (std::abs(gram[k][k]) + 1e-300)) {
      // degenerate (near-singular) field: fall back to mass-only scaling
      if (mom[0] > 0.0) {
        const double r = m_target / (w * mom[0]);
        for (auto& x : f.f) x *= r;
      }
      return;
    }
    std::swap_ranges(A[k], A[k] + nm + 1, A[piv]);
    for (int r = k + 1; r < nm; ++r) {
      const double m = A[r][k] / A[k][k];
      for (int c = k; c <= nm; ++c) A[r][c] -= m * A[k][c];
    }
  }
  double coef[5] = {0, 0, 0, 0, 0};
  for (int r = nm - 1; r >= 0; --r) {
    double acc = A[r][nm];
    for (int c = r + 1; c < nm; ++c) acc -= A[r][c] * coef[c];
    coef[r] = acc / A[r][r];
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.f[i] == 0.0) continue;
    Vec v = lat.velocity(i);
    double corr = 1.0 + coef[0] + coef[d + 1] * lat.speed_sq()[i];
    for (int a = 0; a < d; ++a) corr += coef[1 + a] * v[a];
    f.f[i] *= corr;
  }
}

Distribution tendency(const Distribution& f, double alpha, double kappa, double eps,
                      const CollisionTableau& tab, const CollideOptions& copts,
                      double* skipped) {
  (void)alpha;
  Distribution Q(f.lat);
  auto res = collide(f, f, tab, Q, copts);
  if (skipped) *skipped = std::max(*skipped, res.skipped_flux_fraction);
  const double s = 1.0 / (eps * eps);
  if (kappa > 0.0) {
    Distribution D = drift_term(f, kappa);
    for (std::size_t i = 0; i < Q.size(); ++i) Q.f[i] = s * (Q.f[i] - D.f[i]);
  } else {
    for (std::size_t i = 0; i < Q.size(); ++i) Q.f[i] *= s;
  }
  return Q;
}

Distribution heun_step(const Distribution& f, double dt, double alpha, double kappa, double eps,
                       const CollisionTableau& tab, const StepOptions& opts, StepInfo* info) {
  const double m0 = mass(f);
  double skipped = 0.0;
  Distribution k1 = tendency(f, alpha, kappa, eps, tab, opts.collide, &skipped);
  Distribution f1(f.lat);
  for (std::size_t i = 0; i < f.size(); ++i) f1.f[i] = f.f[i] + dt * k1.f[i];
  Distribution k2 = tendency(f1, alpha, kappa, eps, tab, opts.collide, &skipped);
  Distribution out(f.lat);
  for (std::size_t i = 0; i < f.size(); ++i)
    out.f[i] = 0.5 * (f.f[i] + f1.f[i] + dt * k2.f[i]);

  // Positivity clip, then restore the raw post-step moments (which satisfy
  // the discrete conservation identities); plain rescaling would leak the
  // clipped tail energy into the temperature.
  const auto& lat = *f.lat;
  const int d = lat.dim();
  const double w = lat.cell_weight();
  double m_raw = 0.0, e_raw = 0.0;
  Vec p_raw{0, 0, 0};
  for (std::size_t i = 0; i < out.size(); ++i) {
    m_raw += out.f[i];
    e_raw += out.f[i] * lat.speed_sq()[i];
    Vec v = lat.velocity(i);
    for (int a = 0; a < d; ++a) p_raw[a] += out.f[i] * v[a];
  }
  m_raw *= w;
  e_raw *= w;
  for (int a = 0; a < d; ++a) p_raw[a] *= w;
  double clipped = 0.0;
  for (auto& x : out.f) {
    if (x < 0.0) {
      clipped -= x;
      x = 0.0;
    }
  }
  clipped *= w;
  if (m0 > 0.0 && clipped / m0 > opts.clip_limit)
    throw std::runtime_error("time step: positivity clipping exceeded the allowed mass budget (" +
                             std::to_string(clipped / m0) + ")");
  if (clipped > 0.0) restore_moments(out, m_raw, p_raw, e_raw);
  if (info) {
    info->clipped_mass = clipped;
    info->skipped_flux_fraction = skipped;
  }
  return out;
}

}  // namespace

Distribution step_selfsim(const Distribution& f, double dt, double alpha, double eps,
                          const CollisionTableau& tab, const StepOptions& opts, StepInfo* info) {
  return heun_step(f, dt, alpha, 1.0 - alpha, eps, tab, opts, info);
}

Distribution step_physical(const Distribution& f, double dt, double alpha, double eps,
                           const CollisionTableau& tab, const StepOptions& opts, StepInfo* info) {
  return heun_step(f, dt, alpha, 0.0, eps, tab, opts, info);
}

Distribution velocity_scale_map(const Distribution& f, double scale, double* clipped_mass) {
  if (!(scale > 0.0)) throw std::invalid_argument("velocity_scale_map: scale must be positive");
  if (clipped_mass) *clipped_mass = 0.0;
  if (scale == 1.0) return f;
  const auto& lat = *f.lat;
  const int d = lat.dim();
  const int N = lat.nodes_per_axis();
  const int c0 = (N - 1) / 2;
  const double inv_scale = 1.0 / scale;
  Distribution out(f.lat);

  std::size_t stride[3] = {0, 0, 0};
  stride[d - 1] = 1;
  for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * N;

  // Nodal values by quintic Lagrange interpolation at the preimage (smooth
  // resampling; a mass deposit would reproduce moments but scatter sawtooth
  // noise into the nodal values). The transformed mass, momentum and energy
  // are then restored exactly, tracking the mass that truly leaves the hull.
  const double jac = std::pow(inv_scale, d);
  auto quintic = [](double p, double* w) {
    // Lagrange basis on nodes {0..5} at position p
    double num[6];
    for (int j = 0; j < 6; ++j) {
      double t = 1.0;
      for (int k = 0; k < 6; ++k)
        if (k != j) t *= p - k;
      num[j] = t;
    }
    static constexpr double den[6] = {-120.0, 24.0, -12.0, 12.0, -24.0, 120.0};
    for (int j = 0; j < 6; ++j) w[j] = num[j] / den[j];
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto c = lat.decode(i);
    double wts[3][6];
    std::size_t corner = 0;
    bool inside = true;
    for (int a = 0; a < d; ++a) {
      const double g = c0 + inv_scale * (c[a] - c0);  // preimage in grid units
      if (g < -1e-9 || g > N - 1 + 1e-9) {
        inside = false;
        break;
      }
      int corner_a = std::clamp(static_cast<int>(std::floor(g)) - 2, 0, N - 6);
      quintic(g - corner_a, wts[a]);
      corner += static_cast<std::size_t>(corner_a) * stride[a];
    }
    if (!inside) continue;  // preimage outside the hull: no mass there
    double acc = 0.0;
    if (d == 2) {
      for (int r0 = 0; r0 < 6; ++r0) {
        double inner = 0.0;
        for (int r1 = 0; r1 < 6; ++r1) inner += wts[1][r1] * f.f[corner + r0 * stride[0] + r1];
        acc += wts[0][r0] * inner;
      }
    } else {
      for (int r0 = 0; r0 < 6; ++r0)
        for (int r1 = 0; r1 < 6; ++r1) {
          const std::size_t base = corner + r0 * stride[0] + r1 * stride[1];
          double inner = 0.0;
          for (int r2 = 0; r2 < 6; ++r2) inner += wts[2][r2] * f.f[base + r2];
          acc += wts[0][r0] * wts[1][r1] * inner;
        }
    }
    out.f[i] = jac * acc;
  }

  // exact transformed moments, counting only source mass whose image stays
  // inside the hull
  double m_t = 0.0, e_t = 0.0, lost = 0.0;
  Vec p_t{0, 0, 0};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double fi = f.f[i];
    if (fi == 0.0) continue;
    auto c = lat.decode(i);
    bool image_inside = true;
    for (int a = 0; a < d; ++a) {
      const double g = c0 + scale * (c[a] - c0);
      if (g < -1e-9 || g > N - 1 + 1e-9) image_inside = false;
    }
    if (!image_inside) {
      lost += fi;
      continue;
    }
    m_t += fi;
    e_t += fi * lat.speed_sq()[i];
    Vec v = lat.velocity(i);
    for (int a = 0; a < d; ++a) p_t[a] += fi * v[a];
  }
  const double w = lat.cell_weight();
  m_t *= w;
  e_t *= w * scale * scale;
  for (int a = 0; a < d; ++a) p_t[a] *= w * scale;
  restore_moments(out, m_t, p_t, e_t);
  if (clipped_mass) *clipped_mass = lost * w;
  return out;
}

Distribution self_similar_map(const Distribution& f, double t, const SelfSimilarFrame& frame,
                              FrameDirection dir, double* clipped_mass) {
  const double V = frame.V(t);
  const double scale = dir == FrameDirection::ToPhysical ? 1.0 / V : V;
  return velocity_scale_map(f, scale, clipped_mass);
}

namespace {

double steady_residual(const Distribution& G, double kappa, const CollisionTableau& tab,
                       const CollideOptions& copts) {
  Distribution Q(G.lat);
  collide(G, G, tab, Q, copts);
  Distribution D = drift_term(G, kappa);
  double s = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) s += std::abs(Q.f[i] - D.f[i]);
  return s * G.lat->cell_weight();
}

void normalize_symmetric(Distribution& G) {
  // enforce momentum 0 by parity symmetrization, then unit mass
  const auto& lat = *G.lat;
  Distribution sym(G.lat);
  for (std::size_t i = 0; i < G.size(); ++i)
    sym.f[i] = 0.5 * (G.f[i] + G.f[lat.mirror(i)]);
  const double m = mass(sym);
  for (std::size_t i = 0; i < G.size(); ++i) G.f[i] = sym.f[i] / m;
}

}  // namespace

CoolingState cooling_state(double alpha, const CollisionTableau& tab, const CoolingOptions& opts) {
  if (!(alpha >= 0.8 && alpha <= 1.0))
    throw std::invalid_argument("cooling_state: alpha must lie in [0.8, 1]");
  const auto lat = tab.lattice_ptr();
  const int d = lat->dim();
  const double kappa = 1.0 - alpha;
  const double tol = opts.tol > 0.0 ? opts.tol : 0.05 * std::max(kappa, 1e-3);

  StepOptions sopts;
  sopts.collide.support_cut = opts.support_cut;
  sopts.collide.threads = opts.threads;
  sopts.clip_limit = opts.clip_limit;

  CoolingState st;
  st.alpha = alpha;
  st.G = maxwellian(lat, 1.0, Vec{0, 0, 0}, theta_balance(d, alpha)).f;
  normalize_symmetric(st.G);
  st.theta = temperature(st.G);
  st.residual = steady_residual(st.G, kappa, tab, sopts.collide);
  if (opts.trace) opts.trace(0.0, st.theta, st.residual);
  if (kappa == 0.0) {
    // every Maxwellian is steady; the seed is the answer up to scheme error
    st.converged = true;
    return st;
  }
  if (st.residual <= tol) {
    st.converged = true;
    return st;
  }

  double tau_now = 0.0;
  double best_residual = st.residual;
  Distribution best = st.G;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const double dt = std::min(stable_dt(st.G, kappa, 1.0, opts.dt_safety), opts.settle_time / 8.0);
    const int n_steps = std::max(8, static_cast<int>(std::ceil(opts.settle_time / dt)));
    const int n_meas = std::max(4, n_steps / 5);
    std::vector<double> theta_trace;
    theta_trace.reserve(n_meas + 1);
    for (int s = 0; s < n_steps; ++s) {
      if (s >= n_steps - n_meas - 1) theta_trace.push_back(temperature(st.G));
      st.G = step_selfsim(st.G, dt, alpha, 1.0, tab, sopts);
      ++st.steps;
      tau_now += dt;
    }
    theta_trace.push_back(temperature(st.G));

    // temperature drift over the measurement window
    const int nm = static_cast<int>(theta_trace.size());
    const double theta_dot = (theta_trace.back() - theta_trace.front()) / ((nm - 1) * dt);
    st.theta = theta_trace.back();

    if (kappa > 0.0) {
      // the slow mode relaxes at ~ kappa; jump to its extrapolated endpoint
      const double theta_inf = st.theta + theta_dot / kappa;
      if (theta_inf > 0.1 * st.theta && theta_inf < 10.0 * st.theta) {
        const double s = std::sqrt(theta_inf / st.theta);
        double clipped = 0.0;
        st.G = velocity_scale_map(st.G, s, &clipped);
        normalize_symmetric(st.G);
        st.theta = temperature(st.G);
      }
    }
    st.residual = steady_residual(st.G, kappa, tab, sopts.collide);
    if (opts.trace) opts.trace(tau_now, st.theta, st.residual);
    if (st.residual < best_residual) {
      best_residual = st.residual;
      best = st.G;
    }
    if (st.residual <= tol) {
      st.converged = true;
      return st;
    }
  }
  st.G = best;
  st.residual = best_residual;
  st.theta = temperature(st.G);
  st.converged = st.residual <= tol;
  return st;
}

HaffFit haff_fit(std::span<const double> t, std::span<const double> T, double c) {
  if (t.size() != T.size() || t.size() < 20)
    throw std::invalid_argument("haff_fit: need at least 20 samples");
  if (!(c > 0.0)) throw std::invalid_argument("haff_fit: cooling rate must be positive");
  std::vector<double> x(t.size()), y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(T[i] > 0.0)) throw std::invalid_argument("haff_fit: nonpositive temperature sample");
    x[i] = std::log(1.0 + c * t[i]);
    y[i] = std::log(T[i]);
  }
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  if (*xmax - *xmin < std::log(10.0))
    throw std::invalid_argument("haff_fit: samples span less than a decade of 1 + c t");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  HaffFit fit;
  fit.exponent = (n * sxy - sx * sy) / det;
  const double intercept = (sy * sxx - sx * sxy) / det;
  fit.prefactor = std::exp(intercept);
  for (std::size_t i = 0; i < x.size(); ++i)
    fit.max_log_residual =
        std::max(fit.max_log_residual, std::abs(y[i] - intercept - fit.exponent * x[i]));
  return fit;
}

Theta1Estimate theta1_estimate(std::span<const std::pair<double, double>> samples, int d) {
  if (samples.size() < 3)
    throw std::invalid_argument("theta1_estimate: need at least 3 (alpha, theta) samples");
  std::vector<std::pair<double, double>> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());  // ascending alpha
  Theta1Estimate est;
  for (std::size_t i = 1; i + 1 < s.size(); ++i)
    if ((s[i].second - s[i - 1].second) * (s[i + 1].second - s[i].second) < 0.0)
      est.monotone = false;

  // least-squares polynomial in x = 1 - alpha, degree min(2, n-1)
  const int deg = std::min<std::size_t>(2, s.size() - 1);
  double A[3][3] = {{0}}, b[3] = {0};
  for (const auto& [al, th] : s) {
    const double x = 1.0 - al;
    double xp[3] = {1.0, x, x * x};
    for (int r = 0; r <= deg; ++r) {
      for (int cix = 0; cix <= deg; ++cix) A[r][cix] += xp[r] * xp[cix];
      b[r] += xp[r] * th;
    }
  }
  // Gaussian elimination on the (deg+1) system
  for (int k = 0; k <= deg; ++k) {
    int piv = k;
    for (int r = k + 1; r <= deg; ++r)
      if (std::abs(A[r][k]) > std::abs(A[piv][k])) piv = r;
    std::swap(A[k], A[piv]);
    std::swap(b[k], b[piv]);
    for (int r = k + 1; r <= deg; ++r) {
      const double m = A[r][k] / A[k][k];
      for (int cix = k; cix <= deg; ++cix) A[r][cix] -= m * A[k][cix];
      b[r] -= m * b[k];
    }
  }
  double coef[3] = {0, 0, 0};
  for (int r = deg; r >= 0; --r) {
    double acc = b[r];
    for (int cix = r + 1; cix <= deg; ++cix) acc -= A[r][cix] * coef[cix];
    coef[r] = acc / A[r][r];
  }
  est.extrapolated = coef[0];
  est.closed_form = theta1_closed_form(d);
  return est;
}

double theta_balance(int d, double alpha) {
  const double ga = kGammaB * moment_constant_a(d);
  const double root = 8.0 * d / ((1.0 + alpha) * ga);
  return root * root;
}

double theta1_closed_form(int d) { return theta_balance(d, 1.0); }

}  // namespace granular
