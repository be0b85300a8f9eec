#include "granular/collision.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "granular/deposit.hpp"

namespace granular {

using detail::quad_weights;

namespace {

inline void check_unit(const Vec& s, int d, const char* what) {
  double n = 0.0;
  for (int a = 0; a < d; ++a) n += s[a] * s[a];
  if (std::abs(n - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(what) + ": direction is not a unit vector");
}

}  // namespace

std::pair<Vec, Vec> post_collision_sigma(const Vec& v, const Vec& vs, const Vec& sigma,
                                         double alpha, int d) {
  check_unit(sigma, d, "post_collision_sigma");
  Vec u{0, 0, 0};
  double un = 0.0;
  for (int a = 0; a < d; ++a) {
    u[a] = v[a] - vs[a];
    un += u[a] * u[a];
  }
  un = std::sqrt(un);
  const double c = 0.25 * (1.0 + alpha);
  Vec vp = v, vsp = vs;
  for (int a = 0; a < d; ++a) {
    double dl = c * (un * sigma[a] - u[a]);
    vp[a] += dl;
    vsp[a] -= dl;
  }
  return {vp, vsp};
}

std::pair<Vec, Vec> post_collision_normal(const Vec& v, const Vec& vs, const Vec& n,
                                          double alpha, int d) {
  check_unit(n, d, "post_collision_normal");
  double udn = 0.0;
  for (int a = 0; a < d; ++a) udn += (v[a] - vs[a]) * n[a];
  const double c = 0.5 * (1.0 + alpha) * udn;
  Vec vp = v, vsp = vs;
  for (int a = 0; a < d; ++a) {
    vp[a] -= c * n[a];
    vsp[a] += c * n[a];
  }
  return {vp, vsp};
}

double energy_loss_sigma(const Vec& v, const Vec& vs, const Vec& sigma, double alpha, int d) {
  double un = 0.0, udots = 0.0;
  for (int a = 0; a < d; ++a) {
    double ua = v[a] - vs[a];
    un += ua * ua;
    udots += ua * sigma[a];
  }
  double nu = std::sqrt(un);
  double cosx = nu > 0.0 ? udots / nu : 1.0;
  return -0.25 * (1.0 - alpha * alpha) * un * (1.0 - cosx);
}

double angular_kernel_n(double x, int d) {
  const double b_iso = d == 2 ? 1.0 / (2.0 * std::numbers::pi) : 1.0 / (4.0 * std::numbers::pi);
  return std::pow(2.0, d - 1) * std::pow(std::abs(x), d - 2) * b_iso;
}

double gamma_b_quadrature(const SphereQuadrature& q, const Vec& uhat) {
  double s = 0.0;
  for (std::size_t m = 0; m < q.size(); ++m) {
    double c = 0.0;
    for (int a = 0; a < q.d; ++a) c += q.dirs[m][a] * uhat[a];
    s += q.weights[m] * 0.5 * (1.0 - c);
  }
  return s;
}

CollisionTableau::CollisionTableau(std::shared_ptr<const VelocityLattice> lat,
                                   SphereQuadrature quad, double alpha)
    : lat_(std::move(lat)), quad_(std::move(quad)), alpha_(alpha) {
  if (quad_.d != lat_->dim()) throw std::invalid_argument("tableau: quadrature/lattice dimension mismatch");
  if (!(alpha_ > 0.0 && alpha_ <= 1.0)) throw std::invalid_argument("tableau: alpha must lie in (0,1]");
  d_ = lat_->dim();
  N_ = lat_->nodes_per_axis();
  build_tables();
}

void CollisionTableau::build_tables() {
  const int K = 2 * N_ - 1;
  const double dv = lat_->spacing();
  std::size_t nk = 1;
  for (int a = 0; a < d_; ++a) nk *= static_cast<std::size_t>(K);
  uabs_.resize(nk);
  for (std::size_t e = 0; e < nk; ++e) {
    std::size_t r = e;
    double s = 0.0;
    for (int a = d_ - 1; a >= 0; --a) {
      int ka = static_cast<int>(r % K) - (N_ - 1);
      r /= K;
      s += static_cast<double>(ka) * ka;
    }
    uabs_[e] = dv * std::sqrt(s);
  }
  if (d_ != 2) return;  // d=3 stencils are computed on the fly

  const int M = static_cast<int>(quad_.size());
  const double c1 = 0.25 * (1.0 + alpha_);
  const double inv_dv = 1.0 / dv;
  entries_.resize(nk * static_cast<std::size_t>(M));
  for (int k0 = -(N_ - 1); k0 <= N_ - 1; ++k0) {
    for (int k1 = -(N_ - 1); k1 <= N_ - 1; ++k1) {
      std::size_t ke = static_cast<std::size_t>(k0 + N_ - 1) * K + (k1 + N_ - 1);
      const double u0 = dv * k0, u1 = dv * k1;
      const double un = uabs_[ke];
      for (int m = 0; m < M; ++m) {
        Entry& E = entries_[ke * M + m];
        // v' = v_i + delta, v*' = v_j - delta
        const double dl0 = c1 * (un * quad_.dirs[m][0] - u0);
        const double dl1 = c1 * (un * quad_.dirs[m][1] - u1);
        double wx[2][3], wy[2][3];
        int cp[2], cq[2];
        for (int side = 0; side < 2; ++side) {
          const double sgn = side == 0 ? 1.0 : -1.0;
          double t0 = sgn * dl0 * inv_dv, t1 = sgn * dl1 * inv_dv;
          double b0 = std::nearbyint(t0), b1 = std::nearbyint(t1);
          quad_weights(t0 - b0, wx[side]);
          quad_weights(t1 - b1, wy[side]);
          cp[side] = static_cast<int>(b0);
          cq[side] = static_cast<int>(b1);
        }
        E.corner_p[0] = static_cast<std::int16_t>(cp[0] - 1);
        E.corner_p[1] = static_cast<std::int16_t>(cq[0] - 1);
        E.corner_q[0] = static_cast<std::int16_t>(cp[1] - 1);
        E.corner_q[1] = static_cast<std::int16_t>(cq[1] - 1);
        E.foff_p = E.corner_p[0] * N_ + E.corner_p[1];
        E.foff_q = E.corner_q[0] * N_ + E.corner_q[1];
        double sp = 0.0, sq = 0.0;
        for (int r0 = 0; r0 < 3; ++r0)
          for (int r1 = 0; r1 < 3; ++r1) {
            E.wp[r0 * 3 + r1] = wx[0][r0] * wy[0][r1];
            E.wq[r0 * 3 + r1] = wx[1][r0] * wy[1][r1];
            sp += E.wp[r0 * 3 + r1];
            sq += E.wq[r0 * 3 + r1];
          }
        E.swp = sp;
        E.swq = sq;
      }
    }
  }
}

namespace {
constexpr std::uint32_t kTabMagic = 0x47485442u;  // "GHTB"
constexpr std::uint32_t kTabVersion = 1u;

struct TabHeader {
  std::uint32_t magic, version;
  std::int32_t d, N, M;
  double R, alpha;
  std::uint64_t n_entries;
};
}  // namespace

void CollisionTableau::save(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("tableau save: cannot open " + path);
  TabHeader h{kTabMagic, kTabVersion, d_, N_, static_cast<std::int32_t>(quad_.size()),
              lat_->extent(), alpha_, entries_.size()};
  std::fwrite(&h, sizeof(h), 1, fp);
  if (!entries_.empty())
    std::fwrite(entries_.data(), sizeof(Entry), entries_.size(), fp);
  std::fclose(fp);
}

CollisionTableau CollisionTableau::load(const std::string& path,
                                        std::shared_ptr<const VelocityLattice> lat) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("tableau load: cannot open " + path);
  TabHeader h{};
  if (std::fread(&h, sizeof(h), 1, fp) != 1 || h.magic != kTabMagic || h.version != kTabVersion) {
    std::fclose(fp);
    throw std::runtime_error("tableau load: bad header in " + path);
  }
  if (h.d != lat->dim() || h.N != lat->nodes_per_axis() || h.R != lat->extent()) {
    std::fclose(fp);
    throw std::runtime_error("tableau load: key mismatch (d, N, R) in " + path);
  }
  SphereQuadrature q = build_sphere_quadrature(h.d, h.M);
  CollisionTableau tab(std::move(lat), std::move(q), h.alpha);
  if (h.n_entries != tab.entries_.size()) {
    std::fclose(fp);
    throw std::runtime_error("tableau load: entry count mismatch in " + path);
  }
  if (h.n_entries > 0) {
    // overwrite with the cached stencils (identical up to rounding environment)
    if (std::fread(tab.entries_.data(), sizeof(Entry), tab.entries_.size(), fp) !=
        tab.entries_.size()) {
      std::fclose(fp);
      throw std::runtime_error("tableau load: truncated file " + path);
    }
  }
  std::fclose(fp);
  return tab;
}

namespace {

std::vector<std::int32_t> active_nodes(const std::vector<double>& f, double cut) {
  double mx = 0.0;
  for (double x : f) mx = std::max(mx, std::abs(x));
  const double thr = cut * mx;
  std::vector<std::int32_t> idx;
  idx.reserve(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    if (std::abs(f[i]) > thr) idx.push_back(static_cast<std::int32_t>(i));
  return idx;
}

}  // namespace

struct CollideKernel {
  // accumulates the contribution of i-range [lo, hi) of the active list
  static void run_2d(const Distribution& f, const Distribution& g, const CollisionTableau& tab,
                     const std::vector<std::int32_t>& ai, const std::vector<std::int32_t>& aj,
                     std::size_t lo, std::size_t hi, double* Q, double& skipped, double& total) {
    const auto& lat = tab.lattice();
    const int N = lat.nodes_per_axis();
    const int M = static_cast<int>(tab.quadrature().size());
    const double* om = tab.quadrature().weights.data();
    const double half_w = 0.5 * lat.cell_weight();
    const auto& entries = tab.entries();
    const auto& uabs = tab.speed_table();
    double skip_acc = 0.0, tot_acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      const std::int32_t i = ai[p];
      const double fi = f.f[i];
      const int ci0 = i / N, ci1 = i % N;
      for (std::int32_t j : aj) {
        const double fg = fi * g.f[j];
        if (fg == 0.0) continue;
        const int cj0 = j / N, cj1 = j % N;
        const std::size_t ke =
            static_cast<std::size_t>(ci0 - cj0 + N - 1) * (2 * N - 1) + (ci1 - cj1 + N - 1);
        const double un = uabs[ke];
        if (un == 0.0) continue;
        const double base = half_w * un * fg;
        const CollisionTableau::Entry* ent = &entries[ke * M];
        for (int m = 0; m < M; ++m) {
          const CollisionTableau::Entry& E = ent[m];
          const double c = base * om[m];
          tot_acc += std::abs(c);
          const int p0 = ci0 + E.corner_p[0], p1 = ci1 + E.corner_p[1];
          const int q0 = cj0 + E.corner_q[0], q1 = cj1 + E.corner_q[1];
          if (p0 < 0 || p1 < 0 || q0 < 0 || q1 < 0 || p0 > N - 3 || p1 > N - 3 ||
              q0 > N - 3 || q1 > N - 3) {
            // boundary band: rebuild the stencils with hull clamping; skip the
            // pair only if a post-collisional velocity leaves the hull
            const double inv_dv = 1.0 / tab.lattice().spacing();
            const double c1 = 0.25 * (1.0 + tab.alpha());
            const double dv = tab.lattice().spacing();
            const double u0 = dv * (ci0 - cj0), u1 = dv * (ci1 - cj1);
            const double t0 = c1 * (un * tab.quadrature().dirs[m][0] - u0) * inv_dv;
            const double t1 = c1 * (un * tab.quadrature().dirs[m][1] - u1) * inv_dv;
            int cp0, cp1, cq0, cq1;
            double wx[3], wy[3], vx[3], vy[3];
            if (!detail::clamped_stencil(ci0 + t0, N, cp0, wx) ||
                !detail::clamped_stencil(ci1 + t1, N, cp1, wy) ||
                !detail::clamped_stencil(cj0 - t0, N, cq0, vx) ||
                !detail::clamped_stencil(cj1 - t1, N, cq1, vy)) {
              skip_acc += std::abs(c);
              continue;
            }
            double sp = 0.0, sq = 0.0;
            double* Qp = Q + cp0 * N + cp1;
            double* Qq = Q + cq0 * N + cq1;
            for (int r0 = 0; r0 < 3; ++r0)
              for (int r1 = 0; r1 < 3; ++r1) {
                const double gp = c * wx[r0] * wy[r1];
                const double gq = c * vx[r0] * vy[r1];
                Qp[r0 * N + r1] += gp;
                Qq[r0 * N + r1] += gq;
                sp += gp;
                sq += gq;
              }
            Q[i] -= sp;
            Q[j] -= sq;
            continue;
          }
          double* Qp = Q + i + E.foff_p;
          double* Qq = Q + j + E.foff_q;
          for (int r0 = 0; r0 < 3; ++r0) {
            const int o = r0 * N;
            Qp[o] += c * E.wp[r0 * 3];
            Qp[o + 1] += c * E.wp[r0 * 3 + 1];
            Qp[o + 2] += c * E.wp[r0 * 3 + 2];
            Qq[o] += c * E.wq[r0 * 3];
            Qq[o + 1] += c * E.wq[r0 * 3 + 1];
            Qq[o + 2] += c * E.wq[r0 * 3 + 2];
          }
          Q[i] -= c * E.swp;
          Q[j] -= c * E.swq;
        }
      }
    }
    skipped = skip_acc;
    total = tot_acc;
  }

  static void run_3d(const Distribution& f, const Distribution& g, const CollisionTableau& tab,
                     const std::vector<std::int32_t>& ai, const std::vector<std::int32_t>& aj,
                     std::size_t lo, std::size_t hi, double* Q, double& skipped, double& total) {
    const auto& lat = tab.lattice();
    const int N = lat.nodes_per_axis();
    const int NN = N * N;
    const int M = static_cast<int>(tab.quadrature().size());
    const auto& quad = tab.quadrature();
    const double dv = lat.spacing();
    const double inv_dv = 1.0 / dv;
    const double half_w = 0.5 * lat.cell_weight();
    const double c1 = 0.25 * (1.0 + tab.alpha());
    double skip_acc = 0.0, tot_acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      const std::int32_t i = ai[p];
      const double fi = f.f[i];
      const int ci0 = i / NN, ci1 = (i / N) % N, ci2 = i % N;
      for (std::int32_t j : aj) {
        const double fg = fi * g.f[j];
        if (fg == 0.0) continue;
        const int cj0 = j / NN, cj1 = (j / N) % N, cj2 = j % N;
        const int k0 = ci0 - cj0, k1 = ci1 - cj1, k2 = ci2 - cj2;
        if (k0 == 0 && k1 == 0 && k2 == 0) continue;
        const double u0 = dv * k0, u1 = dv * k1, u2 = dv * k2;
        const double un = std::sqrt(u0 * u0 + u1 * u1 + u2 * u2);
        const double base = half_w * un * fg;
        for (int m = 0; m < M; ++m) {
          const double c = base * quad.weights[m];
          tot_acc += std::abs(c);
          const double dl0 = c1 * (un * quad.dirs[m][0] - u0);
          const double dl1 = c1 * (un * quad.dirs[m][1] - u1);
          const double dl2 = c1 * (un * quad.dirs[m][2] - u2);
          double wp[3][3], wq[3][3];
          int bp[3], bq[3];
          const double dls[3] = {dl0, dl1, dl2};
          bool ok = true;
          const int cis[3] = {ci0, ci1, ci2}, cjs[3] = {cj0, cj1, cj2};
          for (int a = 0; a < 3; ++a) {
            const double t = dls[a] * inv_dv;
            if (!detail::clamped_stencil(cis[a] + t, N, bp[a], wp[a]) ||
                !detail::clamped_stencil(cjs[a] - t, N, bq[a], wq[a])) {
              ok = false;
              break;
            }
          }
          if (!ok) {
            skip_acc += std::abs(c);
            continue;
          }
          double sp = 0.0, sq = 0.0;
          double* Qp = Q + (bp[0] * NN + bp[1] * N + bp[2]);
          double* Qq = Q + (bq[0] * NN + bq[1] * N + bq[2]);
          for (int r0 = 0; r0 < 3; ++r0)
            for (int r1 = 0; r1 < 3; ++r1) {
              const double ap = c * wp[0][r0] * wp[1][r1];
              const double aq = c * wq[0][r0] * wq[1][r1];
              double* rp = Qp + r0 * NN + r1 * N;
              double* rq = Qq + r0 * NN + r1 * N;
              for (int r2 = 0; r2 < 3; ++r2) {
                const double gp = ap * wp[2][r2];
                const double gq = aq * wq[2][r2];
                rp[r2] += gp;
                rq[r2] += gq;
                sp += gp;
                sq += gq;
              }
            }
          Q[i] -= sp;
          Q[j] -= sq;
        }
      }
    }
    skipped = skip_acc;
    total = tot_acc;
  }
};

CollideResult collide(const Distribution& f, const Distribution& g,
                      const CollisionTableau& tab, Distribution& out,
                      const CollideOptions& opts) {
  if (f.lat.get() != &tab.lattice() && f.lat->size() != tab.lattice().size())
    throw std::invalid_argument("collide: f is not on the tableau lattice");
  if (f.size() != g.size()) throw std::invalid_argument("collide: lattice mismatch between f and g");
  const std::size_t n = f.size();
  out.lat = f.lat;
  out.f.assign(n, 0.0);

  auto ai = active_nodes(f.f, opts.support_cut);
  auto aj = active_nodes(g.f, opts.support_cut);
  if (ai.empty() || aj.empty()) return {};

  int nt = opts.threads > 0 ? opts.threads : omp_get_max_threads();
  nt = std::max(1, std::min<int>(nt, static_cast<int>(ai.size())));

  std::vector<std::vector<double>> bufs(nt);
  std::vector<double> skipped(nt, 0.0), total(nt, 0.0);

#pragma omp parallel num_threads(nt)
  {
    const int t = omp_get_thread_num();
    bufs[t].assign(n, 0.0);
    const std::size_t chunk = (ai.size() + nt - 1) / nt;
    const std::size_t lo = std::min(ai.size(), t * chunk);
    const std::size_t hi = std::min(ai.size(), lo + chunk);
    if (tab.dim() == 2)
      CollideKernel::run_2d(f, g, tab, ai, aj, lo, hi, bufs[t].data(), skipped[t], total[t]);
    else
      CollideKernel::run_3d(f, g, tab, ai, aj, lo, hi, bufs[t].data(), skipped[t], total[t]);
  }

  // ordered merge: deterministic at fixed thread count
  for (int t = 0; t < nt; ++t) {
    const double* b = bufs[t].data();
    double* q = out.f.data();
    for (std::size_t r = 0; r < n; ++r) q[r] += b[r];
  }
  CollideResult res;
  for (int t = 0; t < nt; ++t) {
    res.skipped_flux_fraction += skipped[t];
    res.total_flux += total[t];
  }
  res.skipped_flux_fraction = res.total_flux > 0.0 ? res.skipped_flux_fraction / res.total_flux : 0.0;
  return res;
}

Distribution collide(const Distribution& f, const Distribution& g,
                     const CollisionTableau& tab, const CollideOptions& opts) {
  Distribution out(f.lat);
  collide(f, g, tab, out, opts);
  return out;
}

double dissipation(const Distribution& f, const Distribution& g) {
  if (f.size() != g.size()) throw std::invalid_argument("dissipation: lattice mismatch");
  const auto& lat = *f.lat;
  const int d = lat.dim();
  const int N = lat.nodes_per_axis();
  const double dv = lat.spacing();
  auto ai = active_nodes(f.f, 0.0);
  auto aj = active_nodes(g.f, 0.0);
  const int nt = std::max(1, std::min<int>(omp_get_max_threads(), static_cast<int>(ai.size())));
  std::vector<double> partial(nt, 0.0);
#pragma omp parallel num_threads(nt)
  {
    const int t = omp_get_thread_num();
    const std::size_t chunk = (ai.size() + nt - 1) / nt;
    const std::size_t lo = std::min(ai.size(), t * chunk);
    const std::size_t hi = std::min(ai.size(), lo + chunk);
    double s = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      const std::int32_t i = ai[p];
      const auto ci = lat.decode(i);
      double acc = 0.0;
      for (std::int32_t j : aj) {
        const auto cj = lat.decode(j);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          const double da = dv * (ci[a] - cj[a]);
          r2 += da * da;
        }
        acc += g.f[j] * r2 * std::sqrt(r2);
      }
      s += f.f[i] * acc;
    }
    partial[t] = s;
  }
  (void)N;
  double s = 0.0;
  for (int t = 0; t < nt; ++t) s += partial[t];
  const double w = lat.cell_weight();
  return 0.25 * kGammaB * w * w * s;
}

}  // namespace granular
