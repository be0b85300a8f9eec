#include "granular/homogeneous.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "granular/transport.hpp"
#include "oracles.hpp"

using namespace granular;

TEST_CASE("self-similar frame maps") {
  SelfSimilarFrame fr{0.1, 0.5};
  CHECK(fr.tau(0.0) == 0.0);
  CHECK(fr.V(0.0) == 1.0);
  CHECK(fr.V(2.0) == doctest::Approx(2.0));
  CHECK(fr.tau(3.0) > fr.tau(2.0));
  // concavity of tau
  CHECK(fr.tau(2.0) - fr.tau(1.0) > fr.tau(3.0) - fr.tau(2.0));
  CHECK(fr.t_of_tau(fr.tau(7.3)) == doctest::Approx(7.3).epsilon(1e-12));
  SelfSimilarFrame elastic{0.1, 0.0};
  CHECK(elastic.tau(5.0) == 5.0);
}

TEST_CASE("drift term: conservation and moment identities") {
  auto lat = build_lattice(2, 49, 8.0);
  auto f = maxwellian(lat, 1.0, Vec{0.5, -0.3, 0}, 0.8).f;
  const double kappa = 0.07;
  auto g = drift_term(f, kappa);

  CHECK(std::abs(mass(g)) < 1e-12);

  // momentum of the term is -kappa * momentum(f) (so the evolution grows it)
  Vec pf = momentum(f), pg = momentum(g);
  CHECK(pg[0] == doctest::Approx(-kappa * pf[0]).epsilon(1e-8));
  CHECK(pg[1] == doctest::Approx(-kappa * pf[1]).epsilon(1e-8));

  // integration-by-parts oracle: <|v|^2 drift> = -2 kappa <|v|^2 f>
  double e = moment(g, std::span<const double>(lat->speed_sq()));
  CHECK(e == doctest::Approx(-2.0 * kappa * energy(f)).epsilon(1e-8));

  // even distribution: zero momentum stays zero
  auto feven = maxwellian(lat, 1.0, Vec{0, 0, 0}, 1.0).f;
  Vec pe = momentum(drift_term(feven, kappa));
  CHECK(std::abs(pe[0]) < 1e-13);

  auto z = drift_term(f, 0.0);
  for (double x : z.f) CHECK(x == 0.0);
  CHECK_THROWS(drift_term(f, -1.0));
}

TEST_CASE("selfsim step: Maxwellian is near-fixed for alpha=1") {
  auto lat = build_lattice(2, 33, 8.0);
  CollisionTableau tab(lat, build_sphere_quadrature(2, 16), 1.0);
  auto m = maxwellian(lat, 1.0, Vec{0, 0, 0}, 1.0).f;
  double dt = stable_dt(m, 0.0, 1.0);
  auto m1 = step_selfsim(m, dt, 1.0, 1.0, tab);
  double delta = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) delta += std::abs(m1.f[i] - m.f[i]);
  delta *= lat->cell_weight();
  CHECK(delta < 5e-3 * norm_l1(m));
}

TEST_CASE("selfsim step: exact mass, momentum growth at rate kappa/eps^2") {
  auto lat = build_lattice(2, 25, 8.0);
  const double alpha = 0.95, eps = 1.0, kappa = 1.0 - alpha;
  CollisionTableau tab(lat, build_sphere_quadrature(2, 8), alpha);
  auto f = maxwellian(lat, 1.0, Vec{0.15, 0.0, 0}, 1.0).f;
  const double m0 = mass(f);
  const double p0 = momentum(f)[0];
  double t = 0.0;
  const double dt = 0.8 * stable_dt(f, kappa, eps);
  for (int s = 0; s < 60; ++s) {
    f = step_selfsim(f, dt, alpha, eps, tab);
    t += dt;
  }
  CHECK(mass(f) == doctest::Approx(m0).epsilon(1e-12));
  CHECK(momentum(f)[0] == doctest::Approx(p0 * std::exp(kappa * t / (eps * eps))).epsilon(0.02));

  // symmetric data: momentum pinned at zero
  auto g = maxwellian(lat, 1.0, Vec{0, 0, 0}, 1.0).f;
  for (int s = 0; s < 10; ++s) g = step_selfsim(g, dt, alpha, eps, tab);
  CHECK(std::abs(momentum(g)[0]) < 1e-12);
  CHECK(std::abs(momentum(g)[1]) < 1e-12);
}

TEST_CASE("physical step: cooling rate matches the dissipation functional") {
  auto lat = build_lattice(2, 33, 8.0);
  const double alpha = 0.9, eps = 1.0;
  CollisionTableau tab(lat, build_sphere_quadrature(2, 16), alpha);
  auto F = maxwellian(lat, 1.0, Vec{0, 0, 0}, 1.0).f;
  const double dt = 0.25 * stable_dt(F, 0.0, eps);
  auto Fb = step_physical(F, dt, alpha, eps, tab);
  // centered two-step estimate of dE/dt against -(1-alpha^2) D / eps^2
  auto Fbb = step_physical(Fb, dt, alpha, eps, tab);
  const double dEdt = (energy(Fbb) - energy(F)) / (2.0 * dt);
  const double rhs = -(1.0 - alpha * alpha) * dissipation(Fb, Fb) / (eps * eps);
  CHECK(dEdt == doctest::Approx(rhs).epsilon(0.02));

  // temperature decreases monotonically for alpha < 1
  auto T0 = temperature(F);
  auto Fc = F;
  double prev = T0;
  for (int s = 0; s < 5; ++s) {
    Fc = step_physical(Fc, dt, alpha, eps, tab);
    double Tn = temperature(Fc);
    CHECK(Tn < prev);
    prev = Tn;
  }
}

TEST_CASE("physical step: elastic temperature constant over 100 steps") {
  auto lat = build_lattice(2, 25, 8.0);
  CollisionTableau tab(lat, build_sphere_quadrature(2, 8), 1.0);
  auto F = maxwellian(lat, 1.0, Vec{0, 0, 0}, 1.0).f;
  const double T0 = temperature(F);
  const double dt = stable_dt(F, 0.0, 1.0);
  for (int s = 0; s < 100; ++s) F = step_physical(F, dt, 1.0, 1.0, tab);
  CHECK(temperature(F) == doctest::Approx(T0).epsilon(1e-3));
}

TEST_CASE("velocity scale map and frame maps") {
  auto lat = build_lattice(2, 65, 8.0);
  auto m = maxwellian(lat, 1.0, Vec{0, 0, 0}, 1.0).f;

  // identity at t=0 is exact
  SelfSimilarFrame fr{1.0, 0.5};
  auto id = self_similar_map(m, 0.0, fr, FrameDirection::ToPhysical);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(id.f[i] == m.f[i]);

  // V=2: physical-frame image of a Maxwellian has temperature theta/4, mass 1
  double clipped = 0.0;
  auto phys = self_similar_map(m, 2.0, fr, FrameDirection::ToPhysical, &clipped);
  CHECK(clipped == 0.0);
  CHECK(mass(phys) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(temperature(phys) == doctest::Approx(0.25).epsilon(1e-8));

  // round-trip at V = 1.5
  auto fwd = velocity_scale_map(m, 1.0 / 1.5);
  auto back = velocity_scale_map(fwd, 1.5, &clipped);
  double err = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) err += std::abs(back.f[i] - m.f[i]);
  err *= lat->cell_weight();
  CHECK(err < 1e-3);
  CHECK(mass(back) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cooling state: elastic returns the seed Maxwellian") {
  auto lat = build_lattice(2, 25, 12.0);
  CollisionTableau tab(lat, build_sphere_quadrature(2, 16), 1.0);
  auto st = cooling_state(1.0, tab);
  CHECK(st.converged);
  CHECK(st.steps == 0);
  CHECK(mass(st.G) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(st.theta == doctest::Approx(theta1_closed_form(2)).epsilon(1e-3));
}

TEST_CASE("cooling state: theta within 10% of theta1 at alpha=0.99, d=2") {
  auto lat = build_lattice(2, 25, 12.0);
  CollisionTableau tab(lat, build_sphere_quadrature(2, 16), 0.99);
  auto st = cooling_state(0.99, tab);
  CHECK(mass(st.G) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(momentum(st.G)[0]) < 1e-10);
  CHECK(std::abs(momentum(st.G)[1]) < 1e-10);
  CHECK(st.theta == doctest::Approx(64.0 / (9.0 * std::numbers::pi)).epsilon(0.10));

  // distance to the Maxwellian shrinks as alpha -> 1
  CollisionTableau tab95(lat, build_sphere_quadrature(2, 16), 0.95);
  auto st95 = cooling_state(0.95, tab95);
  auto M = maxwellian(lat, 1.0, Vec{0, 0, 0}, theta1_closed_form(2)).f;
  Distribution d99(lat), d95(lat);
  for (std::size_t i = 0; i < M.size(); ++i) {
    d99.f[i] = st.G.f[i] - M.f[i];
    d95.f[i] = st95.G.f[i] - M.f[i];
  }
  CHECK(norm_l1_w2(d95) > norm_l1_w2(d99));
}

TEST_CASE("cooling state rejects alpha below 0.8") {
  auto lat = build_lattice(2, 25, 12.0);
  CollisionTableau tab(lat, build_sphere_quadrature(2, 8), 0.7);
  CHECK_THROWS(cooling_state(0.7, tab));
}

TEST_CASE("theta1: closed forms and extrapolation") {
  CHECK(theta1_closed_form(3) == doctest::Approx(9.0 * std::numbers::pi / 16.0).epsilon(1e-10));
  CHECK(theta1_closed_form(2) == doctest::Approx(64.0 / (9.0 * std::numbers::pi)).epsilon(1e-10));

  // synthetic data theta = theta1 (1 + (1-alpha)) is recovered exactly
  const double th1 = theta1_closed_form(2);
  std::vector<std::pair<double, double>> s;
  for (double al : {0.999, 0.99, 0.95, 0.9}) s.push_back({al, th1 * (2.0 - al)});
  auto est = theta1_estimate(s, 2);
  CHECK(est.extrapolated == doctest::Approx(th1).epsilon(1e-10));
  CHECK(est.monotone);

  std::vector<std::pair<double, double>> bad = {{0.9, 1.0}, {0.95, 2.0}};
  CHECK_THROWS(theta1_estimate(bad, 2));
}

TEST_CASE("haff fit: exact synthetic power law") {
  const double c = 2.0;
  std::vector<double> t(40), T(40);
  for (int i = 0; i < 40; ++i) {
    t[i] = 0.25 * i * i + 0.1;
    double V = 1.0 + c * t[i];
    T[i] = 5.0 * std::pow(V, -2.0);
  }
  auto fit = haff_fit(t, T, c);
  CHECK(fit.exponent == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(fit.prefactor == doctest::Approx(5.0).epsilon(1e-10));

  std::vector<double> tshort(t.begin(), t.begin() + 10), Tshort(T.begin(), T.begin() + 10);
  CHECK_THROWS(haff_fit(tshort, Tshort, c));   // too few samples
  std::vector<double> tiny(25, 0.01), Ttiny(25, 1.0);
  CHECK_THROWS(haff_fit(tiny, Ttiny, c));      // span under a decade
}
