// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "rmmb/robust_bounds.hpp"
#include "rmmb/scenario.hpp"

using namespace rmmb;
using Eigen::VectorXcd;
using cd = std::complex<double>;

namespace {

Scenario two_group_instance() {
  // M=2, one user per group, hand-set channels, sphere eps = 0.5.
  Scenario sc;
  sc.M = 2;
  UserChannel u0, u1;
  u0.h_hat = (VectorXcd(2) << cd(1, 0), cd(0, 0)).finished();
  u1.h_hat = (VectorXcd(2) << cd(0, 0), cd(1, 0)).finished();
  u0.C = Eigen::MatrixXcd::Identity(2, 2) * 4.0;
  u1.C = Eigen::MatrixXcd::Identity(2, 2) * 4.0;
  u0.sigma2 = 2.0;
  u1.sigma2 = 1.0;
  sc.groups = {{u0}, {u1}};
  sc.gamma = 100.0;
  sc.finalize();
  return sc;
}

Beamformer random_beamformer(int M, int G, std::uint64_t seed) {
  Philox rng(seed, kStreamInit);
  Beamformer w;
  for (int g = 0; g < G; ++g) {
    VectorXcd v(M);
    for (int m = 0; m < M; ++m) v(m) = rng.next_complex_gaussian();
    w.w.push_back(v);
  }
  return w;
}

}  // namespace

TEST_SUITE("robust_bounds") {

TEST_CASE("zeta closed forms") {
  // Single group: zeta = eps*||w|| + sqrt(tau)*sigma.
  Scenario sc = make_sphere_scenario(2, {1}, 0.25, 1.0, 1);
  sc.gamma = 1.0;
  sc.finalize();
  Beamformer w;
  w.w.push_back((VectorXcd(2) << cd(2, 0), cd(0, 0)).finished());
  CHECK(zeta(w, 1.0, sc, 0, 0) == doctest::Approx(0.5 * 2 + 1.0));

  // Two groups, hand computation.
  Scenario sc2 = two_group_instance();
  Beamformer w2;
  w2.w.push_back((VectorXcd(2) << cd(2, 0), cd(0, 0)).finished());
  w2.w.push_back((VectorXcd(2) << cd(0, 0), cd(3, 0)).finished());
  // User (0,0): eps||w_0|| = 1; interferer q = |w_1^H h| + eps||w_1|| = 1.5;
  // zeta = 1 + sqrt(4) * sqrt(1.5^2 + 2).
  const double want = 1.0 + 2.0 * std::sqrt(1.5 * 1.5 + 2.0);
  CHECK(zeta(w2, 4.0, sc2, 0, 0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(margin(w2, 4.0, sc2, 0, 0) ==
        doctest::Approx(want - 2.0).epsilon(1e-12));
}

TEST_CASE("margin at w = 0 is sqrt(tau) * sigma") {
  Scenario sc = two_group_instance();
  Beamformer w;
  w.w.push_back(VectorXcd::Zero(2));
  w.w.push_back(VectorXcd::Zero(2));
  CHECK(margin(w, 4.0, sc, 0, 0) ==
        doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(margin(w, 9.0, sc, 1, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("bounds are invariant to per-group phase rotation") {
  Scenario sc = two_group_instance();
  Beamformer w = random_beamformer(2, 2, 5);
  Beamformer rotated = w;
  rotated.w[0] *= std::exp(cd(0, 1.2345));
  rotated.w[1] *= std::exp(cd(0, -0.7));
  for (int g = 0; g < 2; ++g) {
    CHECK(zeta(w, 2.0, sc, g, 0) ==
          doctest::Approx(zeta(rotated, 2.0, sc, g, 0)).epsilon(1e-12));
    CHECK(margin(w, 2.0, sc, g, 0) ==
          doctest::Approx(margin(rotated, 2.0, sc, g, 0)).epsilon(1e-12));
  }
}

TEST_CASE("sinr evaluates the perturbed channel consistently") {
  Scenario sc = two_group_instance();
  Beamformer w;
  w.w.push_back((VectorXcd(2) << cd(2, 0), cd(0, 0)).finished());
  w.w.push_back((VectorXcd(2) << cd(0, 0), cd(3, 0)).finished());

  ErrorSample zero = ErrorSample::zero(2, {1, 1});
  // User (0,0): |w_0^H h|^2 = 4, interference |w_1^H h|^2 = 0, sigma2 = 2.
  CHECK(sinr(w, zero, sc, 0, 0) == doctest::Approx(2.0));
  // User (1,0): |w_1^H h|^2 = 9, interference 0, sigma2 = 1.
  CHECK(sinr(w, zero, sc, 1, 0) == doctest::Approx(9.0));

  // Perturb user (0,0)'s channel toward the interferer.
  ErrorSample e = zero;
  e.e[0][0] = (VectorXcd(2) << cd(-0.25, 0), cd(0.5, 0)).finished();
  // h = (0.75, 0.5): signal |2*0.75|^2 = 2.25, interference |3*0.5|^2 = 2.25.
  CHECK(sinr(w, e, sc, 0, 0) == doctest::Approx(2.25 / (2.25 + 2.0)));
  CHECK(sinr_single(w, e.e[0][0], sc, 0, 0) ==
        doctest::Approx(2.25 / (2.25 + 2.0)));
}

TEST_CASE("zeta certifies the worst-case SINR (sufficiency)") {
  // If margin <= 0 at level tau, every error in the ellipsoid keeps
  // SINR >= tau. Random search for counterexamples.
  Scenario sc = two_group_instance();
  Beamformer w;
  w.w.push_back((VectorXcd(2) << cd(6, 0), cd(0.5, 0.5)).finished());
  w.w.push_back((VectorXcd(2) << cd(-0.2, 0.1), cd(4, 0)).finished());

  for (int g = 0; g < 2; ++g) {
    // Pick tau so that the margin is just barely nonpositive.
    double lo = 0.0, hi = 100.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (margin(w, mid, sc, g, 0) <= 0.0 ? lo : hi) = mid;
    }
    const double tau = lo;
    REQUIRE(margin(w, tau, sc, g, 0) <= 1e-9);
    Philox rng(900 + g, kStreamError);
    for (int d = 0; d < 2000; ++d) {
      const VectorXcd e = sample_error(sc.user(g, 0).c_inv_sqrt, rng);
      CHECK(sinr_single(w, e, sc, g, 0) >= tau * (1.0 - 1e-9));
    }
  }
}

TEST_CASE("pivot_channel touches and throws on degeneracy") {
  const VectorXcd h = (VectorXcd(2) << cd(1, 2), cd(-0.5, 0.25)).finished();
  const VectorXcd wp = (VectorXcd(2) << cd(0.3, -1), cd(2, 0.7)).finished();
  const VectorXcd q = pivot_channel(wp, h, 0, 0);
  // Touching: Re(q^H w_prev) = |w_prev^H h|, and ||q|| = ||h||.
  const cd p = wp.dot(h);
  CHECK(std::real(q.dot(wp)) == doctest::Approx(std::abs(p)).epsilon(1e-12));
  CHECK(q.norm() == doctest::Approx(h.norm()).epsilon(1e-12));

  const VectorXcd orth = (VectorXcd(2) << cd(0, 0), cd(1, 0)).finished();
  const VectorXcd e1 = (VectorXcd(2) << cd(1, 0), cd(0, 0)).finished();
  CHECK_THROWS_AS(pivot_channel(orth, e1, 1, 3), DegeneratePivot);
  try {
    pivot_channel(orth, e1, 1, 3);
  } catch (const DegeneratePivot& ex) {
    CHECK(ex.group == 1);
    CHECK(ex.user == 3);
  }
}

TEST_CASE("linearized margin majorizes and touches") {
  Philox seeder(7777);
  for (int rep = 0; rep < 200; ++rep) {
    Scenario sc = make_sphere_scenario(3, {2, 1}, 0.2, 1.0, 4000 + rep);
    sc.gamma = 1.0;
    sc.finalize();
    const Beamformer w = random_beamformer(3, 2, 8000 + rep);
    const Beamformer wp = random_beamformer(3, 2, 9000 + rep);
    const double tau = 0.1 + 3.0 * seeder.next_double();
    for (int g = 0; g < 2; ++g) {
      for (int i = 0; i < sc.users_in_group(g); ++i) {
        const double lin = linearized_margin(w, wp, tau, sc, g, i);
        const double exact = margin(w, tau, sc, g, i);
        CHECK(lin >= exact - 1e-10);
        const double at_pivot = linearized_margin(wp, wp, tau, sc, g, i);
        CHECK(at_pivot ==
              doctest::Approx(margin(wp, tau, sc, g, i)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("analytic worst error, hand instance and grid search") {
  const VectorXcd w = (VectorXcd(2) << cd(1, 0), cd(0, 0)).finished();
  const VectorXcd h = (VectorXcd(2) << cd(2, 0), cd(0, 0)).finished();
  const VectorXcd e = analytic_worst_error_single_group(w, h, 0.5);
  CHECK(std::abs(e(0) - cd(-0.5, 0)) < 1e-12);
  CHECK(std::abs(e(1)) < 1e-12);
  CHECK(std::abs(w.dot(h + e)) == doctest::Approx(1.5).epsilon(1e-12));

  // Dense sweep over boundary errors cannot find anything lower.
  Philox rng(1234, kStreamError);
  const double floor = std::abs(w.dot(h + e));
  for (int d = 0; d < 20000; ++d) {
    VectorXcd dir(2);
    for (int m = 0; m < 2; ++m) dir(m) = rng.next_complex_gaussian();
    dir *= 0.5 / dir.norm();
    CHECK(std::abs(w.dot(h + dir)) >= floor - 1e-12);
  }

  CHECK_THROWS_AS(
      analytic_worst_error_single_group(VectorXcd::Zero(2), h, 0.5),
      ZeroBeamformer);
}

TEST_CASE("analytic worst error with complex phase") {
  Philox rng(55, kStreamInit);
  for (int rep = 0; rep < 50; ++rep) {
    VectorXcd w(3), h(3);
    for (int m = 0; m < 3; ++m) {
      w(m) = rng.next_complex_gaussian();
      h(m) = rng.next_complex_gaussian();
    }
    const double eps = 0.3;
    const VectorXcd e = analytic_worst_error_single_group(w, h, eps);
    CHECK(e.norm() == doctest::Approx(eps).epsilon(1e-12));
    const double achieved = std::abs(w.dot(h + e));
    const double predicted = std::abs(w.dot(h)) - eps * w.norm();
    CHECK(achieved ==
          doctest::Approx(std::max(predicted, -predicted)).epsilon(1e-10));
  }
}

TEST_CASE("monte_carlo_worst: analytic candidate and report shape") {
  Scenario sc = make_sphere_scenario(3, {2}, 0.25, 1.0, 42);
  sc.gamma = 1.0;
  sc.finalize();
  Beamformer w = random_beamformer(3, 1, 43);

  const WorstCaseReport rep = monte_carlo_worst(w, sc, 200, 99);
  REQUIRE(rep.users.size() == 2);
  double min_seen = 1e300;
  for (const auto& u : rep.users) {
    REQUIRE(u.analytic_worst.has_value());
    const auto& uc = sc.user(u.group, u.user);
    const double gap = std::abs(w.w[0].dot(uc.h_hat)) - 0.5 * w.w[0].norm();
    const double predicted = gap > 0 ? gap * gap / uc.sigma2 : 0.0;
    CHECK(*u.analytic_worst == doctest::Approx(predicted).epsilon(1e-9));
    CHECK(u.worst <= u.empirical_worst + 1e-15);
    CHECK(u.worst <= *u.analytic_worst + 1e-15);
    min_seen = std::min(min_seen, u.worst);
  }
  CHECK(rep.min_worst_sinr == doctest::Approx(min_seen));
  CHECK(rep.rate == doctest::Approx(std::log2(1.0 + min_seen)));
}

TEST_CASE("monte_carlo_worst is monotone in the draw count") {
  Scenario sc = make_sphere_scenario(3, {2, 2}, 0.25, 1.0, 61);
  sc.gamma = 1.0;
  sc.finalize();
  const Beamformer w = random_beamformer(3, 2, 62);

  const auto a = monte_carlo_worst(w, sc, 50, 7);
  const auto b = monte_carlo_worst(w, sc, 200, 7);
  const auto b2 = monte_carlo_worst(w, sc, 200, 7);
  for (std::size_t u = 0; u < a.users.size(); ++u) {
    // Same seed: the first 50 draws of the longer run are the short run.
    CHECK(b.users[u].empirical_worst <= a.users[u].empirical_worst + 1e-15);
    CHECK(b.users[u].empirical_worst == b2.users[u].empirical_worst);
  }
  const auto c = monte_carlo_worst(w, sc, 200, 8);
  CHECK(c.users[0].empirical_worst != b.users[0].empirical_worst);
}

TEST_CASE("monte_carlo_worst with perfect CSI reports nominal SINR") {
  Scenario sc = make_sphere_scenario(2, {1, 1}, 0.0, 1.0, 71);
  sc.gamma = 1.0;
  sc.finalize();
  const Beamformer w = random_beamformer(2, 2, 72);
  const auto rep = monte_carlo_worst(w, sc, 10, 3);
  const ErrorSample zero = ErrorSample::zero(2, {1, 1});
  for (const auto& u : rep.users) {
    CHECK(u.empirical_worst ==
          doctest::Approx(sinr(w, zero, sc, u.group, u.user)).epsilon(1e-12));
    CHECK_FALSE(u.analytic_worst.has_value());
  }
}

}  // TEST_SUITE
