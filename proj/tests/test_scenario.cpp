// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rmmb/scenario.hpp"

using namespace rmmb;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cd = std::complex<double>;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("epsilon_of closed forms") {
  // C = I: unit ball, radius 1.
  CHECK(epsilon_of(MatrixXcd::Identity(3, 3)) == doctest::Approx(1.0));
  // Sphere model C = (1/mu^2) I: radius mu.
  CHECK(epsilon_of(MatrixXcd::Identity(2, 2) * 4.0) == doctest::Approx(0.5));
  // Diagonal: radius 1/sqrt(min diagonal entry).
  MatrixXcd d = MatrixXcd::Zero(3, 3);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  d(2, 2) = 25.0;
  CHECK(epsilon_of(d) == doctest::Approx(0.5));
}

TEST_CASE("epsilon_of is invariant under unitary conjugation") {
  Philox rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    MatrixXcd a(3, 3);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a(r, c) = rng.next_complex_gaussian();
    }
    const MatrixXcd c = a * a.adjoint() + MatrixXcd::Identity(3, 3) * 0.1;
    Eigen::HouseholderQR<MatrixXcd> qr(a);
    const MatrixXcd q = qr.householderQ();
    CHECK(epsilon_of(q * c * q.adjoint()) ==
          doctest::Approx(epsilon_of(c)).epsilon(1e-10));
    // Scaling C by k scales the radius by 1/sqrt(k).
    CHECK(epsilon_of(4.0 * c) ==
          doctest::Approx(epsilon_of(c) / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("epsilon_of rejects bad ellipsoids") {
  MatrixXcd m(2, 2);
  m << cd(1, 0), cd(0.5, 0.2), cd(0.1, 0.0), cd(1, 0);  // not Hermitian
  CHECK_THROWS_AS(epsilon_of(m), std::invalid_argument);

  MatrixXcd psd = MatrixXcd::Zero(2, 2);
  psd(0, 0) = 1.0;  // singular, not PD
  CHECK_THROWS_AS(epsilon_of(psd), std::invalid_argument);

  MatrixXcd neg = -MatrixXcd::Identity(2, 2);
  CHECK_THROWS_AS(epsilon_of(neg), std::invalid_argument);

  CHECK_THROWS_AS(epsilon_of(MatrixXcd::Identity(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("hermitian_inverse_sqrt squares back") {
  Philox rng(22);
  MatrixXcd a(3, 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a(r, c) = rng.next_complex_gaussian();
  }
  const MatrixXcd c = a * a.adjoint() + MatrixXcd::Identity(3, 3);
  const MatrixXcd s = hermitian_inverse_sqrt(c);
  CHECK((s * c * s - MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("generate_channels is seeded and group-size independent") {
  const auto h1 = generate_channels(3, {2, 1}, 99);
  const auto h2 = generate_channels(3, {2, 1}, 99);
  CHECK(h1[0][0] == h2[0][0]);
  CHECK(h1[1][0] == h2[1][0]);
  const auto h3 = generate_channels(3, {2, 1}, 100);
  CHECK(h1[0][0] != h3[0][0]);

  // CN(0,1) entries: average squared norm over many users is close to M.
  const int reps = 600;
  double acc = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto h = generate_channels(4, {1}, 5000 + r);
    acc += h[0][0].squaredNorm();
  }
  CHECK(acc / reps == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("sample_error stays inside the ellipsoid") {
  Philox rng(31);
  MatrixXcd a(3, 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a(r, c) = rng.next_complex_gaussian();
  }
  const MatrixXcd c = a * a.adjoint() + MatrixXcd::Identity(3, 3) * 0.5;
  const MatrixXcd cis = hermitian_inverse_sqrt(c);

  Philox draw(32, kStreamError);
  int on_boundary = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const VectorXcd e = sample_error(cis, draw);
    const double q = std::real((e.adjoint() * c * e)(0, 0));
    CHECK(q <= 1.0 + 1e-9);
    if (q > 1.0 - 1e-9) ++on_boundary;
  }
  // Half the draws sit on the boundary by construction.
  CHECK(on_boundary > n / 2 - 200);
  CHECK(on_boundary < n / 2 + 200);
}

TEST_CASE("finalize derives epsilon and validates") {
  Scenario sc = make_sphere_scenario(3, {2, 1}, 0.25, 1.0, 7);
  sc.tau = std::vector<double>{1.0, 1.0};
  sc.finalize();
  CHECK(sc.user(0, 0).epsilon == doctest::Approx(0.5));
  CHECK(sc.total_users() == 3);
  CHECK(sc.flat_index(0, 0) == 0);
  CHECK(sc.flat_index(0, 1) == 1);
  CHECK(sc.flat_index(1, 0) == 2);

  Scenario both = sc;
  both.gamma = 1.0;
  CHECK_THROWS_AS(both.finalize(), std::invalid_argument);

  Scenario neither = sc;
  neither.tau.reset();
  CHECK_THROWS_AS(neither.finalize(), std::invalid_argument);

  Scenario bad_tau = sc;
  bad_tau.tau = std::vector<double>{1.0};  // wrong length
  CHECK_THROWS_AS(bad_tau.finalize(), std::invalid_argument);

  Scenario bad_dim = sc;
  bad_dim.user(0, 0).h_hat = VectorXcd::Ones(2);
  CHECK_THROWS_AS(bad_dim.finalize(), std::invalid_argument);

  Scenario bad_noise = sc;
  bad_noise.user(0, 0).sigma2 = 0.0;
  CHECK_THROWS_AS(bad_noise.finalize(), std::invalid_argument);
}

TEST_CASE("mu2 = 0 means perfect CSI") {
  Scenario sc = make_sphere_scenario(2, {1}, 0.0, 1.0, 3);
  sc.gamma = 1.0;
  sc.finalize();
  CHECK_FALSE(sc.user(0, 0).has_uncertainty());
  CHECK(sc.user(0, 0).epsilon == 0.0);
}

TEST_CASE("without_uncertainty strips ellipsoids only") {
  Scenario sc = make_sphere_scenario(2, {2}, 0.25, 2.0, 11);
  sc.gamma = 3.0;
  sc.finalize();
  const Scenario plain = sc.without_uncertainty();
  CHECK_FALSE(plain.user(0, 0).has_uncertainty());
  CHECK(plain.user(0, 0).epsilon == 0.0);
  CHECK(plain.user(0, 0).h_hat == sc.user(0, 0).h_hat);
  CHECK(plain.user(0, 0).sigma2 == 2.0);
  CHECK(plain.gamma == sc.gamma);
}

TEST_CASE("beamformer power accounting") {
  Beamformer w;
  w.w.push_back((VectorXcd(2) << cd(1, 0), cd(0, 2)).finished());
  w.w.push_back((VectorXcd(2) << cd(0, 0), cd(3, 0)).finished());
  CHECK(w.sum_power() == doctest::Approx(1 + 4 + 9));
  CHECK(w.antenna_power(0) == doctest::Approx(1.0));
  CHECK(w.antenna_power(1) == doctest::Approx(4.0 + 9.0));
  CHECK(w.max_antenna_power() == doctest::Approx(13.0));
}

TEST_CASE("channel CSV round trip") {
  Scenario sc = make_sphere_scenario(3, {2, 2}, 0.25, 1.0, 17);
  sc.gamma = 1.0;
  sc.finalize();
  const auto path = temp_file("rmmb_channels.csv");
  save_channels_csv(sc, path.string());
  const auto back = load_channels_csv(path.string(), 3, {2, 2});
  for (int g = 0; g < 2; ++g) {
    for (int i = 0; i < 2; ++i) {
      CHECK((back[g][i] - sc.user(g, i).h_hat).norm() == 0.0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("beamformer CSV round trip") {
  Philox rng(18);
  Beamformer w;
  for (int g = 0; g < 2; ++g) {
    VectorXcd v(3);
    for (int m = 0; m < 3; ++m) v(m) = rng.next_complex_gaussian();
    w.w.push_back(v);
  }
  const auto path = temp_file("rmmb_bf.csv");
  save_beamformer_csv(w, path.string());
  const Beamformer back = load_beamformer_csv(path.string());
  REQUIRE(back.groups() == 2);
  for (int g = 0; g < 2; ++g) CHECK((back.w[g] - w.w[g]).norm() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("scenario config round trip with channel file") {
  const auto dir = std::filesystem::temp_directory_path();
  Scenario sc = make_sphere_scenario(2, {2, 1}, 0.16, 1.5, 23);
  sc.tau = std::vector<double>{1.0, 2.0};
  sc.mode = PowerMode::PerAntennaPower;
  sc.finalize();
  save_channels_csv(sc, (dir / "rmmb_sc_channels.csv").string());
  {
    std::ofstream cfg(dir / "rmmb_sc.yaml");
    cfg << "m: 2\n"
           "g: 2\n"
           "users_per_group: [2, 1]\n"
           "channels: rmmb_sc_channels.csv\n"
           "noise:\n  sigma2: 1.5\n"
           "error:\n  mu2: 0.16\n"
           "targets:\n  tau: [1.0, 2.0]\n"
           "power:\n  mode: per_antenna\n";
  }
  const Scenario back = load_scenario((dir / "rmmb_sc.yaml").string());
  CHECK(back.M == 2);
  CHECK(back.group_count() == 2);
  CHECK(back.mode == PowerMode::PerAntennaPower);
  REQUIRE(back.tau.has_value());
  CHECK((*back.tau)[1] == 2.0);
  CHECK(back.user(0, 1).sigma2 == 1.5);
  CHECK(back.user(0, 1).epsilon == doctest::Approx(0.4));
  CHECK((back.user(1, 0).h_hat - sc.user(1, 0).h_hat).norm() == 0.0);
  std::filesystem::remove(dir / "rmmb_sc.yaml");
  std::filesystem::remove(dir / "rmmb_sc_channels.csv");
}

TEST_CASE("scenario config can generate channels from a seed") {
  const auto dir = std::filesystem::temp_directory_path();
  {
    std::ofstream cfg(dir / "rmmb_seeded.yaml");
    cfg << "m: 3\n"
           "g: 1\n"
           "users_per_group: 2\n"
           "seed: 77\n"
           "noise:\n  sigma2: 1.0\n"
           "error:\n  mu2: 0.25\n"
           "power:\n  gamma: 4.0\n";
  }
  const Scenario a = load_scenario((dir / "rmmb_seeded.yaml").string());
  const Scenario b = load_scenario((dir / "rmmb_seeded.yaml").string());
  CHECK(a.gamma == 4.0);
  CHECK((a.user(0, 0).h_hat - b.user(0, 0).h_hat).norm() == 0.0);
  const auto expect = generate_channels(3, {2}, 77);
  CHECK((a.user(0, 1).h_hat - expect[0][1]).norm() == 0.0);
  std::filesystem::remove(dir / "rmmb_seeded.yaml");
}

}  // TEST_SUITE
