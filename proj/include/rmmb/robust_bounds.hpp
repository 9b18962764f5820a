// SPDX-License-Identifier: Apache-2.0
//
// Worst-case SINR machinery: the conservative bound that turns the robust
// SINR constraint into a deterministic one, its MM linearization, and
// worst-case evaluation (analytic for a single spherical group, Monte Carlo
// in general).
//
// For user (i, g) with conservative level tau, define
//
//   zeta(w, tau) = eps * ||w_g|| + sqrt(tau) * sqrt( sum_{l != g}
//                    (|w_l^H h_hat| + eps * ||w_l||)^2 + sigma^2 )
//
// Then zeta(w, tau) - |w_g^H h_hat| <= 0 is sufficient for the worst-case
// SINR of that user to reach tau. The margin is that left-hand side; the
// linearized margin replaces the concave -|w_g^H h_hat| term by its
// tangent at a previous iterate w_prev, which majorizes the margin and
// touches it at w = w_prev.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rmmb/scenario.hpp"

namespace rmmb {

/// Raised when the MM pivot |w_prev_g^H h_hat| falls below 1e-12 and the
/// tangent direction is undefined.
struct DegeneratePivot : std::runtime_error {
  int group;
  int user;
  DegeneratePivot(int g, int i)
      : std::runtime_error("degenerate MM pivot at user (" +
                           std::to_string(i) + ", " + std::to_string(g) + ")"),
        group(g),
        user(i) {}
};

/// Raised by the analytic worst-case error when ||w|| = 0.
struct ZeroBeamformer : std::runtime_error {
  ZeroBeamformer() : std::runtime_error("zero beamformer") {}
};

/// Achieved SINR of user (i, g) under error realization e[g][i]; the same
/// perturbed channel appears in the numerator and the interference terms.
double sinr(const Beamformer& w, const ErrorSample& e, const Scenario& sc,
            int g, int i);

/// SINR for a single user given its error vector directly.
double sinr_single(const Beamformer& w, const Eigen::VectorXcd& e,
                   const Scenario& sc, int g, int i);

/// The conservative bound described above. tau >= 0 required.
double zeta(const Beamformer& w, double tau, const Scenario& sc, int g, int i);

/// margin = zeta(w, tau) - |w_g^H h_hat|; nonpositive margin certifies the
/// worst-case SINR of user (i, g) is at least tau.
double margin(const Beamformer& w, double tau, const Scenario& sc, int g,
              int i);

/// Margin with the |w_g^H h_hat| term linearized at w_prev. Majorizes
/// margin() for every w and equals it at w = w_prev.
/// Throws DegeneratePivot when |w_prev_g^H h_hat| <= 1e-12.
double linearized_margin(const Beamformer& w, const Beamformer& w_prev,
                         double tau, const Scenario& sc, int g, int i);

/// Phase-rotated channel q = exp(-j*arg(w_prev_g^H h_hat)) * h_hat such
/// that the linearized numerator is Re(q^H w_g). Shared with the SOCP
/// builders. Throws DegeneratePivot when the pivot product is below 1e-12.
Eigen::VectorXcd pivot_channel(const Eigen::VectorXcd& w_prev_g,
                               const Eigen::VectorXcd& h_hat, int g, int i);

/// Exact minimizer of |w^H (h_hat + e)| over the sphere ||e|| <= eps for a
/// single group: e = -eps * exp(j*arg(w^H h_hat)) * w / ||w||, which aligns
/// the perturbation against the signal and gives |w^H h_hat| - eps. ||w||.
/// Throws ZeroBeamformer when ||w|| = 0.
Eigen::VectorXcd analytic_worst_error_single_group(const Eigen::VectorXcd& w,
                                                   const Eigen::VectorXcd& h_hat,
                                                   double eps);

/// Worst-case evaluation report. Per user: the minimum sampled SINR, the
/// analytic worst case where it exists (single spherical group), and their
/// minimum. `rate` is log2(1 + min over users of worst SINR).
struct WorstCaseReport {
  struct User {
    int group = 0;
    int user = 0;
    double empirical_worst = 0.0;
    std::optional<double> analytic_worst;
    double worst = 0.0;
  };
  std::vector<User> users;
  double min_worst_sinr = 0.0;
  double rate = 0.0;  // bits/s/Hz
};

/// Monte Carlo worst-case SINR over `n_draws` error realizations per user
/// (plus the analytic candidate when G = 1 and the ellipsoid is a sphere).
/// Draw d of user u comes from a stream keyed by (seed, u, d), so
/// enlarging n_draws keeps earlier draws fixed and the estimate is
/// monotone non-increasing in n_draws under a fixed seed.
WorstCaseReport monte_carlo_worst(const Beamformer& w, const Scenario& sc,
                                  int n_draws, std::uint64_t seed);

}  // namespace rmmb
