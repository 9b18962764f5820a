// SPDX-License-Identifier: Apache-2.0

#include "rmmb/robust_bounds.hpp"

#include <algorithm>
#include <cmath>

namespace rmmb {

namespace {

constexpr double kPivotTol = 1e-12;

/// True when C is a positive multiple of the identity (relative tol 1e-12),
/// so the error set is a sphere and the analytic worst case applies.
bool is_sphere(const Eigen::MatrixXcd& C) {
  const int M = static_cast<int>(C.rows());
  const double c0 = C(0, 0).real();
  if (!(c0 > 0.0)) return false;
  const double tol = 1e-12 * c0;
  for (int r = 0; r < M; ++r) {
    for (int c = 0; c < M; ++c) {
      const std::complex<double> want = (r == c) ? c0 : 0.0;
      if (std::abs(C(r, c) - want) > tol) return false;
    }
  }
  return true;
}

}  // namespace

double sinr_single(const Beamformer& w, const Eigen::VectorXcd& e,
                   const Scenario& sc, int g, int i) {
  const auto& u = sc.user(g, i);
  const Eigen::VectorXcd h = u.h_hat + e;
  const double signal = std::norm(w.w[g].dot(h));
  double denom = u.sigma2;
  for (int l = 0; l < w.groups(); ++l) {
    if (l == g) continue;
    denom += std::norm(w.w[l].dot(h));
  }
  return signal / denom;
}

double sinr(const Beamformer& w, const ErrorSample& e, const Scenario& sc,
            int g, int i) {
  return sinr_single(w, e.e[g][i], sc, g, i);
}

double zeta(const Beamformer& w, double tau, const Scenario& sc, int g,
            int i) {
  const auto& u = sc.user(g, i);
  double interference = u.sigma2;
  for (int l = 0; l < w.groups(); ++l) {
    if (l == g) continue;
    const double term = std::abs(w.w[l].dot(u.h_hat)) +
                        u.epsilon * w.w[l].norm();
    interference += term * term;
  }
  return u.epsilon * w.w[g].norm() + std::sqrt(tau) * std::sqrt(interference);
}

double margin(const Beamformer& w, double tau, const Scenario& sc, int g,
              int i) {
  const auto& u = sc.user(g, i);
  return zeta(w, tau, sc, g, i) - std::abs(w.w[g].dot(u.h_hat));
}

Eigen::VectorXcd pivot_channel(const Eigen::VectorXcd& w_prev_g,
                               const Eigen::VectorXcd& h_hat, int g, int i) {
  const std::complex<double> p = w_prev_g.dot(h_hat);  // w_prev_g^H h_hat
  const double mag = std::abs(p);
  if (mag <= kPivotTol) throw DegeneratePivot(g, i);
  // q^H w = (p/|p|) h_hat^H w, so Re(q^H w_prev) = |p| (touching point).
  return (std::conj(p) / mag) * h_hat;
}

double linearized_margin(const Beamformer& w, const Beamformer& w_prev,
                         double tau, const Scenario& sc, int g, int i) {
  const auto& u = sc.user(g, i);
  const Eigen::VectorXcd q = pivot_channel(w_prev.w[g], u.h_hat, g, i);
  // Re(q^H w_g) is the tangent to |w_g^H h_hat| at w_prev.
  return zeta(w, tau, sc, g, i) - q.dot(w.w[g]).real();
}

Eigen::VectorXcd analytic_worst_error_single_group(
    const Eigen::VectorXcd& w, const Eigen::VectorXcd& h_hat, double eps) {
  const double wn = w.norm();
  if (wn == 0.0) throw ZeroBeamformer();
  const std::complex<double> p = w.dot(h_hat);  // w^H h_hat
  const double mag = std::abs(p);
  // Phase convention for a zero inner product does not matter: any phase
  // yields the same |w^H (h_hat + e)| = eps * ||w||.
  const std::complex<double> phase = (mag > 0.0) ? p / mag : 1.0;
  return (-eps * phase / wn) * w;
}

WorstCaseReport monte_carlo_worst(const Beamformer& w, const Scenario& sc,
                                  int n_draws, std::uint64_t seed) {
  WorstCaseReport rep;
  const bool single_group = sc.group_count() == 1;
  double min_worst = std::numeric_limits<double>::infinity();

  for (int g = 0; g < sc.group_count(); ++g) {
    for (int i = 0; i < sc.users_in_group(g); ++i) {
      const auto& u = sc.user(g, i);
      const auto flat = static_cast<std::uint32_t>(sc.flat_index(g, i));

      WorstCaseReport::User row;
      row.group = g;
      row.user = i;

      double emp = std::numeric_limits<double>::infinity();
      if (!u.has_uncertainty()) {
        emp = sinr_single(w, Eigen::VectorXcd::Zero(sc.M), sc, g, i);
      } else {
        for (int d = 0; d < n_draws; ++d) {
          Philox rng(seed, kStreamError, flat,
                     static_cast<std::uint32_t>(d));
          const auto e = sample_error(u.c_inv_sqrt, rng);
          emp = std::min(emp, sinr_single(w, e, sc, g, i));
        }
        if (n_draws <= 0) {
          emp = sinr_single(w, Eigen::VectorXcd::Zero(sc.M), sc, g, i);
        }
      }
      row.empirical_worst = emp;
      row.worst = emp;

      if (single_group && u.has_uncertainty() && is_sphere(*u.C) &&
          w.w[g].norm() > 0.0) {
        const double lower =
            std::abs(w.w[g].dot(u.h_hat)) - u.epsilon * w.w[g].norm();
        const double clamped = std::max(lower, 0.0);
        row.analytic_worst = clamped * clamped / u.sigma2;
        row.worst = std::min(row.worst, *row.analytic_worst);
      }

      min_worst = std::min(min_worst, row.worst);
      rep.users.push_back(std::move(row));
    }
  }

  rep.min_worst_sinr = min_worst;
  rep.rate = std::log2(1.0 + min_worst);
  return rep;
}

}  // namespace rmmb
