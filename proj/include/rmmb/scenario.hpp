// SPDX-License-Identifier: Apache-2.0
//
// Problem data for robust multigroup multicast beamforming.
//
// A base station with M antennas serves G multicast groups; every user in
// group g receives the same beamformer w_g. The true channel of user i in
// group g is h = h_hat + e with the error e confined to the ellipsoid
// { e : e^H C e <= 1 }. Uncertainty enters all bounds through
// epsilon = 1/sqrt(lambda_min(C)), the radius of the smallest enclosing
// sphere of that ellipsoid.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmmb/rng.hpp"

namespace rmmb {

enum class PowerMode { SumPower, PerAntennaPower };

/// One user: nominal channel, optional uncertainty ellipsoid, noise power.
/// `epsilon` and `c_inv_sqrt` are derived by Scenario::finalize().
struct UserChannel {
  Eigen::VectorXcd h_hat;
  std::optional<Eigen::MatrixXcd> C;  // Hermitian positive definite
  double sigma2 = 1.0;

  double epsilon = 0.0;           // 1/sqrt(lambda_min(C)); 0 for perfect CSI
  Eigen::MatrixXcd c_inv_sqrt;    // C^{-1/2}; empty for perfect CSI

  bool has_uncertainty() const { return C.has_value(); }
};

/// Beamformer tuple, one weight vector per group.
struct Beamformer {
  std::vector<Eigen::VectorXcd> w;

  int groups() const { return static_cast<int>(w.size()); }
  double sum_power() const;
  double antenna_power(int m) const;
  double max_antenna_power() const;
};

/// One channel-error realization per user, mirroring the group layout.
struct ErrorSample {
  std::vector<std::vector<Eigen::VectorXcd>> e;

  static ErrorSample zero(int M, const std::vector<int>& users_per_group);
};

/// Full problem instance. Groups partition the user set by construction:
/// user (i, g) lives at groups[g][i] and nowhere else. Exactly one of
/// `tau` (power minimization) or `gamma` (max-min fairness) must be set.
class Scenario {
 public:
  int M = 0;
  std::vector<std::vector<UserChannel>> groups;
  PowerMode mode = PowerMode::SumPower;
  std::optional<std::vector<double>> tau;  // per-group SINR targets
  std::optional<double> gamma;             // transmit power budget

  int group_count() const { return static_cast<int>(groups.size()); }
  int users_in_group(int g) const {
    return static_cast<int>(groups[g].size());
  }
  int total_users() const;
  /// Flat user index in group-major order; defines CSV row order and
  /// random-stream assignment.
  int flat_index(int g, int i) const;
  const UserChannel& user(int g, int i) const { return groups[g][i]; }
  UserChannel& user(int g, int i) { return groups[g][i]; }
  std::vector<int> users_per_group() const;

  /// Validates invariants (dimensions, Hermitian PD ellipsoids, positive
  /// noise, mode fields) and fills the derived per-user fields.
  /// Throws std::invalid_argument on violation.
  void finalize();

  /// Copy with all uncertainty removed (perfect CSI), used to produce the
  /// nonrobust baseline design. Evaluation still uses the original.
  Scenario without_uncertainty() const;
};

/// Smallest-enclosing-sphere radius of { e : e^H C e <= 1 }.
/// Requires C Hermitian (max-abs asymmetry <= 1e-10) and positive definite;
/// throws std::invalid_argument otherwise.
double epsilon_of(const Eigen::MatrixXcd& C);

/// Hermitian inverse square root via eigendecomposition.
Eigen::MatrixXcd hermitian_inverse_sqrt(const Eigen::MatrixXcd& C);

/// i.i.d. CN(0,1) channels for every user, addressed by flat user index so
/// the draw for user (g, i) does not depend on other group sizes.
std::vector<std::vector<Eigen::VectorXcd>> generate_channels(
    int M, const std::vector<int>& users_per_group, std::uint64_t seed);

/// Draws one error from { e : e^H C e <= 1 }: an isotropic direction is
/// scaled by a radius that is 1 with probability 1/2 (boundary draw) and
/// uniform on [0, 1) otherwise, then mapped through C^{-1/2}. The boundary
/// mass keeps worst-case estimates from undershooting.
Eigen::VectorXcd sample_error(const Eigen::MatrixXcd& c_inv_sqrt, Philox& rng);

/// Convenience overload drawing from a fresh stream keyed by `seed`.
Eigen::VectorXcd sample_error_seeded(const Eigen::MatrixXcd& C,
                                     std::uint64_t seed);

/// Scenario construction from generated channels with a shared sphere
/// uncertainty model C = (1/mu2) I; mu2 = 0 means perfect CSI.
Scenario make_sphere_scenario(int M, const std::vector<int>& users_per_group,
                              double mu2, double sigma2, std::uint64_t seed);

/// Structured-text scenario description (see README for the schema).
Scenario load_scenario(const std::string& path);

/// Channel matrix I/O: one row per user in flat order, 2M columns of
/// interleaved real and imaginary parts. Locale-independent.
void save_channels_csv(const Scenario& sc, const std::string& path);
std::vector<std::vector<Eigen::VectorXcd>> load_channels_csv(
    const std::string& path, int M, const std::vector<int>& users_per_group);

/// Beamformer I/O in the same interleaved layout, one row per group.
void save_beamformer_csv(const Beamformer& w, const std::string& path);
Beamformer load_beamformer_csv(const std::string& path);

}  // namespace rmmb
