// SPDX-License-Identifier: Apache-2.0
//
// The two majorization-minimization driver loops.
//
// Power minimization: iterate the slack-penalized subproblem until the
// slacks vanish, then pin them to zero and keep iterating until the power
// objective settles. The penalized objective r + sum(s) is non-increasing
// across iterations; once slacks are pinned they never come back.
//
// Max-min fairness: alternate an inner bisection on the common SINR level t
// (each probe solves a feasibility gauge at the current pivot) with pivot
// updates to the last feasible beamformer. t never decreases: each outer
// round starts its bracket at the previously certified level.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmmb/scenario.hpp"
#include "rmmb/socp.hpp"
#include "rmmb/solver.hpp"

namespace rmmb {

struct AlgorithmConfig {
  double xi = 1e-3;    // power-min stop: |r_k - r_{k-1}| <= xi
  double xi1 = 1e-3;   // bisection stop: t_U - t_L <= xi1
  double xi2 = 1e-3;   // outer stop: |t_k - t_{k-1}| <= xi2
  double t_lower = 0.0;
  std::optional<double> t_upper;  // default: gamma * max_u (||h_hat_u|| +
                                  // eps_u)^2 / sigma2_u
  int max_outer = 50;
  std::uint64_t seed = 0;
  // Subproblem solves ask for more accuracy than the solver's user-facing
  // default so the MM descent holds to 1e-9; when a solve stalls short of
  // this the drivers retry once at the default tolerances.
  SolverOptions solver{.feastol = 1e-9, .abstol = 1e-10, .reltol = 1e-10};
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;  // r (power min) or t (max-min)
  double slack_sum = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  int bisection_steps = 0;  // 0 for power minimization
  double seconds = 0.0;
};

/// Per-outer-iteration trace of an MM run.
struct MMTrace {
  std::vector<IterationRecord> iterations;

  int outer_iterations() const {
    return static_cast<int>(iterations.size());
  }
  void save_csv(const std::string& path) const;
};

struct PowerMinResult {
  Beamformer w;
  double power = 0.0;               // final objective r
  std::vector<double> slacks;       // per user, group-major flat order
  double slack_total = 0.0;
  bool feasible = false;            // all slacks <= 1e-9
  MMTrace trace;
};

struct MaxMinResult {
  Beamformer w;
  double t = 0.0;  // certified common SINR level
  MMTrace trace;
};

struct MaxOuterExceeded : std::runtime_error {
  int iterations;
  explicit MaxOuterExceeded(int iters)
      : std::runtime_error("MM loop hit the outer iteration limit (" +
                           std::to_string(iters) + ")"),
        iterations(iters) {}
};

struct BracketError : std::runtime_error {
  explicit BracketError(double t_upper)
      : std::runtime_error("bisection bracket still accepts its upper end "
                           "after 10 doublings (t_U = " +
                           std::to_string(t_upper) + ")") {}
};

struct SolverFailure : std::runtime_error {
  SolveStatus status;
  SolverFailure(SolveStatus st, const std::string& what)
      : std::runtime_error(what), status(st) {}
};

struct MonotonicityViolation : std::runtime_error {
  explicit MonotonicityViolation(const std::string& what)
      : std::runtime_error(what) {}
};

/// Random starting beamformer. Power-minimization mode: unit-norm complex
/// Gaussian per group. Max-min mode: the same directions scaled so each
/// group carries sqrt(gamma/G), normalized in 2-norm (sum power) or
/// max-norm (per antenna) so the power budget holds at the start.
Beamformer initial_beamformer(const Scenario& sc, std::uint64_t seed);

/// MM power minimization at targets sc.tau. Requires sc.tau. Returns the
/// final beamformer, power, slacks and trace; `feasible` is false when the
/// slacks never vanished (the instance resisted the targets), which is a
/// normal return, not an error.
/// Throws MaxOuterExceeded, DegeneratePivot (after perturbation retries),
/// SolverFailure, MonotonicityViolation.
PowerMinResult power_min(const Scenario& sc, const AlgorithmConfig& cfg = {});

/// MM max-min fairness under budget sc.gamma. Requires sc.gamma. The
/// returned t is the last bisection level certified feasible; the returned
/// beamformer satisfies margin(w, t) <= 1e-6 for every user whenever any
/// level was certified.
/// Throws MaxOuterExceeded, BracketError, DegeneratePivot, SolverFailure.
MaxMinResult max_min_fair(const Scenario& sc, const AlgorithmConfig& cfg = {});

/// Default bisection upper bound used when cfg.t_upper is unset.
double default_t_upper(const Scenario& sc);

}  // namespace rmmb
