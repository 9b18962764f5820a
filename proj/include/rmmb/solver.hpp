// SPDX-License-Identifier: Apache-2.0
//
// Dense second-order cone solver.
//
// Standard primal-dual path-following interior-point method on the
// homogeneous self-dual embedding, with Nesterov-Todd scaling and a
// Mehrotra predictor-corrector step. Dense linear algebra is deliberate:
// the cone programs built in this library have tens of variables, where a
// dense reduced KKT solve beats sparse machinery.

#pragma once

#include <Eigen/Dense>
#include <string>

#include "rmmb/socp.hpp"

namespace rmmb {

enum class SolveStatus { Optimal, Infeasible, NumericalTrouble, IterationLimit };

const char* to_string(SolveStatus status);

struct SolverOptions {
  double feastol = 1e-8;   // primal/dual residual tolerance
  double abstol = 1e-8;    // absolute duality gap tolerance
  double reltol = 1e-8;    // relative duality gap tolerance
  int max_iters = 200;
  // When the iteration stalls, the best iterate seen is accepted as Optimal
  // if it meets these looser tolerances (the message records the stall and
  // the post-solve violation re-check still applies); otherwise the stall
  // is reported as NumericalTrouble or IterationLimit.
  double feastol_inacc = 1e-4;
  double abstol_inacc = 5e-5;
  double reltol_inacc = 5e-5;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Eigen::VectorXd x;        // primal point (best iterate on failure)
  double objective = 0.0;   // c^T x
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;         // |c^T x + h^T z + b^T y| (absolute)
  double seconds = 0.0;
  std::string message;

  bool ok() const { return status == SolveStatus::Optimal; }
};

/// Solves the cone program. Status meanings:
///   Optimal          Certified optimum; residuals and gap within the
///                    requested tolerances, and an independent re-check of
///                    the ConeProgram constraints at x passed (violation
///                    <= 1e-7 scaled).
///   Infeasible       Certificate of primal infeasibility.
///   IterationLimit   Iteration budget exhausted without a certificate.
///   NumericalTrouble Everything else (stalls, unbounded/dual-infeasible
///                    detections, factorization breakdown, loose exits).
/// Deterministic: identical program and options give identical output.
SolveOutcome solve(const ConeProgram& prog, const SolverOptions& opts = {});

/// Maximum scaled violation of the program's constraints at x; the
/// independent optimality re-check used by solve() and by tests.
double max_violation(const ConeProgram& prog, const Eigen::VectorXd& x);

}  // namespace rmmb
