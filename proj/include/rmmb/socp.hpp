// SPDX-License-Identifier: Apache-2.0
//
// Cone-program construction for the MM subproblems.
//
// Complex beamformers are lifted to real variables (per group the 2M-block
// [Re w_g; Im w_g]). Inner products against a fixed channel become linear
// forms in the lifted variables and Euclidean norms are preserved, so each
// conservative-bound constraint turns into a small set of second-order
// cones, with auxiliary epigraph variables
//
//   a_{l,u} >= |w_l^H h_hat_u|   (dimension-3 cone per interferer l != g)
//   b_{l,u} >= eps_u * ||w_l||   (dimension 2M+1 cone, all l)
//
// and one master cone per user tying them to the linearized margin. Power
// enters either as one rotated cone (sum power) or M of them (per
// antenna); the rotated cone ||x||^2 <= r is written ||(2x, r-1)|| <= r+1.

#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "rmmb/robust_bounds.hpp"
#include "rmmb/scenario.hpp"

namespace rmmb {

/// One linear row: a^T x <= rhs or a^T x == rhs.
struct LinearConstraint {
  enum class Kind { LessEqual, Equal };
  Eigen::VectorXd a;
  double rhs = 0.0;
  Kind kind = Kind::LessEqual;
};

/// ||A x + d||_2 <= g^T x + h.
struct SocConstraint {
  Eigen::MatrixXd A;
  Eigen::VectorXd d;
  Eigen::VectorXd g;
  double h = 0.0;
};

/// min c^T x subject to the rows and cones above.
struct ConeProgram {
  int n_vars = 0;
  Eigen::VectorXd c;
  std::vector<LinearConstraint> linear;
  std::vector<SocConstraint> socs;

  /// Writes a plain-text sparse dump: a header, then one line per nonzero
  /// "<constraint-id> <var-id> <coefficient>" (see socp.cpp for the id
  /// scheme). Intended for debugging and golden-file tests.
  void dump_sparse(std::ostream& os) const;
};

/// Where each model quantity lives inside the flat variable vector.
/// Offsets are disjoint and cover [0, n_vars) exactly.
struct VariableMap {
  int n_vars = 0;
  int M = 0;
  int G = 0;
  std::vector<int> w_offset;  // per group; 2M reals, Re block then Im block
  int objective_var = -1;     // r (power min) or the feasibility gauge m

  struct UserVars {
    int slack = -1;            // s_{i,g}; -1 when slacks are pinned to zero
    std::vector<int> a;        // a_{l,u} per group l; -1 at l = g
    std::vector<int> b;        // b_{l,u} per group l
  };
  std::vector<std::vector<UserVars>> users;  // [g][i]

  Eigen::VectorXcd group_weights(const Eigen::VectorXd& x, int g) const;
};

enum class SlackMode { Penalized, PinnedZero };

struct PmSubproblem {
  ConeProgram program;
  VariableMap map;
};

/// Power-minimization MM subproblem at pivot w_prev: minimize r (+ sum of
/// slacks when penalized) subject to linearized conservative constraints
/// at targets sc.tau and the power epigraph for sc.mode. With
/// SlackMode::PinnedZero the slack variables are omitted entirely.
/// Throws DegeneratePivot (after the caller's retries) via pivot_channel.
PmSubproblem build_pm_subproblem(const Scenario& sc, const Beamformer& w_prev,
                                 SlackMode slack_mode);

/// Feasibility MM subproblem at pivot w_prev and common SINR level t:
/// minimize the gauge m with every linearized margin <= m and the power
/// budget sc.gamma enforced exactly. Level t is feasible when the optimal
/// gauge is <= 1e-7.
PmSubproblem build_feasibility_subproblem(const Scenario& sc,
                                          const Beamformer& w_prev, double t);

/// Reads the beamformer out of a solution vector.
Beamformer extract_beamformer(const Eigen::VectorXd& x, const VariableMap& map);

/// Sum of slack variables at x; 0 for pinned subproblems.
double slack_sum(const Eigen::VectorXd& x, const VariableMap& map);

/// Per-user slack values at x (group-major flat order); empty when pinned.
std::vector<double> slack_values(const Eigen::VectorXd& x,
                                 const VariableMap& map);

}  // namespace rmmb
