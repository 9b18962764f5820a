// SPDX-License-Identifier: Apache-2.0

#include "rmmb/socp.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rmmb/detail/text.hpp"

namespace rmmb {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class BuildKind { PmPenalized, PmPinned, Feasibility };

/// Writes the real lift of Re(q^H w_g) into row coefficients:
/// Re(q^H w) = Re(q)^T Re(w) + Im(q)^T Im(w).
void add_re_inner(VectorXd& row, int w_off, const Eigen::VectorXcd& q,
                  double scale = 1.0) {
  const int M = static_cast<int>(q.size());
  row.segment(w_off, M) += scale * q.real();
  row.segment(w_off + M, M) += scale * q.imag();
}

/// Rows for (Re(q^H w), Im(q^H w)) as functions of the lifted w block.
void set_inner_rows(MatrixXd& A, int r0, int w_off,
                    const Eigen::VectorXcd& q) {
  const int M = static_cast<int>(q.size());
  A.row(r0).segment(w_off, M) = q.real().transpose();
  A.row(r0).segment(w_off + M, M) = q.imag().transpose();
  A.row(r0 + 1).segment(w_off, M) = q.imag().transpose();
  A.row(r0 + 1).segment(w_off + M, M) = -q.real().transpose();
}

PmSubproblem build(const Scenario& sc, const Beamformer& w_prev,
                   BuildKind kind, double t_level) {
  const int M = sc.M;
  const int G = sc.group_count();
  const int n_users = sc.total_users();
  if (static_cast<int>(w_prev.w.size()) != G) {
    throw std::invalid_argument("pivot beamformer group count mismatch");
  }
  for (const auto& wg : w_prev.w) {
    if (wg.size() != M) {
      throw std::invalid_argument("pivot beamformer length mismatch");
    }
  }
  if (kind == BuildKind::Feasibility) {
    if (!sc.gamma) throw std::invalid_argument("scenario lacks gamma");
    if (t_level < 0.0) throw std::invalid_argument("negative SINR level");
  } else if (!sc.tau) {
    throw std::invalid_argument("scenario lacks tau");
  }

  PmSubproblem sub;
  VariableMap& map = sub.map;
  map.M = M;
  map.G = G;

  int n = 0;
  map.w_offset.resize(G);
  for (int g = 0; g < G; ++g) {
    map.w_offset[g] = n;
    n += 2 * M;
  }
  map.objective_var = n++;
  map.users.resize(G);
  for (int g = 0; g < G; ++g) {
    map.users[g].resize(sc.users_in_group(g));
    for (int i = 0; i < sc.users_in_group(g); ++i) {
      auto& uv = map.users[g][i];
      if (kind == BuildKind::PmPenalized) uv.slack = n++;
      uv.a.assign(G, -1);
      uv.b.assign(G, -1);
      for (int l = 0; l < G; ++l) {
        if (l != g) uv.a[l] = n++;
      }
      for (int l = 0; l < G; ++l) uv.b[l] = n++;
    }
  }
  map.n_vars = n;

  ConeProgram& prog = sub.program;
  prog.n_vars = n;
  prog.c = VectorXd::Zero(n);
  prog.c(map.objective_var) = 1.0;

  for (int g = 0; g < G; ++g) {
    for (int i = 0; i < sc.users_in_group(g); ++i) {
      const auto& uv = map.users[g][i];
      const auto& u = sc.user(g, i);
      const double tau =
          kind == BuildKind::Feasibility ? t_level : (*sc.tau)[g];
      const double sqrt_tau = std::sqrt(tau);

      if (uv.slack >= 0) {
        prog.c(uv.slack) = 1.0;
        LinearConstraint row;
        row.a = VectorXd::Zero(n);
        row.a(uv.slack) = -1.0;
        row.rhs = 0.0;
        prog.linear.push_back(std::move(row));
      }

      // a_{l,u} >= |w_l^H h_hat_u|
      for (int l = 0; l < G; ++l) {
        if (l == g) continue;
        SocConstraint soc;
        soc.A.setZero(2, n);
        set_inner_rows(soc.A, 0, map.w_offset[l], u.h_hat);
        soc.d = VectorXd::Zero(2);
        soc.g = VectorXd::Zero(n);
        soc.g(uv.a[l]) = 1.0;
        soc.h = 0.0;
        prog.socs.push_back(std::move(soc));
      }

      // b_{l,u} >= eps_u * ||w_l||
      for (int l = 0; l < G; ++l) {
        SocConstraint soc;
        soc.A.setZero(2 * M, n);
        soc.A.block(0, map.w_offset[l], 2 * M, 2 * M) =
            u.epsilon * MatrixXd::Identity(2 * M, 2 * M);
        soc.d = VectorXd::Zero(2 * M);
        soc.g = VectorXd::Zero(n);
        soc.g(uv.b[l]) = 1.0;
        soc.h = 0.0;
        prog.socs.push_back(std::move(soc));
      }

      // Master constraint: the linearized conservative margin <= slack
      // (or <= gauge). Written as
      //   || sqrt(tau)*(a_l + b_l) for l != g, sqrt(tau)*sigma ||
      //     <= Re(q^H w_g) - b_g + s (+ m).
      const Eigen::VectorXcd q = pivot_channel(w_prev.w[g], u.h_hat, g, i);
      SocConstraint soc;
      soc.A.setZero(G, n);
      soc.d = VectorXd::Zero(G);
      int row = 0;
      for (int l = 0; l < G; ++l) {
        if (l == g) continue;
        soc.A(row, uv.a[l]) = sqrt_tau;
        soc.A(row, uv.b[l]) = sqrt_tau;
        ++row;
      }
      soc.d(G - 1) = sqrt_tau * std::sqrt(u.sigma2);
      soc.g = VectorXd::Zero(n);
      add_re_inner(soc.g, map.w_offset[g], q);
      soc.g(uv.b[g]) = -1.0;
      if (uv.slack >= 0) soc.g(uv.slack) = 1.0;
      if (kind == BuildKind::Feasibility) soc.g(map.objective_var) = 1.0;
      soc.h = 0.0;
      prog.socs.push_back(std::move(soc));
    }
  }

  // Power: epigraph of the radiated power in the objective variable (power
  // minimization) or a hard budget at gamma (feasibility).
  const bool budget = kind == BuildKind::Feasibility;
  const double cap = budget ? *sc.gamma : 0.0;
  auto power_soc = [&](const std::vector<int>& coords) {
    // ||x||^2 <= r as ||(2x, r-1)|| <= r+1 with x the listed coordinates.
    SocConstraint soc;
    const int k = static_cast<int>(coords.size());
    soc.A.setZero(k + 1, n);
    soc.d = VectorXd::Zero(k + 1);
    soc.g = VectorXd::Zero(n);
    for (int j = 0; j < k; ++j) soc.A(j, coords[j]) = 2.0;
    if (budget) {
      soc.d(k) = cap - 1.0;
      soc.h = cap + 1.0;
    } else {
      soc.A(k, map.objective_var) = 1.0;
      soc.d(k) = -1.0;
      soc.g(map.objective_var) = 1.0;
      soc.h = 1.0;
    }
    prog.socs.push_back(std::move(soc));
  };

  if (sc.mode == PowerMode::SumPower) {
    std::vector<int> coords;
    for (int g = 0; g < G; ++g) {
      for (int j = 0; j < 2 * M; ++j) coords.push_back(map.w_offset[g] + j);
    }
    power_soc(coords);
  } else {
    for (int m = 0; m < M; ++m) {
      std::vector<int> coords;
      for (int g = 0; g < G; ++g) {
        coords.push_back(map.w_offset[g] + m);      // Re w_g[m]
        coords.push_back(map.w_offset[g] + M + m);  // Im w_g[m]
      }
      power_soc(coords);
    }
  }

  return sub;
}

}  // namespace

Eigen::VectorXcd VariableMap::group_weights(const Eigen::VectorXd& x,
                                            int g) const {
  Eigen::VectorXcd wg(M);
  for (int m = 0; m < M; ++m) {
    wg(m) = {x(w_offset[g] + m), x(w_offset[g] + M + m)};
  }
  return wg;
}

PmSubproblem build_pm_subproblem(const Scenario& sc, const Beamformer& w_prev,
                                 SlackMode slack_mode) {
  return build(sc, w_prev,
               slack_mode == SlackMode::Penalized ? BuildKind::PmPenalized
                                                  : BuildKind::PmPinned,
               0.0);
}

PmSubproblem build_feasibility_subproblem(const Scenario& sc,
                                          const Beamformer& w_prev,
                                          double t) {
  return build(sc, w_prev, BuildKind::Feasibility, t);
}

Beamformer extract_beamformer(const Eigen::VectorXd& x,
                              const VariableMap& map) {
  if (x.size() != map.n_vars) {
    throw std::invalid_argument("solution vector does not match the map");
  }
  Beamformer w;
  w.w.reserve(map.G);
  for (int g = 0; g < map.G; ++g) w.w.push_back(map.group_weights(x, g));
  return w;
}

double slack_sum(const Eigen::VectorXd& x, const VariableMap& map) {
  double total = 0.0;
  for (const auto& grp : map.users) {
    for (const auto& uv : grp) {
      if (uv.slack >= 0) total += x(uv.slack);
    }
  }
  return total;
}

std::vector<double> slack_values(const Eigen::VectorXd& x,
                                 const VariableMap& map) {
  std::vector<double> out;
  for (const auto& grp : map.users) {
    for (const auto& uv : grp) {
      if (uv.slack >= 0) out.push_back(x(uv.slack));
    }
  }
  return out;
}

void ConeProgram::dump_sparse(std::ostream& os) const {
  using detail::format_double;
  os << "# cone program: n=" << n_vars << " linear=" << linear.size()
     << " soc=" << socs.size() << "\n";
  os << "# obj <var> <coef> | lin <row> <var> <coef> | "
        "linrhs <row> <le|eq> <rhs> | soc <k> <row> <var> <coef> | "
        "socoff <k> <row> <value>; soc row 0 is the bound side\n";
  for (int j = 0; j < n_vars; ++j) {
    if (c(j) != 0.0) os << "obj " << j << ' ' << format_double(c(j)) << "\n";
  }
  for (std::size_t r = 0; r < linear.size(); ++r) {
    const auto& row = linear[r];
    for (int j = 0; j < n_vars; ++j) {
      if (row.a(j) != 0.0) {
        os << "lin " << r << ' ' << j << ' ' << format_double(row.a(j))
           << "\n";
      }
    }
    os << "linrhs " << r << ' '
       << (row.kind == LinearConstraint::Kind::Equal ? "eq" : "le") << ' '
       << format_double(row.rhs) << "\n";
  }
  for (std::size_t k = 0; k < socs.size(); ++k) {
    const auto& soc = socs[k];
    for (int j = 0; j < n_vars; ++j) {
      if (soc.g(j) != 0.0) {
        os << "soc " << k << " 0 " << j << ' ' << format_double(soc.g(j))
           << "\n";
      }
    }
    if (soc.h != 0.0) os << "socoff " << k << " 0 " << format_double(soc.h) << "\n";
    for (int r = 0; r < soc.A.rows(); ++r) {
      for (int j = 0; j < n_vars; ++j) {
        if (soc.A(r, j) != 0.0) {
          os << "soc " << k << ' ' << r + 1 << ' ' << j << ' '
             << format_double(soc.A(r, j)) << "\n";
        }
      }
      if (soc.d(r) != 0.0) {
        os << "socoff " << k << ' ' << r + 1 << ' ' << format_double(soc.d(r))
           << "\n";
      }
    }
  }
}

}  // namespace rmmb
