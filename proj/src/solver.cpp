// SPDX-License-Identifier: Apache-2.0
//
// Homogeneous self-dual embedding of
//
//   min c^T x   s.t.  A x = b,  G x + s = h,  s in K,
//
// K a product of a nonnegative orthant and second-order cones. Each
// iteration updates the Nesterov-Todd scaling W (W s' = W^{-T} z' on the
// central path), then takes a Mehrotra predictor-corrector step. The KKT
// system
//
//   [ 0   A^T  G^T ] [dx]   [bx]
//   [ A    0    0  ] [dy] = [by]
//   [ G    0  -W^2 ] [dz]   [bz]
//
// is solved by eliminating dz: (G^T W^{-2} G) dx (+ A^T dy) = bx + G^T
// W^{-2} bz, a dense Cholesky (or LU with equalities) of size n. Two
// rounds of iterative refinement against the exact equations absorb the
// regularization used to keep factorizations alive.

#include "rmmb/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rmmb {

namespace {

constexpr double kStepMax = 0.999;
constexpr double kStepMin = 1e-6;
constexpr double kGamma = 0.99;  // step damping on the combined step
constexpr double kSigmaMin = 1e-4;
constexpr double kSigmaMax = 0.99;
constexpr double kViolationTol = 1e-7;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ConeLayout {
  int l = 0;                 // nonnegative orthant size
  std::vector<int> dim;      // second-order cone sizes
  std::vector<int> start;    // offset of each cone within an m-vector
  int m = 0;

  int degree() const { return l + static_cast<int>(dim.size()); }
};

struct StdForm {
  int n = 0, p = 0;
  ConeLayout cone;
  VectorXd c, b, h;
  MatrixXd A, G;
};

StdForm standardize(const ConeProgram& prog) {
  if (prog.n_vars <= 0) throw std::invalid_argument("program has no variables");
  if (prog.c.size() != prog.n_vars) {
    throw std::invalid_argument("objective length mismatch");
  }
  int n_ineq = 0, n_eq = 0;
  for (const auto& row : prog.linear) {
    if (row.a.size() != prog.n_vars) {
      throw std::invalid_argument("linear row length mismatch");
    }
    (row.kind == LinearConstraint::Kind::Equal ? n_eq : n_ineq)++;
  }
  for (const auto& soc : prog.socs) {
    if (soc.A.cols() != prog.n_vars || soc.g.size() != prog.n_vars ||
        soc.d.size() != soc.A.rows()) {
      throw std::invalid_argument("cone constraint dimension mismatch");
    }
  }

  StdForm f;
  f.n = prog.n_vars;
  f.p = n_eq;
  f.cone.l = n_ineq;
  int m = n_ineq;
  for (const auto& soc : prog.socs) {
    f.cone.start.push_back(m);
    f.cone.dim.push_back(static_cast<int>(soc.A.rows()) + 1);
    m += f.cone.dim.back();
  }
  f.cone.m = m;

  f.c = prog.c;
  f.A.setZero(n_eq, f.n);
  f.b.setZero(n_eq);
  f.G.setZero(m, f.n);
  f.h.setZero(m);

  int ie = 0, ii = 0;
  for (const auto& row : prog.linear) {
    if (row.kind == LinearConstraint::Kind::Equal) {
      f.A.row(ie) = row.a.transpose();
      f.b(ie) = row.rhs;
      ++ie;
    } else {
      f.G.row(ii) = row.a.transpose();
      f.h(ii) = row.rhs;
      ++ii;
    }
  }
  for (std::size_t k = 0; k < prog.socs.size(); ++k) {
    const auto& soc = prog.socs[k];
    const int r0 = f.cone.start[k];
    f.G.row(r0) = -soc.g.transpose();
    f.h(r0) = soc.h;
    f.G.middleRows(r0 + 1, soc.A.rows()) = -soc.A;
    f.h.segment(r0 + 1, soc.A.rows()) = soc.d;
  }
  return f;
}

/// s = r + (1 + alpha) e, alpha the largest cone violation of r; e is the
/// cone identity (ones on the orthant, (1, 0, ...) per second-order cone).
VectorXd bring_to_cone(const ConeLayout& cone, const VectorXd& r) {
  double alpha = -1e-3;
  for (int i = 0; i < cone.l; ++i) alpha = std::max(alpha, -r(i));
  for (std::size_t k = 0; k < cone.dim.size(); ++k) {
    const int s = cone.start[k], d = cone.dim[k];
    alpha = std::max(alpha, r.segment(s + 1, d - 1).norm() - r(s));
  }
  VectorXd out = r;
  for (int i = 0; i < cone.l; ++i) out(i) += 1.0 + alpha;
  for (std::size_t k = 0; k < cone.dim.size(); ++k) out(cone.start[k]) += 1.0 + alpha;
  return out;
}

/// u o v in the Jordan algebra of K.
VectorXd cone_product(const ConeLayout& cone, const VectorXd& u,
                      const VectorXd& v) {
  VectorXd w(cone.m);
  w.head(cone.l) = u.head(cone.l).cwiseProduct(v.head(cone.l));
  for (std::size_t k = 0; k < cone.dim.size(); ++k) {
    const int s = cone.start[k], d = cone.dim[k];
    w(s) = u.segment(s, d).dot(v.segment(s, d));
    w.segment(s + 1, d - 1) = u(s) * v.segment(s + 1, d - 1) +
                              v(s) * u.segment(s + 1, d - 1);
  }
  return w;
}

/// v = u \ w, the inverse of the Jordan product by u.
VectorXd cone_divide(const ConeLayout& cone, const VectorXd& u,
                     const VectorXd& w) {
  VectorXd v(cone.m);
  v.head(cone.l) = w.head(cone.l).cwiseQuotient(u.head(cone.l));
  for (std::size_t k = 0; k < cone.dim.size(); ++k) {
    const int s = cone.start[k], d = cone.dim[k];
    const auto u1 = u.segment(s + 1, d - 1);
    const auto w1 = w.segment(s + 1, d - 1);
    const double rho = u(s) * u(s) - u1.squaredNorm();
    const double zeta = u1.dot(w1);
    v(s) = (u(s) * w(s) - zeta) / rho;
    v.segment(s + 1, d - 1) = ((zeta / u(s) - w(s)) / rho) * u1 + w1 / u(s);
  }
  return v;
}

/// Nesterov-Todd scaling. For the orthant W is diag(sqrt(s/z)); for each
/// second-order cone W = eta * Wbar with Wbar determined by the unit
/// hyperbolic vector wbar = (a, q), a^2 - ||q||^2 = 1.
struct Scaling {
  ConeLayout cone;
  VectorXd lp_w2;  // s_i / z_i
  struct Soc {
    double eta = 1.0, eta2 = 1.0, a = 1.0;
    VectorXd q;
  };
  std::vector<Soc> soc;
  VectorXd lambda;  // scaled point W z = W^{-1} s

  void set_identity(const ConeLayout& layout) {
    cone = layout;
    lp_w2 = VectorXd::Ones(cone.l);
    soc.clear();
    for (int d : cone.dim) {
      Soc s;
      s.q = VectorXd::Zero(d - 1);
      soc.push_back(std::move(s));
    }
    lambda = VectorXd::Zero(cone.m);
  }

  /// Recomputes the scaling at (s, z); false when either point has left
  /// the cone interior.
  bool update(const VectorXd& s, const VectorXd& z) {
    for (int i = 0; i < cone.l; ++i) {
      if (!(s(i) > 0.0) || !(z(i) > 0.0)) return false;
      lp_w2(i) = s(i) / z(i);
      lambda(i) = std::sqrt(s(i) * z(i));
    }
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      const int st = cone.start[k], d = cone.dim[k];
      const auto sk = s.segment(st, d);
      const auto zk = z.segment(st, d);
      const double sres = sk(0) * sk(0) - sk.tail(d - 1).squaredNorm();
      const double zres = zk(0) * zk(0) - zk.tail(d - 1).squaredNorm();
      if (!(sres > 0.0) || !(zres > 0.0) || !(sk(0) > 0.0) || !(zk(0) > 0.0)) {
        return false;
      }
      const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
      auto& w = soc[k];
      w.eta2 = snorm / znorm;
      w.eta = std::sqrt(w.eta2);
      const VectorXd sbar = sk / snorm;
      const VectorXd zbar = zk / znorm;
      const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) * 0.5);
      w.a = (sbar(0) + zbar(0)) / (2.0 * gamma);
      w.q = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);

      // lambda = W z, written blockwise to avoid forming Wbar.
      const auto z1 = zk.tail(d - 1);
      const double qtz = w.q.dot(z1);
      lambda(st) = w.eta * (w.a * zk(0) + qtz);
      lambda.segment(st + 1, d - 1) =
          w.eta * (z1 + (zk(0) + qtz / (1.0 + w.a)) * w.q);
    }
    return true;
  }

  VectorXd apply_W(const VectorXd& v) const {
    VectorXd out(cone.m);
    out.head(cone.l) = lp_w2.cwiseSqrt().cwiseProduct(v.head(cone.l));
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      const int st = cone.start[k], d = cone.dim[k];
      const auto& w = soc[k];
      const auto v1 = v.segment(st + 1, d - 1);
      const double qtv = w.q.dot(v1);
      out(st) = w.eta * (w.a * v(st) + qtv);
      out.segment(st + 1, d - 1) =
          w.eta * (v1 + (v(st) + qtv / (1.0 + w.a)) * w.q);
    }
    return out;
  }

  VectorXd apply_Winv(const VectorXd& v) const {
    VectorXd out(cone.m);
    out.head(cone.l) =
        v.head(cone.l).cwiseQuotient(lp_w2.cwiseSqrt());
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      const int st = cone.start[k], d = cone.dim[k];
      const auto& w = soc[k];
      const auto v1 = v.segment(st + 1, d - 1);
      const double qtv = w.q.dot(v1);
      out(st) = (w.a * v(st) - qtv) / w.eta;
      out.segment(st + 1, d - 1) =
          (v1 + (-v(st) + qtv / (1.0 + w.a)) * w.q) / w.eta;
    }
    return out;
  }

  VectorXd apply_W2(const VectorXd& v) const {
    VectorXd out(cone.m);
    out.head(cone.l) = lp_w2.cwiseProduct(v.head(cone.l));
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      const int st = cone.start[k], d = cone.dim[k];
      const auto& w = soc[k];
      const auto vk = v.segment(st, d);
      // W^2 = eta^2 (2 wbar wbar^T - J)
      VectorXd wbar(d);
      wbar(0) = w.a;
      wbar.tail(d - 1) = w.q;
      const double t = wbar.dot(vk);
      VectorXd Jv(d);
      Jv(0) = vk(0);
      Jv.tail(d - 1) = -vk.tail(d - 1);
      out.segment(st, d) = w.eta2 * (2.0 * t * wbar - Jv);
    }
    return out;
  }

  VectorXd apply_W2inv(const VectorXd& v) const {
    VectorXd out(cone.m);
    out.head(cone.l) = v.head(cone.l).cwiseQuotient(lp_w2);
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      const int st = cone.start[k], d = cone.dim[k];
      const auto& w = soc[k];
      const auto vk = v.segment(st, d);
      // W^{-2} = eta^{-2} (2 (J wbar)(J wbar)^T - J)
      VectorXd jw(d);
      jw(0) = w.a;
      jw.tail(d - 1) = -w.q;
      const double t = jw.dot(vk);
      VectorXd Jv(d);
      Jv(0) = vk(0);
      Jv.tail(d - 1) = -vk.tail(d - 1);
      out.segment(st, d) = (2.0 * t * jw - Jv) / w.eta2;
    }
    return out;
  }

  /// (W^2)^{-1} B for an m-row matrix, used to assemble G^T W^{-2} G.
  MatrixXd apply_W2inv_mat(const MatrixXd& B) const {
    MatrixXd out(B.rows(), B.cols());
    out.topRows(cone.l) = lp_w2.cwiseInverse().asDiagonal() * B.topRows(cone.l);
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      const int st = cone.start[k], d = cone.dim[k];
      const auto& w = soc[k];
      const auto Bk = B.middleRows(st, d);
      VectorXd jw(d);
      jw(0) = w.a;
      jw.tail(d - 1) = -w.q;
      MatrixXd JB = Bk;
      JB.bottomRows(d - 1) = -JB.bottomRows(d - 1);
      out.middleRows(st, d) =
          (2.0 * jw * (jw.transpose() * Bk) - JB) / w.eta2;
    }
    return out;
  }
};

/// Reduced KKT solve with the current scaling.
struct Kkt {
  const StdForm* f = nullptr;
  const Scaling* W = nullptr;
  MatrixXd W2invG;  // (W^2)^{-1} G
  Eigen::LLT<MatrixXd> llt;
  Eigen::FullPivLU<MatrixXd> lu;

  bool factor(const StdForm& form, const Scaling& scaling) {
    f = &form;
    W = &scaling;
    W2invG = scaling.apply_W2inv_mat(form.G);
    MatrixXd H = form.G.transpose() * W2invG;
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    if (form.p == 0) {
      for (double delta : {0.0, 1e-12, 1e-10, 1e-8, 1e-6}) {
        MatrixXd Hreg = H;
        Hreg.diagonal().array() += delta * scale;
        llt.compute(Hreg);
        if (llt.info() == Eigen::Success) return true;
      }
      return false;
    }
    MatrixXd K(form.n + form.p, form.n + form.p);
    K.setZero();
    K.topLeftCorner(form.n, form.n) = H;
    K.topRightCorner(form.n, form.p) = form.A.transpose();
    K.bottomLeftCorner(form.p, form.n) = form.A;
    K.bottomRightCorner(form.p, form.p).diagonal().array() -= 1e-12 * scale;
    lu.compute(K);
    return lu.isInvertible();
  }

  void core_solve(const VectorXd& bx, const VectorXd& by, const VectorXd& bz,
                  VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
    const VectorXd w2bz = W->apply_W2inv(bz);
    const VectorXd rx = bx + f->G.transpose() * w2bz;
    if (f->p == 0) {
      dx = llt.solve(rx);
      dy.resize(0);
    } else {
      VectorXd rhs(f->n + f->p);
      rhs << rx, by;
      const VectorXd sol = lu.solve(rhs);
      dx = sol.head(f->n);
      dy = sol.tail(f->p);
    }
    dz = W2invG * dx - w2bz;
  }

  /// core_solve plus two rounds of refinement against the exact equations.
  void solve(const VectorXd& bx, const VectorXd& by, const VectorXd& bz,
             VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
    core_solve(bx, by, bz, dx, dy, dz);
    for (int round = 0; round < 2; ++round) {
      VectorXd r1 = bx - f->G.transpose() * dz;
      if (f->p > 0) r1 -= f->A.transpose() * dy;
      const VectorXd r2 = f->p > 0
                              ? VectorXd(by - f->A * dx)
                              : VectorXd();
      const VectorXd r3 = bz - (f->G * dx - W->apply_W2(dz));
      const double res = std::max({r1.lpNorm<Eigen::Infinity>(),
                                   f->p > 0 ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                   r3.lpNorm<Eigen::Infinity>()});
      if (!(res > 1e-14)) break;
      VectorXd ex, ey, ez;
      core_solve(r1, r2, r3, ex, ey, ez);
      dx += ex;
      if (f->p > 0) dy += ey;
      dz += ez;
    }
  }
};

/// Largest step alpha keeping lambda + alpha*d inside the cone for both
/// scaled directions, and tau, kappa positive. Exact per-cone boundary
/// computation in the lambda-normalized frame.
double line_search(const ConeLayout& cone, const VectorXd& lambda,
                   const VectorXd& dsW, const VectorXd& dzW, double tau,
                   double dtau, double kap, double dkap) {
  double viol = 0.0;
  for (int i = 0; i < cone.l; ++i) {
    if (dsW(i) < 0.0) viol = std::max(viol, -dsW(i) / lambda(i));
    if (dzW(i) < 0.0) viol = std::max(viol, -dzW(i) / lambda(i));
  }
  if (dtau < 0.0) viol = std::max(viol, -dtau / tau);
  if (dkap < 0.0) viol = std::max(viol, -dkap / kap);

  for (std::size_t k = 0; k < cone.dim.size(); ++k) {
    const int st = cone.start[k], d = cone.dim[k];
    const auto lk = lambda.segment(st, d);
    const double lknorm2 = lk(0) * lk(0) - lk.tail(d - 1).squaredNorm();
    const double lknorm = std::sqrt(std::max(lknorm2, 1e-300));
    const VectorXd lkbar = lk / lknorm;
    for (const auto* dir : {&dsW, &dzW}) {
      const auto dk = dir->segment(st, d);
      const double jdot = lkbar(0) * dk(0) - lkbar.tail(d - 1).dot(dk.tail(d - 1));
      const double rho0 = jdot / lknorm;
      const double factor = (jdot + dk(0)) / (lkbar(0) + 1.0);
      const double tail =
          (dk.tail(d - 1) - factor * lkbar.tail(d - 1)).norm() / lknorm;
      if (tail - rho0 > 0.0) viol = std::max(viol, tail - rho0);
    }
  }
  const double alpha = viol > 0.0 ? 1.0 / viol : kStepMax;
  return std::min(alpha, 1.0);
}

struct Stats {
  double pres = kNaN, dres = kNaN, gap = kNaN, relgap = kNaN;
  double pinfres = kNaN, dinfres = kNaN;
  double mu = kNaN, pcost = kNaN, dcost = kNaN;
};

enum class Verdict { None, Optimal, PrimalInfeasible, DualInfeasible };

Verdict classify(const Stats& st, double tau, double kap, double feastol,
                 double abstol, double reltol) {
  if (st.pres < feastol && st.dres < feastol &&
      (st.gap < abstol || (std::isfinite(st.relgap) && st.relgap < reltol))) {
    return Verdict::Optimal;
  }
  if (tau < kap) {
    if (std::isfinite(st.pinfres) && st.pinfres < feastol) {
      return Verdict::PrimalInfeasible;
    }
    if (std::isfinite(st.dinfres) && st.dinfres < feastol) {
      return Verdict::DualInfeasible;
    }
  }
  return Verdict::None;
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalTrouble: return "numerical_trouble";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

double max_violation(const ConeProgram& prog, const Eigen::VectorXd& x) {
  double viol = 0.0;
  for (const auto& row : prog.linear) {
    const double v = row.a.dot(x) - row.rhs;
    const double scaled = (row.kind == LinearConstraint::Kind::Equal)
                              ? std::abs(v)
                              : std::max(v, 0.0);
    viol = std::max(viol, scaled / std::max(1.0, std::abs(row.rhs)));
  }
  for (const auto& soc : prog.socs) {
    const double lhs = (soc.A * x + soc.d).norm();
    const double rhs = soc.g.dot(x) + soc.h;
    viol = std::max(viol, (lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return viol / std::max(1.0, x.norm());
}

SolveOutcome solve(const ConeProgram& prog, const SolverOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  ConeProgram padded;
  const ConeProgram* pp = &prog;
  if (prog.linear.empty() && prog.socs.empty()) {
    // Degenerate caller; a vacuous row keeps the embedding well defined.
    padded = prog;
    LinearConstraint row;
    row.a = VectorXd::Zero(prog.n_vars);
    row.rhs = 1.0;
    padded.linear.push_back(std::move(row));
    pp = &padded;
  }
  const StdForm f = standardize(*pp);
  const ConeLayout& cone = f.cone;

  SolveOutcome out;
  auto finish = [&](SolveStatus status, const VectorXd& x, double tau, int iter,
                    const Stats& st, const std::string& msg) {
    out.status = status;
    out.x = x / tau;
    out.objective = f.c.dot(out.x);
    out.iterations = iter;
    out.primal_residual = st.pres;
    out.dual_residual = st.dres;
    out.gap = std::isfinite(st.gap) ? st.gap : kNaN;
    out.seconds = elapsed();
    out.message = msg;
    if (status == SolveStatus::Optimal) {
      const double v = max_violation(prog, out.x);
      if (!(v <= kViolationTol)) {
        out.status = SolveStatus::NumericalTrouble;
        out.message = "optimality re-check failed (scaled violation " +
                      std::to_string(v) + ")";
      }
    }
    return out;
  };

  // Interior starting point from two solves with identity scaling.
  Scaling W;
  W.set_identity(cone);
  Kkt kkt;
  Stats st;
  if (!kkt.factor(f, W)) {
    return finish(SolveStatus::NumericalTrouble, VectorXd::Zero(f.n), 1.0, 0,
                  st, "initial factorization failed");
  }
  VectorXd x, y, z, s, tmpx, tmpy, tmpz;
  kkt.solve(VectorXd::Zero(f.n), f.b, f.h, x, y, tmpz);
  s = bring_to_cone(cone, -tmpz);
  kkt.solve(-f.c, VectorXd::Zero(f.p), VectorXd::Zero(cone.m), tmpx, y, tmpz);
  z = bring_to_cone(cone, tmpz);
  if (f.p == 0) y.resize(0);
  double tau = 1.0, kap = 1.0;

  const double resx0 = std::max(1.0, f.c.norm());
  const double resy0 = std::max(1.0, f.b.norm());
  const double resz0 = std::max(1.0, f.h.norm());

  VectorXd best_x = x;
  double best_tau = tau;
  double best_score = std::numeric_limits<double>::infinity();
  Stats best_st;
  int tiny_steps = 0;
  double prev_mu = std::numeric_limits<double>::infinity();
  int stalls = 0;

  VectorXd rx(f.n), ry(f.p), rz(cone.m);
  VectorXd x1, y1, z1, x2, y2, z2;

  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    // Residuals of the embedding.
    const double cx = f.c.dot(x);
    const double by = f.p > 0 ? f.b.dot(y) : 0.0;
    const double hz = f.h.dot(z);
    VectorXd aty_gtz = f.G.transpose() * z;
    if (f.p > 0) aty_gtz += f.A.transpose() * y;
    rx = -aty_gtz - tau * f.c;
    if (f.p > 0) ry = f.A * x - tau * f.b;
    rz = s + f.G * x - tau * f.h;
    const double rt = kap + cx + by + hz;

    const double hresx = aty_gtz.norm();
    const double hresy = f.p > 0 ? (f.A * x).norm() : 0.0;
    const double hresz = (f.G * x + s).norm();
    const double nx = x.norm(), ny = f.p > 0 ? y.norm() : 0.0;
    const double nz = z.norm(), ns = s.norm();

    st = Stats{};
    st.gap = s.dot(z);
    st.mu = (st.gap + kap * tau) / (cone.degree() + 1);
    st.pcost = cx / tau;
    st.dcost = -(hz + by) / tau;
    if (st.pcost < 0.0) {
      st.relgap = st.gap / -st.pcost;
    } else if (st.dcost > 0.0) {
      st.relgap = st.gap / st.dcost;
    }
    const double nry =
        f.p > 0 ? ry.norm() / std::max(resy0 + nx, 1.0) : 0.0;
    const double nrz = rz.norm() / std::max(resz0 + nx + ns, 1.0);
    st.pres = std::max(nry, nrz) / tau;
    st.dres = rx.norm() / std::max(resx0 + ny + nz, 1.0) / tau;
    if ((hz + by) / std::max(ny + nz, 1.0) < -opts.reltol) {
      st.pinfres = hresx / std::max(ny + nz, 1.0);
    }
    if (cx / std::max(nx, 1.0) < -opts.reltol) {
      st.dinfres = std::max(hresy / std::max(nx, 1.0),
                            hresz / std::max(nx + ns, 1.0));
    }

    // Relaxed-tolerance classification for exits short of strict
    // convergence; the post-solve violation re-check still guards any
    // Optimal verdict issued here. Late iterations can destroy an
    // already-converged iterate: once mu falls far below the KKT system's
    // double-precision conditioning limit, steps stop contracting the
    // residuals and the current point degrades (growing primal residual,
    // then nonfinite values). The best iterate seen is then the honest
    // answer, not the last one.
    auto near_optimal = [&](const Stats& at) {
      return at.pres < opts.feastol_inacc && at.dres < opts.feastol_inacc &&
             (at.gap < opts.abstol_inacc ||
              (std::isfinite(at.relgap) && at.relgap < opts.reltol_inacc));
    };
    auto hard_exit = [&](const std::string& reason) {
      if (near_optimal(best_st)) {
        return finish(SolveStatus::Optimal, best_x, best_tau, iter, best_st,
                      reason + " (close to optimal)");
      }
      return finish(SolveStatus::NumericalTrouble, best_x, best_tau, iter,
                    best_st, reason);
    };
    auto loose_exit = [&](const std::string& reason) {
      if (near_optimal(st)) {
        return finish(SolveStatus::Optimal, x, tau, iter, st,
                      reason + " (close to optimal)");
      }
      if (near_optimal(best_st)) {
        return finish(SolveStatus::Optimal, best_x, best_tau, iter, best_st,
                      reason + " (close to optimal)");
      }
      return finish(reason == "iteration limit" ? SolveStatus::IterationLimit
                                                : SolveStatus::NumericalTrouble,
                    best_x, best_tau, iter, best_st, reason);
    };

    if (!std::isfinite(st.pres) || !std::isfinite(st.dres) ||
        !std::isfinite(st.gap)) {
      return hard_exit("nonfinite iterate");
    }

    const double score = std::max(st.pres, st.dres);
    if (score < best_score) {
      best_score = score;
      best_x = x;
      best_tau = tau;
      best_st = st;
    }

    switch (classify(st, tau, kap, opts.feastol, opts.abstol, opts.reltol)) {
      case Verdict::Optimal:
        return finish(SolveStatus::Optimal, x, tau, iter, st, "optimal");
      case Verdict::PrimalInfeasible:
        return finish(SolveStatus::Infeasible, x, tau, iter, st,
                      "primal infeasibility certificate");
      case Verdict::DualInfeasible:
        return finish(SolveStatus::NumericalTrouble, x, tau, iter, st,
                      "dual infeasibility certificate (problem unbounded)");
      case Verdict::None:
        break;
    }

    if (iter == opts.max_iters) return loose_exit("iteration limit");
    if (st.mu > 0.995 * prev_mu) {
      if (++stalls >= 3) return loose_exit("progress stalled");
    } else {
      stalls = 0;
    }
    prev_mu = st.mu;

    if (!W.update(s, z)) return hard_exit("iterate left the cone interior");
    if (!kkt.factor(f, W)) return hard_exit("KKT factorization failed");

    // Static RHS solve, shared by predictor and corrector.
    kkt.solve(-f.c, f.b, f.h, x1, y1, z1);
    const double S1 = f.c.dot(x1) + (f.p > 0 ? f.b.dot(y1) : 0.0) +
                      f.h.dot(z1);
    const double dtau_denom = kap / tau - S1;
    if (!std::isfinite(dtau_denom) || std::abs(dtau_denom) < 1e-300) {
      return hard_exit("singular tau subsystem");
    }

    // Predictor (affine scaling direction).
    kkt.solve(rx, f.p > 0 ? VectorXd(-ry) : VectorXd(), s - rz, x2, y2, z2);
    const double S2a = f.c.dot(x2) + (f.p > 0 ? f.b.dot(y2) : 0.0) +
                       f.h.dot(z2);
    const double dtau_aff = (rt - kap + S2a) / dtau_denom;
    const VectorXd dz_aff = z2 + dtau_aff * z1;
    const VectorXd Wdz_aff = W.apply_W(dz_aff);
    const VectorXd dsW_aff = -(W.lambda + Wdz_aff);
    const double dkap_aff = -kap - (kap / tau) * dtau_aff;
    const double alpha_aff = line_search(cone, W.lambda, dsW_aff, Wdz_aff, tau,
                                         dtau_aff, kap, dkap_aff);

    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3.0), kSigmaMin,
                                    kSigmaMax);
    const double one_minus_sigma = 1.0 - sigma;

    // Corrector (combined direction).
    VectorXd dscomb = cone_product(cone, W.lambda, W.lambda) +
                      cone_product(cone, dsW_aff, Wdz_aff);
    for (int i = 0; i < cone.l; ++i) dscomb(i) -= sigma * st.mu;
    for (std::size_t k = 0; k < cone.dim.size(); ++k) {
      dscomb(cone.start[k]) -= sigma * st.mu;
    }
    const double bkap = kap * tau + dkap_aff * dtau_aff - sigma * st.mu;
    const VectorXd lam_div = cone_divide(cone, W.lambda, dscomb);
    const VectorXd bz = -one_minus_sigma * rz + W.apply_W(lam_div);
    kkt.solve(one_minus_sigma * rx,
              f.p > 0 ? VectorXd(-one_minus_sigma * ry) : VectorXd(), bz, x2,
              y2, z2);
    const double S2 = f.c.dot(x2) + (f.p > 0 ? f.b.dot(y2) : 0.0) +
                      f.h.dot(z2);
    const double dtau =
        (one_minus_sigma * rt - bkap / tau + S2) / dtau_denom;
    const VectorXd dx = x2 + dtau * x1;
    const VectorXd dy = f.p > 0 ? VectorXd(y2 + dtau * y1) : VectorXd();
    const VectorXd dz = z2 + dtau * z1;
    const VectorXd Wdz = W.apply_W(dz);
    const VectorXd dsW = -(lam_div + Wdz);
    const VectorXd ds = W.apply_W(dsW);
    const double dkap = -(bkap + kap * dtau) / tau;

    double alpha =
        kGamma * line_search(cone, W.lambda, dsW, Wdz, tau, dtau, kap, dkap);
    alpha = std::min(alpha, kStepMax);
    if (alpha < kStepMin) {
      if (++tiny_steps >= 2) return loose_exit("step size collapsed");
    } else {
      tiny_steps = 0;
    }

    x += alpha * dx;
    if (f.p > 0) y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kap += alpha * dkap;
  }

  return finish(SolveStatus::IterationLimit, x, tau, opts.max_iters, st,
                "iteration limit");
}

}  // namespace rmmb
