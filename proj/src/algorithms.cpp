// SPDX-License-Identifier: Apache-2.0

#include "rmmb/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "rmmb/detail/text.hpp"
#include "rmmb/robust_bounds.hpp"

namespace rmmb {

namespace {

constexpr double kSlackZero = 1e-9;
constexpr double kGaugeFeasible = 1e-7;
constexpr double kDescentTol = 1e-9;
constexpr int kPivotRetries = 5;
constexpr int kMaxDoublings = 10;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Tight solve with one retry at the solver's stock tolerances; the tight
/// pass backs the MM descent guarantee, the retry keeps rare stalls from
/// killing a whole run.
SolveOutcome solve_subproblem(const ConeProgram& prog,
                              const SolverOptions& tight) {
  SolveOutcome out = solve(prog, tight);
  if (out.status == SolveStatus::Optimal ||
      out.status == SolveStatus::Infeasible) {
    return out;
  }
  SolverOptions fallback;
  fallback.max_iters = tight.max_iters;
  return solve(prog, fallback);
}

Beamformer perturbed(const Beamformer& w, std::uint64_t seed, int nonce,
                     int attempt) {
  Beamformer out = w;
  Philox rng(seed, kStreamPerturb, static_cast<std::uint32_t>(nonce),
             static_cast<std::uint32_t>(attempt));
  for (auto& wg : out.w) {
    const int M = static_cast<int>(wg.size());
    // Floor well above the 1e-12 degeneracy threshold so a pivot that
    // collapsed to zero still clears it; push harder on later attempts.
    const double scale =
        attempt * std::max(1e-6 * wg.norm() / std::sqrt(double(M)), 1e-9);
    for (int m = 0; m < M; ++m) wg(m) += scale * rng.next_complex_gaussian();
  }
  return out;
}

/// Builds the subproblem at the pivot, nudging the pivot with small random
/// perturbations when a user's pivot product degenerates. The (possibly
/// perturbed) pivot is written back so the MM touching point stays
/// consistent.
template <typename BuildFn>
PmSubproblem build_with_retries(BuildFn&& build, Beamformer& pivot,
                                std::uint64_t seed, int nonce) {
  try {
    return build(pivot);
  } catch (const DegeneratePivot&) {
  }
  for (int attempt = 1; attempt <= kPivotRetries; ++attempt) {
    Beamformer cand = perturbed(pivot, seed, nonce, attempt);
    try {
      PmSubproblem sub = build(cand);
      pivot = std::move(cand);
      return sub;
    } catch (const DegeneratePivot&) {
      if (attempt == kPivotRetries) throw;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

Beamformer initial_beamformer(const Scenario& sc, std::uint64_t seed) {
  Beamformer w;
  w.w.reserve(sc.group_count());
  const int G = sc.group_count();
  for (int g = 0; g < G; ++g) {
    Philox rng(seed, kStreamInit, static_cast<std::uint32_t>(g));
    Eigen::VectorXcd wg(sc.M);
    for (int m = 0; m < sc.M; ++m) wg(m) = rng.next_complex_gaussian();
    if (sc.gamma) {
      const double denom = sc.mode == PowerMode::SumPower
                               ? wg.norm()
                               : wg.cwiseAbs().maxCoeff();
      wg *= std::sqrt(*sc.gamma / G) / denom;
    } else {
      wg.normalize();
    }
    w.w.push_back(std::move(wg));
  }
  return w;
}

double default_t_upper(const Scenario& sc) {
  double best = 0.0;
  for (int g = 0; g < sc.group_count(); ++g) {
    for (int i = 0; i < sc.users_in_group(g); ++i) {
      const auto& u = sc.user(g, i);
      const double reach = u.h_hat.norm() + u.epsilon;
      best = std::max(best, reach * reach / u.sigma2);
    }
  }
  return sc.gamma.value_or(1.0) * best;
}

void MMTrace::save_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open '" + path + "'");
  os << "iteration,objective,slack_sum,status,seconds\n";
  for (const auto& row : iterations) {
    os << row.iteration << ',' << detail::format_double(row.objective) << ','
       << detail::format_double(row.slack_sum) << ',' << to_string(row.status)
       << ',' << detail::format_double(row.seconds) << '\n';
  }
}

PowerMinResult power_min(const Scenario& sc, const AlgorithmConfig& cfg) {
  if (!sc.tau) {
    throw std::invalid_argument("power_min needs SINR targets (tau)");
  }
  Beamformer w = initial_beamformer(sc, cfg.seed);
  PowerMinResult res;
  bool pinned = false;
  double prev_r = std::numeric_limits<double>::quiet_NaN();
  double prev_penalized = std::numeric_limits<double>::quiet_NaN();

  for (int k = 1; k <= cfg.max_outer; ++k) {
    const double tic = now_seconds();
    const SlackMode mode = pinned ? SlackMode::PinnedZero : SlackMode::Penalized;
    PmSubproblem sub = build_with_retries(
        [&](const Beamformer& pivot) {
          return build_pm_subproblem(sc, pivot, mode);
        },
        w, cfg.seed, k);
    const SolveOutcome out = solve_subproblem(sub.program, cfg.solver);
    if (!out.ok()) {
      throw SolverFailure(out.status,
                          "power-min subproblem solve failed at iteration " +
                              std::to_string(k) + ": " + out.message);
    }
    w = extract_beamformer(out.x, sub.map);
    const double r = out.x(sub.map.objective_var);
    const double ssum = slack_sum(out.x, sub.map);
    const double penalized = r + ssum;

    IterationRecord rec;
    rec.iteration = k;
    rec.objective = r;
    rec.slack_sum = ssum;
    rec.status = out.status;
    rec.seconds = now_seconds() - tic;
    res.trace.iterations.push_back(rec);

    if (std::isfinite(prev_penalized) &&
        penalized > prev_penalized + kDescentTol) {
      throw MonotonicityViolation(
          "penalized power objective increased from " +
          detail::format_double(prev_penalized) + " to " +
          detail::format_double(penalized) + " at iteration " +
          std::to_string(k));
    }

    const std::vector<double> slacks = slack_values(out.x, sub.map);
    double max_slack = 0.0;
    for (double s : slacks) max_slack = std::max(max_slack, s);

    if (std::isfinite(prev_r) && std::abs(r - prev_r) <= cfg.xi) {
      res.w = w;
      res.power = r;
      res.slacks = pinned ? std::vector<double>(sc.total_users(), 0.0) : slacks;
      res.slack_total = pinned ? 0.0 : ssum;
      res.feasible = pinned || max_slack <= kSlackZero;
      return res;
    }
    prev_r = r;
    prev_penalized = penalized;
    if (!pinned && max_slack <= kSlackZero) pinned = true;
  }
  throw MaxOuterExceeded(cfg.max_outer);
}

MaxMinResult max_min_fair(const Scenario& sc, const AlgorithmConfig& cfg) {
  if (!sc.gamma) {
    throw std::invalid_argument("max_min_fair needs a power budget (gamma)");
  }
  Beamformer w = initial_beamformer(sc, cfg.seed);
  MaxMinResult res;
  double t_upper_default = cfg.t_upper.value_or(default_t_upper(sc));
  double t_cur = cfg.t_lower;
  double t_prev = std::numeric_limits<double>::quiet_NaN();
  int doublings = 0;

  int k = 1;
  while (k <= cfg.max_outer) {
    const double tic = now_seconds();
    double t_lo = (k == 1) ? cfg.t_lower : t_cur;
    double t_hi = t_upper_default;
    const double t_hi_start = t_hi;
    // The pivot stays fixed for the whole inner bisection; only the
    // degenerate-pivot recovery may nudge it, and the nudge then persists.
    Beamformer pivot = w;
    Beamformer w_accepted = w;
    bool any_accept = false;
    int steps = 0;
    SolveStatus last_status = SolveStatus::Optimal;

    auto probe = [&](double level) {
      PmSubproblem sub = build_with_retries(
          [&](const Beamformer& pv) {
            return build_feasibility_subproblem(sc, pv, level);
          },
          pivot, cfg.seed, k * 1024 + steps);
      const SolveOutcome out = solve_subproblem(sub.program, cfg.solver);
      if (!out.ok()) {
        throw SolverFailure(out.status,
                            "feasibility gauge solve failed at level " +
                                detail::format_double(level) + ": " +
                                out.message);
      }
      ++steps;
      last_status = out.status;
      if (out.objective > kGaugeFeasible) return false;
      w_accepted = extract_beamformer(out.x, sub.map);
      any_accept = true;
      return true;
    };

    while (t_hi - t_lo > cfg.xi1) {
      const double t_mid = 0.5 * (t_lo + t_hi);
      (probe(t_mid) ? t_lo : t_hi) = t_mid;
    }
    // A bracket no wider than xi1 runs no probes; test its top directly so
    // an underestimated upper bound still triggers widening below.
    if (steps == 0 && t_hi_start > t_lo && probe(t_hi_start)) {
      t_lo = t_hi_start;
    }

    if (t_lo >= t_hi_start - cfg.xi1 && any_accept) {
      // The bracket was certified all the way to its top; the default
      // upper bound was not an upper bound. Widen and redo this round.
      if (++doublings > kMaxDoublings) throw BracketError(t_upper_default);
      t_upper_default *= 2.0;
      continue;
    }

    if (any_accept) w = w_accepted;
    if (t_lo < t_cur) {
      throw MonotonicityViolation("certified SINR level decreased from " +
                                  detail::format_double(t_cur) + " to " +
                                  detail::format_double(t_lo));
    }
    t_cur = t_lo;

    IterationRecord rec;
    rec.iteration = k;
    rec.objective = t_cur;
    rec.status = last_status;
    rec.bisection_steps = steps;
    rec.seconds = now_seconds() - tic;
    res.trace.iterations.push_back(rec);

    if (std::isfinite(t_prev) && std::abs(t_cur - t_prev) <= cfg.xi2) {
      res.w = w;
      res.t = t_cur;
      return res;
    }
    t_prev = t_cur;
    ++k;
  }
  throw MaxOuterExceeded(cfg.max_outer);
}

}  // namespace rmmb
