// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: sweeps, paired robust/nonrobust comparison, CSV
// emission.
//
// A trial draws one set of channels, designs a beamformer per scheme, then
// scores every design on the original uncertain scenario with the same
// Monte Carlo error draws (paired evaluation: identical draw streams per
// trial across schemes, so scheme comparisons are not confounded by
// sampling noise).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmmb/algorithms.hpp"
#include "rmmb/robust_bounds.hpp"
#include "rmmb/scenario.hpp"

namespace rmmb {

enum class Scheme { RobustMM, NonRobustMM };

std::string to_string(Scheme s);

enum class SweepVariable { UsersPerGroup, Mu2 };

struct ExperimentSpec {
  SweepVariable sweep = SweepVariable::Mu2;
  std::vector<double> sweep_values;  // integral for UsersPerGroup

  int M = 4;
  int G = 2;
  int users_per_group = 2;  // fixed value when sweeping mu2
  double mu2 = 0.25;        // fixed value when sweeping users_per_group
  double sigma2 = 1.0;
  PowerMode mode = PowerMode::SumPower;
  std::optional<double> gamma;           // max-min experiments
  std::optional<std::vector<double>> tau;  // power-min experiments

  int trials = 100;
  int draws = 1000;
  std::vector<Scheme> schemes{Scheme::RobustMM, Scheme::NonRobustMM};
  std::uint64_t base_seed = 0;
  int parallelism = 0;  // 0 = hardware concurrency
  AlgorithmConfig algorithm;
};

struct TrialRow {
  double sweep_value = 0.0;
  Scheme scheme = Scheme::RobustMM;
  int trial = 0;
  double rate = 0.0;       // worst-case bits/s/Hz; 0 on failure
  double objective = 0.0;  // certified t (max-min) or power r (power min)
  int iterations = 0;
  double seconds = 0.0;
  std::string status;      // "ok" or a failure tag
};

struct AggregateRow {
  double sweep_value = 0.0;
  Scheme scheme = Scheme::RobustMM;
  int n = 0;
  double mean_rate = 0.0;
  double stderr_rate = 0.0;  // sample standard deviation / sqrt(n)
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<TrialRow> rows;  // sorted by (sweep value, scheme, trial)
  bool any_failure = false;

  std::vector<AggregateRow> aggregates() const;
};

/// Scenario for one trial of the experiment. Trial seeds derive from
/// (base_seed, sweep index, trial index), so each trial is reproducible in
/// isolation and sweep points do not share channels.
Scenario trial_scenario(const ExperimentSpec& spec, int sweep_index,
                        int trial);

/// Strips uncertainty for design under the given scheme; evaluation always
/// uses the original scenario.
Scenario design_scenario(const Scenario& sc, Scheme scheme);

/// Runs the full sweep. Failed trials (solver trouble, iteration caps)
/// score rate 0 and carry their failure tag in `status`; they never abort
/// the sweep. Trials run in parallel when spec.parallelism allows; results
/// are identical to a serial run.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Per-trial CSV:
/// sweep_value,scheme,trial,rate_bps_hz,iters,seconds,status.
/// Deterministic byte-for-byte except the seconds column (wall time).
void emit_csv(const ExperimentResult& result, const std::string& path);

/// Aggregated sweep curves: sweep_value,scheme,n,mean_rate,stderr_rate.
/// Fully deterministic for a fixed spec.
void emit_plotdata(const ExperimentResult& result, const std::string& path);

/// Structured-text experiment description (see README for the schema).
ExperimentSpec load_experiment(const std::string& path);

}  // namespace rmmb
