// SPDX-License-Identifier: Apache-2.0

#include "rmmb/harness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "rmmb/detail/text.hpp"

namespace rmmb {

namespace {

std::uint64_t trial_seed(const ExperimentSpec& spec, double sweep_value,
                         int trial) {
  const auto value_bits = std::bit_cast<std::uint64_t>(sweep_value);
  return mix_seed(mix_seed(spec.base_seed, value_bits),
                  static_cast<std::uint64_t>(trial));
}

std::uint64_t eval_seed(std::uint64_t tseed) {
  return mix_seed(tseed, 0x4556414cull);  // evaluation stream tag
}

std::string failure_tag(const std::exception& e) {
  if (dynamic_cast<const MaxOuterExceeded*>(&e)) return "max_outer_exceeded";
  if (dynamic_cast<const BracketError*>(&e)) return "bracket_error";
  if (dynamic_cast<const DegeneratePivot*>(&e)) return "degenerate_pivot";
  if (dynamic_cast<const MonotonicityViolation*>(&e)) {
    return "monotonicity_violation";
  }
  if (const auto* sf = dynamic_cast<const SolverFailure*>(&e)) {
    return std::string("solver_") + to_string(sf->status);
  }
  return "exception";
}

int scheme_rank(Scheme s) { return static_cast<int>(s); }

}  // namespace

std::string to_string(Scheme s) {
  return s == Scheme::RobustMM ? "robust_mm" : "nonrobust_mm";
}

Scenario trial_scenario(const ExperimentSpec& spec, int sweep_index,
                        int trial) {
  const double value = spec.sweep_values.at(sweep_index);
  int upg = spec.users_per_group;
  double mu2 = spec.mu2;
  if (spec.sweep == SweepVariable::UsersPerGroup) {
    upg = static_cast<int>(value);
    if (upg <= 0 || upg != value) {
      throw std::invalid_argument("users_per_group sweep values must be "
                                  "positive integers");
    }
  } else {
    mu2 = value;
    if (mu2 < 0.0) throw std::invalid_argument("mu2 must be nonnegative");
  }
  Scenario sc = make_sphere_scenario(
      spec.M, std::vector<int>(spec.G, upg), mu2, spec.sigma2,
      trial_seed(spec, value, trial));
  sc.mode = spec.mode;
  sc.tau = spec.tau;
  sc.gamma = spec.gamma;
  sc.finalize();
  return sc;
}

Scenario design_scenario(const Scenario& sc, Scheme scheme) {
  return scheme == Scheme::NonRobustMM ? sc.without_uncertainty() : sc;
}

std::vector<AggregateRow> ExperimentResult::aggregates() const {
  std::vector<AggregateRow> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) {
      return a.sweep_value == row.sweep_value && a.scheme == row.scheme;
    });
    if (it == out.end()) {
      out.push_back({row.sweep_value, row.scheme, 0, 0.0, 0.0});
      it = out.end() - 1;
    }
    ++it->n;
    it->mean_rate += row.rate;
  }
  for (auto& a : out) a.mean_rate /= a.n;
  for (auto& a : out) {
    double ss = 0.0;
    for (const auto& row : rows) {
      if (row.sweep_value == a.sweep_value && row.scheme == a.scheme) {
        const double d = row.rate - a.mean_rate;
        ss += d * d;
      }
    }
    a.stderr_rate = a.n > 1 ? std::sqrt(ss / (a.n - 1)) / std::sqrt(double(a.n))
                            : 0.0;
  }
  std::sort(out.begin(), out.end(), [](const AggregateRow& x,
                                       const AggregateRow& y) {
    if (x.sweep_value != y.sweep_value) return x.sweep_value < y.sweep_value;
    return scheme_rank(x.scheme) < scheme_rank(y.scheme);
  });
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.sweep_values.empty()) {
    throw std::invalid_argument("experiment needs sweep values");
  }
  if (spec.trials <= 0) throw std::invalid_argument("trials must be positive");
  if (spec.schemes.empty()) {
    throw std::invalid_argument("experiment needs at least one scheme");
  }
  if (spec.gamma.has_value() == spec.tau.has_value()) {
    throw std::invalid_argument("give exactly one of gamma or tau");
  }

  ExperimentResult result;
  result.spec = spec;
  const int n_sweep = static_cast<int>(spec.sweep_values.size());
  const int n_schemes = static_cast<int>(spec.schemes.size());
  const int n_tasks = n_sweep * spec.trials;
  result.rows.resize(static_cast<std::size_t>(n_tasks) * n_schemes);

  std::atomic<int> next{0};
  std::atomic<bool> any_failure{false};

  auto worker = [&] {
    for (int task = next.fetch_add(1); task < n_tasks;
         task = next.fetch_add(1)) {
      const int si = task / spec.trials;
      const int trial = task % spec.trials;
      const double value = spec.sweep_values[si];
      const std::uint64_t tseed = trial_seed(spec, value, trial);
      Scenario sc = trial_scenario(spec, si, trial);

      for (int sj = 0; sj < n_schemes; ++sj) {
        const Scheme scheme = spec.schemes[sj];
        TrialRow row;
        row.sweep_value = value;
        row.scheme = scheme;
        row.trial = trial;
        const double tic = std::chrono::duration<double>(
                               std::chrono::steady_clock::now()
                                   .time_since_epoch())
                               .count();
        try {
          Scenario design = design_scenario(sc, scheme);
          AlgorithmConfig cfg = spec.algorithm;
          cfg.seed = tseed;
          Beamformer w;
          if (spec.gamma) {
            MaxMinResult r = max_min_fair(design, cfg);
            w = std::move(r.w);
            row.objective = r.t;
            row.iterations = r.trace.outer_iterations();
          } else {
            PowerMinResult r = power_min(design, cfg);
            w = std::move(r.w);
            row.objective = r.power;
            row.iterations = r.trace.outer_iterations();
          }
          const WorstCaseReport rep =
              monte_carlo_worst(w, sc, spec.draws, eval_seed(tseed));
          row.rate = rep.rate;
          row.status = "ok";
        } catch (const std::exception& e) {
          row.rate = 0.0;
          row.status = failure_tag(e);
          any_failure.store(true);
        }
        row.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now().time_since_epoch())
                          .count() -
                      tic;
        result.rows[static_cast<std::size_t>(task) * n_schemes + sj] = row;
      }
    }
  };

  int threads = spec.parallelism > 0
                    ? spec.parallelism
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, n_tasks);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::sort(result.rows.begin(), result.rows.end(),
            [](const TrialRow& a, const TrialRow& b) {
              if (a.sweep_value != b.sweep_value) {
                return a.sweep_value < b.sweep_value;
              }
              if (a.scheme != b.scheme) {
                return scheme_rank(a.scheme) < scheme_rank(b.scheme);
              }
              return a.trial < b.trial;
            });
  result.any_failure = any_failure.load();
  return result;
}

void emit_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open '" + path + "'");
  os << "sweep_value,scheme,trial,rate_bps_hz,iters,seconds,status\n";
  for (const auto& row : result.rows) {
    os << detail::format_double(row.sweep_value) << ',' << to_string(row.scheme)
       << ',' << row.trial << ',' << detail::format_double(row.rate) << ','
       << row.iterations << ',' << detail::format_double(row.seconds) << ','
       << row.status << '\n';
  }
}

void emit_plotdata(const ExperimentResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open '" + path + "'");
  os << "sweep_value,scheme,n,mean_rate,stderr_rate\n";
  for (const auto& a : result.aggregates()) {
    os << detail::format_double(a.sweep_value) << ',' << to_string(a.scheme)
       << ',' << a.n << ',' << detail::format_double(a.mean_rate) << ','
       << detail::format_double(a.stderr_rate) << '\n';
  }
}

ExperimentSpec load_experiment(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument("cannot parse experiment config '" + path +
                                "': " + e.what());
  }
  ExperimentSpec spec;

  const auto sweep = root["sweep"];
  if (!sweep || !sweep["variable"] || !sweep["values"]) {
    throw std::invalid_argument("experiment config needs sweep.variable and "
                                "sweep.values");
  }
  const auto var = sweep["variable"].as<std::string>();
  if (var == "mu2") {
    spec.sweep = SweepVariable::Mu2;
  } else if (var == "users_per_group") {
    spec.sweep = SweepVariable::UsersPerGroup;
  } else {
    throw std::invalid_argument("sweep.variable must be mu2 or "
                                "users_per_group");
  }
  for (const auto& v : sweep["values"]) {
    spec.sweep_values.push_back(v.as<double>());
  }

  const auto fixed = root["fixed"];
  if (fixed) {
    if (fixed["m"]) spec.M = fixed["m"].as<int>();
    if (fixed["g"]) spec.G = fixed["g"].as<int>();
    if (fixed["users_per_group"]) {
      spec.users_per_group = fixed["users_per_group"].as<int>();
    }
    if (fixed["mu2"]) spec.mu2 = fixed["mu2"].as<double>();
    if (fixed["sigma2"]) spec.sigma2 = fixed["sigma2"].as<double>();
    if (fixed["mode"]) {
      const auto mode = fixed["mode"].as<std::string>();
      if (mode == "sum") {
        spec.mode = PowerMode::SumPower;
      } else if (mode == "per_antenna") {
        spec.mode = PowerMode::PerAntennaPower;
      } else {
        throw std::invalid_argument("fixed.mode must be sum or per_antenna");
      }
    }
    if (fixed["gamma"]) spec.gamma = fixed["gamma"].as<double>();
    if (fixed["tau"]) {
      std::vector<double> tau;
      if (fixed["tau"].IsScalar()) {
        tau.assign(spec.G, fixed["tau"].as<double>());
      } else {
        for (const auto& t : fixed["tau"]) tau.push_back(t.as<double>());
      }
      spec.tau = std::move(tau);
    }
  }
  if (root["trials"]) spec.trials = root["trials"].as<int>();
  if (root["draws"]) spec.draws = root["draws"].as<int>();
  if (root["seed"]) spec.base_seed = root["seed"].as<std::uint64_t>();
  if (root["parallel"]) spec.parallelism = root["parallel"].as<int>();
  if (root["schemes"]) {
    spec.schemes.clear();
    for (const auto& s : root["schemes"]) {
      const auto name = s.as<std::string>();
      if (name == "robust_mm") {
        spec.schemes.push_back(Scheme::RobustMM);
      } else if (name == "nonrobust_mm") {
        spec.schemes.push_back(Scheme::NonRobustMM);
      } else {
        throw std::invalid_argument("unknown scheme '" + name + "'");
      }
    }
  }
  const auto algo = root["algorithm"];
  if (algo) {
    if (algo["xi"]) spec.algorithm.xi = algo["xi"].as<double>();
    if (algo["xi1"]) spec.algorithm.xi1 = algo["xi1"].as<double>();
    if (algo["xi2"]) spec.algorithm.xi2 = algo["xi2"].as<double>();
    if (algo["max_outer"]) {
      spec.algorithm.max_outer = algo["max_outer"].as<int>();
    }
  }
  return spec;
}

}  // namespace rmmb
