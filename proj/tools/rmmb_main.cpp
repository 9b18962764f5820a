// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: design beamformers for a scenario, run sweep
// experiments, or re-verify a stored beamformer.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rmmb/algorithms.hpp"
#include "rmmb/harness.hpp"
#include "rmmb/robust_bounds.hpp"
#include "rmmb/scenario.hpp"

namespace {

using nlohmann::json;

json user_report(const rmmb::Scenario& sc, const rmmb::Beamformer& w,
                 const rmmb::WorstCaseReport& rep) {
  json users = json::array();
  for (const auto& u : rep.users) {
    const auto& uc = sc.user(u.group, u.user);
    json row;
    row["group"] = u.group;
    row["user"] = u.user;
    row["epsilon"] = uc.epsilon;
    row["worst_sinr_empirical"] = u.empirical_worst;
    if (u.analytic_worst) row["worst_sinr_analytic"] = *u.analytic_worst;
    row["worst_sinr"] = u.worst;
    if (sc.tau) {
      row["target"] = (*sc.tau)[u.group];
      row["margin"] = rmmb::margin(w, (*sc.tau)[u.group], sc, u.group, u.user);
    }
    users.push_back(std::move(row));
  }
  return users;
}

int run_solve(const std::string& config, const std::string& out_dir,
              std::optional<std::uint64_t> seed, int draws) {
  const rmmb::Scenario sc = rmmb::load_scenario(config);
  rmmb::AlgorithmConfig cfg;
  if (seed) cfg.seed = *seed;

  std::filesystem::create_directories(out_dir);
  const auto out = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  json report;
  rmmb::Beamformer w;
  rmmb::MMTrace trace;
  if (sc.gamma) {
    const rmmb::MaxMinResult res = rmmb::max_min_fair(sc, cfg);
    w = res.w;
    trace = res.trace;
    report["mode"] = "max_min_fair";
    report["t"] = res.t;
    std::printf("max-min fair: t = %.6f after %d outer iterations\n", res.t,
                trace.outer_iterations());
  } else {
    const rmmb::PowerMinResult res = rmmb::power_min(sc, cfg);
    w = res.w;
    trace = res.trace;
    report["mode"] = "power_min";
    report["power"] = res.power;
    report["slack_total"] = res.slack_total;
    report["feasible"] = res.feasible;
    std::printf("power minimization: r = %.6f, slack total = %.3g, %s\n",
                res.power, res.slack_total,
                res.feasible ? "feasible" : "targets not met");
  }
  report["outer_iterations"] = trace.outer_iterations();
  report["sum_power"] = w.sum_power();
  report["max_antenna_power"] = w.max_antenna_power();

  const rmmb::WorstCaseReport rep =
      rmmb::monte_carlo_worst(w, sc, draws, seed.value_or(cfg.seed));
  report["min_worst_sinr"] = rep.min_worst_sinr;
  report["rate_bps_hz"] = rep.rate;
  report["draws"] = draws;
  report["users"] = user_report(sc, w, rep);

  rmmb::save_beamformer_csv(w, out("beamformer.csv"));
  trace.save_csv(out("trace.csv"));
  std::ofstream js(out("report.json"));
  js << report.dump(2) << '\n';
  std::printf("worst-case rate %.4f bits/s/Hz (min SINR %.4f); wrote %s\n",
              rep.rate, rep.min_worst_sinr, out_dir.c_str());
  return 0;
}

int run_sweep(const std::string& config, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<int> trials,
              std::optional<int> draws, std::optional<int> parallel,
              const std::string& scheme) {
  rmmb::ExperimentSpec spec = rmmb::load_experiment(config);
  if (seed) spec.base_seed = *seed;
  if (trials) spec.trials = *trials;
  if (draws) spec.draws = *draws;
  if (parallel) spec.parallelism = *parallel;
  if (scheme == "robust") {
    spec.schemes = {rmmb::Scheme::RobustMM};
  } else if (scheme == "nonrobust") {
    spec.schemes = {rmmb::Scheme::NonRobustMM};
  } else if (scheme != "both") {
    throw CLI::ValidationError("--scheme must be robust, nonrobust or both");
  }

  const rmmb::ExperimentResult result = rmmb::run_experiment(spec);
  std::filesystem::create_directories(out_dir);
  const auto results_path =
      (std::filesystem::path(out_dir) / "results.csv").string();
  const auto plot_path =
      (std::filesystem::path(out_dir) / "plotdata.csv").string();
  rmmb::emit_csv(result, results_path);
  rmmb::emit_plotdata(result, plot_path);

  for (const auto& a : result.aggregates()) {
    std::printf("sweep %-8g %-12s mean rate %.4f (stderr %.4f, n=%d)\n",
                a.sweep_value, rmmb::to_string(a.scheme).c_str(), a.mean_rate,
                a.stderr_rate, a.n);
  }
  if (result.any_failure) {
    std::fprintf(stderr, "some trials failed; see %s\n", results_path.c_str());
    return 2;
  }
  std::printf("wrote %s and %s\n", results_path.c_str(), plot_path.c_str());
  return 0;
}

int run_verify(const std::string& config, const std::string& beamformer,
               std::optional<std::uint64_t> seed, int draws, bool emit_json) {
  const rmmb::Scenario sc = rmmb::load_scenario(config);
  const rmmb::Beamformer w = rmmb::load_beamformer_csv(beamformer);
  if (w.groups() != sc.group_count() ||
      (w.groups() > 0 && w.w[0].size() != sc.M)) {
    throw std::invalid_argument("beamformer dimensions do not match scenario");
  }

  const rmmb::WorstCaseReport rep =
      rmmb::monte_carlo_worst(w, sc, draws, seed.value_or(0));
  if (emit_json) {
    json report;
    report["min_worst_sinr"] = rep.min_worst_sinr;
    report["rate_bps_hz"] = rep.rate;
    report["draws"] = draws;
    report["sum_power"] = w.sum_power();
    report["max_antenna_power"] = w.max_antenna_power();
    report["users"] = user_report(sc, w, rep);
    std::cout << report.dump(2) << '\n';
  } else {
    std::printf("%-6s %-5s %-14s %-14s\n", "group", "user", "worst SINR",
                "analytic");
    for (const auto& u : rep.users) {
      if (u.analytic_worst) {
        std::printf("%-6d %-5d %-14.6f %-14.6f\n", u.group, u.user, u.worst,
                    *u.analytic_worst);
      } else {
        std::printf("%-6d %-5d %-14.6f %-14s\n", u.group, u.user, u.worst,
                    "-");
      }
    }
    std::printf("min worst-case SINR %.6f, rate %.4f bits/s/Hz\n",
                rep.min_worst_sinr, rep.rate);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust multigroup multicast beamforming via "
               "majorization-minimization"};
  app.require_subcommand(1);

  std::string config, out_dir = ".", beamformer, scheme = "both";
  std::optional<std::uint64_t> seed;
  std::optional<int> trials, draws_opt, parallel;
  int draws = 1000;
  bool emit_json = false;

  auto* solve = app.add_subcommand("solve", "design a beamformer for a "
                                            "scenario and certify it");
  solve->add_option("--config", config, "scenario config file")->required();
  solve->add_option("--out", out_dir, "output directory");
  solve->add_option("--seed", seed, "override the algorithm seed");
  solve->add_option("--draws", draws, "Monte Carlo draws for the certificate");

  auto* sweep = app.add_subcommand("sweep", "run a sweep experiment");
  sweep->add_option("--config", config, "experiment config file")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seed", seed, "override the base seed");
  sweep->add_option("--trials", trials, "override the trial count");
  sweep->add_option("--draws", draws_opt, "override the evaluation draws");
  sweep->add_option("--parallel", parallel, "worker thread count");
  sweep->add_option("--scheme", scheme, "robust, nonrobust or both");

  auto* verify = app.add_subcommand("verify", "recompute certificates for a "
                                              "stored beamformer");
  verify->add_option("--config", config, "scenario config file")->required();
  verify->add_option("--beamformer", beamformer, "beamformer CSV")->required();
  verify->add_option("--seed", seed, "evaluation seed");
  verify->add_option("--draws", draws, "Monte Carlo draws");
  verify->add_flag("--json", emit_json, "emit a JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (solve->parsed()) return run_solve(config, out_dir, seed, draws);
    if (sweep->parsed()) {
      return run_sweep(config, out_dir, seed, trials, draws_opt, parallel,
                       scheme);
    }
    return run_verify(config, beamformer, seed, draws, emit_json);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 2;
  }
}
