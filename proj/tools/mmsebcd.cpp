// SPDX-License-Identifier: Apache-2.0
// Command-line front end: solve, sweep, itinerary, compare.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "mmsebcd/experiments.hpp"

using namespace mmsebcd;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string algorithms;
  int parallel = 1;
};

std::vector<std::string> split_names(const std::string& list) {
  // Bare block names ("G", "F2") continue the preceding cyclic pattern, so
  // "bfg,cyclic:F1,G,F2,G" names two algorithms.
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const bool block = tok == "G" || (tok.size() > 1 && tok[0] == 'F' &&
                                      tok.find_first_not_of("0123456789", 1) == std::string::npos);
    if (block && !out.empty() && out.back().rfind("cyclic:", 0) == 0)
      out.back() += "," + tok;
    else
      out.push_back(tok);
  }
  return out;
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? paper_preset() : load_config_file(c.config);
  if (!c.algorithms.empty())
    cfg.algorithms = parse_algorithms(split_names(c.algorithms), cfg.model.L());
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Common& c) {
  const fs::path dir = c.out.empty() ? fs::path("results") : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "JSON experiment config (default: paper preset)");
  app->add_option("--algorithms", c.algorithms, "comma-separated algorithm names");
  app->add_option("--parallel", c.parallel, "worker threads")->check(CLI::PositiveNumber);
  if (with_out) app->add_option("--out", c.out, "output directory (default: results)");
}

int cmd_solve(const Common& c, double snr0, int realization) {
  const ExperimentConfig cfg = load(c);
  const SystemModel model = build_model(cfg, snr0, realization);
  const std::uint64_t seed = c.seed ? *c.seed : init_seed(cfg, realization, 0);
  for (const auto& alg : cfg.algorithms) {
    const RunResult res = run(model, effective_solver(cfg, alg, seed));
    const SolverTrace& tr = res.trace;
    std::printf("# %s  snr0=%g dB  realization=%d  seed=%llu\n", alg.id.c_str(), snr0,
                realization, static_cast<unsigned long long>(seed));
    std::printf("%6s %22s\n", "outer", "mse");
    for (std::size_t k = 0; k < tr.mse_per_outer.size(); ++k)
      std::printf("%6zu %22.15e\n", k, tr.mse_per_outer[k]);
    std::printf("termination=%s  outer=%d  stationarity=%.3e  mse_increases=%d\n",
                std::string(to_string(tr.termination)).c_str(), tr.outer_iterations(),
                tr.stationarity, tr.mse_increases);
    if (!c.out.empty()) {
      const fs::path p = out_dir(c) / ("trace_" + alg.id + ".csv");
      std::ofstream f(p, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
      f << "update,block,outer,mse,case,kind,mu,power_slack,step_sq\n";
      for (std::size_t k = 0; k < tr.updates.size(); ++k) {
        const UpdateRecord& u = tr.updates[k];
        f << k + 1 << ',' << u.block.name() << ',' << u.outer << ',' << format_double(u.mse)
          << ',' << (u.case_taken ? std::string(to_string(*u.case_taken)) : "") << ','
          << (u.kind ? std::string(to_string(*u.kind)) : "") << ',' << format_double(u.mu)
          << ',' << format_double(u.power_slack) << ',' << format_double(u.step_sq) << '\n';
      }
      if (!f) throw std::runtime_error("write failed for '" + p.string() + "'");
    }
  }
  return 0;
}

void print_table(const std::vector<AggregateRow>& table) {
  std::printf("%8s %-18s %5s %6s %22s %10s\n", "snr0_db", "algorithm", "ok", "failed",
              "mean_mse", "iters0.1%");
  for (const auto& r : table)
    std::printf("%8g %-18s %5d %6d %22.15e %10.2f\n", r.snr0_db, r.algorithm.c_str(), r.n_ok,
                r.n_failed, r.mean_mse, r.mean_iters_to_0p1pct);
}

void write_all(const SweepResult& res, const fs::path& dir) {
  export_csv(res.records, (dir / "records.csv").string());
  export_itineraries(res.records, (dir / "itineraries.csv").string());
  export_summary(res.table, (dir / "summary.csv").string());
  export_mean_itineraries(res.table, (dir / "mean_itineraries.csv").string());
  export_timing(res.records, (dir / "timing.csv").string());
}

int cmd_sweep(const Common& c) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.master_seed = *c.seed;
  const SweepResult res = run_sweep(cfg, c.parallel);
  const fs::path dir = out_dir(c);
  write_all(res, dir);
  print_table(res.table);
  std::printf("wrote %zu records to %s\n", res.records.size(), dir.string().c_str());
  int failed = 0;
  for (const auto& r : res.records) failed += r.ok ? 0 : 1;
  if (failed) std::fprintf(stderr, "%d runs failed; see records.csv\n", failed);
  return 0;
}

int cmd_itinerary(const Common& c, double snr0, int realization, int n_seeds) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.master_seed = *c.seed;
  const SweepResult res = run_itinerary(cfg, snr0, realization, n_seeds, c.parallel);
  const fs::path dir = out_dir(c);
  write_all(res, dir);
  print_table(res.table);
  std::printf("wrote %zu records to %s\n", res.records.size(), dir.string().c_str());
  return 0;
}

int cmd_compare(const Common& c, double snr0, int realization, int iterations) {
  const ExperimentConfig cfg = load(c);
  const SystemModel model = build_model(cfg, snr0, realization);
  const std::uint64_t seed = c.seed ? *c.seed : init_seed(cfg, realization, 0);
  const auto rows = compare_timing(model, cfg.algorithms, seed, iterations);
  std::printf("%-18s %6s %16s %8s\n", "algorithm", "outer", "sec/outer", "ratio");
  const double base = rows.front().seconds_per_outer;
  for (const auto& r : rows)
    std::printf("%-18s %6d %16.6e %8.2f\n", r.algorithm.c_str(), r.outer_iterations,
                r.seconds_per_outer, r.seconds_per_outer / base);
  if (!c.out.empty()) {
    const fs::path p = out_dir(c) / "compare.csv";
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    f << "algorithm,outer_iterations,seconds_per_outer\n";
    for (const auto& r : rows)
      f << r.algorithm << ',' << r.outer_iterations << ',' << format_double(r.seconds_per_outer)
        << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MMSE transceiver design for multi-sensor MIMO networks by block coordinate descent"};
  app.require_subcommand(1);

  Common solve_c, sweep_c, itin_c, cmp_c;
  double solve_snr = 6.0, itin_snr = 2.0, cmp_snr = 10.0;
  int solve_real = 0, itin_real = 0, cmp_real = 0, itin_seeds = 10, cmp_iters = 10;

  auto* solve = app.add_subcommand("solve", "run algorithms on one instance and print the trace");
  add_common(solve, solve_c);
  solve->add_option("--seed", solve_c.seed, "initialization seed");
  solve->add_option("--snr0", solve_snr, "channel SNR in dB")->capture_default_str();
  solve->add_option("--realization", solve_real, "channel realization index")
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over the SNR grid");
  add_common(sweep, sweep_c);
  sweep->add_option("--seed", sweep_c.seed, "master seed (overrides the config)");

  auto* itin = app.add_subcommand("itinerary", "fixed channel, several initializations");
  add_common(itin, itin_c);
  itin->add_option("--seed", itin_c.seed, "master seed (overrides the config)");
  itin->add_option("--snr0", itin_snr, "channel SNR in dB")->capture_default_str();
  itin->add_option("--realization", itin_real, "channel realization index")
      ->capture_default_str();
  itin->add_option("--seeds", itin_seeds, "initializations per algorithm")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* cmp = app.add_subcommand("compare", "wall time per outer iteration");
  add_common(cmp, cmp_c);
  cmp->add_option("--seed", cmp_c.seed, "initialization seed");
  cmp->add_option("--snr0", cmp_snr, "channel SNR in dB")->capture_default_str();
  cmp->add_option("--realization", cmp_real, "channel realization index")
      ->capture_default_str();
  cmp->add_option("--iterations", cmp_iters, "outer iterations to time")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(solve_c, solve_snr, solve_real);
    if (*sweep) return cmd_sweep(sweep_c);
    if (*itin) return cmd_itinerary(itin_c, itin_snr, itin_real, itin_seeds);
    if (*cmp) return cmd_compare(cmp_c, cmp_snr, cmp_real, cmp_iters);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mmsebcd: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
