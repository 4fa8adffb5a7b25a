// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo harness: channel draws, Toeplitz sensor noise, SNR sweeps,
// per-seed itineraries, per-iteration timing and CSV export.
//
// Random streams (all keyed by master_seed):
//   channels of realization r      stream(channel, r)       shared by SNR points
//   init seed of (r, seed index s) stream(seed, r, s)        shared by algorithms
#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsebcd/bcd.hpp"
#include "mmsebcd/errors.hpp"
#include "mmsebcd/model.hpp"
#include "mmsebcd/rng.hpp"

namespace mmsebcd {

enum class ObservationKind { identity, gaussian };

struct ModelTemplate {
  std::size_t K = 3;
  std::size_t M = 4;
  std::vector<std::size_t> N{3, 4, 5};
  std::vector<std::size_t> J{3, 3, 3};
  std::vector<double> P{2.0, 2.0, 3.0};
  ObservationKind observation = ObservationKind::identity;

  std::size_t L() const { return N.size(); }

  void validate() const {
    if (N.empty()) throw ConfigError("model template needs at least one sensor");
    if (J.size() != N.size() || P.size() != N.size())
      throw ConfigError("model template: N, J and P must have one entry per sensor");
    if (K == 0 || M == 0) throw ConfigError("model template: K and M must be >= 1");
    for (std::size_t i = 0; i < N.size(); ++i) {
      if (N[i] == 0 || J[i] == 0)
        throw ConfigError("model template: sensor dimensions must be >= 1");
      if (!(P[i] > 0.0)) throw ConfigError("model template: budgets must be positive");
      if (observation == ObservationKind::identity && J[i] != K)
        throw ConfigError("identity observation needs J_i = K (sensor " +
                          std::to_string(i + 1) + ")");
    }
  }
};

struct AlgorithmSpec {
  std::string id;
  SolverConfig solver;
};

struct ExperimentConfig {
  ModelTemplate model;
  double rho = 0.5;
  std::vector<double> sensor_snr_db{6.0, 7.0, 8.0};
  std::vector<double> snr0_grid_db{0.0, 6.0, 12.0, 18.0};
  int n_realizations = 50;
  int n_seeds = 1;
  std::vector<AlgorithmSpec> algorithms;
  std::uint64_t master_seed = 1;
  StoppingRule stopping;
  double init_fraction = 0.9;

  void validate() const {
    model.validate();
    if (!(std::abs(rho) < 1.0)) throw ConfigError("rho must satisfy |rho| < 1");
    if (sensor_snr_db.size() != model.L())
      throw ConfigError("sensor_snr_db needs one entry per sensor");
    if (snr0_grid_db.empty()) throw ConfigError("snr0_grid_db is empty");
    if (n_realizations < 1) throw ConfigError("n_realizations must be >= 1");
    if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
    if (algorithms.empty()) throw ConfigError("no algorithms configured");
    for (const auto& a : algorithms) a.solver.validate(model.L());
  }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// sigma_sq * T with T_jk = rho^|k-j|.
inline Mat toeplitz_noise(std::size_t J, double rho, double sigma_sq) {
  if (!(std::abs(rho) < 1.0))
    throw ConfigError("toeplitz_noise: |rho| must be < 1, got " + std::to_string(rho));
  if (!(sigma_sq > 0.0)) throw ConfigError("toeplitz_noise: sigma_sq must be positive");
  const auto n = static_cast<Eigen::Index>(J);
  Mat t(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      t(j, k) = sigma_sq * std::pow(rho, static_cast<double>(std::abs(k - j)));
  return t;
}

inline Mat complex_gaussian(Eigen::Index rows, Eigen::Index cols, Philox4x32& rng) {
  Mat x(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) x(r, c) = rng.complex_normal();
  return x;
}

/// H_i (M x N_i) with i.i.d. CN(0,1) entries, drawn for i = 1..L in order.
inline std::vector<Mat> draw_channels(const ModelTemplate& tmpl, Philox4x32& rng) {
  std::vector<Mat> h;
  for (std::size_t i = 0; i < tmpl.L(); ++i)
    h.push_back(complex_gaussian(static_cast<Eigen::Index>(tmpl.M),
                                 static_cast<Eigen::Index>(tmpl.N[i]), rng));
  return h;
}

inline SystemModel build_model(const ExperimentConfig& cfg, double snr0_db,
                               int realization) {
  Philox4x32 rng(cfg.master_seed,
                 stream_id(StreamPurpose::channel, static_cast<std::uint64_t>(realization)));
  const ModelTemplate& t = cfg.model;
  std::vector<Mat> channels = draw_channels(t, rng);
  const auto K = static_cast<Eigen::Index>(t.K);
  std::vector<SensorSpec> sensors;
  for (std::size_t i = 0; i < t.L(); ++i) {
    const auto J = static_cast<Eigen::Index>(t.J[i]);
    Mat obs = t.observation == ObservationKind::identity
                  ? Mat(Mat::Identity(J, K))
                  : complex_gaussian(J, K, rng);
    sensors.emplace_back(t.N[i], std::move(obs),
                         toeplitz_noise(t.J[i], cfg.rho,
                                        1.0 / db_to_linear(cfg.sensor_snr_db[i])),
                         t.P[i]);
  }
  return SystemModel(SourceModel(Mat::Identity(K, K)), std::move(sensors), t.M,
                     std::move(channels), 1.0 / db_to_linear(snr0_db));
}

/// Seed used to initialize run (realization, seed_index).
inline std::uint64_t init_seed(const ExperimentConfig& cfg, int realization,
                               int seed_index) {
  Philox4x32 rng(cfg.master_seed,
                 stream_id(StreamPurpose::seed, static_cast<std::uint64_t>(realization),
                           static_cast<std::uint64_t>(seed_index)));
  return rng();
}

/// Algorithm names:
///   two-bcd          joint beamformer solve, then G
///   layered[:N]      inner sweeps until 1e-9 decrease, or exactly N sweeps
///   bfg              F1,G,F2,G,...,FL,G with plain updates
///   bfg-prox         same schedule, proximal updates (kappa = 1)
///   bfg-approx       same schedule, approximate updates
///   bfg-approx-prox  approximate for 10 outer iterations, then proximal
///   gauss-seidel     F1,...,FL,G with plain updates
///   cyclic:<blocks>  explicit pattern such as cyclic:F1,F2,G,F3,G
inline SolverConfig parse_algorithm(const std::string& name, std::size_t L) {
  SolverConfig cfg;
  EssCyclic ec;
  ec.schedule = UpdateSchedule::fg(L);
  if (name == "two-bcd") {
    cfg.algorithm = TwoBcd{};
  } else if (name == "layered") {
    cfg.algorithm = Layered{};
  } else if (name.rfind("layered:", 0) == 0) {
    Layered ly;
    const std::string n = name.substr(8);
    int v = 0;
    const auto [p, ec2] = std::from_chars(n.data(), n.data() + n.size(), v);
    if (ec2 != std::errc{} || p != n.data() + n.size() || v < 1)
      throw ConfigError("bad inner iteration count in '" + name + "'");
    ly.inner_iters = v;
    cfg.algorithm = ly;
  } else if (name == "bfg") {
    cfg.algorithm = ec;
  } else if (name == "bfg-prox") {
    ec.rule.kind = UpdateRule::Kind::proximal;
    cfg.algorithm = ec;
  } else if (name == "bfg-approx") {
    ec.rule.kind = UpdateRule::Kind::approximate;
    cfg.algorithm = ec;
  } else if (name == "bfg-approx-prox") {
    ec.rule.kind = UpdateRule::Kind::approx_then_proximal;
    cfg.algorithm = ec;
  } else if (name == "gauss-seidel") {
    ec.schedule = UpdateSchedule::gauss_seidel(L);
    cfg.algorithm = ec;
  } else if (name.rfind("cyclic:", 0) == 0) {
    ec.schedule = UpdateSchedule::parse(name.substr(7), L);
    cfg.algorithm = ec;
  } else {
    throw ConfigError("unknown algorithm '" + name + "'");
  }
  return cfg;
}

inline std::vector<AlgorithmSpec> parse_algorithms(const std::vector<std::string>& names,
                                                   std::size_t L) {
  std::vector<AlgorithmSpec> out;
  for (const auto& n : names) out.push_back({n, parse_algorithm(n, L)});
  return out;
}

/// The paper's network: L=3, N=(3,4,5), M=4, K=3, K_i=I, Sigma_s=I,
/// rho=0.5, P=(2,2,3), sensor SNRs (6,7,8) dB; 50 realizations per point.
inline ExperimentConfig paper_preset() {
  ExperimentConfig cfg;
  cfg.algorithms = parse_algorithms({"two-bcd", "layered:2", "bfg", "bfg-prox",
                                     "bfg-approx", "bfg-approx-prox"},
                                    cfg.model.L());
  return cfg;
}

// ---------------------------------------------------------------------------
// Config file (JSON). Every key is optional and overrides paper_preset().

inline ExperimentConfig load_config(const nlohmann::json& j) {
  ExperimentConfig cfg = paper_preset();
  auto reject_unknown = [](const nlohmann::json& obj,
                           std::initializer_list<const char*> keys,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  };
  try {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    reject_unknown(j,
                   {"model", "rho", "sensor_snr_db", "snr0_grid_db", "n_realizations",
                    "n_seeds", "algorithms", "master_seed", "stopping", "init_fraction"},
                   "config");
    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"K", "M", "N", "J", "P", "observation"}, "model");
      if (m.contains("K")) cfg.model.K = m.at("K").get<std::size_t>();
      if (m.contains("M")) cfg.model.M = m.at("M").get<std::size_t>();
      if (m.contains("N")) cfg.model.N = m.at("N").get<std::vector<std::size_t>>();
      if (m.contains("J")) cfg.model.J = m.at("J").get<std::vector<std::size_t>>();
      if (m.contains("P")) cfg.model.P = m.at("P").get<std::vector<double>>();
      if (m.contains("observation")) {
        const auto o = m.at("observation").get<std::string>();
        if (o == "identity")
          cfg.model.observation = ObservationKind::identity;
        else if (o == "gaussian")
          cfg.model.observation = ObservationKind::gaussian;
        else
          throw ConfigError("model.observation must be 'identity' or 'gaussian'");
      }
    }
    if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
    if (j.contains("sensor_snr_db"))
      cfg.sensor_snr_db = j.at("sensor_snr_db").get<std::vector<double>>();
    if (j.contains("snr0_grid_db"))
      cfg.snr0_grid_db = j.at("snr0_grid_db").get<std::vector<double>>();
    if (j.contains("n_realizations")) cfg.n_realizations = j.at("n_realizations").get<int>();
    if (j.contains("n_seeds")) cfg.n_seeds = j.at("n_seeds").get<int>();
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("init_fraction")) cfg.init_fraction = j.at("init_fraction").get<double>();
    if (j.contains("stopping")) {
      const auto& s = j.at("stopping");
      reject_unknown(s, {"rel_tol", "max_outer"}, "stopping");
      if (s.contains("rel_tol")) cfg.stopping.rel_tol = s.at("rel_tol").get<double>();
      if (s.contains("max_outer")) cfg.stopping.max_outer = s.at("max_outer").get<int>();
    }
    std::vector<std::string> names;
    if (j.contains("algorithms"))
      names = j.at("algorithms").get<std::vector<std::string>>();
    else
      for (const auto& a : cfg.algorithms) names.push_back(a.id);
    cfg.algorithms = parse_algorithms(names, cfg.model.L());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return load_config(j);
}

/// Applies the sweep-wide stopping rule and init fraction to an algorithm.
inline SolverConfig effective_solver(const ExperimentConfig& cfg,
                                     const AlgorithmSpec& alg, std::uint64_t seed) {
  SolverConfig s = alg.solver;
  s.stopping = cfg.stopping;
  s.init_fraction = cfg.init_fraction;
  s.seed = seed;
  return s;
}

// ---------------------------------------------------------------------------
// Records

struct ResultRecord {
  double snr0_db = 0.0;
  int realization = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  bool ok = true;
  std::string error;
  double mse = 0.0;
  int outer_iterations = 0;
  int iters_to_0p1pct = 0;
  double stationarity = 0.0;
  std::string termination;
  std::vector<double> itinerary;  // [0] is the initial MSE
  double wall_seconds = 0.0;
};

/// First outer iteration k >= 1 with |mse_k - final| <= rel * final.
inline int iterations_to_within(const std::vector<double>& itinerary, double rel) {
  if (itinerary.size() < 2) return 1;
  const double final_mse = itinerary.back();
  for (std::size_t k = 1; k < itinerary.size(); ++k)
    if (std::abs(itinerary[k] - final_mse) <= rel * final_mse) return static_cast<int>(k);
  return static_cast<int>(itinerary.size()) - 1;
}

inline ResultRecord run_record(const ExperimentConfig& cfg, const SystemModel& model,
                               const AlgorithmSpec& alg, double snr0_db,
                               int realization, int seed_index) {
  ResultRecord rec;
  rec.snr0_db = snr0_db;
  rec.realization = realization;
  rec.seed_index = seed_index;
  rec.seed = init_seed(cfg, realization, seed_index);
  rec.algorithm = alg.id;
  try {
    const RunResult res = run(model, effective_solver(cfg, alg, rec.seed));
    const SolverTrace& tr = res.trace;
    rec.mse = tr.mse_per_outer.back();
    rec.outer_iterations = tr.outer_iterations();
    rec.iters_to_0p1pct = iterations_to_within(tr.mse_per_outer, 1e-3);
    rec.stationarity = tr.stationarity;
    rec.termination = std::string(to_string(tr.termination));
    rec.itinerary = tr.mse_per_outer;
    for (double s : tr.seconds_per_outer) rec.wall_seconds += s;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.mse = std::nan("");
  }
  return rec;
}

namespace detail {

/// Runs task(k) for k in [0, n) on up to `workers` threads. Results are
/// written by index, so the merged order never depends on scheduling.
template <class Task>
void parallel_for(std::size_t n, int workers, Task&& task) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (w <= 1) {
    for (std::size_t k = 0; k < n; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          task(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

struct AggregateRow {
  double snr0_db = 0.0;
  std::string algorithm;
  int n_ok = 0;
  int n_failed = 0;
  double mean_mse = 0.0;
  double mean_iters_to_0p1pct = 0.0;
  std::vector<double> mean_itinerary;  // finished runs padded with their final MSE
};

/// Aggregates per (SNR point, algorithm) in first-appearance order.
inline std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& records) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<const ResultRecord*>> members;
  for (const auto& r : records) {
    std::size_t k = 0;
    while (k < rows.size() && !(rows[k].snr0_db == r.snr0_db && rows[k].algorithm == r.algorithm))
      ++k;
    if (k == rows.size()) {
      AggregateRow row;
      row.snr0_db = r.snr0_db;
      row.algorithm = r.algorithm;
      rows.push_back(std::move(row));
      members.emplace_back();
    }
    members[k].push_back(&r);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    AggregateRow& row = rows[k];
    std::size_t len = 0;
    for (const auto* r : members[k]) {
      if (!r->ok) {
        ++row.n_failed;
        continue;
      }
      ++row.n_ok;
      row.mean_mse += r->mse;
      row.mean_iters_to_0p1pct += r->iters_to_0p1pct;
      len = std::max(len, r->itinerary.size());
    }
    if (row.n_ok == 0) {
      row.mean_mse = std::nan("");
      row.mean_iters_to_0p1pct = std::nan("");
      continue;
    }
    row.mean_mse /= row.n_ok;
    row.mean_iters_to_0p1pct /= row.n_ok;
    row.mean_itinerary.assign(len, 0.0);
    for (const auto* r : members[k]) {
      if (!r->ok) continue;
      for (std::size_t t = 0; t < len; ++t)
        row.mean_itinerary[t] += t < r->itinerary.size() ? r->itinerary[t] : r->itinerary.back();
    }
    for (double& v : row.mean_itinerary) v /= row.n_ok;
  }
  return rows;
}

struct SweepResult {
  std::vector<ResultRecord> records;
  std::vector<AggregateRow> table;
};

/// Every (SNR point, realization, seed index, algorithm) in config order.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int workers = 1) {
  cfg.validate();
  const std::size_t n_alg = cfg.algorithms.size();
  const auto n_real = static_cast<std::size_t>(cfg.n_realizations);
  const auto n_seed = static_cast<std::size_t>(cfg.n_seeds);
  const std::size_t n_jobs = cfg.snr0_grid_db.size() * n_real * n_seed;
  std::vector<ResultRecord> records(n_jobs * n_alg);
  detail::parallel_for(n_jobs, workers, [&](std::size_t job) {
    const std::size_t s = job % n_seed;
    const std::size_t r = (job / n_seed) % n_real;
    const std::size_t p = job / (n_seed * n_real);
    const double snr = cfg.snr0_grid_db[p];
    std::optional<SystemModel> model;
    std::string model_error;
    try {
      model.emplace(build_model(cfg, snr, static_cast<int>(r)));
    } catch (const std::exception& e) {
      model_error = e.what();
    }
    for (std::size_t a = 0; a < n_alg; ++a) {
      ResultRecord& out = records[job * n_alg + a];
      if (model) {
        out = run_record(cfg, *model, cfg.algorithms[a], snr, static_cast<int>(r),
                         static_cast<int>(s));
      } else {
        out.snr0_db = snr;
        out.realization = static_cast<int>(r);
        out.seed_index = static_cast<int>(s);
        out.seed = init_seed(cfg, static_cast<int>(r), static_cast<int>(s));
        out.algorithm = cfg.algorithms[a].id;
        out.ok = false;
        out.error = model_error;
        out.mse = std::nan("");
      }
    }
  });
  SweepResult result;
  result.table = aggregate(records);
  result.records = std::move(records);
  return result;
}

/// Fixed channel (one realization at one SNR point) and n_seeds
/// initializations per algorithm.
inline SweepResult run_itinerary(ExperimentConfig cfg, double snr0_db, int realization,
                                 int n_seeds, int workers = 1) {
  cfg.snr0_grid_db = {snr0_db};
  cfg.n_seeds = n_seeds;
  cfg.validate();
  const SystemModel model = build_model(cfg, snr0_db, realization);
  const std::size_t n_alg = cfg.algorithms.size();
  std::vector<ResultRecord> records(static_cast<std::size_t>(n_seeds) * n_alg);
  detail::parallel_for(records.size(), workers, [&](std::size_t k) {
    const auto s = static_cast<int>(k / n_alg);
    records[k] = run_record(cfg, model, cfg.algorithms[k % n_alg], snr0_db, realization, s);
  });
  SweepResult result;
  result.table = aggregate(records);
  result.records = std::move(records);
  return result;
}

struct TimingRow {
  std::string algorithm;
  int outer_iterations = 0;
  double seconds_per_outer = 0.0;
};

/// Mean wall time per outer iteration over `iterations` outer iterations
/// (the relative-decrease stop is disabled). Single-threaded.
inline std::vector<TimingRow> compare_timing(const SystemModel& model,
                                             const std::vector<AlgorithmSpec>& algorithms,
                                             std::uint64_t seed, int iterations = 10) {
  std::vector<TimingRow> rows;
  for (const auto& alg : algorithms) {
    SolverConfig s = alg.solver;
    s.seed = seed;
    s.stopping.max_outer = iterations;
    s.stopping.rel_tol = std::numeric_limits<double>::min();
    const RunResult res = run(model, s);
    TimingRow row{alg.id, res.trace.outer_iterations(), 0.0};
    for (double t : res.trace.seconds_per_outer) row.seconds_per_outer += t;
    row.seconds_per_outer /= std::max(row.outer_iterations, 1);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV. Floats carry 17 significant digits so a parse restores them exactly.

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("bad number '" + s + "' in CSV");
  return v;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' || c == '\r' ? ' ' : c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

inline void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline void require_records(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no records");
}

}  // namespace detail

inline constexpr const char* kRecordsHeader =
    "snr0_db,realization,seed_index,seed,algorithm,status,mse,outer_iterations,"
    "iters_to_0p1pct,stationarity,termination,error";

/// One row per run. Wall time is left out so equal seeds give equal bytes.
inline void export_csv(const std::vector<ResultRecord>& records, const std::string& path) {
  detail::require_records(records);
  auto out = detail::open_out(path);
  out << kRecordsHeader << '\n';
  for (const auto& r : records)
    out << format_double(r.snr0_db) << ',' << r.realization << ',' << r.seed_index << ','
        << r.seed << ',' << csv_field(r.algorithm) << ',' << (r.ok ? "ok" : "failed") << ','
        << format_double(r.mse) << ',' << r.outer_iterations << ',' << r.iters_to_0p1pct
        << ',' << format_double(r.stationarity) << ',' << r.termination << ','
        << csv_field(r.error) << '\n';
  detail::finish_out(out, path);
}

inline std::vector<ResultRecord> parse_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader)
    throw std::runtime_error("'" + path + "' is not a records file");
  std::vector<ResultRecord> out;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw std::runtime_error("malformed row in '" + path + "'");
    ResultRecord r;
    r.snr0_db = parse_double(f[0]);
    r.realization = std::stoi(f[1]);
    r.seed_index = std::stoi(f[2]);
    r.seed = std::stoull(f[3]);
    r.algorithm = f[4];
    r.ok = f[5] == "ok";
    r.mse = parse_double(f[6]);
    r.outer_iterations = std::stoi(f[7]);
    r.iters_to_0p1pct = std::stoi(f[8]);
    r.stationarity = parse_double(f[9]);
    r.termination = f[10];
    r.error = f[11];
    out.push_back(std::move(r));
  }
  return out;
}

/// One row per (run, outer iteration); iteration 0 is the initial point.
inline void export_itineraries(const std::vector<ResultRecord>& records,
                               const std::string& path) {
  detail::require_records(records);
  auto out = detail::open_out(path);
  out << "snr0_db,realization,seed_index,algorithm,outer,mse\n";
  for (const auto& r : records)
    for (std::size_t k = 0; k < r.itinerary.size(); ++k)
      out << format_double(r.snr0_db) << ',' << r.realization << ',' << r.seed_index << ','
          << csv_field(r.algorithm) << ',' << k << ',' << format_double(r.itinerary[k])
          << '\n';
  detail::finish_out(out, path);
}

inline void export_summary(const std::vector<AggregateRow>& table, const std::string& path) {
  if (table.empty()) throw std::invalid_argument("no records");
  auto out = detail::open_out(path);
  out << "snr0_db,algorithm,n_ok,n_failed,mean_mse,mean_iters_to_0p1pct\n";
  for (const auto& row : table)
    out << format_double(row.snr0_db) << ',' << csv_field(row.algorithm) << ',' << row.n_ok
        << ',' << row.n_failed << ',' << format_double(row.mean_mse) << ','
        << format_double(row.mean_iters_to_0p1pct) << '\n';
  detail::finish_out(out, path);
}

inline void export_mean_itineraries(const std::vector<AggregateRow>& table,
                                    const std::string& path) {
  if (table.empty()) throw std::invalid_argument("no records");
  auto out = detail::open_out(path);
  out << "snr0_db,algorithm,outer,mean_mse\n";
  for (const auto& row : table)
    for (std::size_t k = 0; k < row.mean_itinerary.size(); ++k)
      out << format_double(row.snr0_db) << ',' << csv_field(row.algorithm) << ',' << k << ','
          << format_double(row.mean_itinerary[k]) << '\n';
  detail::finish_out(out, path);
}

/// Wall times; not reproducible, kept apart from the deterministic files.
inline void export_timing(const std::vector<ResultRecord>& records, const std::string& path) {
  detail::require_records(records);
  auto out = detail::open_out(path);
  out << "snr0_db,realization,seed_index,algorithm,outer_iterations,wall_seconds\n";
  for (const auto& r : records)
    out << format_double(r.snr0_db) << ',' << r.realization << ',' << r.seed_index << ','
        << csv_field(r.algorithm) << ',' << r.outer_iterations << ','
        << format_double(r.wall_seconds) << '\n';
  detail::finish_out(out, path);
}

}  // namespace mmsebcd
