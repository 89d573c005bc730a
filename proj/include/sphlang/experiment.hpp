#pragma once

// Config-driven experiment orchestration: instances per seed, the Langevin
// and minibatch runs, seed sweeps and oracle reports. Output is one CSV per
// seed plus a manifest.json holding the fully resolved configuration.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "sphlang/dynamics.hpp"
#include "sphlang/errors.hpp"
#include "sphlang/estimators.hpp"
#include "sphlang/hermite.hpp"
#include "sphlang/models.hpp"
#include "sphlang/oracles.hpp"

#ifndef SPHLANG_VERSION
#define SPHLANG_VERSION "0.1.0+unknown"
#endif

namespace sphlang {

inline constexpr const char* kVersion = SPHLANG_VERSION;

enum class Problem { tensor_pca, single_index };
enum class Algorithm { langevin_avg, minibatch_avg, langevin_avg_then_online_sgd };
enum class Estimator { automatic, odd, even };

inline constexpr double kLargeRunBytes = 1024.0 * 1024.0 * 1024.0;

struct ExperimentConfig {
  Problem problem = Problem::tensor_pca;
  int k = 0;  // tensor order, or the link's information exponent (resolved)
  std::optional<LinkFunction> link;
  Eigen::Index d = 0;
  nlohmann::json n_spec;  // integer or {"paper_scale": c}
  long n = 0;             // resolved sample count
  Algorithm algorithm = Algorithm::langevin_avg;
  // nullopt means "auto" until resolve().
  std::optional<double> epsilon;
  std::optional<double> eta;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<long> steps;  // minibatch iterations
  std::optional<long> record_stride;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> instance_seed;  // share one instance across seeds
  double noise_std = 0.0;
  bool couple_brownian = false;
  Estimator estimator = Estimator::automatic;
  double online_eta = 0.004;
  std::optional<long> online_samples;  // auto: 20 d
  long oracle_samples = 100000;
  double max_steps = 1e8;
  std::filesystem::path output_dir = "out";
  std::vector<std::string> warnings;

  Parity parity() const { return parity_of(k); }
  Estimator resolved_estimator() const {
    if (estimator != Estimator::automatic) return estimator;
    return parity() == Parity::odd ? Estimator::odd : Estimator::even;
  }

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void resolve();
};

namespace detail {

template <class T>
T get_field(const nlohmann::json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(name, e.what());
  }
}

inline std::optional<double> auto_or_number(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) return std::nullopt;
  const auto& v = j.at(name);
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (!v.is_number()) throw ConfigError(name, "expected a number or \"auto\"");
  return v.get<double>();
}

inline std::optional<long> auto_or_integer(const nlohmann::json& j, const char* name) {
  const auto v = auto_or_number(j, name);
  if (!v) return std::nullopt;
  if (*v != std::floor(*v)) throw ConfigError(name, "expected an integer");
  return static_cast<long>(*v);
}

inline nlohmann::json auto_or(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("auto");
}

inline const char* name_of(Algorithm a) {
  switch (a) {
    case Algorithm::langevin_avg: return "langevin_avg";
    case Algorithm::minibatch_avg: return "minibatch_avg";
    case Algorithm::langevin_avg_then_online_sgd: return "langevin_avg_then_online_sgd";
  }
  return "";
}

inline const char* name_of(Estimator e) {
  switch (e) {
    case Estimator::automatic: return "auto";
    case Estimator::odd: return "odd";
    case Estimator::even: return "even";
  }
  return "";
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  using detail::get_field;
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  ExperimentConfig c;

  const auto problem = get_field<std::string>(j, "problem");
  if (problem == "tensor_pca") {
    c.problem = Problem::tensor_pca;
    c.k = get_field<int>(j, "k");
    if (c.k < 2) throw ConfigError("k", "tensor order must be >= 2");
  } else if (problem == "single_index") {
    c.problem = Problem::single_index;
    if (j.contains("link")) {
      const auto& l = j.at("link");
      try {
        c.link = l.is_string() ? LinkFunction::from_name(l.get<std::string>()) : link_from_json(l);
      } catch (const Error& e) {
        throw ConfigError("link", e.what());
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("link", e.what());
      }
    } else if (j.contains("k")) {
      const int k = get_field<int>(j, "k");
      if (k < 1) throw ConfigError("k", "information exponent must be >= 1");
      c.link = LinkFunction::hermite(k);
    } else {
      throw ConfigError("link", "single_index needs \"link\" (name or object) or \"k\"");
    }
  } else {
    throw ConfigError("problem", "expected \"tensor_pca\" or \"single_index\", got \"" + problem + "\"");
  }

  const long d = get_field<long>(j, "d");
  if (d < 2) throw ConfigError("d", "must be >= 2");
  c.d = d;

  if (!j.contains("n")) throw ConfigError("n", "missing");
  c.n_spec = j.at("n");
  if (!(c.n_spec.is_number_integer() ||
        (c.n_spec.is_object() && c.n_spec.contains("paper_scale") && c.n_spec.at("paper_scale").is_number()))) {
    throw ConfigError("n", "expected an integer or {\"paper_scale\": c}");
  }

  const auto algorithm = j.value("algorithm", std::string("langevin_avg"));
  if (algorithm == "langevin_avg") {
    c.algorithm = Algorithm::langevin_avg;
  } else if (algorithm == "minibatch_avg") {
    c.algorithm = Algorithm::minibatch_avg;
  } else if (algorithm == "langevin_avg_then_online_sgd") {
    c.algorithm = Algorithm::langevin_avg_then_online_sgd;
  } else {
    throw ConfigError("algorithm", "unknown algorithm \"" + algorithm + "\"");
  }
  if (c.algorithm != Algorithm::langevin_avg && c.problem != Problem::single_index) {
    throw ConfigError("algorithm", std::string(detail::name_of(c.algorithm)) + " needs problem single_index");
  }

  c.epsilon = detail::auto_or_number(j, "epsilon");
  c.eta = detail::auto_or_number(j, "eta");
  c.horizon = detail::auto_or_number(j, "horizon");
  c.dt = detail::auto_or_number(j, "dt");
  c.steps = detail::auto_or_integer(j, "steps");
  c.record_stride = detail::auto_or_integer(j, "record_stride");
  if (c.epsilon && *c.epsilon < 0) throw ConfigError("epsilon", "must be >= 0");
  if (c.eta && !(*c.eta > 0)) throw ConfigError("eta", "must be > 0");
  if (c.horizon && !(*c.horizon > 0)) throw ConfigError("horizon", "must be > 0");
  if (c.dt && !(*c.dt > 0)) throw ConfigError("dt", "must be > 0");
  if (c.steps && *c.steps < 1) throw ConfigError("steps", "must be >= 1");
  if (c.record_stride && *c.record_stride < 1) throw ConfigError("record_stride", "must be >= 1");

  if (!j.contains("seeds")) throw ConfigError("seeds", "missing");
  const auto& seeds = j.at("seeds");
  auto non_negative = [](const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  };
  if (non_negative(seeds)) {
    for (std::uint64_t s = 0; s < seeds.get<std::uint64_t>(); ++s) c.seeds.push_back(s);
  } else if (seeds.is_array()) {
    for (const auto& s : seeds) {
      if (!non_negative(s)) throw ConfigError("seeds", "entries must be non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    throw ConfigError("seeds", "expected a list of integers or a count");
  }
  if (c.seeds.empty()) throw ConfigError("seeds", "must not be empty");

  if (j.contains("instance_seed") && !j.at("instance_seed").is_null()) {
    c.instance_seed = get_field<std::uint64_t>(j, "instance_seed");
  }
  c.noise_std = j.contains("noise_std") ? get_field<double>(j, "noise_std") : 0.0;
  if (!(c.noise_std >= 0)) throw ConfigError("noise_std", "must be >= 0");
  c.couple_brownian = j.contains("couple_brownian") ? get_field<bool>(j, "couple_brownian") : false;

  const auto estimator = j.value("estimator", std::string("auto"));
  if (estimator == "auto") {
    c.estimator = Estimator::automatic;
  } else if (estimator == "odd") {
    c.estimator = Estimator::odd;
  } else if (estimator == "even") {
    c.estimator = Estimator::even;
  } else {
    throw ConfigError("estimator", "expected \"auto\", \"odd\" or \"even\"");
  }

  if (j.contains("online_sgd")) {
    const auto& o = j.at("online_sgd");
    if (!o.is_object()) throw ConfigError("online_sgd", "expected an object");
    if (o.contains("eta")) {
      if (!o.at("eta").is_number() || !(o.at("eta").get<double>() >= 0)) {
        throw ConfigError("online_sgd.eta", "must be a number >= 0");
      }
      c.online_eta = o.at("eta").get<double>();
    }
    if (o.contains("samples")) {
      const auto s = detail::auto_or_integer(o, "samples");
      if (s && *s < 0) throw ConfigError("online_sgd.samples", "must be >= 0");
      c.online_samples = s;
    }
  }
  if (j.contains("oracle_samples")) {
    c.oracle_samples = get_field<long>(j, "oracle_samples");
    if (c.oracle_samples < 1000) throw ConfigError("oracle_samples", "must be >= 1000");
  }
  if (j.contains("max_steps")) {
    c.max_steps = get_field<double>(j, "max_steps");
    if (!(c.max_steps >= 1)) throw ConfigError("max_steps", "must be >= 1");
  }
  if (j.contains("output_dir")) c.output_dir = get_field<std::string>(j, "output_dir");
  return c;
}

/// Fills every "auto" field from the default rules and validates the result.
inline void ExperimentConfig::resolve() {
  warnings.clear();
  if (problem == Problem::single_index) {
    try {
      k = information_exponent(expand(*link));
    } catch (const NoSignalError& e) {
      throw ConfigError("link", e.what());
    }
  }
  if (estimator == Estimator::odd && parity() == Parity::even) {
    throw ConfigError("estimator", "the odd estimator does not apply to an even information exponent");
  }

  if (n_spec.is_object()) {
    const double c = n_spec.at("paper_scale").get<double>();
    if (!(c > 0)) throw ConfigError("n", "paper_scale must be > 0");
    const int power = (k + 1) / 2;
    n = std::lround(c * std::pow(static_cast<double>(d), power));
  } else {
    n = n_spec.get<long>();
  }
  if (n < 1) throw ConfigError("n", "must be >= 1");

  if (algorithm == Algorithm::minibatch_avg) {
    if (!eta) eta = 0.01;
    if (!steps) {
      steps = static_cast<long>(std::min(max_steps, 100.0 * static_cast<double>(n)));
    } else if (static_cast<double>(*steps) > max_steps) {
      throw ConfigError("steps", "exceeds max_steps");
    }
    if (!record_stride) record_stride = std::max(1L, *steps / 1000);
    return;
  }

  if (!epsilon) epsilon = default_epsilon(k, d);
  if (!dt) dt = default_dt(d);
  if (!horizon) {
    horizon = default_horizon(k, d, *epsilon);
    if (*horizon / *dt > max_steps) {
      warnings.push_back("default horizon " + std::to_string(*horizon) + " capped at max_steps * dt = " +
                         std::to_string(max_steps * *dt));
      horizon = max_steps * *dt;
    }
  } else if (*horizon / *dt > max_steps) {
    throw ConfigError("horizon", "horizon / dt exceeds max_steps");
  }
  const long sde_steps = std::max(1L, std::lround(*horizon / *dt));
  if (!record_stride) record_stride = std::max(1L, sde_steps / 1000);
  if (algorithm == Algorithm::langevin_avg_then_online_sgd && !online_samples) online_samples = 20 * d;

  SdeConfig probe{.dimension = d, .epsilon = *epsilon, .dt = *dt, .horizon = *horizon,
                  .record_stride = *record_stride};
  probe.validate();
}

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["problem"] = problem == Problem::tensor_pca ? "tensor_pca" : "single_index";
  if (problem == Problem::tensor_pca) {
    j["k"] = k;
  } else {
    j["link"] = link_to_json(*link);
  }
  j["d"] = d;
  j["n"] = n > 0 ? nlohmann::json(n) : n_spec;
  j["algorithm"] = detail::name_of(algorithm);
  j["epsilon"] = detail::auto_or(epsilon);
  j["eta"] = detail::auto_or(eta);
  j["horizon"] = detail::auto_or(horizon);
  j["dt"] = detail::auto_or(dt);
  j["steps"] = steps ? nlohmann::json(*steps) : nlohmann::json("auto");
  j["record_stride"] = record_stride ? nlohmann::json(*record_stride) : nlohmann::json("auto");
  j["seeds"] = seeds;
  j["instance_seed"] = instance_seed ? nlohmann::json(*instance_seed) : nlohmann::json(nullptr);
  j["noise_std"] = noise_std;
  j["couple_brownian"] = couple_brownian;
  j["estimator"] = detail::name_of(estimator);
  j["online_sgd"] = {{"eta", online_eta},
                     {"samples", online_samples ? nlohmann::json(*online_samples) : nlohmann::json("auto")}};
  j["oracle_samples"] = oracle_samples;
  j["max_steps"] = max_steps;
  j["output_dir"] = output_dir.string();
  return j;
}

// ---------------------------------------------------------------------------

struct RunOptions {
  unsigned workers = 1;
  std::uint64_t seed_offset = 0;
  bool large = false;
  std::ostream* log = nullptr;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::string csv;
  bool ok = false;
  std::string error;
  std::vector<std::pair<std::string, double>> metrics;

  double metric(const std::string& name) const {
    for (const auto& [k, v] : metrics) {
      if (k == name) return v;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
};

struct RunResult {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  double wall_seconds = 0.0;
  nlohmann::json manifest;
  bool all_ok() const {
    for (const auto& s : seeds) {
      if (!s.ok) return false;
    }
    return true;
  }
};

/// Metric columns in the order they appear in sweep tables.
inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "corr_estimate", "corr_avg",   "corr_eig",  "eig_gap",   "corr_final_iterate", "max_abs_corr_iterate",
      "norm_avg",      "err_sup",    "drift_sup", "corr_refined", "steps",           "total_time"};
  return names;
}

/// Resident bytes one worker needs for an instance and its accumulators.
inline double estimate_bytes_per_worker(const ExperimentConfig& c) {
  const double d = static_cast<double>(c.d);
  double bytes = 2.0 * d * d * 8.0;  // second moment and scratch
  if (c.problem == Problem::single_index) {
    bytes += static_cast<double>(c.n) * (d + 2.0) * 8.0;
  } else {
    const double entries = std::pow(d, c.k);
    if (entries <= kMaxMaterializedEntries) bytes += entries * 8.0;
  }
  return bytes;
}

inline double estimate_bytes(const ExperimentConfig& c, unsigned workers) {
  const auto parallel = std::min<std::size_t>(std::max(1u, workers), c.seeds.size());
  return estimate_bytes_per_worker(c) * static_cast<double>(parallel);
}

inline std::string format_bytes(double bytes) {
  std::ostringstream os;
  os.precision(3);
  if (bytes >= 1024.0 * 1024.0 * 1024.0) {
    os << bytes / (1024.0 * 1024.0 * 1024.0) << " GiB";
  } else {
    os << bytes / (1024.0 * 1024.0) << " MiB";
  }
  return os.str();
}

inline UnitVector draw_theta_star(const ExperimentConfig& c, std::uint64_t seed) {
  const std::uint64_t base = c.instance_seed.value_or(seed);
  RandomStream rng(derive_seed(base, 100));
  return sample_uniform(c.d, rng);
}

inline ProblemInstance build_instance(const ExperimentConfig& c, std::uint64_t seed) {
  const std::uint64_t base = c.instance_seed.value_or(seed);
  const UnitVector theta_star = draw_theta_star(c, seed);
  if (c.problem == Problem::tensor_pca) {
    return TensorPcaInstance(c.k, theta_star, 1.0 / std::sqrt(static_cast<double>(c.n)), derive_seed(base, 101));
  }
  return make_single_index(c.n, c.d, *c.link, theta_star, c.noise_std, derive_seed(base, 101));
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline SeedResult run_one_seed(const ExperimentConfig& c, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  r.csv = "seed_" + std::to_string(seed) + ".csv";
  const ProblemInstance instance = build_instance(c, seed);
  const UnitVector& theta_star = instance.theta_star();
  const Symmetry sym = c.parity() == Parity::even ? Symmetry::absolute : Symmetry::signed_value;
  const Estimator est = c.resolved_estimator();
  auto put = [&](const char* name, double v) { r.metrics.emplace_back(name, v); };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  TrajectorySummary summary = [&] {
    if (c.algorithm == Algorithm::minibatch_avg) {
      const MinibatchConfig mc{.eta = *c.eta, .steps = *c.steps, .seed = derive_seed(seed, 102),
                               .record_stride = *c.record_stride, .parity = c.parity(),
                               .accumulate_second_moment = est == Estimator::even};
      return run_minibatch_sgd(mc, instance.single_index());
    }
    const SdeConfig sc{.dimension = c.d, .epsilon = *c.epsilon, .dt = *c.dt, .horizon = *c.horizon,
                       .seed = derive_seed(seed, 102), .record_stride = *c.record_stride,
                       .couple_brownian = c.couple_brownian, .parity = c.parity(),
                       .accumulate_second_moment = est == Estimator::even};
    return run_algorithm_one(sc, instance);
  }();

  std::ostringstream csv;
  summary.write_csv(csv);
  write_text(c.output_dir / r.csv, csv.str());

  const double norm_avg = summary.theta_avg.norm();
  const double corr_avg =
      norm_avg > kMinRetractNorm ? correlation(finalize_odd(summary), theta_star, sym) : nan;
  double corr_eig = nan, gap = nan;
  std::optional<UnitVector> estimate;
  if (est == Estimator::odd) {
    estimate = finalize_odd(summary);
  } else {
    const EigenPair pair = finalize_even(summary);
    corr_eig = correlation(pair.vector, theta_star, Symmetry::absolute);
    gap = pair.gap_estimate;
    estimate = pair.vector;
  }
  put("corr_estimate", correlation(*estimate, theta_star, sym));
  put("corr_avg", corr_avg);
  put("corr_eig", corr_eig);
  put("eig_gap", gap);
  put("corr_final_iterate", correlation(summary.final_iterate, theta_star, sym));
  put("max_abs_corr_iterate", summary.max_abs_corr_iterate);
  put("norm_avg", norm_avg);
  put("err_sup", summary.coupled ? summary.error_sup : nan);
  put("drift_sup", c.algorithm == Algorithm::minibatch_avg ? nan : summary.drift_sup);

  double refined = nan;
  if (c.algorithm == Algorithm::langevin_avg_then_online_sgd) {
    const long budget = *c.online_samples;
    SampleStream stream(*c.link, theta_star, c.noise_std, derive_seed(seed, 103), static_cast<std::size_t>(budget));
    refined = correlation(online_sgd_refine(*estimate, stream, c.online_eta, budget), theta_star, sym);
  }
  put("corr_refined", refined);
  put("steps", static_cast<double>(summary.steps));
  put("total_time", summary.total_time);
  r.ok = true;
  return r;
}

/// Runs `task(i)` for i in [0, count) on at most `workers` threads.
template <class Task>
void parallel_for(std::size_t count, unsigned workers, Task&& task) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline nlohmann::json metrics_json(const SeedResult& r) {
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) m[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  return m;
}

}  // namespace detail

/// Resolves `config` and checks the memory gate; returns the resolved copy.
inline ExperimentConfig prepare(ExperimentConfig config, const RunOptions& options) {
  for (auto& s : config.seeds) s += options.seed_offset;
  config.resolve();
  const double bytes = estimate_bytes(config, options.workers);
  if (options.log) *options.log << "estimated memory: " << format_bytes(bytes) << "\n";
  if (bytes > kLargeRunBytes && !options.large) {
    throw ConfigError("n", "estimated memory " + format_bytes(bytes) + " exceeds 1 GiB; pass --large to proceed");
  }
  return config;
}

/// One CSV per seed and a manifest.json under config.output_dir.
inline RunResult run(ExperimentConfig config, const RunOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  config = prepare(std::move(config), options);
  detail::ensure_directory(config.output_dir);
  if (options.log) {
    for (const auto& w : config.warnings) *options.log << "warning: " << w << "\n";
  }

  std::vector<SeedResult> results(config.seeds.size());
  std::mutex log_mutex;
  detail::parallel_for(config.seeds.size(), options.workers, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    try {
      results[i] = detail::run_one_seed(config, seed);
    } catch (const std::exception& e) {
      results[i].seed = seed;
      results[i].ok = false;
      results[i].error = e.what();
    }
    if (options.log) {
      std::lock_guard lock(log_mutex);
      *options.log << "seed " << seed << (results[i].ok ? " done" : " failed: " + results[i].error) << "\n";
    }
  });

  RunResult out;
  out.config = config;
  out.seeds = std::move(results);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = config.to_json();
  manifest["information_exponent"] = config.k;
  manifest["warnings"] = config.warnings;
  manifest["wall_time_seconds"] = out.wall_seconds;
  manifest["seeds"] = nlohmann::json::array();
  for (const auto& r : out.seeds) {
    nlohmann::json s{{"seed", r.seed}, {"ok", r.ok}};
    if (r.ok) {
      s["csv"] = r.csv;
      s["metrics"] = detail::metrics_json(r);
    } else {
      s["error"] = r.error;
    }
    manifest["seeds"].push_back(s);
  }
  detail::write_text(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  out.manifest = std::move(manifest);
  return out;
}

/// Numeric config fields a sweep may vary. Dotted names address nested keys.
inline const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names{"epsilon", "eta",       "horizon", "dt",
                                              "steps",   "d",         "n",       "k",
                                              "noise_std", "record_stride", "online_sgd.eta",
                                              "online_sgd.samples"};
  return names;
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

/// Runs the base config once per value of `parameter`, each into its own
/// subdirectory, and writes a long-format sweep_<parameter>.csv.
inline std::vector<RunResult> sweep(const nlohmann::json& base, const std::string& parameter,
                                    const std::vector<double>& values, const RunOptions& options = {}) {
  const auto& allowed = sweepable_parameters();
  if (std::find(allowed.begin(), allowed.end(), parameter) == allowed.end()) {
    throw ConfigError(parameter, "not a sweepable numeric parameter");
  }
  if (values.empty()) throw ConfigError(parameter, "no sweep values given");
  const ExperimentConfig probe = ExperimentConfig::from_json(base);
  const std::filesystem::path root = probe.output_dir;
  detail::ensure_directory(root);

  std::vector<RunResult> runs;
  for (double v : values) {
    nlohmann::json j = base;
    const auto dot = parameter.find('.');
    nlohmann::json& slot = dot == std::string::npos ? j[parameter] : j[parameter.substr(0, dot)][parameter.substr(dot + 1)];
    const bool integral = parameter == "steps" || parameter == "d" || parameter == "n" || parameter == "k" ||
                          parameter == "record_stride" || parameter == "online_sgd.samples";
    if (integral) {
      if (v != std::floor(v)) throw ConfigError(parameter, "expects integer values");
      slot = static_cast<long>(v);
    } else {
      slot = v;
    }
    j["output_dir"] = (root / (parameter + "=" + format_value(v))).string();
    runs.push_back(run(ExperimentConfig::from_json(j), options));
  }

  std::ostringstream table;
  table.precision(17);
  table << "parameter,value,seed,ok";
  for (const auto& m : metric_names()) table << ',' << m;
  table << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (const auto& s : runs[i].seeds) {
      table << parameter << ',' << format_value(values[i]) << ',' << s.seed << ',' << (s.ok ? 1 : 0);
      for (const auto& m : metric_names()) table << ',' << s.metric(m);
      table << '\n';
    }
  }
  detail::write_text(root / ("sweep_" + parameter + ".csv"), table.str());
  return runs;
}

/// Monte-Carlo stationary averages (and closed forms where they exist) for the
/// instance of every seed; writes oracle.json.
inline nlohmann::json oracle(ExperimentConfig config, const RunOptions& options = {}) {
  config = prepare(std::move(config), options);
  detail::ensure_directory(config.output_dir);
  nlohmann::json report;
  report["version"] = kVersion;
  report["config"] = config.to_json();
  report["information_exponent"] = config.k;
  if (config.problem == Problem::single_index) {
    const HermiteExpansion e = expand(*config.link);
    report["hermite_coefficients"] = e.coefficients;
    report["hermite_residual_mass"] = e.residual_mass;
    if (config.k >= 2) {
      // Information exponent of x sigma(x), reported only.
      std::vector<double> shifted(static_cast<std::size_t>(e.truncation_order) + 2, 0.0);
      const auto& c = e.coefficients;
      for (int j = 0; j <= e.truncation_order; ++j) {
        shifted[static_cast<std::size_t>(j) + 1] += std::sqrt(j + 1.0) * c[static_cast<std::size_t>(j)];
        if (j >= 1) shifted[static_cast<std::size_t>(j) - 1] += std::sqrt(static_cast<double>(j)) * c[static_cast<std::size_t>(j)];
      }
      int exponent = -1;
      for (std::size_t j = 1; j < shifted.size(); ++j) {
        if (std::abs(shifted[j]) > 1e-8) {
          exponent = static_cast<int>(j);
          break;
        }
      }
      report["x_times_link_information_exponent"] = exponent;
    }
  }
  report["seeds"] = nlohmann::json::array();
  for (std::uint64_t seed : config.seeds) {
    const ProblemInstance instance = build_instance(config, seed);
    const UnitVector& ts = instance.theta_star();
    const StationaryAverages avg = mc_stationary(instance, config.oracle_samples, derive_seed(seed, 104),
                                                 std::max(1u, options.workers));
    const double b_norm = avg.b_bar.norm();
    const double proj = avg.b_bar.dot(ts.coords());
    const double proj_se = std::sqrt(avg.b_se.cwiseProduct(ts.coords()).squaredNorm());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(avg.g_bar);
    const Vector top = eig.eigenvectors().col(config.d - 1);
    nlohmann::json s{{"seed", seed},
                     {"mc_samples", avg.mc_samples},
                     {"b_bar_norm", b_norm},
                     {"b_bar_projection", proj},
                     {"b_bar_projection_t", proj / proj_se},
                     {"b_bar_correlation", b_norm > 0 ? proj / b_norm : 0.0},
                     {"b_se_mean", avg.b_se.mean()},
                     {"g_bar_top_eigenvalue", eig.eigenvalues()[config.d - 1]},
                     {"g_bar_top_correlation", std::abs(top.dot(ts.coords()))}};
    if (config.problem == Problem::tensor_pca && config.k % 2 == 1) {
      s["closed_form_scale"] = closed_form_tpca_scale(config.k, config.d);
    }
    report["seeds"].push_back(s);
    if (options.log) *options.log << "oracle seed " << seed << " done\n";
  }
  detail::write_text(config.output_dir / "oracle.json", report.dump(2) + "\n");
  return report;
}

/// Reads a config (or a manifest, whose "config" entry is used) from disk.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  if (j.contains("config") && j.contains("seeds") && j.at("seeds").is_array() && j.contains("version")) {
    return ExperimentConfig::from_json(j.at("config"));
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace sphlang
