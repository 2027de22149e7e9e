#pragma once

// Experiment runner: instance families, the explore-then-commit baseline,
// seeded sweeps, sample-complexity search, log-log scaling fits and report
// emission.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsecb/ccsb.hpp"
#include "sparsecb/core.hpp"
#include "sparsecb/exo.hpp"
#include "sparsecb/io.hpp"
#include "sparsecb/lve.hpp"
#include "sparsecb/rng.hpp"

namespace sparsecb {

// Invalid configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { lve, ccsb, exo, baseline_etc };
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

enum class FamilyKind { sparse, planted, lower_bound, list, exo_tiny, file };
std::string to_string(FamilyKind f);
FamilyKind family_from_string(const std::string& name);

// ---------------------------------------------------------------- families

// Contexts are uniform. At each context a* and 2s-1 competitor actions carry
// reward: on 40 equally likely outcomes a* pays 1 in 21 of them and every
// competitor in 16, with at most s ones per outcome, so the L1 certificate
// holds with level s. The class holds the map x -> a*(x) at a random position
// and |Pi|-1 maps into the competitors, so every other policy trails by 0.125.
// Requires s integral, 2s <= actions, policies >= 1.
SparseInstance make_planted_env(std::size_t contexts, std::size_t actions,
                                double s, std::size_t policies, RngStream& rng);

// |X| contexts with uniform mass, each drawing a member of the
// make_bernoulli_grid(actions, 3, s) class; policies are distinct maps
// X -> A and always include the optimal one.
struct ExoInstance {
  ModelClass models;
  ModelEnvironment env;
  PolicyClass policies;
};
ExoInstance make_exo_tiny(std::size_t contexts, std::size_t actions, double s,
                          std::size_t policies, RngStream& rng);

// ---------------------------------------------------------------- baseline

// n0 = ceil(c * budget_scale * (|A|/eps^2) * log(|Pi|/delta)).
std::uint64_t etc_rounds(std::size_t actions, std::size_t policies, double eps,
                         double delta, double c, double budget_scale = 1.0);

// Explore-then-commit: n0 uniformly random actions, importance-weighted
// estimates with propensity 1/|A|, lowest-index argmax.
RunReport run_baseline_etc(const Environment& env, const PolicyClass& policies,
                           double eps, double delta, const RngStream& rng,
                           double c = 8.0, double budget_scale = 1.0);

// ---------------------------------------------------------------- sweeps

struct SweepPoint {
  Algorithm algorithm = Algorithm::lve;
  FamilyKind family = FamilyKind::sparse;
  double s = 1.0;
  std::size_t A_size = 8;
  std::size_t K = 0;  // semi-bandit only
  std::size_t m = 0;
  std::size_t Pi_size = 20;
  double eps = 0.2;
  double delta = 0.1;
  std::uint64_t seed = 0;

  std::size_t contexts = 4;
  RewardStyle style = RewardStyle::one_hot;
  SparsityMode mode = SparsityMode::l1;
  std::size_t outcomes = 4;
  std::string env_file;

  double T_multiplier = 8.0;
  double n_multiplier = 16.0;
  double budget_scale = 1.0;
  double etc_c = 8.0;
  double exo_gamma = 0.0;  // 0 selects 32 |A|
  std::uint64_t exo_T = 300;
};

// Stream id of a point: a hash of every parameter that shapes the run,
// including the seed. The master seed is the stream seed.
std::uint64_t point_stream_id(const SweepPoint& p);

struct SweepRow {
  std::string algorithm;
  double s = 0.0;
  std::size_t A_size = 0;
  std::optional<std::size_t> K;
  std::optional<std::size_t> m;
  std::size_t Pi_size = 0;
  double eps = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t samples_used = 0;
  double suboptimality = 0.0;
  bool success = false;
  double wall_time_ms = 0.0;
  // Not part of the CSV contract: why the row failed, empty when fine.
  std::string error;

  bool failed() const { return !error.empty(); }
  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct PointResult {
  RunReport report;
  SweepRow row;
};

// Builds the instance, runs the algorithm and audits the row: samples_used
// comes from the environment draw counter and the suboptimality is recomputed
// from exact policy values; a mismatch above 1e-10 throws std::logic_error.
// With timing off wall_time_ms is 0 so that reports are reproducible.
PointResult run_point(const SweepPoint& point, std::uint64_t master_seed,
                      bool timing = false);

// Same as run_point but any exception becomes a row with `error` set.
SweepRow run_point_row(const SweepPoint& point, std::uint64_t master_seed,
                       bool timing = false);

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::lve;
  SweepPoint base;  // family options, multipliers, delta
  std::vector<double> s{1.0};
  std::vector<std::size_t> A_size{8};
  std::vector<std::size_t> Pi_size{20};
  std::vector<double> eps{0.2};
  std::vector<std::size_t> K{8};
  std::vector<std::size_t> m{2};
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t master_seed = 0;
  std::string output;
  std::string format = "csv";

  // Search settings.
  double success_target = 0.9;
  std::size_t seeds_per_point = 50;
  double resolution = 1.25;
  double start_scale = 1.0 / 4096.0;
  std::uint64_t budget_cap = 100000000;
};

// Throws ConfigError on unknown keys, empty grids, duplicate seeds or values
// out of range. Grids over A_size are ignored by ccsb and over K, m by the
// other algorithms.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

// Grid points in canonical order: s, A_size or (K, m), Pi_size, eps, seed.
std::vector<SweepPoint> expand_grid(const ExperimentConfig& cfg);

// Calls fn(i) for i in [0, n) on up to `workers` threads. The first
// exception is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

// Rows are returned in grid order whatever the worker count.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, std::size_t workers,
                                bool timing = false);

// ---------------------------------------------------------------- emission

// algorithm,s,A_size,K,m,Pi_size,eps,delta,seed,samples_used,suboptimality,success,wall_time_ms
std::string sweep_csv_header();
std::string to_csv(const std::vector<SweepRow>& rows);
nlohmann::json to_json(const SweepRow& row);
nlohmann::json to_json(const std::vector<SweepRow>& rows);
SweepRow sweep_row_from_json(const nlohmann::json& doc);
std::vector<SweepRow> sweep_rows_from_json(const nlohmann::json& doc);
// Writes csv or json to path; I/O errors mention the path.
void emit(const std::vector<SweepRow>& rows, const std::string& format,
          const std::string& path);

// ---------------------------------------------------------------- search

struct ProbeOutcome {
  std::uint64_t samples = 0;
  bool success = false;
};

struct SearchProbe {
  double budget_scale = 0.0;
  std::uint64_t budget = 0;  // largest samples_used over the seeds
  double success_rate = 0.0;
};

struct SearchResult {
  std::uint64_t budget = 0;
  double budget_scale = 0.0;
  double success_rate = 0.0;
  bool capped = false;
  std::vector<SearchProbe> probes;
};

struct SearchConfig {
  double success_target = 0.9;
  std::size_t seeds_per_point = 50;
  double resolution = 1.25;
  double start_scale = 1.0 / 4096.0;
  std::uint64_t budget_cap = 100000000;
  std::size_t workers = 1;
};

// Doubles the budget scale from start_scale until the success rate reaches
// the target, then bisects geometrically until the bracket ratio is at most
// the resolution. `budget(scale)` predicts the samples of a probe so that
// probes above the cap are never run; `probe(seed_index, scale)` runs one
// seeded trial. Hitting the cap sets `capped` and leaves budget at 0.
SearchResult sample_complexity_search(
    const std::function<std::uint64_t(double)>& budget,
    const std::function<ProbeOutcome(std::size_t, double)>& probe,
    const SearchConfig& cfg);

// Search on a sweep point. Seed index j uses the point with seed j; the
// instance depends on the seed only, so every probe of a seed sees the same
// instance.
SearchResult search_point(const SweepPoint& point, std::uint64_t master_seed,
                          const SearchConfig& cfg);

// Total samples run_point would use for the point at a budget scale.
std::uint64_t predicted_samples(const SweepPoint& point, std::uint64_t master_seed);

// ---------------------------------------------------------------- scaling

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Least squares of log y on log x. Throws std::invalid_argument with fewer
// than 3 points, non-positive values or a constant x.
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingFit {
  std::string algorithm;
  std::string axis;   // "s", "A_size" or "K"
  std::string fixed;  // the other parameters, "key=value" joined by spaces
  LogLogFit fit;
};

// Groups rows by algorithm and every parameter except one axis; each group
// with at least 3 distinct axis values is fitted on the mean samples_used per
// axis value. Rows with errors are skipped.
std::vector<ScalingFit> scaling_report(const std::vector<SweepRow>& rows);
std::string format_scaling(const std::vector<ScalingFit>& fits);

// ---------------------------------------------------------------- DEC sweeps

struct DecConfig {
  std::size_t classes = 50;
  std::size_t max_actions = 4;
  std::size_t max_observations = 3;
  std::size_t max_models = 20;
  double s = 1.0;
  std::vector<double> gamma_factors{32, 64, 128, 256, 512};  // times |A|
};

struct DecRow {
  std::size_t instance = 0;
  std::size_t actions = 0;
  std::size_t observations = 0;
  std::size_t models = 0;
  double s = 0.0;
  double gamma = 0.0;
  double estimate = 0.0;
  double certificate = 0.0;
  double bound = 0.0;  // 64 s / gamma
  bool pass = false;
};

DecConfig dec_config_from_json(const nlohmann::json& doc);
// Class k uses the stream (seed, 0x71).split(k); the reference model is a
// random mixture of two members.
std::vector<DecRow> run_dec_sweep(const DecConfig& cfg, std::uint64_t seed,
                                  std::size_t workers);
std::string dec_csv(const std::vector<DecRow>& rows);
nlohmann::json dec_json(const std::vector<DecRow>& rows);

}  // namespace sparsecb
