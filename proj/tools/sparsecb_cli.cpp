// Command-line front end: single runs, sweeps, sample-complexity searches,
// the lemma suite and DEC sweeps.
//
// Exit codes: 0 success, 1 when any row or check fails, 2 on configuration
// errors.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sparsecb/format.hpp"
#include "sparsecb/harness.hpp"
#include "sparsecb/oracles.hpp"

using namespace sparsecb;

namespace {

constexpr int kOk = 0;
constexpr int kFailRows = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::string out;
  std::string format;
  std::string algo;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 1;
  bool timing = false;
  bool quick = false;
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config '" + path + "': " + e.what());
  }
}

ExperimentConfig experiment(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = experiment_config_from_json(read_json(c.config));
  if (!c.algo.empty()) {
    cfg.algorithm = algorithm_from_string(c.algo);
    cfg.base.algorithm = cfg.algorithm;
  }
  if (c.seed_set) cfg.master_seed = c.seed;
  if (!c.format.empty()) cfg.format = c.format;
  if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("format must be csv or json");
  return cfg;
}

std::string output_path(const Common& c, const ExperimentConfig& cfg) {
  return c.out.empty() ? cfg.output : c.out;
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = experiment(c);
  const auto points = expand_grid(cfg);
  const PointResult res = run_point(points.front(), cfg.master_seed, c.timing);
  const std::string text = cfg.format == "json"
                               ? to_json(res.report).dump(2) + "\n"
                               : run_report_csv_header() + "\n" + to_csv_row(res.report) + "\n";
  write_output(text, output_path(c, cfg));
  return kOk;
}

int cmd_sweep(const Common& c) {
  const ExperimentConfig cfg = experiment(c);
  const auto rows = run_sweep(cfg, c.workers, c.timing);
  const std::string path = output_path(c, cfg);
  if (path.empty()) {
    write_output(cfg.format == "json" ? to_json(rows).dump(2) + "\n" : to_csv(rows), "");
  } else {
    emit(rows, cfg.format, path);
  }
  bool failed = false;
  for (const auto& r : rows)
    if (r.failed()) {
      failed = true;
      std::cerr << "FAIL " << r.algorithm << " s=" << format_double(r.s) << " A=" << r.A_size
                << " Pi=" << r.Pi_size << " eps=" << format_double(r.eps) << " seed=" << r.seed
                << ": " << r.error << '\n';
    }
  std::cerr << format_scaling(scaling_report(rows));
  return failed ? kFailRows : kOk;
}

int cmd_search(const Common& c) {
  const ExperimentConfig cfg = experiment(c);
  SearchConfig sc;
  sc.success_target = cfg.success_target;
  sc.seeds_per_point = cfg.seeds_per_point;
  sc.resolution = cfg.resolution;
  sc.start_scale = cfg.start_scale;
  sc.budget_cap = cfg.budget_cap;
  sc.workers = c.workers;

  // One point per grid cell; the seed list is replaced by 0..seeds_per_point-1.
  ExperimentConfig grid = cfg;
  grid.seeds = {0};
  const auto points = expand_grid(grid);
  std::vector<SearchResult> results;
  std::vector<SweepRow> fit_rows;
  bool failed = false;
  for (const auto& p : points) {
    results.push_back(search_point(p, cfg.master_seed, sc));
    const auto& r = results.back();
    SweepRow row;
    row.algorithm = to_string(p.algorithm);
    row.s = p.s;
    row.A_size = p.A_size;
    if (p.algorithm == Algorithm::ccsb) {
      row.K = p.K;
      row.m = p.m;
    }
    row.Pi_size = p.Pi_size;
    row.eps = p.eps;
    row.delta = p.delta;
    row.samples_used = r.budget;
    row.success = !r.capped;
    if (r.capped) {
      row.error = "budget cap exceeded";
      failed = true;
    }
    fit_rows.push_back(row);
  }
  const auto fits = scaling_report(fit_rows);

  std::ostringstream os;
  if (cfg.format == "json") {
    nlohmann::json doc = {{"points", nlohmann::json::array()}, {"fits", nlohmann::json::array()}};
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto j = to_json(fit_rows[i]);
      j.erase("seed");
      j.erase("suboptimality");
      j.erase("wall_time_ms");
      j.erase("success");
      j["budget"] = results[i].budget;
      j["budget_scale"] = results[i].budget_scale;
      j["success_rate"] = results[i].success_rate;
      j["capped"] = results[i].capped;
      j.erase("samples_used");
      doc["points"].push_back(j);
    }
    for (const auto& f : fits)
      doc["fits"].push_back({{"algorithm", f.algorithm},
                             {"axis", f.axis},
                             {"fixed", f.fixed},
                             {"slope", f.fit.slope},
                             {"r2", f.fit.r2},
                             {"points", f.fit.points}});
    os << doc.dump(2) << '\n';
  } else {
    os << "algorithm,s,A_size,K,m,Pi_size,eps,delta,budget,budget_scale,success_rate,capped\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& row = fit_rows[i];
      os << row.algorithm << ',' << format_double(row.s) << ',' << row.A_size << ',';
      if (row.K) os << *row.K;
      os << ',';
      if (row.m) os << *row.m;
      os << ',' << row.Pi_size << ',' << format_double(row.eps) << ','
         << format_double(row.delta) << ',' << results[i].budget << ','
         << format_double(results[i].budget_scale) << ','
         << format_double(results[i].success_rate) << ','
         << (results[i].capped ? "true" : "false") << '\n';
    }
    os << format_scaling(fits);
  }
  write_output(os.str(), output_path(c, cfg));
  return failed ? kFailRows : kOk;
}

int cmd_lemmas(const Common& c) {
  LemmaSuiteConfig cfg;
  if (c.quick) {
    cfg.harmonic_sequences /= 100;
    cfg.hedge_runs /= 100;
    cfg.hellinger_triples /= 100;
    cfg.coverage_trials /= 10;
  }
  const auto checks = check_all_lemmas(cfg, c.seed_set ? c.seed : 0);
  std::ostringstream os;
  bool failed = false;
  for (const auto& ch : checks) {
    os << format_lemma_check(ch) << '\n';
    failed = failed || !ch.pass;
  }
  write_output(os.str(), c.out);
  return failed ? kFailRows : kOk;
}

int cmd_dec(const Common& c) {
  DecConfig cfg;
  std::string format = c.format.empty() ? "csv" : c.format;
  if (!c.config.empty()) {
    const auto doc = read_json(c.config);
    cfg = dec_config_from_json(doc);
    if (c.format.empty()) format = doc.value("format", format);
  }
  if (format != "csv" && format != "json") throw ConfigError("format must be csv or json");
  const auto rows = run_dec_sweep(cfg, c.seed_set ? c.seed : 0, c.workers);
  write_output(format == "json" ? dec_json(rows).dump(2) + "\n" : dec_csv(rows), c.out);
  for (const auto& r : rows)
    if (!r.pass) return kFailRows;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-reward contextual bandit experiments"};
  app.require_subcommand(1);
  Common c;

  auto add_common = [&](CLI::App* sub, bool experiment_flags) {
    sub->add_option("--config", c.config, "JSON configuration file");
    sub->add_option("--seed", c.seed, "master seed")->each([&](const std::string&) {
      c.seed_set = true;
    });
    sub->add_option("--out", c.out, "output path (default: stdout)");
    sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    if (experiment_flags) {
      sub->add_option("--algo", c.algo, "algorithm override")
          ->check(CLI::IsMember({"lve", "ccsb", "exo", "baseline-etc"}));
      sub->add_flag("--timing", c.timing, "record wall time per row");
    }
  };
  auto* run = app.add_subcommand("run", "run the first point of a configuration");
  add_common(run, true);
  auto* sweep = app.add_subcommand("sweep", "run every grid point and seed");
  add_common(sweep, true);
  auto* search = app.add_subcommand("search", "sample-complexity search per grid point");
  add_common(search, true);
  auto* lemmas = app.add_subcommand("check-all-lemmas", "run the lemma suite");
  add_common(lemmas, false);
  lemmas->add_flag("--quick", c.quick, "reduced trial counts");
  auto* dec = app.add_subcommand("dec", "pdec sweep over fuzzed model classes");
  add_common(dec, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) return cmd_run(c);
    if (*sweep) return cmd_sweep(c);
    if (*search) return cmd_search(c);
    if (*lemmas) return cmd_lemmas(c);
    if (*dec) return cmd_dec(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailRows;
  }
  return kConfigError;
}
