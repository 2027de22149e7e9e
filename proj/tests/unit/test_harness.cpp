#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sparsecb/harness.hpp"
#include "test_oracles.hpp"

using namespace sparsecb;

namespace {

Environment zero_env(std::size_t contexts, std::size_t actions) {
  std::vector<std::vector<RewardOutcome>> law(contexts);
  for (auto& l : law) l.push_back({1.0, RewardVector(actions, 0.0)});
  return Environment(std::vector<double>(contexts, 1.0 / static_cast<double>(contexts)),
                     std::move(law), Sparsity{SparsityMode::l1, 1.0}, actions);
}

PolicyClass constant_policies(std::size_t contexts, std::size_t actions) {
  std::vector<Policy> pols;
  for (std::uint32_t a = 0; a < actions; ++a)
    pols.emplace_back(std::vector<ActionId>(contexts, ActionId{a}));
  return PolicyClass(pols, actions);
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

SweepPoint small_point(Algorithm a, FamilyKind f) {
  SweepPoint p;
  p.algorithm = a;
  p.family = f;
  p.A_size = 6;
  p.K = 6;
  p.m = 2;
  p.Pi_size = 8;
  p.contexts = 3;
  p.eps = 0.3;
  p.budget_scale = 0.05;
  if (a == Algorithm::exo) {
    p.A_size = 3;
    p.contexts = 2;
    p.Pi_size = 6;
    p.exo_T = 12;
  }
  return p;
}

}  // namespace

TEST_CASE("planted family has the documented values") {
  for (double s : {1.0, 3.0, 8.0}) {
    RngStream rng(4, static_cast<std::uint64_t>(s));
    const auto inst = make_planted_env(3, 16, s, 12, rng);
    CHECK(check_certificate(inst.env).pass);
    const auto brute = test_oracles::certificate_by_enumeration(inst.env);
    CHECK(brute.worst_l1 <= s + 1e-12);
    const auto values = policy_values_exact(inst.env, inst.policies);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double want = i == inst.optimal_index ? 21.0 / 40.0 : 16.0 / 40.0;
      CHECK(values[i] == doctest::Approx(want).epsilon(1e-12));
    }
    const auto best = best_policy_value(inst.env, inst.policies);
    CHECK(best.index == inst.optimal_index);
  }
  RngStream rng(1, 1);
  CHECK_THROWS_AS(make_planted_env(2, 4, 3.0, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_planted_env(2, 8, 1.5, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_planted_env(2, 8, 1.0, 0, rng), std::invalid_argument);
}

TEST_CASE("exo tiny family holds distinct maps including the optimum") {
  RngStream rng(2, 2);
  const auto inst = make_exo_tiny(2, 3, 1.0, 6, rng);
  CHECK(inst.models.size() == 20);
  std::set<std::vector<std::uint32_t>> seen;
  for (std::size_t i = 0; i < inst.policies.size(); ++i) {
    std::vector<std::uint32_t> key;
    for (const auto& a : inst.policies.policy(i).table()) key.push_back(a.index);
    seen.insert(key);
  }
  CHECK(seen.size() == 6);
  const Environment flat = inst.env.to_environment();
  CHECK(best_policy_value(flat, inst.policies).value ==
        doctest::Approx(test_oracles::optimal_value_over_all_maps(flat)).epsilon(1e-12));
  CHECK_THROWS_AS(make_exo_tiny(2, 3, 1.0, 10, rng), std::invalid_argument);
}

TEST_CASE("etc budget formula") {
  CHECK(etc_rounds(8, 20, 0.2, 0.1, 8.0) ==
        static_cast<std::uint64_t>(std::ceil(8.0 * 8.0 / 0.04 * std::log(200.0))));
  CHECK(etc_rounds(8, 20, 0.2, 0.1, 8.0, 1e-9) == 1);
  CHECK_THROWS_AS(etc_rounds(8, 20, 0.0, 0.1, 8.0), std::invalid_argument);
  CHECK_THROWS_AS(etc_rounds(8, 20, 0.2, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("etc on a zero-reward environment") {
  const auto env = zero_env(2, 4);
  const auto pc = constant_policies(2, 4);
  const auto rep = run_baseline_etc(env, pc, 0.2, 0.1, RngStream(3, 0), 8.0, 0.01);
  CHECK(rep.suboptimality == 0.0);
  CHECK(rep.chosen_policy == 0);
  CHECK(rep.samples_total == etc_rounds(4, 4, 0.2, 0.1, 8.0, 0.01));
}

TEST_CASE("etc is deterministic and finds a clear winner") {
  RngStream rng(6, 1);
  SparseEnvSpec spec;
  spec.actions = 8;
  spec.contexts = 3;
  spec.policies = 20;
  const auto inst = make_sparse_env(spec, rng);
  const auto a = run_baseline_etc(inst.env, inst.policies, 0.2, 0.1, RngStream(7, 3));
  const auto b = run_baseline_etc(inst.env, inst.policies, 0.2, 0.1, RngStream(7, 3));
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.suboptimality <= 0.2);
}

TEST_CASE("run_point audits every algorithm") {
  const std::pair<Algorithm, FamilyKind> cases[] = {
      {Algorithm::lve, FamilyKind::sparse},          {Algorithm::lve, FamilyKind::planted},
      {Algorithm::lve, FamilyKind::lower_bound},     {Algorithm::baseline_etc, FamilyKind::sparse},
      {Algorithm::ccsb, FamilyKind::list},           {Algorithm::ccsb, FamilyKind::sparse},
      {Algorithm::exo, FamilyKind::exo_tiny},
  };
  for (const auto& [algo, fam] : cases) {
    SweepPoint p = small_point(algo, fam);
    INFO(to_string(algo) << " on " << to_string(fam));
    const auto r1 = run_point(p, 5);
    const auto r2 = run_point(p, 5);
    CHECK(r1.row == r2.row);
    CHECK(r1.row.wall_time_ms == 0.0);
    CHECK(r1.row.suboptimality >= -1e-10);
    CHECK(r1.row.samples_used == r1.report.samples_total);
    CHECK(r1.row.samples_used == predicted_samples(p, 5));
    CHECK(r1.row.success == (r1.row.suboptimality <= p.eps));
    CHECK(r1.row.K.has_value() == (algo == Algorithm::ccsb));
    p.seed = 1;
    CHECK(run_point(p, 5).row.seed == 1);
  }
  const auto lb = run_point(small_point(Algorithm::lve, FamilyKind::lower_bound), 2).row;
  CHECK(lb.Pi_size == 36);
}

TEST_CASE("run_point_row turns failures into error rows") {
  SweepPoint p = small_point(Algorithm::exo, FamilyKind::sparse);
  const auto row = run_point_row(p, 0);
  CHECK(row.failed());
  CHECK(row.algorithm == "exo");
  p = small_point(Algorithm::lve, FamilyKind::planted);
  p.A_size = 3;
  p.s = 2;
  CHECK(run_point_row(p, 0).failed());
  CHECK_FALSE(run_point_row(small_point(Algorithm::lve, FamilyKind::sparse), 0).failed());
}

TEST_CASE("timing is recorded only on request") {
  const auto row = run_point(small_point(Algorithm::lve, FamilyKind::sparse), 1, true).row;
  CHECK(row.wall_time_ms >= 0.0);
}

TEST_CASE("config parsing") {
  const auto doc = nlohmann::json::parse(R"({
    "algorithm": "lve",
    "family": {"kind": "sparse", "contexts": 3, "style": "sparse_binary"},
    "grid": {"s": [1, 2], "A_size": [4, 8], "Pi_size": 10, "eps": [0.3]},
    "delta": 0.05,
    "seeds": {"first": 3, "count": 2},
    "multipliers": {"budget_scale": 0.1}
  })");
  const auto cfg = experiment_config_from_json(doc);
  CHECK(cfg.algorithm == Algorithm::lve);
  CHECK(cfg.base.contexts == 3);
  CHECK(cfg.base.style == RewardStyle::sparse_binary);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  const auto pts = expand_grid(cfg);
  REQUIRE(pts.size() == 8);
  CHECK(pts[0].s == 1.0);
  CHECK(pts[0].A_size == 4);
  CHECK(pts[0].seed == 3);
  CHECK(pts[1].seed == 4);
  CHECK(pts[2].A_size == 8);
  CHECK(pts[4].s == 2.0);
  CHECK(pts[7].delta == 0.05);

  auto bad = [](const char* text) {
    return experiment_config_from_json(nlohmann::json::parse(text));
  };
  CHECK_THROWS_AS(bad(R"({"algo": "lve"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"algorithm": "nope"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"seeds": [1, 1]})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"grid": {"s": []}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"grid": {"eps": [1.5]}})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"family": "file"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"delta": "x"})"), ConfigError);
  CHECK_THROWS_AS(bad(R"({"search": {"target": 0.3}})"), ConfigError);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.json"), ConfigError);

  const auto semi = bad(R"({"algorithm": "ccsb", "grid": {"K": [6, 8], "m": [1, 2]}})");
  CHECK(semi.base.family == FamilyKind::list);
  const auto spts = expand_grid(semi);
  REQUIRE(spts.size() == 4);
  CHECK(spts[1].K == 6);
  CHECK(spts[1].m == 2);
  CHECK(spts[2].A_size == 8);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
}

TEST_CASE("sweep output is independent of worker count") {
  ExperimentConfig cfg;
  cfg.algorithm = Algorithm::lve;
  cfg.base = small_point(Algorithm::lve, FamilyKind::sparse);
  cfg.A_size = {4, 6};
  cfg.Pi_size = {8};
  cfg.eps = {0.3};
  cfg.seeds = {0, 1, 2};
  cfg.master_seed = 9;
  const auto a = to_csv(run_sweep(cfg, 1));
  const auto b = to_csv(run_sweep(cfg, 3));
  CHECK(a == b);
  CHECK(count_lines(a) == 7);
  cfg.master_seed = 10;
  CHECK(to_csv(run_sweep(cfg, 2)) != a);
}

TEST_CASE("emission formats") {
  CHECK(to_csv({}) == sweep_csv_header() + "\n");
  CHECK(sweep_csv_header() ==
        "algorithm,s,A_size,K,m,Pi_size,eps,delta,seed,samples_used,suboptimality,success,"
        "wall_time_ms");
  std::vector<SweepRow> rows;
  rows.push_back(run_point(small_point(Algorithm::lve, FamilyKind::sparse), 1).row);
  rows.push_back(run_point(small_point(Algorithm::ccsb, FamilyKind::list), 1).row);
  rows.push_back(run_point_row(small_point(Algorithm::exo, FamilyKind::sparse), 1));
  rows[1].suboptimality = 0.1 + 0.2;  // a value with a long decimal expansion
  const std::string csv = to_csv(rows);
  CHECK(count_lines(csv) == rows.size() + 1);
  CHECK(csv.find("\nccsb,") != std::string::npos);
  CHECK(sweep_rows_from_json(nlohmann::json::parse(to_json(rows).dump())) == rows);

  const auto dir = std::filesystem::temp_directory_path() / "sparsecb_emit_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "rows.json").string();
  emit(rows, "json", path);
  std::ifstream in(path);
  CHECK(sweep_rows_from_json(nlohmann::json::parse(in)) == rows);
  emit({}, "csv", (dir / "empty.csv").string());
  std::ifstream ein(dir / "empty.csv");
  std::stringstream buf;
  buf << ein.rdbuf();
  CHECK(buf.str() == sweep_csv_header() + "\n");
  try {
    emit(rows, "csv", "/nonexistent-dir/out.csv");
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("/nonexistent-dir/out.csv") != std::string::npos);
  }
  CHECK_THROWS_AS(emit(rows, "xml", path), ConfigError);
}

TEST_CASE("search on a synthetic threshold") {
  // Probe j succeeds once the scale passes a seed-dependent threshold, so the
  // success rate crosses 0.9 at scale 0.9 * 3 = 2.7.
  SearchConfig cfg;
  cfg.seeds_per_point = 10;
  cfg.start_scale = 0.01;
  auto budget = [](double scale) { return static_cast<std::uint64_t>(std::ceil(1000 * scale)); };
  auto probe = [&](std::size_t j, double scale) {
    const double threshold = 3.0 * static_cast<double>(j + 1) / 10.0;
    return ProbeOutcome{budget(scale), scale >= threshold};
  };
  const auto res = sample_complexity_search(budget, probe, cfg);
  CHECK_FALSE(res.capped);
  CHECK(res.success_rate >= 0.9);
  CHECK(res.budget_scale >= 2.7);
  CHECK(res.budget_scale <= 2.7 * 1.25);
  CHECK(res.budget == budget(res.budget_scale));
  for (std::size_t i = 1; i < res.probes.size(); ++i)
    CHECK(res.probes[i].budget_scale != res.probes[i - 1].budget_scale);

  cfg.budget_cap = 100;
  const auto capped = sample_complexity_search(budget, probe, cfg);
  CHECK(capped.capped);
  CHECK(capped.budget == 0);

  cfg.success_target = 0.4;
  CHECK_THROWS_AS(sample_complexity_search(budget, probe, cfg), std::invalid_argument);
}

TEST_CASE("search with one policy returns the first probe") {
  SweepPoint p = small_point(Algorithm::lve, FamilyKind::sparse);
  p.Pi_size = 1;
  SearchConfig cfg;
  cfg.seeds_per_point = 5;
  cfg.start_scale = 0.01;
  const auto res = search_point(p, 3, cfg);
  CHECK(res.probes.size() == 1);
  CHECK(res.budget_scale == 0.01);
  SweepPoint q = p;
  q.budget_scale = 0.01;
  CHECK(res.budget == predicted_samples(q, 3));
  CHECK(res.success_rate == 1.0);
  cfg.workers = 3;
  const auto again = search_point(p, 3, cfg);
  CHECK(again.budget == res.budget);
}

TEST_CASE("log-log fits") {
  const auto f = fit_loglog({1, 4, 16}, {100, 400, 1600});
  CHECK(f.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(100.0)).epsilon(1e-12));
  const auto g = fit_loglog({2, 4, 8, 16}, {3, 9, 27, 81});
  CHECK(g.slope == doctest::Approx(std::log(3.0) / std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(fit_loglog({1, 2}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog({2, 2, 2}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog({1, 2, 3}, {1, 0, 3}), std::invalid_argument);
}

TEST_CASE("scaling report groups rows by the free axis") {
  std::vector<SweepRow> rows;
  for (double s : {1.0, 4.0, 16.0})
    for (std::uint64_t seed : {0, 1}) {
      SweepRow r;
      r.algorithm = "lve";
      r.s = s;
      r.A_size = 64;
      r.Pi_size = 20;
      r.eps = 0.1;
      r.delta = 0.1;
      r.seed = seed;
      r.samples_used = static_cast<std::uint64_t>(100 * s);
      rows.push_back(r);
    }
  SweepRow broken = rows.front();
  broken.error = "x";
  broken.samples_used = 1;
  rows.push_back(broken);
  const auto fits = scaling_report(rows);
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].axis == "s");
  CHECK(fits[0].fit.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fits[0].fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(format_scaling(fits).find("slope=1.0000 r2=1.0000") != std::string::npos);
}

TEST_CASE("small dec sweep") {
  DecConfig cfg;
  cfg.classes = 3;
  cfg.max_models = 6;
  cfg.gamma_factors = {32, 64};
  const auto rows = run_dec_sweep(cfg, 4, 1);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.pass);
    CHECK(r.estimate <= r.certificate + 1e-12);
    CHECK(r.bound == doctest::Approx(64.0 / r.gamma));
  }
  const auto again = run_dec_sweep(cfg, 4, 2);
  CHECK(dec_csv(rows) == dec_csv(again));
  CHECK(count_lines(dec_csv(rows)) == 7);
  CHECK_THROWS_AS(dec_config_from_json(nlohmann::json::parse(R"({"dec": {"classes": 0}})")),
                  ConfigError);
}
