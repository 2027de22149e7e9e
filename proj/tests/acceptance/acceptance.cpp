// Acceptance runs. `acceptance <n>` evaluates criterion n (1..10), prints
// one "criterion <n>: PASS|FAIL ..." line and exits non-zero on FAIL.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "sparsecb/ccsb.hpp"
#include "sparsecb/core.hpp"
#include "sparsecb/exo.hpp"
#include "sparsecb/harness.hpp"
#include "sparsecb/lve.hpp"
#include "sparsecb/oracles.hpp"
#include "test_oracles.hpp"

using namespace sparsecb;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::size_t workers() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// ------------------------------------------------------------ 1, 2: lemmas

Verdict lemma_verdict(const std::vector<LemmaCheck>& checks) {
  Verdict v{true, ""};
  for (const auto& c : checks) {
    std::printf("  %s\n", format_lemma_check(c).c_str());
    if (!c.pass) {
      v.pass = false;
      v.detail += c.name + " ";
    }
  }
  if (v.pass) v.detail = std::to_string(checks.size()) + " checks";
  else v.detail = "failed: " + v.detail;
  return v;
}

Verdict criterion1() {
  LemmaSuiteConfig cfg;
  cfg.harmonic_sequences = 1000000;
  cfg.hedge_runs = 10000;
  cfg.hellinger_triples = 100000;
  return lemma_verdict(check_exact_lemmas(cfg, 1));
}

Verdict criterion2() {
  LemmaSuiteConfig cfg;
  cfg.coverage_trials = 10000;
  cfg.deltas = {0.01, 0.05, 0.1};
  return lemma_verdict(check_coverage_lemmas(cfg, 2));
}

// ------------------------------------------------------------ 3: unbiasedness

// Serves one fixed context and outcome and records the played actions.
class ScriptedSource final : public RoundSource {
 public:
  ScriptedSource(ContextId x, const RewardVector& r) : x_(x), r_(&r) {}
  ContextId next_context() override { return x_; }
  double observe(ActionId a) override {
    played.push_back(a.index);
    return (*r_)[a.index];
  }
  std::uint64_t draws() const override { return 1; }
  std::vector<std::uint32_t> played;

 private:
  ContextId x_;
  const RewardVector* r_;
};

constexpr std::uint64_t kCoverageCap = 400000;

// One-round estimates of every policy, keyed by the played action (or
// subset). Phase II is rerun on fresh mixing streams until every key with
// positive probability has appeared; the estimate for a key is then a fixed
// function of (x, r, key).
template <class Run>
bool collect_estimates(std::size_t keys_needed, Run run,
                       std::map<std::vector<std::uint32_t>, std::vector<double>>& out) {
  for (std::uint64_t k = 0; k < kCoverageCap && out.size() < keys_needed; ++k) {
    auto [key, est] = run(RngStream(0x3A3, k));
    std::sort(key.begin(), key.end());
    out.emplace(std::move(key), std::move(est));
  }
  return out.size() == keys_needed;
}

// Worst |E[R(pi)] - V(pi)| over policies, or infinity if some action was
// never reached.
double lve_fixture_error(RngStream& gen) {
  SparseEnvSpec spec;
  spec.contexts = 1 + gen.uniform_index(4);
  spec.actions = 2 + gen.uniform_index(6);
  spec.policies = 1 + gen.uniform_index(count_maps(spec.contexts, spec.actions, 25));
  spec.style = static_cast<RewardStyle>(gen.uniform_index(3));
  spec.s = 1.0 + gen.uniform() * (static_cast<double>(spec.actions) - 1.0);
  spec.outcomes_per_context = 1 + gen.uniform_index(4);
  const auto inst = make_sparse_env(spec, gen);
  std::vector<std::uint32_t> sel(1 + gen.uniform_index(30));
  for (auto& s : sel) s = static_cast<std::uint32_t>(gen.uniform_index(inst.policies.size()));
  const auto ed = ExplorationDistribution::from_selection(sel, inst.policies);
  LveConfig cfg;
  cfg.n = 1;
  cfg.gamma = 0.1 + 0.4 * gen.uniform();

  const auto px = inst.env.context_probs();
  std::vector<double> expect(inst.policies.size(), 0.0);
  for (std::uint32_t x = 0; x < inst.env.context_count(); ++x)
    for (const auto& o : inst.env.reward_law(ContextId{x})) {
      std::map<std::vector<std::uint32_t>, std::vector<double>> est;
      const bool ok = collect_estimates(
          spec.actions,
          [&](RngStream mix) {
            ScriptedSource src(ContextId{x}, o.reward);
            auto res = phase2(src, inst.policies, ed, cfg, mix);
            return std::make_pair(src.played, std::move(res.estimates));
          },
          est);
      if (!ok) return INFINITY;
      for (const auto& [key, e] : est) {
        const double pa = test_oracles::mixed_action_prob(inst.policies, ed.probabilities(),
                                                          cfg.gamma, x, key[0]);
        for (std::size_t i = 0; i < e.size(); ++i) expect[i] += px[x] * o.prob * pa * e[i];
      }
    }
  double worst = 0.0;
  for (std::size_t i = 0; i < inst.policies.size(); ++i) {
    const Policy pi = inst.policies.policy(i);
    worst = std::max(worst, std::abs(expect[i] - policy_value_exact(inst.env, pi)));
    // The independent oracle must agree as well.
    const double oracle = test_oracles::expected_ips_estimate(
        inst.env, inst.policies, ed.probabilities(), cfg.gamma, pi);
    worst = std::max(worst, std::abs(oracle - test_oracles::value_by_enumeration(inst.env, pi)));
  }
  return worst;
}

double ccsb_fixture_error(RngStream& gen) {
  const std::size_t X = 1 + gen.uniform_index(3);
  const std::size_t K = 2 + gen.uniform_index(4);
  const std::size_t m = 1 + gen.uniform_index(K);
  const auto style = gen.uniform() < 0.5 ? RewardStyle::one_hot : RewardStyle::sparse_binary;
  const double s = 1.0 + static_cast<double>(gen.uniform_index(K));
  const auto inst = make_list_env(
      X, K, m, s, style, 1 + gen.uniform_index(count_subset_maps(X, K, m, 12)), gen);
  std::vector<std::uint32_t> sel(1 + gen.uniform_index(20));
  for (auto& v : sel) v = static_cast<std::uint32_t>(gen.uniform_index(inst.policies.size()));
  const auto ed = ccsb_exploration_from_selection(sel, inst.policies);
  CcsbConfig cfg;
  cfg.n = 1;
  cfg.K = K;
  cfg.m = m;
  cfg.gamma = 0.1 + 0.4 * gen.uniform();

  const auto subsets = test_oracles::all_subsets(static_cast<std::uint32_t>(K),
                                                 static_cast<std::uint32_t>(m));
  const auto& p = ed.probabilities();
  const auto px = inst.env.context_probs();
  std::vector<double> expect(inst.policies.size(), 0.0);
  for (std::uint32_t x = 0; x < X; ++x)
    for (const auto& o : inst.env.reward_law(ContextId{x})) {
      std::map<std::vector<std::uint32_t>, std::vector<double>> est;
      const bool ok = collect_estimates(
          subsets.size(),
          [&](RngStream mix) {
            ScriptedSource src(ContextId{x}, o.reward);
            auto res = phase2_ccsb(src, inst.policies, ed, cfg, mix);
            return std::make_pair(src.played, std::move(res.estimates));
          },
          est);
      if (!ok) return INFINITY;
      for (const auto& [key, e] : est) {
        double pa = cfg.gamma / static_cast<double>(subsets.size());
        for (std::size_t i = 0; i < inst.policies.size(); ++i) {
          const auto img = inst.policies.members(i, ContextId{x});
          if (std::equal(img.begin(), img.end(), key.begin(), key.end()))
            pa += (1.0 - cfg.gamma) * p[i];
        }
        for (std::size_t i = 0; i < e.size(); ++i) expect[i] += px[x] * o.prob * pa * e[i];
      }
    }
  const auto values = subset_policy_values_exact(inst.env, inst.policies);
  const auto image = [&](std::size_t i, std::uint32_t x) {
    return inst.policies.members(i, ContextId{x});
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    worst = std::max(worst, std::abs(expect[i] - values[i]));
    const double oracle = test_oracles::expected_semibandit_estimate(
        inst.env, inst.policies.size(), image, p, cfg.gamma, static_cast<std::uint32_t>(K),
        static_cast<std::uint32_t>(m), i);
    worst = std::max(worst, std::abs(oracle - values[i]));
  }
  return worst;
}

Verdict criterion3() {
  constexpr int kFixtures = 200;
  constexpr double kTol = 1e-10;
  RngStream gen(3, 0x300);
  double lve_worst = 0.0, ccsb_worst = 0.0;
  for (int k = 0; k < kFixtures; ++k) lve_worst = std::max(lve_worst, lve_fixture_error(gen));
  for (int k = 0; k < kFixtures; ++k) ccsb_worst = std::max(ccsb_worst, ccsb_fixture_error(gen));
  return {lve_worst <= kTol && ccsb_worst <= kTol,
          "fixtures=200+200 lve_max_err=" + fmt("%.3g", lve_worst) +
              " ccsb_max_err=" + fmt("%.3g", ccsb_worst) + " tol=1e-10"};
}

// ------------------------------------------------------------ 4: variance

constexpr double kVarGamma = 0.5;
constexpr double kVarDelta = 0.05;
constexpr std::size_t kVarInstances = 20;
constexpr std::size_t kVarRuns = 400;
constexpr double kVarRate = 0.85;

struct RateSummary {
  double worst_rate = 1.0;
  std::size_t cells = 0;
  bool pass = true;
};

void record_rate(RateSummary& r, std::size_t good) {
  const double rate = static_cast<double>(good) / static_cast<double>(kVarRuns);
  r.worst_rate = std::min(r.worst_rate, rate);
  ++r.cells;
  r.pass = r.pass && rate >= kVarRate;
}

RateSummary lve_variance_rates() {
  RateSummary sum;
  RngStream gen(4, 0x400);
  for (std::size_t inst_id = 0; inst_id < kVarInstances; ++inst_id) {
    SparseEnvSpec spec;
    spec.actions = 2 + gen.uniform_index(31);
    spec.s = static_cast<double>(1 + gen.uniform_index(std::min<std::size_t>(8, spec.actions)));
    spec.style = static_cast<RewardStyle>(gen.uniform_index(3));
    spec.policies = std::min<std::uint64_t>(2 + gen.uniform_index(39),
                                            count_maps(spec.contexts, spec.actions, 40));
    const auto inst = make_sparse_env(spec, gen);
    const double A = static_cast<double>(spec.actions);
    const double Pi = static_cast<double>(inst.policies.size());
    for (double factor : {2.0, 8.0}) {
      LveOverrides ov;
      ov.T = static_cast<std::uint64_t>(std::ceil(factor * A / kVarGamma));
      ov.gamma = kVarGamma;
      const auto cfg = derive_lve_config(spec.actions, inst.policies.size(), spec.s, 0.1,
                                         kVarDelta, ov);
      const double T = static_cast<double>(cfg.T);
      const double bound = 96.0 * spec.s * std::log(T) +
                           22.0 * (A * A / (kVarGamma * T)) * std::log(Pi / kVarDelta);
      std::vector<char> good(kVarRuns, 0);
      parallel_for(kVarRuns, workers(), [&](std::size_t run) {
        const RngStream rng =
            RngStream(4, 0x410).split(inst_id).split(static_cast<std::uint64_t>(factor)).split(run);
        const auto ed = phase1(inst.env, inst.policies, cfg, rng);
        const auto var = estimator_variances_exact(inst.env, inst.policies, ed, kVarGamma);
        good[run] = *std::max_element(var.begin(), var.end()) <= bound;
      });
      record_rate(sum, static_cast<std::size_t>(std::count(good.begin(), good.end(), 1)));
    }
  }
  return sum;
}

RateSummary ccsb_variance_rates() {
  RateSummary sum;
  RngStream gen(4, 0x420);
  for (std::size_t inst_id = 0; inst_id < kVarInstances; ++inst_id) {
    const std::size_t K = 2 + gen.uniform_index(31);
    const std::size_t m = 1 + gen.uniform_index(std::min<std::size_t>(4, K));
    const double s = static_cast<double>(1 + gen.uniform_index(std::min<std::size_t>(8, K)));
    const auto style = gen.uniform() < 0.5 ? RewardStyle::one_hot : RewardStyle::sparse_binary;
    const std::size_t X = 4;
    const std::size_t policies =
        std::min<std::uint64_t>(2 + gen.uniform_index(39), count_subset_maps(X, K, m, 40));
    const auto inst = make_list_env(X, K, m, s, style, policies, gen);
    const double Kd = static_cast<double>(K), md = static_cast<double>(m);
    const double Pi = static_cast<double>(inst.policies.size());
    for (double factor : {2.0, 8.0}) {
      LveOverrides ov;
      ov.T = static_cast<std::uint64_t>(std::ceil(factor * Kd / (md * kVarGamma)));
      ov.gamma = kVarGamma;
      const auto cfg = derive_ccsb_config(K, m, inst.policies.size(), s, 0.1, kVarDelta, ov);
      const double T = static_cast<double>(cfg.T);
      const double bound =
          96.0 * s * std::log(T) +
          22.0 * (Kd * Kd * std::min(s, md) / (kVarGamma * md * md * T)) *
              std::log(Pi / kVarDelta);
      std::vector<char> good(kVarRuns, 0);
      parallel_for(kVarRuns, workers(), [&](std::size_t run) {
        const RngStream rng =
            RngStream(4, 0x430).split(inst_id).split(static_cast<std::uint64_t>(factor)).split(run);
        const auto ed = phase1_ccsb(inst.env, inst.policies, cfg, rng);
        const auto var = estimator_variances_ccsb_exact(inst.env, inst.policies, ed, kVarGamma);
        good[run] = *std::max_element(var.begin(), var.end()) <= bound;
      });
      record_rate(sum, static_cast<std::size_t>(std::count(good.begin(), good.end(), 1)));
    }
  }
  return sum;
}

Verdict criterion4() {
  const auto lve = lve_variance_rates();
  const auto ccsb = ccsb_variance_rates();
  return {lve.pass && ccsb.pass,
          "cells=" + std::to_string(lve.cells) + "+" + std::to_string(ccsb.cells) +
              " runs_per_cell=400 lve_worst_rate=" + fmt("%.4f", lve.worst_rate) +
              " ccsb_worst_rate=" + fmt("%.4f", ccsb.worst_rate) + " required>=0.85"};
}

// ------------------------------------------------------------ 5: end to end

struct SuccessCount {
  std::size_t runs = 0;
  std::size_t successes = 0;
  std::size_t errors = 0;
  double rate() const { return static_cast<double>(successes) / static_cast<double>(runs); }
};

SuccessCount count_successes(const std::vector<SweepRow>& rows) {
  SuccessCount c;
  for (const auto& r : rows) {
    ++c.runs;
    if (r.failed()) ++c.errors;
    else if (r.success) ++c.successes;
  }
  return c;
}

ExperimentConfig seeded_config(Algorithm algo, std::size_t seeds, std::uint64_t master) {
  ExperimentConfig cfg;
  cfg.algorithm = algo;
  cfg.base.algorithm = algo;
  cfg.master_seed = master;
  cfg.seeds.clear();
  for (std::uint64_t k = 0; k < seeds; ++k) cfg.seeds.push_back(k);
  return cfg;
}

Verdict criterion5() {
  auto lve = seeded_config(Algorithm::lve, 100, 5);
  lve.base.family = FamilyKind::sparse;
  lve.base.style = RewardStyle::one_hot;
  lve.base.delta = 0.1;
  lve.s = {1};
  lve.A_size = {8};
  lve.Pi_size = {20};
  lve.eps = {0.2};
  const auto a = count_successes(run_sweep(lve, workers()));

  auto ccsb = seeded_config(Algorithm::ccsb, 100, 5);
  ccsb.base.family = FamilyKind::list;
  ccsb.base.style = RewardStyle::one_hot;
  ccsb.base.delta = 0.1;
  ccsb.s = {1};
  ccsb.K = {8};
  ccsb.m = {2};
  ccsb.Pi_size = {20};
  ccsb.eps = {0.2};
  const auto b = count_successes(run_sweep(ccsb, workers()));

  const bool pass = a.errors == 0 && b.errors == 0 && a.rate() >= 0.85 && b.rate() >= 0.85;
  return {pass, "lve=" + std::to_string(a.successes) + "/100 ccsb=" +
                    std::to_string(b.successes) + "/100 errors=" +
                    std::to_string(a.errors + b.errors) + " required>=0.85"};
}

// ------------------------------------------------------------ 6, 7: scaling

constexpr std::size_t kSearchSeeds = 400;

SearchConfig search_config() {
  SearchConfig sc;
  sc.success_target = 0.9;
  sc.seeds_per_point = kSearchSeeds;
  sc.resolution = 1.25;
  sc.workers = workers();
  return sc;
}

struct Budgets {
  std::vector<double> x, y;
  bool capped = false;
};

template <class Vary>
Budgets search_axis(SweepPoint base, const std::vector<double>& axis, Vary vary,
                    std::uint64_t master) {
  Budgets b;
  for (double v : axis) {
    SweepPoint p = base;
    vary(p, v);
    const auto res = search_point(p, master, search_config());
    std::printf("  %s s=%g A=%zu Pi=%zu budget=%llu scale=%.6g rate=%.3f%s\n",
                to_string(p.algorithm).c_str(), p.s, p.A_size, p.Pi_size,
                static_cast<unsigned long long>(res.budget), res.budget_scale,
                res.success_rate, res.capped ? " capped" : "");
    std::fflush(stdout);
    b.capped = b.capped || res.capped;
    b.x.push_back(v);
    b.y.push_back(static_cast<double>(res.budget));
  }
  return b;
}

double slope_or_nan(const Budgets& b) {
  if (b.capped) return NAN;
  return fit_loglog(b.x, b.y).slope;
}

SweepPoint planted_point(Algorithm algo) {
  SweepPoint p;
  p.algorithm = algo;
  p.family = FamilyKind::planted;
  p.contexts = 2;
  p.s = 1;
  p.A_size = 64;
  p.Pi_size = 64;
  p.eps = 0.1;
  p.delta = 0.1;
  return p;
}

Verdict criterion6() {
  constexpr std::uint64_t kMaster = 6;
  const auto lve_s = search_axis(planted_point(Algorithm::lve), {1, 4, 16},
                                 [](SweepPoint& p, double v) { p.s = v; }, kMaster);
  const auto etc_a = search_axis(planted_point(Algorithm::baseline_etc), {8, 16, 32, 64},
                                 [](SweepPoint& p, double v) {
                                   p.A_size = static_cast<std::size_t>(v);
                                 },
                                 kMaster);
  const double s_slope = slope_or_nan(lve_s);
  const double a_slope = slope_or_nan(etc_a);
  // lve_s.y[0] is LVE at s=1, |A|=64; etc_a.y.back() is ETC at |A|=64.
  const double ratio = lve_s.y[0] / etc_a.y.back();
  const bool pass = s_slope >= 0.7 && s_slope <= 1.3 && a_slope >= 0.8 && a_slope <= 1.2 &&
                    !lve_s.capped && !etc_a.capped && ratio <= 0.5;
  return {pass, "lve_s_slope=" + fmt("%.4f", s_slope) + " in[0.7,1.3] etc_A_slope=" +
                    fmt("%.4f", a_slope) + " in[0.8,1.2] lve/etc_at_A64=" +
                    fmt("%.4f", ratio) + " <=0.5"};
}

Verdict criterion7() {
  constexpr std::uint64_t kMaster = 7;
  SweepPoint base;
  base.family = FamilyKind::lower_bound;
  base.s = 1;
  base.eps = 0.1;
  base.delta = 0.1;
  const auto vary = [](SweepPoint& p, double v) { p.A_size = static_cast<std::size_t>(v); };
  const std::vector<double> grid{8, 16, 32, 64};
  base.algorithm = Algorithm::lve;
  const double lve = slope_or_nan(search_axis(base, grid, vary, kMaster));
  base.algorithm = Algorithm::baseline_etc;
  const double etc = slope_or_nan(search_axis(base, grid, vary, kMaster));
  return {lve >= 0.8 && etc >= 0.8,
          "lve_A_slope=" + fmt("%.4f", lve) + " etc_A_slope=" + fmt("%.4f", etc) + " required>=0.8"};
}

// ------------------------------------------------------------ 8: DEC

Verdict criterion8() {
  DecConfig cfg;
  cfg.classes = 50;
  cfg.max_actions = 4;
  cfg.max_observations = 3;
  cfg.max_models = 20;
  cfg.s = 1.0;
  cfg.gamma_factors = {32, 64, 128, 256, 512};
  const auto rows = run_dec_sweep(cfg, 8, workers());
  std::size_t bad_est = 0, bad_cert = 0;
  double worst = -INFINITY;
  for (const auto& r : rows) {
    bad_est += r.estimate > r.bound;
    bad_cert += r.certificate > r.bound;
    worst = std::max(worst, std::max(r.estimate, r.certificate) / r.bound);
  }
  return {bad_est == 0 && bad_cert == 0 && rows.size() == 250,
          "cases=" + std::to_string(rows.size()) + " estimate_over=" + std::to_string(bad_est) +
              " certificate_over=" + std::to_string(bad_cert) +
              " max_ratio_to_64s/gamma=" + fmt("%.4g", worst)};
}

// ------------------------------------------------------------ 9: ExO

Verdict criterion9() {
  auto cfg = seeded_config(Algorithm::exo, 50, 9);
  cfg.base.family = FamilyKind::exo_tiny;
  cfg.base.contexts = 2;
  cfg.base.delta = 0.1;
  cfg.base.exo_T = 300;
  cfg.base.exo_gamma = 32.0 * 3;
  cfg.s = {1};
  cfg.A_size = {3};
  cfg.Pi_size = {6};
  cfg.eps = {0.5};
  const auto rows = run_sweep(cfg, workers());
  const double s = 1.0, gamma = 96.0, T = 300.0, delta = 0.1, Pi = 6.0;
  const double bound = 64.0 * s * 8.0 / gamma + 4.0 * gamma * std::log(Pi / delta) / T +
                       2.0 * std::sqrt(std::log(1.0 / delta) / T);
  std::size_t within = 0, errors = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    if (r.failed()) {
      ++errors;
      continue;
    }
    within += r.suboptimality <= bound;
    worst = std::max(worst, r.suboptimality);
  }
  const double rate = static_cast<double>(within) / static_cast<double>(rows.size());
  return {errors == 0 && rate >= 0.9,
          "within=" + std::to_string(within) + "/" + std::to_string(rows.size()) +
              " bound=" + fmt("%.4f", bound) + " max_subopt=" + fmt("%.4f", worst) +
              " errors=" + std::to_string(errors) + " required>=0.9"};
}

// ------------------------------------------------------------ 10: determinism

Verdict criterion10() {
  std::vector<ExperimentConfig> configs;
  for (Algorithm algo : {Algorithm::lve, Algorithm::baseline_etc}) {
    auto cfg = seeded_config(algo, 20, 10);
    cfg.base.family = FamilyKind::planted;
    cfg.base.contexts = 2;
    cfg.base.delta = 0.1;
    cfg.base.budget_scale = 0.2;
    cfg.s = algo == Algorithm::lve ? std::vector<double>{1, 4, 16} : std::vector<double>{1};
    cfg.A_size = algo == Algorithm::lve ? std::vector<std::size_t>{64}
                                        : std::vector<std::size_t>{8, 16, 32, 64};
    cfg.Pi_size = {64};
    cfg.eps = {0.1};
    configs.push_back(cfg);
  }
  std::size_t rows = 0;
  bool same = true;
  for (const auto& cfg : configs) {
    const std::string one = to_csv(run_sweep(cfg, 1));
    const std::string again = to_csv(run_sweep(cfg, 1));
    const std::string eight = to_csv(run_sweep(cfg, 8));
    same = same && one == again && one == eight;
    rows += static_cast<std::size_t>(std::count(one.begin(), one.end(), '\n')) - 1;
  }
  return {same, "rows=" + std::to_string(rows) +
                    (same ? " csv identical across repeat and workers 1/8" : " csv differs")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..10>\n");
    return 2;
  }
  const int n = std::atoi(argv[1]);
  Verdict v;
  try {
    switch (n) {
      case 1: v = criterion1(); break;
      case 2: v = criterion2(); break;
      case 3: v = criterion3(); break;
      case 4: v = criterion4(); break;
      case 5: v = criterion5(); break;
      case 6: v = criterion6(); break;
      case 7: v = criterion7(); break;
      case 8: v = criterion8(); break;
      case 9: v = criterion9(); break;
      case 10: v = criterion10(); break;
      default:
        std::fprintf(stderr, "unknown criterion %s\n", argv[1]);
        return 2;
    }
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %d: %s %s\n", n, v.pass ? "PASS" : "FAIL", v.detail.c_str());
  return v.pass ? 0 : 1;
}
