#include "sparsecb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include "sparsecb/format.hpp"

namespace sparsecb {

namespace {

std::uint64_t bits(double v) {
  std::uint64_t b = 0;
  static_assert(sizeof b == sizeof v);
  std::memcpy(&b, &v, sizeof b);
  return b;
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
  return h;
}

std::vector<double> uniform_probs(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::lve: return "lve";
    case Algorithm::ccsb: return "ccsb";
    case Algorithm::exo: return "exo";
    case Algorithm::baseline_etc: return "baseline-etc";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "lve") return Algorithm::lve;
  if (name == "ccsb") return Algorithm::ccsb;
  if (name == "exo") return Algorithm::exo;
  if (name == "baseline-etc") return Algorithm::baseline_etc;
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string to_string(FamilyKind f) {
  switch (f) {
    case FamilyKind::sparse: return "sparse";
    case FamilyKind::planted: return "planted";
    case FamilyKind::lower_bound: return "lower-bound";
    case FamilyKind::list: return "list";
    case FamilyKind::exo_tiny: return "exo-tiny";
    case FamilyKind::file: return "file";
  }
  return "?";
}

FamilyKind family_from_string(const std::string& name) {
  if (name == "sparse") return FamilyKind::sparse;
  if (name == "planted") return FamilyKind::planted;
  if (name == "lower-bound") return FamilyKind::lower_bound;
  if (name == "list") return FamilyKind::list;
  if (name == "exo-tiny") return FamilyKind::exo_tiny;
  if (name == "file") return FamilyKind::file;
  throw ConfigError("unknown family '" + name + "'");
}

// ---------------------------------------------------------------- families

SparseInstance make_planted_env(std::size_t contexts, std::size_t actions,
                                double s, std::size_t policies, RngStream& rng) {
  constexpr std::size_t kOutcomes = 40;
  constexpr std::size_t kStarHits = 21;
  constexpr std::size_t kOtherHits = 16;
  if (contexts == 0) throw std::invalid_argument("planted env needs contexts");
  if (!(s >= 1.0) || s != std::floor(s))
    throw std::invalid_argument("planted env needs an integral s >= 1");
  const std::size_t width = 2 * static_cast<std::size_t>(s);
  if (width > actions) throw std::invalid_argument("planted env needs 2s <= |A|");
  if (policies == 0) throw std::invalid_argument("policy class size must be positive");

  std::vector<std::vector<RewardOutcome>> law(contexts);
  std::vector<ActionId> star(contexts);
  std::vector<std::vector<std::uint32_t>> rivals(contexts);
  std::vector<std::uint32_t> idx(actions);
  for (std::size_t x = 0; x < contexts; ++x) {
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = 0; i < width; ++i)
      std::swap(idx[i], idx[i + rng.uniform_index(actions - i)]);
    star[x] = ActionId{idx[0]};
    rivals[x].assign(idx.begin() + 1, idx.begin() + static_cast<std::ptrdiff_t>(width));

    // Cyclic fill keeps the per-outcome count of ones within one of the
    // average (32s + 5) / 40 <= s.
    std::vector<RewardVector> out(kOutcomes, RewardVector(actions, 0.0));
    for (std::size_t o = 0; o < kStarHits; ++o) out[o][idx[0]] = 1.0;
    std::size_t ptr = kStarHits;
    for (std::uint32_t c : rivals[x]) {
      for (std::size_t r = 0; r < kOtherHits; ++r) out[(ptr + r) % kOutcomes][c] = 1.0;
      ptr += kOtherHits;
    }
    for (auto& r : out)
      law[x].push_back({1.0 / static_cast<double>(kOutcomes), std::move(r)});
  }
  Environment env(uniform_probs(contexts), std::move(law),
                  Sparsity{SparsityMode::l1, s}, actions);

  const std::size_t star_pos = rng.uniform_index(policies);
  std::vector<Policy> pols;
  pols.reserve(policies);
  for (std::size_t i = 0; i < policies; ++i) {
    if (i == star_pos) {
      pols.emplace_back(star);
      continue;
    }
    std::vector<ActionId> map(contexts);
    for (std::size_t x = 0; x < contexts; ++x)
      map[x] = ActionId{rivals[x][rng.uniform_index(rivals[x].size())]};
    pols.emplace_back(std::move(map));
  }
  return {std::move(env), PolicyClass(pols, actions), star_pos};
}

ExoInstance make_exo_tiny(std::size_t contexts, std::size_t actions, double s,
                          std::size_t policies, RngStream& rng) {
  if (contexts == 0) throw std::invalid_argument("exo instance needs contexts");
  if (policies == 0) throw std::invalid_argument("policy class size must be positive");
  if (policies > count_maps(contexts, actions, UINT64_MAX))
    throw std::invalid_argument("policy class larger than |A|^|X|");
  ModelClass mc = make_bernoulli_grid(actions, 3, s);
  std::vector<Model> chosen;
  std::vector<ActionId> best(contexts);
  for (std::size_t x = 0; x < contexts; ++x) {
    chosen.push_back(mc[rng.uniform_index(mc.size())]);
    best[x] = ActionId{static_cast<std::uint32_t>(chosen.back().best_action())};
  }
  ModelEnvironment env(uniform_probs(contexts), std::move(chosen), s);

  auto code = [&](const std::vector<ActionId>& map) {
    std::uint64_t c = 0;
    for (const ActionId& a : map) c = c * actions + a.index;
    return c;
  };
  const std::size_t best_pos = rng.uniform_index(policies);
  std::set<std::uint64_t> seen{code(best)};
  std::vector<Policy> pols;
  for (std::size_t i = 0; i < policies; ++i) {
    if (i == best_pos) {
      pols.emplace_back(best);
      continue;
    }
    std::vector<ActionId> map(contexts);
    do {
      for (auto& a : map) a = ActionId{static_cast<std::uint32_t>(rng.uniform_index(actions))};
    } while (!seen.insert(code(map)).second);
    pols.emplace_back(std::move(map));
  }
  return {std::move(mc), std::move(env), PolicyClass(pols, actions)};
}

// ---------------------------------------------------------------- baseline

std::uint64_t etc_rounds(std::size_t actions, std::size_t policies, double eps,
                         double delta, double c, double budget_scale) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  if (!(c > 0.0) || !(budget_scale > 0.0))
    throw std::invalid_argument("etc constant and budget scale must be positive");
  const double v = c * budget_scale * (static_cast<double>(actions) / (eps * eps)) *
                   std::log(static_cast<double>(policies) / delta);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(v)));
}

RunReport run_baseline_etc(const Environment& env, const PolicyClass& policies,
                           double eps, double delta, const RngStream& rng,
                           double c, double budget_scale) {
  const std::size_t A = env.action_count();
  const std::uint64_t n0 = etc_rounds(A, policies.size(), eps, delta, c, budget_scale);
  RunReport report;
  report.algorithm = "baseline-etc";
  report.seed = rng.seed();

  EnvironmentSource source(env, rng.split(streams::kEtcEnv));
  RngStream actions = rng.split(streams::kEtcActions);
  const PolicyColumns columns(policies);
  std::vector<double> est(policies.size(), 0.0);
  const double weight = static_cast<double>(A);
  for (std::uint64_t i = 0; i < n0; ++i) {
    const ContextId x = source.next_context();
    const ActionId a{static_cast<std::uint32_t>(actions.uniform_index(A))};
    const double r = source.observe(a);
    if (r == 0.0) continue;
    for (std::uint32_t k : columns.members(x, a)) est[k] += r * weight;
  }
  for (auto& v : est) v /= static_cast<double>(n0);

  report.samples_total = source.draws() / 2;
  if (report.samples_total != n0) throw std::logic_error("sample accounting mismatch");
  const std::size_t chosen = argmax_lowest(est);
  const auto values = policy_values_exact(env, policies);
  const auto best = best_policy_value(env, policies);
  report.chosen_policy = chosen;
  report.chosen_value = values[chosen];
  report.best_value = best.value;
  report.suboptimality = best.value - values[chosen];
  report.config = {{"n0", static_cast<double>(n0)},
                   {"c", c},
                   {"budget_scale", budget_scale},
                   {"eps", eps},
                   {"delta", delta},
                   {"s", env.sparsity().s},
                   {"actions", static_cast<double>(A)},
                   {"policies", static_cast<double>(policies.size())}};
  return report;
}

// ---------------------------------------------------------------- sweeps

namespace {

std::uint64_t instance_stream_id(const SweepPoint& p) {
  return hash_words({static_cast<std::uint64_t>(p.family), bits(p.s), p.A_size, p.K,
                     p.m, p.Pi_size, bits(p.eps), bits(p.delta), p.seed, p.contexts,
                     static_cast<std::uint64_t>(p.style),
                     static_cast<std::uint64_t>(p.mode), p.outcomes,
                     hash_string(p.env_file)});
}

struct BanditInstance {
  Environment env;
  PolicyClass policies;
};

struct SemiInstance {
  Environment env;
  SubsetPolicyClass policies;
};

using Built = std::variant<BanditInstance, SemiInstance, ExoInstance>;

BanditInstance build_bandit(const SweepPoint& p, RngStream& rng) {
  switch (p.family) {
    case FamilyKind::sparse: {
      SparseEnvSpec spec;
      spec.contexts = p.contexts;
      spec.actions = p.A_size;
      spec.s = p.s;
      spec.mode = p.mode;
      spec.style = p.style;
      spec.policies = p.Pi_size;
      spec.outcomes_per_context = p.outcomes;
      auto inst = make_sparse_env(spec, rng);
      return {std::move(inst.env), std::move(inst.policies)};
    }
    case FamilyKind::planted: {
      auto inst = make_planted_env(p.contexts, p.A_size, p.s, p.Pi_size, rng);
      return {std::move(inst.env), std::move(inst.policies)};
    }
    case FamilyKind::lower_bound: {
      // Context mass 2 eps puts every policy that misses a* at
      // suboptimality 2 eps, strictly above the success threshold eps.
      auto inst = make_lower_bound_env(p.A_size, 2.0 * p.eps, rng);
      return {std::move(inst.env), std::move(inst.policies)};
    }
    case FamilyKind::file: {
      auto loaded = load_environment(p.env_file);
      if (!loaded.policies)
        throw ConfigError("environment file '" + p.env_file + "' has no policies");
      if (loaded.env.subset_mode())
        throw ConfigError("environment file '" + p.env_file + "' is a semi-bandit environment");
      return {std::move(loaded.env), std::move(*loaded.policies)};
    }
    case FamilyKind::exo_tiny: {
      auto inst = make_exo_tiny(p.contexts, p.A_size, p.s, p.Pi_size, rng);
      return {inst.env.to_environment(), std::move(inst.policies)};
    }
    case FamilyKind::list:
      break;
  }
  throw ConfigError("family '" + to_string(p.family) + "' does not give a bandit instance");
}

Built build(const SweepPoint& p, std::uint64_t master_seed) {
  RngStream rng = RngStream(master_seed, instance_stream_id(p)).split(streams::kInstance);
  switch (p.algorithm) {
    case Algorithm::lve:
    case Algorithm::baseline_etc:
      return build_bandit(p, rng);
    case Algorithm::ccsb: {
      if (p.family == FamilyKind::list) {
        auto inst = make_list_env(p.contexts, p.K, p.m, p.s, p.style, p.Pi_size, rng);
        return SemiInstance{std::move(inst.env), std::move(inst.policies)};
      }
      auto b = build_bandit(p, rng);
      auto pc = SubsetPolicyClass::from_policy_class(b.policies);
      return SemiInstance{std::move(b.env), std::move(pc)};
    }
    case Algorithm::exo:
      if (p.family != FamilyKind::exo_tiny)
        throw ConfigError("exo runs on the exo-tiny family only");
      return make_exo_tiny(p.contexts, p.A_size, p.s, p.Pi_size, rng);
  }
  throw ConfigError("unknown algorithm");
}

RngStream run_stream(const SweepPoint& p, std::uint64_t master_seed) {
  return RngStream(master_seed,
                   hash_words({instance_stream_id(p), static_cast<std::uint64_t>(p.algorithm),
                               bits(p.T_multiplier), bits(p.n_multiplier), bits(p.etc_c),
                               bits(p.exo_gamma), p.exo_T}));
}

LveOverrides overrides_of(const SweepPoint& p) {
  LveOverrides o;
  o.T_multiplier = p.T_multiplier;
  o.n_multiplier = p.n_multiplier;
  o.budget_scale = p.budget_scale;
  return o;
}

double exo_gamma_of(const SweepPoint& p, std::size_t actions) {
  return p.exo_gamma > 0.0 ? p.exo_gamma : 32.0 * static_cast<double>(actions);
}

std::uint64_t exo_rounds(const SweepPoint& p) {
  return std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::ceil(static_cast<double>(p.exo_T) * p.budget_scale)));
}

void audit(double recomputed, double reported) {
  if (!(std::abs(recomputed - reported) <= 1e-10)) {
    std::ostringstream os;
    os << "suboptimality mismatch: reported " << format_double(reported)
       << ", recomputed " << format_double(recomputed);
    throw std::logic_error(os.str());
  }
}

}  // namespace

std::uint64_t point_stream_id(const SweepPoint& p) { return instance_stream_id(p); }

PointResult run_point(const SweepPoint& p, std::uint64_t master_seed, bool timing) {
  if (!(p.eps > 0.0 && p.eps < 1.0)) throw ConfigError("eps must lie in (0,1)");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  const Built inst = build(p, master_seed);
  const RngStream rng = run_stream(p, master_seed);
  PointResult out;
  SweepRow& row = out.row;
  row.algorithm = to_string(p.algorithm);
  row.eps = p.eps;
  row.delta = p.delta;
  row.seed = p.seed;

  const auto start = std::chrono::steady_clock::now();
  if (const auto* b = std::get_if<BanditInstance>(&inst)) {
    out.report = p.algorithm == Algorithm::lve
                     ? run_lve(b->env, b->policies, p.eps, p.delta, overrides_of(p), rng)
                     : run_baseline_etc(b->env, b->policies, p.eps, p.delta, rng,
                                        p.etc_c, p.budget_scale);
    const double best = best_policy_value(b->env, b->policies).value;
    audit(best - policy_value_exact(b->env, b->policies.policy(out.report.chosen_policy)),
          out.report.suboptimality);
    row.s = b->env.sparsity().s;
    row.A_size = b->env.action_count();
    row.Pi_size = b->policies.size();
  } else if (const auto* sm = std::get_if<SemiInstance>(&inst)) {
    out.report = run_ccsb(sm->env, sm->policies, p.eps, p.delta, overrides_of(p), rng);
    const auto values = subset_policy_values_exact(sm->env, sm->policies);
    audit(*std::max_element(values.begin(), values.end()) - values[out.report.chosen_policy],
          out.report.suboptimality);
    row.s = sm->env.sparsity().s;
    row.A_size = sm->policies.K();
    row.K = sm->policies.K();
    row.m = sm->policies.m();
    row.Pi_size = sm->policies.size();
  } else {
    const auto& e = std::get<ExoInstance>(inst);
    const std::size_t A = e.env.action_count();
    const double gamma = exo_gamma_of(p, A);
    const std::uint64_t T = exo_rounds(p);
    const ExoRunResult res = run_exo(e.env, e.policies, gamma, T, e.models, rng);
    RunReport& rep = out.report;
    rep.algorithm = "exo";
    rep.seed = rng.seed();
    rep.samples_total = res.trace.size();
    rep.chosen_value = res.output_value;
    rep.best_value = res.best_value;
    rep.suboptimality = res.suboptimality;
    rep.config = {{"T", static_cast<double>(T)},
                  {"gamma", gamma},
                  {"s", e.env.s()},
                  {"actions", static_cast<double>(A)},
                  {"policies", static_cast<double>(e.policies.size())},
                  {"unconverged_solves", static_cast<double>(res.unconverged_solves)},
                  {"clamped", static_cast<double>(res.clamped)}};
    if (res.unconverged_solves > 0)
      rep.diagnostics.push_back(std::to_string(res.unconverged_solves) +
                                " per-round solves did not meet the convergence test");
    const Environment flat = e.env.to_environment();
    double value = 0.0;
    for (std::uint32_t x = 0; x < flat.context_count(); ++x)
      for (std::uint32_t a = 0; a < A; ++a)
        value += flat.context_probs()[x] * res.output[x][a] *
                 flat.mean_reward(ContextId{x}, ActionId{a});
    audit(best_policy_value(flat, e.policies).value - value, rep.suboptimality);
    if (rep.samples_total != T) throw std::logic_error("sample accounting mismatch");
    row.s = e.env.s();
    row.A_size = A;
    row.Pi_size = e.policies.size();
  }
  const auto stop = std::chrono::steady_clock::now();

  row.samples_used = out.report.samples_total;
  row.suboptimality = out.report.suboptimality;
  row.success = out.report.suboptimality <= p.eps;
  if (timing) row.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  if (row.suboptimality < -1e-10) throw std::logic_error("negative suboptimality");
  return out;
}

SweepRow run_point_row(const SweepPoint& point, std::uint64_t master_seed, bool timing) {
  try {
    return run_point(point, master_seed, timing).row;
  } catch (const std::exception& e) {
    SweepRow row;
    row.algorithm = to_string(point.algorithm);
    row.s = point.s;
    row.A_size = point.algorithm == Algorithm::ccsb ? point.K : point.A_size;
    if (point.algorithm == Algorithm::ccsb) {
      row.K = point.K;
      row.m = point.m;
    }
    row.Pi_size = point.Pi_size;
    row.eps = point.eps;
    row.delta = point.delta;
    row.seed = point.seed;
    row.error = e.what();
    return row;
  }
}

// ---------------------------------------------------------------- config

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <typename T>
std::vector<T> grid_of(const json& g, const char* key, std::vector<T> fallback) {
  if (!g.contains(key)) return fallback;
  const json& v = g.at(key);
  std::vector<T> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(e.get<T>());
  } else {
    out.push_back(v.get<T>());
  }
  if (out.empty()) throw ConfigError(std::string("grid '") + key + "' is empty");
  return out;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& doc) {
  try {
    check_keys(doc, {"algorithm", "family", "grid", "delta", "seeds", "master_seed",
                     "multipliers", "exo", "search", "output", "format", "dec"},
               "config");
    ExperimentConfig cfg;
    if (doc.contains("algorithm")) cfg.algorithm = algorithm_from_string(doc.at("algorithm"));
    cfg.base.algorithm = cfg.algorithm;
    if (doc.contains("family")) {
      const json& f = doc.at("family");
      if (f.is_string()) {
        cfg.base.family = family_from_string(f.get<std::string>());
      } else {
        check_keys(f, {"kind", "contexts", "style", "mode", "outcomes", "file"}, "family");
        cfg.base.family = family_from_string(f.value("kind", std::string("sparse")));
        cfg.base.contexts = f.value("contexts", cfg.base.contexts);
        if (f.contains("style")) cfg.base.style = reward_style_from_string(f.at("style"));
        if (f.contains("mode")) cfg.base.mode = sparsity_mode_from_string(f.at("mode"));
        cfg.base.outcomes = f.value("outcomes", cfg.base.outcomes);
        cfg.base.env_file = f.value("file", std::string());
      }
    } else if (cfg.algorithm == Algorithm::ccsb) {
      cfg.base.family = FamilyKind::list;
    } else if (cfg.algorithm == Algorithm::exo) {
      cfg.base.family = FamilyKind::exo_tiny;
    }
    if (cfg.base.family == FamilyKind::file && cfg.base.env_file.empty())
      throw ConfigError("family 'file' needs a 'file' path");
    if (cfg.base.family == FamilyKind::exo_tiny && !doc.contains("family")) {
      cfg.base.contexts = 2;
    }

    if (doc.contains("grid")) {
      const json& g = doc.at("grid");
      check_keys(g, {"s", "A_size", "Pi_size", "eps", "K", "m"}, "grid");
      cfg.s = grid_of<double>(g, "s", cfg.s);
      cfg.A_size = grid_of<std::size_t>(g, "A_size", cfg.A_size);
      cfg.Pi_size = grid_of<std::size_t>(g, "Pi_size", cfg.Pi_size);
      cfg.eps = grid_of<double>(g, "eps", cfg.eps);
      cfg.K = grid_of<std::size_t>(g, "K", cfg.K);
      cfg.m = grid_of<std::size_t>(g, "m", cfg.m);
    }
    cfg.base.delta = doc.value("delta", cfg.base.delta);
    if (doc.contains("seeds")) {
      const json& s = doc.at("seeds");
      cfg.seeds.clear();
      if (s.is_object()) {
        check_keys(s, {"first", "count"}, "seeds");
        const std::uint64_t first = s.value("first", std::uint64_t{0});
        const std::uint64_t count = s.at("count").get<std::uint64_t>();
        for (std::uint64_t k = 0; k < count; ++k) cfg.seeds.push_back(first + k);
      } else {
        for (const auto& e : s) cfg.seeds.push_back(e.get<std::uint64_t>());
      }
      if (cfg.seeds.empty()) throw ConfigError("seed list is empty");
      std::set<std::uint64_t> uniq(cfg.seeds.begin(), cfg.seeds.end());
      if (uniq.size() != cfg.seeds.size()) throw ConfigError("seeds must be distinct");
    }
    cfg.master_seed = doc.value("master_seed", cfg.master_seed);
    if (doc.contains("multipliers")) {
      const json& m = doc.at("multipliers");
      check_keys(m, {"T", "n", "budget_scale", "etc_c"}, "multipliers");
      cfg.base.T_multiplier = m.value("T", cfg.base.T_multiplier);
      cfg.base.n_multiplier = m.value("n", cfg.base.n_multiplier);
      cfg.base.budget_scale = m.value("budget_scale", cfg.base.budget_scale);
      cfg.base.etc_c = m.value("etc_c", cfg.base.etc_c);
    }
    if (doc.contains("exo")) {
      const json& e = doc.at("exo");
      check_keys(e, {"gamma", "T"}, "exo");
      cfg.base.exo_gamma = e.value("gamma", cfg.base.exo_gamma);
      cfg.base.exo_T = e.value("T", cfg.base.exo_T);
    }
    if (doc.contains("search")) {
      const json& s = doc.at("search");
      check_keys(s, {"target", "seeds_per_point", "resolution", "start_scale", "budget_cap"},
                 "search");
      cfg.success_target = s.value("target", cfg.success_target);
      cfg.seeds_per_point = s.value("seeds_per_point", cfg.seeds_per_point);
      cfg.resolution = s.value("resolution", cfg.resolution);
      cfg.start_scale = s.value("start_scale", cfg.start_scale);
      cfg.budget_cap = s.value("budget_cap", cfg.budget_cap);
    }
    cfg.output = doc.value("output", cfg.output);
    cfg.format = doc.value("format", cfg.format);

    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    for (double e : cfg.eps)
      if (!(e > 0.0 && e < 1.0)) throw ConfigError("eps values must lie in (0,1)");
    if (!(cfg.base.delta > 0.0 && cfg.base.delta < 1.0))
      throw ConfigError("delta must lie in (0,1)");
    for (double s : cfg.s)
      if (!(s >= 1.0)) throw ConfigError("s values must be at least 1");
    if (!positive(cfg.base.T_multiplier) || !positive(cfg.base.n_multiplier) ||
        !positive(cfg.base.budget_scale) || !positive(cfg.base.etc_c))
      throw ConfigError("multipliers must be positive");
    if (cfg.base.exo_gamma < 0.0 || cfg.base.exo_T == 0)
      throw ConfigError("exo gamma must be >= 0 and T positive");
    if (!(cfg.success_target > 0.5 && cfg.success_target < 1.0))
      throw ConfigError("search target must lie in (0.5, 1)");
    if (cfg.seeds_per_point == 0) throw ConfigError("seeds_per_point must be positive");
    if (!(cfg.resolution > 1.0)) throw ConfigError("search resolution must exceed 1");
    if (!positive(cfg.start_scale)) throw ConfigError("start_scale must be positive");
    if (cfg.format != "csv" && cfg.format != "json")
      throw ConfigError("format must be csv or json");
    if (cfg.base.contexts == 0) throw ConfigError("contexts must be positive");
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config '" + path + "': " + e.what());
  }
  return experiment_config_from_json(doc);
}

std::vector<SweepPoint> expand_grid(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> out;
  const bool semi = cfg.algorithm == Algorithm::ccsb;
  const std::vector<std::size_t> none{0};
  for (double s : cfg.s)
    for (std::size_t A : semi ? none : cfg.A_size)
      for (std::size_t K : semi ? cfg.K : none)
        for (std::size_t m : semi ? cfg.m : none)
          for (std::size_t Pi : cfg.Pi_size)
            for (double eps : cfg.eps)
              for (std::uint64_t seed : cfg.seeds) {
                SweepPoint p = cfg.base;
                p.algorithm = cfg.algorithm;
                p.s = s;
                p.A_size = semi ? K : A;
                p.K = K;
                p.m = m;
                p.Pi_size = Pi;
                p.eps = eps;
                p.seed = seed;
                out.push_back(p);
              }
  return out;
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, std::size_t workers,
                                bool timing) {
  const auto points = expand_grid(cfg);
  std::vector<SweepRow> rows(points.size());
  parallel_for(points.size(), workers, [&](std::size_t i) {
    rows[i] = run_point_row(points[i], cfg.master_seed, timing);
  });
  return rows;
}

// ---------------------------------------------------------------- emission

std::string sweep_csv_header() {
  return "algorithm,s,A_size,K,m,Pi_size,eps,delta,seed,samples_used,suboptimality,success,"
         "wall_time_ms";
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << sweep_csv_header() << '\n';
  for (const SweepRow& r : rows) {
    os << r.algorithm << ',' << format_double(r.s) << ',' << r.A_size << ',';
    if (r.K) os << *r.K;
    os << ',';
    if (r.m) os << *r.m;
    os << ',' << r.Pi_size << ',' << format_double(r.eps) << ',' << format_double(r.delta)
       << ',' << r.seed << ',' << r.samples_used << ',' << format_double(r.suboptimality)
       << ',' << (r.success ? "true" : "false") << ',' << format_double(r.wall_time_ms)
       << '\n';
  }
  return os.str();
}

json to_json(const SweepRow& r) {
  json j = {{"algorithm", r.algorithm},
            {"s", r.s},
            {"A_size", r.A_size},
            {"K", r.K ? json(*r.K) : json(nullptr)},
            {"m", r.m ? json(*r.m) : json(nullptr)},
            {"Pi_size", r.Pi_size},
            {"eps", r.eps},
            {"delta", r.delta},
            {"seed", r.seed},
            {"samples_used", r.samples_used},
            {"suboptimality", r.suboptimality},
            {"success", r.success},
            {"wall_time_ms", r.wall_time_ms}};
  if (r.failed()) j["error"] = r.error;
  return j;
}

json to_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  return arr;
}

SweepRow sweep_row_from_json(const json& j) {
  SweepRow r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.s = j.at("s").get<double>();
  r.A_size = j.at("A_size").get<std::size_t>();
  if (!j.at("K").is_null()) r.K = j.at("K").get<std::size_t>();
  if (!j.at("m").is_null()) r.m = j.at("m").get<std::size_t>();
  r.Pi_size = j.at("Pi_size").get<std::size_t>();
  r.eps = j.at("eps").get<double>();
  r.delta = j.at("delta").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.samples_used = j.at("samples_used").get<std::uint64_t>();
  r.suboptimality = j.at("suboptimality").get<double>();
  r.success = j.at("success").get<bool>();
  r.wall_time_ms = j.at("wall_time_ms").get<double>();
  r.error = j.value("error", std::string());
  return r;
}

std::vector<SweepRow> sweep_rows_from_json(const json& doc) {
  std::vector<SweepRow> rows;
  for (const auto& j : doc) rows.push_back(sweep_row_from_json(j));
  return rows;
}

void emit(const std::vector<SweepRow>& rows, const std::string& format,
          const std::string& path) {
  std::string text;
  if (format == "csv") {
    text = to_csv(rows);
  } else if (format == "json") {
    text = to_json(rows).dump(2) + "\n";
  } else {
    throw ConfigError("format must be csv or json");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------- search

SearchResult sample_complexity_search(
    const std::function<std::uint64_t(double)>& budget,
    const std::function<ProbeOutcome(std::size_t, double)>& probe,
    const SearchConfig& cfg) {
  if (!(cfg.success_target > 0.5 && cfg.success_target < 1.0))
    throw std::invalid_argument("success target must lie in (0.5, 1)");
  if (cfg.seeds_per_point == 0) throw std::invalid_argument("seeds_per_point must be positive");
  if (!(cfg.resolution > 1.0)) throw std::invalid_argument("resolution must exceed 1");
  if (!(cfg.start_scale > 0.0)) throw std::invalid_argument("start_scale must be positive");

  SearchResult res;
  // Returns false without running when the probe would exceed the cap.
  auto run = [&](double scale, SearchProbe& out) {
    out.budget_scale = scale;
    if (budget(scale) > cfg.budget_cap) return false;
    std::vector<ProbeOutcome> outcomes(cfg.seeds_per_point);
    parallel_for(cfg.seeds_per_point, cfg.workers,
                 [&](std::size_t j) { outcomes[j] = probe(j, scale); });
    std::size_t wins = 0;
    for (const auto& o : outcomes) {
      out.budget = std::max(out.budget, o.samples);
      wins += o.success ? 1 : 0;
    }
    out.success_rate = static_cast<double>(wins) / static_cast<double>(cfg.seeds_per_point);
    res.probes.push_back(out);
    return true;
  };
  auto accept = [&](const SearchProbe& p) {
    res.budget = p.budget;
    res.budget_scale = p.budget_scale;
    res.success_rate = p.success_rate;
  };

  double scale = cfg.start_scale;
  SearchProbe hi;
  while (true) {
    if (!run(scale, hi)) {
      res.capped = true;
      return res;
    }
    if (hi.success_rate >= cfg.success_target) break;
    scale *= 2.0;
    hi = SearchProbe{};
  }
  if (scale == cfg.start_scale) {
    accept(hi);
    return res;
  }
  double lo = scale / 2.0;
  while (hi.budget_scale / lo > cfg.resolution) {
    const double mid = std::sqrt(lo * hi.budget_scale);
    SearchProbe p;
    run(mid, p);
    if (p.success_rate >= cfg.success_target) {
      hi = p;
    } else {
      lo = mid;
    }
  }
  accept(hi);
  return res;
}

std::uint64_t predicted_samples(const SweepPoint& p, std::uint64_t master_seed) {
  const Built inst = build(p, master_seed);
  if (const auto* b = std::get_if<BanditInstance>(&inst)) {
    if (p.algorithm == Algorithm::baseline_etc)
      return etc_rounds(b->env.action_count(), b->policies.size(), p.eps, p.delta, p.etc_c,
                        p.budget_scale);
    const auto cfg = derive_lve_config(b->env.action_count(), b->policies.size(),
                                       b->env.sparsity().s, p.eps, p.delta, overrides_of(p));
    return cfg.T + cfg.n;
  }
  if (const auto* sm = std::get_if<SemiInstance>(&inst)) {
    const auto cfg = derive_ccsb_config(sm->policies.K(), sm->policies.m(), sm->policies.size(),
                                        sm->env.sparsity().s, p.eps, p.delta, overrides_of(p));
    return cfg.T + cfg.n;
  }
  return exo_rounds(p);
}

SearchResult search_point(const SweepPoint& point, std::uint64_t master_seed,
                          const SearchConfig& cfg) {
  auto budget = [&](double scale) {
    SweepPoint p = point;
    p.seed = 0;
    p.budget_scale = scale;
    return predicted_samples(p, master_seed);
  };
  auto probe = [&](std::size_t j, double scale) {
    SweepPoint p = point;
    p.seed = j;
    p.budget_scale = scale;
    const auto r = run_point(p, master_seed).row;
    return ProbeOutcome{r.samples_used, r.success};
  };
  return sample_complexity_search(budget, probe, cfg);
}

// ---------------------------------------------------------------- scaling

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  if (x.size() < 3) throw std::invalid_argument("fit_loglog: need at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("fit_loglog: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_loglog: degenerate grid");
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  f.points = n;
  return f;
}

std::vector<ScalingFit> scaling_report(const std::vector<SweepRow>& rows) {
  struct Axis {
    const char* name;
    double (*get)(const SweepRow&);
  };
  const Axis axes[] = {
      {"s", [](const SweepRow& r) { return r.s; }},
      {"A_size", [](const SweepRow& r) { return static_cast<double>(r.A_size); }},
  };
  std::vector<ScalingFit> out;
  for (const Axis& axis : axes) {
    // group key -> axis value -> samples
    std::map<std::pair<std::string, std::string>, std::map<double, std::vector<double>>> groups;
    for (const SweepRow& r : rows) {
      if (r.failed()) continue;
      std::ostringstream key;
      if (std::string(axis.name) != "s") key << "s=" << format_double(r.s) << ' ';
      if (std::string(axis.name) != "A_size") key << "A_size=" << r.A_size << ' ';
      if (r.m) key << "m=" << *r.m << ' ';
      key << "Pi_size=" << r.Pi_size << " eps=" << format_double(r.eps)
          << " delta=" << format_double(r.delta);
      groups[{r.algorithm, key.str()}][axis.get(r)].push_back(
          static_cast<double>(r.samples_used));
    }
    for (const auto& [key, by_value] : groups) {
      if (by_value.size() < 3) continue;
      std::vector<double> xs, ys;
      for (const auto& [v, samples] : by_value) {
        xs.push_back(v);
        ys.push_back(std::accumulate(samples.begin(), samples.end(), 0.0) /
                     static_cast<double>(samples.size()));
      }
      out.push_back({key.first, axis.name, key.second, fit_loglog(xs, ys)});
    }
  }
  return out;
}

std::string format_scaling(const std::vector<ScalingFit>& fits) {
  std::ostringstream os;
  for (const auto& f : fits)
    os << "# fit " << f.algorithm << " samples vs " << f.axis << " [" << f.fixed
       << "]: slope=" << std::fixed << std::setprecision(4) << f.fit.slope
       << " r2=" << f.fit.r2 << std::defaultfloat
       << " points=" << f.fit.points << '\n';
  return os.str();
}

// ---------------------------------------------------------------- DEC sweeps

DecConfig dec_config_from_json(const json& doc) {
  DecConfig cfg;
  try {
    const json& d = doc.contains("dec") ? doc.at("dec") : doc;
    check_keys(d, {"classes", "max_actions", "max_observations", "max_models", "s",
                   "gamma_factors"},
               "dec");
    cfg.classes = d.value("classes", cfg.classes);
    cfg.max_actions = d.value("max_actions", cfg.max_actions);
    cfg.max_observations = d.value("max_observations", cfg.max_observations);
    cfg.max_models = d.value("max_models", cfg.max_models);
    cfg.s = d.value("s", cfg.s);
    if (d.contains("gamma_factors")) cfg.gamma_factors = d.at("gamma_factors").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dec config: ") + e.what());
  }
  if (cfg.classes == 0 || cfg.max_actions < 2 || cfg.max_observations < 2 || cfg.max_models < 2)
    throw ConfigError("dec config needs classes >= 1 and at least 2 actions, observations, models");
  if (!(cfg.s > 0.0)) throw ConfigError("dec config needs s > 0");
  if (cfg.gamma_factors.empty()) throw ConfigError("dec config needs gamma factors");
  for (double g : cfg.gamma_factors)
    if (!(g > 0.0)) throw ConfigError("gamma factors must be positive");
  return cfg;
}

std::vector<DecRow> run_dec_sweep(const DecConfig& cfg, std::uint64_t seed,
                                  std::size_t workers) {
  const RngStream base(seed, 0x71);
  std::vector<std::vector<DecRow>> per(cfg.classes);
  parallel_for(cfg.classes, workers, [&](std::size_t k) {
    RngStream rng = base.split(k);
    const std::size_t A = 2 + rng.uniform_index(cfg.max_actions - 1);
    const std::size_t O = 2 + rng.uniform_index(cfg.max_observations - 1);
    const std::size_t count = 2 + rng.uniform_index(cfg.max_models - 1);
    const ModelClass mc = make_random_model_class(A, O, cfg.s, count, rng);
    const std::size_t i = rng.uniform_index(mc.size());
    const std::size_t j = rng.uniform_index(mc.size());
    const Model Mbar = mc[i].mix(mc[j], rng.uniform());
    for (double f : cfg.gamma_factors) {
      const double gamma = f * static_cast<double>(A);
      const PdecEstimate est = pdec_estimate(mc, Mbar, gamma);
      DecRow row;
      row.instance = k;
      row.actions = A;
      row.observations = O;
      row.models = mc.size();
      row.s = cfg.s;
      row.gamma = gamma;
      row.estimate = est.value;
      row.certificate = est.certificate;
      row.bound = 64.0 * cfg.s / gamma;
      row.pass = est.value <= row.bound && est.certificate <= row.bound;
      per[k].push_back(row);
    }
  });
  std::vector<DecRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::string dec_csv(const std::vector<DecRow>& rows) {
  std::ostringstream os;
  os << "instance,actions,observations,models,s,gamma,estimate,certificate,bound,pass\n";
  for (const auto& r : rows)
    os << r.instance << ',' << r.actions << ',' << r.observations << ',' << r.models << ','
       << format_double(r.s) << ',' << format_double(r.gamma) << ','
       << format_double(r.estimate) << ',' << format_double(r.certificate) << ','
       << format_double(r.bound) << ',' << (r.pass ? "true" : "false") << '\n';
  return os.str();
}

json dec_json(const std::vector<DecRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"instance", r.instance},
                   {"actions", r.actions},
                   {"observations", r.observations},
                   {"models", r.models},
                   {"s", r.s},
                   {"gamma", r.gamma},
                   {"estimate", r.estimate},
                   {"certificate", r.certificate},
                   {"bound", r.bound},
                   {"pass", r.pass}});
  return arr;
}

}  // namespace sparsecb
