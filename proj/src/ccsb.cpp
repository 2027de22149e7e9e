#include "sparsecb/ccsb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sparsecb/mwu.hpp"

namespace sparsecb {

SubsetAction::SubsetAction(std::vector<std::uint32_t> members, std::size_t K)
    : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  if (members_.empty()) throw std::invalid_argument("subset action is empty");
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end())
    throw std::invalid_argument("subset action has repeated arms");
  if (members_.back() >= K) throw std::invalid_argument("arm index exceeds K");
}

bool SubsetAction::contains(std::uint32_t j) const {
  return std::binary_search(members_.begin(), members_.end(), j);
}

SubsetAction uniform_msubset(std::size_t K, std::size_t m, RngStream& rng) {
  if (m < 1 || m > K) throw std::invalid_argument("need 1 <= m <= K");
  std::vector<std::uint32_t> perm(K);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.uniform_index(K - i);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(m);
  return SubsetAction(std::move(perm), K);
}

SubsetPolicyClass::SubsetPolicyClass(
    const std::vector<std::vector<SubsetAction>>& policies, std::size_t K,
    std::size_t m)
    : size_(policies.size()), contexts_(0), K_(K), m_(m) {
  if (policies.empty()) throw std::invalid_argument("policy class must be non-empty");
  if (m < 1 || m > K) throw std::invalid_argument("need 1 <= m <= K");
  contexts_ = policies.front().size();
  if (contexts_ == 0) throw std::invalid_argument("policy must cover a context");
  table_.resize(contexts_ * size_ * m_);
  std::set<std::vector<std::uint32_t>> seen;
  for (std::size_t i = 0; i < size_; ++i) {
    if (policies[i].size() != contexts_)
      throw std::invalid_argument("policies disagree on the context count");
    std::vector<std::uint32_t> key;
    for (std::size_t x = 0; x < contexts_; ++x) {
      const auto mem = policies[i][x].members();
      if (mem.size() != m_) throw std::invalid_argument("policy image is not an m-subset");
      if (mem.back() >= K_) throw std::invalid_argument("arm index exceeds K");
      std::copy(mem.begin(), mem.end(), table_.begin() + (x * size_ + i) * m_);
      key.insert(key.end(), mem.begin(), mem.end());
    }
    if (!seen.insert(std::move(key)).second) ++duplicates_;
  }
}

SubsetPolicyClass SubsetPolicyClass::from_policy_class(const PolicyClass& pc) {
  std::vector<std::vector<SubsetAction>> out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (std::uint32_t x = 0; x < pc.context_count(); ++x)
      out[i].emplace_back(std::vector<std::uint32_t>{pc.action(i, ContextId{x}).index},
                          pc.action_count());
  return SubsetPolicyClass(out, pc.action_count(), 1);
}

namespace {

void check_compatible(const Environment& env, const SubsetPolicyClass& pc) {
  if (env.action_count() != pc.K() || env.context_count() != pc.context_count())
    throw std::invalid_argument("environment and subset policy class disagree");
  if (env.subset_mode() && env.subset_size() != pc.m())
    throw std::invalid_argument("environment subset size differs from m");
  if (env.sparsity().mode != SparsityMode::l1)
    throw std::invalid_argument(
        "semi-bandit runs need an l1 sparsity certificate to bound rewards");
}

}  // namespace

std::vector<double> subset_policy_values_exact(const Environment& env,
                                               const SubsetPolicyClass& pc) {
  if (env.action_count() != pc.K() || env.context_count() != pc.context_count())
    throw std::invalid_argument("environment and subset policy class disagree");
  std::vector<double> v(pc.size(), 0.0);
  const auto px = env.context_probs();
  for (std::uint32_t x = 0; x < env.context_count(); ++x)
    for (std::size_t i = 0; i < pc.size(); ++i) {
      double inner = 0.0;
      for (std::uint32_t j : pc.members(i, ContextId{x}))
        inner += env.mean_reward(ContextId{x}, ActionId{j});
      v[i] += px[x] * inner;
    }
  return v;
}

double CcsbConfig::reward_bound() const {
  const double md = static_cast<double>(m);
  return static_cast<double>(K) * std::min(s, md) / (gamma * md);
}

CcsbConfig derive_ccsb_config(std::size_t K, std::size_t m,
                              std::size_t policy_count, double s, double eps,
                              double delta, const LveOverrides& o,
                              std::vector<std::string>* diagnostics) {
  if (m < 1 || m > K) throw std::invalid_argument("need 1 <= m <= K");
  if (!(s > 0.0)) throw std::invalid_argument("sparsity must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  if (policy_count == 0) throw std::invalid_argument("empty policy class");
  CcsbConfig cfg;
  cfg.K = K;
  cfg.m = m;
  cfg.s = s;
  cfg.gamma = checked_gamma(o.gamma.value_or(0.5), diagnostics);
  const double Kd = static_cast<double>(K);
  const double md = static_cast<double>(m);
  const double sm = std::min(s, md);
  cfg.eta = o.eta.value_or(cfg.gamma * md / (Kd * sm));
  const double scale = o.budget_scale.value_or(1.0);
  if (!(scale > 0.0)) throw std::invalid_argument("budget scale must be positive");
  cfg.T_multiplier = o.T_multiplier.value_or(8.0) * scale;
  cfg.n_multiplier = o.n_multiplier.value_or(16.0) * scale;
  const double logs = std::log(static_cast<double>(policy_count) / delta) *
                      std::log(1.0 / eps);
  const double lead = Kd * sm / (md * eps);
  auto ceil_pos = [](double v) {
    if (!(v < 9.0e18)) throw std::invalid_argument("derived horizon overflows");
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(v)));
  };
  cfg.T = o.T.value_or(ceil_pos(cfg.T_multiplier * lead * logs));
  cfg.n = o.n.value_or(ceil_pos(cfg.n_multiplier * (lead + s * sm / (eps * eps)) * logs));
  if (cfg.T == 0 || cfg.n == 0) throw std::invalid_argument("T and n must be positive");
  return cfg;
}

ExplorationDistribution ccsb_exploration_from_selection(
    std::vector<std::uint32_t> selected, const SubsetPolicyClass& pc) {
  const std::size_t X = pc.context_count();
  const std::size_t K = pc.K();
  std::vector<double> counts(X * K, 0.0);
  for (auto i : selected)
    for (std::uint32_t x = 0; x < X; ++x)
      for (std::uint32_t j : pc.members(i, ContextId{x})) counts[x * K + j] += 1.0;
  return ExplorationDistribution(std::move(selected), pc.size(), X, K,
                                 std::move(counts));
}

ExplorationDistribution phase1_ccsb(RoundSource& source,
                                    const SubsetPolicyClass& pc,
                                    const CcsbConfig& cfg, RngStream& actions,
                                    RngStream& sampler,
                                    std::vector<SubsetRoundLog>* trace) {
  const std::size_t X = pc.context_count();
  const std::size_t K = pc.K();
  const std::size_t m = pc.m();
  if (cfg.K != K || cfg.m != m) throw std::invalid_argument("config (K, m) mismatch");
  const double gamma = cfg.gamma;
  const double bound = cfg.reward_bound();
  const double T = static_cast<double>(cfg.T);
  const double floor_prob = gamma * static_cast<double>(m) / static_cast<double>(K);
  SparseHedge hedge(pc.size(), cfg.eta, bound);
  std::vector<double> counts(X * K, 0.0);
  // Importance-weighted reward per arm for the current round; zero off a_t.
  std::vector<double> arm_value(K, 0.0);
  std::vector<std::uint32_t> selected;
  selected.reserve(cfg.T);
  if (trace) trace->reserve(trace->size() + cfg.T);

  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    const ContextId x = source.next_context();
    const SubsetAction a = uniform_msubset(K, m, actions);
    std::vector<double> observed;
    observed.reserve(m);
    bool any = false;
    for (std::uint32_t j : a.members()) {
      const double r = source.observe(ActionId{j});
      observed.push_back(r);
      arm_value[j] = r / (floor_prob + (1.0 - gamma) * counts[x.index * K + j] / T);
      any = any || r != 0.0;
    }
    const auto pi_t = static_cast<std::uint32_t>(hedge.sample(sampler.uniform()));
    if (any) {
      for (std::size_t i = 0; i < pc.size(); ++i) {
        double u = 0.0;
        for (std::uint32_t j : pc.members(i, x)) u += arm_value[j];
        if (!(u <= bound * (1.0 + 1e-12)))
          throw std::logic_error("phase I reward exceeds K min(s,m)/(gamma m)");
        if (u > 0.0) hedge.add(i, u);
      }
    }
    for (std::uint32_t j : a.members()) arm_value[j] = 0.0;
    for (std::uint32_t y = 0; y < X; ++y)
      for (std::uint32_t j : pc.members(pi_t, ContextId{y})) counts[y * K + j] += 1.0;
    selected.push_back(pi_t);
    if (trace) {
      trace->push_back(SubsetRoundLog{
          t, x, std::vector<std::uint32_t>(a.members().begin(), a.members().end()),
          std::move(observed), pi_t});
    }
  }
  return ExplorationDistribution(std::move(selected), pc.size(), X, K,
                                 std::move(counts));
}

ExplorationDistribution phase1_ccsb(const Environment& env,
                                    const SubsetPolicyClass& pc,
                                    const CcsbConfig& cfg, const RngStream& rng,
                                    std::vector<SubsetRoundLog>* trace) {
  check_compatible(env, pc);
  EnvironmentSource source(env, rng.split(streams::kPhase1Env));
  RngStream actions = rng.split(streams::kPhase1Actions);
  RngStream sampler = rng.split(streams::kPhase1Policies);
  return phase1_ccsb(source, pc, cfg, actions, sampler, trace);
}

std::vector<double> estimator_variances_ccsb_exact(
    const Environment& env, const SubsetPolicyClass& pc,
    const ExplorationDistribution& ed, double gamma) {
  const std::size_t X = env.context_count();
  const std::size_t K = pc.K();
  if (ed.width() != K || ed.context_count() != X || env.action_count() != K)
    throw std::invalid_argument("exploration distribution does not match env");
  const double floor_prob = gamma * static_cast<double>(pc.m()) / static_cast<double>(K);
  std::vector<double> cells(X * K);
  for (std::uint32_t x = 0; x < X; ++x)
    for (std::uint32_t j = 0; j < K; ++j)
      cells[x * K + j] = env.mean_reward(ContextId{x}, ActionId{j}) /
                         (floor_prob + (1.0 - gamma) * ed.marginal(ContextId{x}, j));
  std::vector<double> out(pc.size(), 0.0);
  const auto px = env.context_probs();
  for (std::uint32_t x = 0; x < X; ++x)
    for (std::size_t i = 0; i < pc.size(); ++i) {
      double inner = 0.0;
      for (std::uint32_t j : pc.members(i, ContextId{x})) inner += cells[x * K + j];
      out[i] += px[x] * inner;
    }
  return out;
}

double estimator_variance_ccsb_exact(const Environment& env,
                                     const SubsetPolicyClass& pc,
                                     const ExplorationDistribution& ed,
                                     double gamma, std::size_t policy) {
  return estimator_variances_ccsb_exact(env, pc, ed, gamma).at(policy);
}

Phase2Result phase2_ccsb(RoundSource& source, const SubsetPolicyClass& pc,
                         const ExplorationDistribution& ed,
                         const CcsbConfig& cfg, RngStream& mix) {
  if (cfg.n == 0) throw std::invalid_argument("phase II needs n >= 1");
  const std::size_t X = pc.context_count();
  const std::size_t K = pc.K();
  const std::size_t m = pc.m();
  const double gamma = cfg.gamma;
  const double floor_prob = gamma * static_cast<double>(m) / static_cast<double>(K);
  const auto selected = ed.selected();
  std::vector<double> cell_sum(X * K, 0.0);
  for (std::uint64_t i = 0; i < cfg.n; ++i) {
    const ContextId x = source.next_context();
    auto play = [&](std::span<const std::uint32_t> arms) {
      for (std::uint32_t j : arms) {
        const double r = source.observe(ActionId{j});
        cell_sum[x.index * K + j] += r / (floor_prob + (1.0 - gamma) * ed.marginal(x, j));
      }
    };
    if (mix.uniform() < gamma) {
      const SubsetAction a = uniform_msubset(K, m, mix);
      play(a.members());
    } else {
      play(pc.members(selected[mix.uniform_index(selected.size())], x));
    }
  }
  Phase2Result out;
  out.estimates.assign(pc.size(), 0.0);
  for (std::uint32_t x = 0; x < X; ++x)
    for (std::size_t p = 0; p < pc.size(); ++p)
      for (std::uint32_t j : pc.members(p, ContextId{x}))
        out.estimates[p] += cell_sum[x * K + j];
  const double inv_n = 1.0 / static_cast<double>(cfg.n);
  for (auto& e : out.estimates) e *= inv_n;
  out.chosen = argmax_lowest(out.estimates);
  return out;
}

Phase2Result phase2_ccsb(const Environment& env, const SubsetPolicyClass& pc,
                         const ExplorationDistribution& ed,
                         const CcsbConfig& cfg, const RngStream& rng) {
  check_compatible(env, pc);
  EnvironmentSource source(env, rng.split(streams::kPhase2Env));
  RngStream mix = rng.split(streams::kPhase2Mix);
  return phase2_ccsb(source, pc, ed, cfg, mix);
}

RunReport run_ccsb(const Environment& env, const SubsetPolicyClass& pc,
                   double eps, double delta, const LveOverrides& overrides,
                   const RngStream& rng) {
  check_compatible(env, pc);
  RunReport report;
  report.algorithm = "ccsb";
  report.seed = rng.seed();
  report.K = pc.K();
  report.m = pc.m();
  const CcsbConfig cfg = derive_ccsb_config(pc.K(), pc.m(), pc.size(),
                                            env.sparsity().s, eps, delta,
                                            overrides, &report.diagnostics);
  EnvironmentSource p1_source(env, rng.split(streams::kPhase1Env));
  RngStream actions = rng.split(streams::kPhase1Actions);
  RngStream sampler = rng.split(streams::kPhase1Policies);
  const auto ed = phase1_ccsb(p1_source, pc, cfg, actions, sampler);

  EnvironmentSource p2_source(env, rng.split(streams::kPhase2Env));
  RngStream mix = rng.split(streams::kPhase2Mix);
  const auto result = phase2_ccsb(p2_source, pc, ed, cfg, mix);

  report.samples_total = (p1_source.draws() + p2_source.draws()) / 2;
  if (report.samples_total != cfg.T + cfg.n)
    throw std::logic_error("sample accounting mismatch");
  const auto values = subset_policy_values_exact(env, pc);
  const std::size_t best = argmax_lowest(values);
  report.chosen_policy = result.chosen;
  report.chosen_value = values[result.chosen];
  report.best_value = values[best];
  report.suboptimality = values[best] - values[result.chosen];
  report.variance_by_policy = estimator_variances_ccsb_exact(env, pc, ed, cfg.gamma);
  report.config = {{"T", static_cast<double>(cfg.T)},
                   {"n", static_cast<double>(cfg.n)},
                   {"eta", cfg.eta},
                   {"gamma", cfg.gamma},
                   {"T_multiplier", cfg.T_multiplier},
                   {"n_multiplier", cfg.n_multiplier},
                   {"eps", eps},
                   {"delta", delta},
                   {"s", cfg.s},
                   {"K", static_cast<double>(cfg.K)},
                   {"m", static_cast<double>(cfg.m)},
                   {"policies", static_cast<double>(pc.size())}};
  return report;
}

std::uint64_t count_subset_maps(std::size_t contexts, std::size_t K,
                                std::size_t m, std::uint64_t cap) {
  if (m > K) return 0;
  // C(K, m) by the multiplicative formula; every prefix is an integer.
  unsigned __int128 exact = 1;
  for (std::size_t i = 1; i <= m && exact <= cap; ++i)
    exact = exact * (K - m + i) / i;
  const std::uint64_t c = exact > cap ? cap : static_cast<std::uint64_t>(exact);
  std::uint64_t total = 1;
  for (std::size_t x = 0; x < contexts; ++x) {
    if (total > cap / std::max<std::uint64_t>(c, 1)) return cap;
    total *= c;
  }
  return std::min(total, cap);
}

ListInstance make_list_env(std::size_t contexts, std::size_t K, std::size_t m,
                           double s, RewardStyle style, std::size_t policy_count,
                           RngStream& rng) {
  if (m < 1 || m > K) throw std::invalid_argument("need 1 <= m <= K");
  if (policy_count == 0) throw std::invalid_argument("policy class must be non-empty");
  if (policy_count > count_subset_maps(contexts, K, m, UINT64_MAX))
    throw std::invalid_argument("policy class larger than the number of subset maps");
  if (style == RewardStyle::one_hot) s = 1.0;
  SparseEnvSpec spec;
  spec.contexts = contexts;
  spec.actions = K;
  spec.s = s;
  spec.mode = SparsityMode::l1;
  spec.style = style;
  spec.policies = 1;
  auto base = make_sparse_env(spec, rng);
  std::vector<double> px(base.env.context_probs().begin(), base.env.context_probs().end());
  std::vector<std::vector<RewardOutcome>> law;
  for (std::uint32_t x = 0; x < contexts; ++x) {
    const auto l = base.env.reward_law(ContextId{x});
    law.emplace_back(l.begin(), l.end());
  }
  Environment env(std::move(px), std::move(law), Sparsity{SparsityMode::l1, s}, K, m);

  // Top-m arms per context; lowest index wins ties.
  std::vector<SubsetAction> best;
  for (std::uint32_t x = 0; x < contexts; ++x) {
    std::vector<std::uint32_t> order(K);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return env.mean_reward(ContextId{x}, ActionId{a}) >
             env.mean_reward(ContextId{x}, ActionId{b});
    });
    order.resize(m);
    best.emplace_back(std::move(order), K);
  }
  auto key_of = [](const std::vector<SubsetAction>& p) {
    std::vector<std::uint32_t> key;
    for (const auto& a : p) key.insert(key.end(), a.members().begin(), a.members().end());
    return key;
  };
  std::set<std::vector<std::uint32_t>> seen{key_of(best)};
  std::vector<std::vector<SubsetAction>> others;
  std::size_t attempts = 0;
  while (others.size() + 1 < policy_count) {
    if (++attempts > 1000000)
      throw std::invalid_argument("policy class larger than the number of subset maps");
    std::vector<SubsetAction> p;
    for (std::size_t x = 0; x < contexts; ++x) p.push_back(uniform_msubset(K, m, rng));
    if (seen.insert(key_of(p)).second) others.push_back(std::move(p));
  }
  const std::size_t optimal_index = rng.uniform_index(policy_count);
  std::vector<std::vector<SubsetAction>> all;
  for (std::size_t i = 0, k = 0; i < policy_count; ++i)
    all.push_back(i == optimal_index ? best : others[k++]);
  return ListInstance{std::move(env), SubsetPolicyClass(all, K, m), optimal_index};
}

}  // namespace sparsecb
