#include "sparsecb/lve.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "sparsecb/mwu.hpp"

namespace sparsecb {

double checked_gamma(double gamma, std::vector<std::string>* diagnostics) {
  if (!(gamma > 0.0) || gamma > 0.5)
    throw std::invalid_argument("gamma must lie in (0, 1/2]");
  if (gamma < kMinGamma) {
    std::ostringstream msg;
    msg << "WARNING: gamma " << gamma << " raised to " << kMinGamma
        << " to keep importance weights finite";
    std::cerr << msg.str() << '\n';
    if (diagnostics) diagnostics->push_back(msg.str());
    return kMinGamma;
  }
  return gamma;
}

namespace {

void check_eps_delta(double eps, double delta) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0,1)");
}

std::uint64_t ceil_positive(double v) {
  if (!(v < 9.0e18)) throw std::invalid_argument("derived horizon overflows");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(v)));
}

}  // namespace

LveConfig derive_lve_config(std::size_t action_count, std::size_t policy_count,
                            double s, double eps, double delta,
                            const LveOverrides& o,
                            std::vector<std::string>* diagnostics) {
  check_eps_delta(eps, delta);
  if (action_count == 0 || policy_count == 0)
    throw std::invalid_argument("empty action set or policy class");
  LveConfig cfg;
  cfg.gamma = checked_gamma(o.gamma.value_or(0.5), diagnostics);
  const double A = static_cast<double>(action_count);
  cfg.eta = o.eta.value_or(cfg.gamma / A);
  const double scale = o.budget_scale.value_or(1.0);
  if (!(scale > 0.0)) throw std::invalid_argument("budget scale must be positive");
  cfg.T_multiplier = o.T_multiplier.value_or(8.0) * scale;
  cfg.n_multiplier = o.n_multiplier.value_or(16.0) * scale;
  const double logs = std::log(static_cast<double>(policy_count) / delta) *
                      std::log(1.0 / eps);
  cfg.T = o.T.value_or(ceil_positive(cfg.T_multiplier * (A / eps) * logs));
  cfg.n = o.n.value_or(
      ceil_positive(cfg.n_multiplier * (A / eps + s / (eps * eps)) * logs));
  if (cfg.T == 0 || cfg.n == 0)
    throw std::invalid_argument("T and n must be positive");
  return cfg;
}

ExplorationDistribution::ExplorationDistribution(
    std::vector<std::uint32_t> selected, std::size_t policy_count,
    std::size_t contexts, std::size_t width, std::vector<double> counts)
    : selected_(std::move(selected)),
      p_hat_(policy_count, 0.0),
      contexts_(contexts),
      width_(width),
      counts_(std::move(counts)) {
  if (selected_.empty())
    throw std::invalid_argument("exploration distribution needs T >= 1");
  if (counts_.size() != contexts_ * width_)
    throw std::invalid_argument("coverage table has the wrong shape");
  const double inv = 1.0 / static_cast<double>(selected_.size());
  for (auto i : selected_) {
    if (i >= policy_count) throw std::invalid_argument("selected index out of range");
    p_hat_[i] += inv;
  }
}

ExplorationDistribution ExplorationDistribution::from_selection(
    std::vector<std::uint32_t> selected, const PolicyClass& policies) {
  const std::size_t X = policies.context_count();
  const std::size_t A = policies.action_count();
  std::vector<double> counts(X * A, 0.0);
  for (auto i : selected)
    for (std::uint32_t x = 0; x < X; ++x)
      counts[x * A + policies.action(i, ContextId{x}).index] += 1.0;
  return ExplorationDistribution(std::move(selected), policies.size(), X, A,
                                 std::move(counts));
}

PolicyColumns::PolicyColumns(const PolicyClass& policies)
    : actions_(policies.action_count()) {
  const std::size_t X = policies.context_count();
  start_.assign(X * actions_ + 1, 0);
  for (std::uint32_t x = 0; x < X; ++x)
    for (const ActionId a : policies.column(ContextId{x}))
      ++start_[x * actions_ + a.index + 1];
  for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
  index_.resize(start_.back());
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  for (std::uint32_t x = 0; x < X; ++x) {
    const auto col = policies.column(ContextId{x});
    for (std::uint32_t i = 0; i < col.size(); ++i)
      index_[fill[x * actions_ + col[i].index]++] = i;
  }
}

ExplorationDistribution phase1(RoundSource& source, const PolicyClass& policies,
                               const LveConfig& cfg, RngStream& actions,
                               RngStream& sampler,
                               std::vector<RoundLog>* trace) {
  const std::size_t X = policies.context_count();
  const std::size_t A = policies.action_count();
  const double gamma = cfg.gamma;
  const double bound = static_cast<double>(A) / gamma;
  const double T = static_cast<double>(cfg.T);
  SparseHedge hedge(policies.size(), cfg.eta, bound);
  const PolicyColumns columns(policies);
  std::vector<double> counts(X * A, 0.0);
  std::vector<std::uint32_t> selected;
  selected.reserve(cfg.T);
  if (trace) trace->reserve(trace->size() + cfg.T);

  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    const ContextId x = source.next_context();
    const ActionId a{static_cast<std::uint32_t>(actions.uniform_index(A))};
    const double r = source.observe(a);
    // u_t(pi) is the same for every pi with pi(x) = a and zero elsewhere.
    const double denom =
        gamma / static_cast<double>(A) + (1.0 - gamma) * counts[x.index * A + a.index] / T;
    const double u = r * r / denom;
    if (!(u >= 0.0 && u <= bound * (1.0 + 1e-12)))
      throw std::logic_error("phase I reward outside [0, |A|/gamma]");

    const auto pi_t = static_cast<std::uint32_t>(hedge.sample(sampler.uniform()));
    if (u > 0.0)
      for (std::uint32_t i : columns.members(x, a)) hedge.add(i, u);
    for (std::uint32_t y = 0; y < X; ++y)
      counts[y * A + policies.action(pi_t, ContextId{y}).index] += 1.0;
    selected.push_back(pi_t);
    if (trace) trace->push_back(RoundLog{t, x, a, r, pi_t});
  }
  return ExplorationDistribution(std::move(selected), policies.size(), X, A,
                                 std::move(counts));
}

ExplorationDistribution phase1(const Environment& env,
                               const PolicyClass& policies,
                               const LveConfig& cfg, const RngStream& rng,
                               std::vector<RoundLog>* trace) {
  if (env.action_count() != policies.action_count() ||
      env.context_count() != policies.context_count())
    throw std::invalid_argument("environment and policy class disagree");
  EnvironmentSource source(env, rng.split(streams::kPhase1Env));
  RngStream actions = rng.split(streams::kPhase1Actions);
  RngStream sampler = rng.split(streams::kPhase1Policies);
  return phase1(source, policies, cfg, actions, sampler, trace);
}

namespace {

// V[x][a] = E[r(a)^2 | x] / (gamma/|A| + (1-gamma) Q(x,a)).
std::vector<double> variance_cells(const Environment& env,
                                   const ExplorationDistribution& ed,
                                   double gamma) {
  const std::size_t X = env.context_count();
  const std::size_t A = env.action_count();
  if (ed.width() != A || ed.context_count() != X)
    throw std::invalid_argument("exploration distribution does not match env");
  std::vector<double> v(X * A);
  for (std::uint32_t x = 0; x < X; ++x)
    for (std::uint32_t a = 0; a < A; ++a) {
      const ContextId cx{x};
      const double denom = gamma / static_cast<double>(A) +
                           (1.0 - gamma) * ed.marginal(cx, a);
      v[x * A + a] = env.mean_sq_reward(cx, ActionId{a}) / denom;
    }
  return v;
}

}  // namespace

double estimator_variance_exact(const Environment& env,
                                const ExplorationDistribution& ed,
                                double gamma, const Policy& pi) {
  const auto cells = variance_cells(env, ed, gamma);
  const auto px = env.context_probs();
  double total = 0.0;
  for (std::uint32_t x = 0; x < env.context_count(); ++x)
    total += px[x] * cells[x * env.action_count() + pi(ContextId{x}).index];
  return total;
}

std::vector<double> estimator_variances_exact(const Environment& env,
                                              const PolicyClass& policies,
                                              const ExplorationDistribution& ed,
                                              double gamma) {
  const auto cells = variance_cells(env, ed, gamma);
  const auto px = env.context_probs();
  const std::size_t A = env.action_count();
  std::vector<double> out(policies.size(), 0.0);
  for (std::uint32_t x = 0; x < env.context_count(); ++x) {
    const auto col = policies.column(ContextId{x});
    for (std::size_t i = 0; i < col.size(); ++i)
      out[i] += px[x] * cells[x * A + col[i].index];
  }
  return out;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Phase2Result phase2(RoundSource& source, const PolicyClass& policies,
                    const ExplorationDistribution& ed, const LveConfig& cfg,
                    RngStream& mix) {
  if (cfg.n == 0) throw std::invalid_argument("phase II needs n >= 1");
  const std::size_t X = policies.context_count();
  const std::size_t A = policies.action_count();
  const double gamma = cfg.gamma;
  const auto selected = ed.selected();
  // R_i(pi) depends on pi only through pi(x_i), so sums are kept per cell.
  std::vector<double> cell_sum(X * A, 0.0);
  for (std::uint64_t i = 0; i < cfg.n; ++i) {
    const ContextId x = source.next_context();
    ActionId a;
    if (mix.uniform() < gamma) {
      a = ActionId{static_cast<std::uint32_t>(mix.uniform_index(A))};
    } else {
      const std::uint32_t pi = selected[mix.uniform_index(selected.size())];
      a = policies.action(pi, x);
    }
    const double r = source.observe(a);
    const double denom = gamma / static_cast<double>(A) +
                         (1.0 - gamma) * ed.marginal(x, a.index);
    cell_sum[x.index * A + a.index] += r / denom;
  }
  Phase2Result out;
  out.estimates.assign(policies.size(), 0.0);
  for (std::uint32_t x = 0; x < X; ++x) {
    const auto col = policies.column(ContextId{x});
    for (std::size_t p = 0; p < col.size(); ++p)
      out.estimates[p] += cell_sum[x * A + col[p].index];
  }
  const double inv_n = 1.0 / static_cast<double>(cfg.n);
  for (auto& e : out.estimates) e *= inv_n;
  out.chosen = argmax_lowest(out.estimates);
  return out;
}

Phase2Result phase2(const Environment& env, const PolicyClass& policies,
                    const ExplorationDistribution& ed, const LveConfig& cfg,
                    const RngStream& rng) {
  EnvironmentSource source(env, rng.split(streams::kPhase2Env));
  RngStream mix = rng.split(streams::kPhase2Mix);
  return phase2(source, policies, ed, cfg, mix);
}

RunReport run_lve(const Environment& env, const PolicyClass& policies,
                  double eps, double delta, const LveOverrides& overrides,
                  const RngStream& rng) {
  RunReport report;
  report.algorithm = "lve";
  report.seed = rng.seed();
  const LveConfig cfg =
      derive_lve_config(env.action_count(), policies.size(), env.sparsity().s,
                        eps, delta, overrides, &report.diagnostics);

  EnvironmentSource p1_source(env, rng.split(streams::kPhase1Env));
  RngStream actions = rng.split(streams::kPhase1Actions);
  RngStream sampler = rng.split(streams::kPhase1Policies);
  const auto ed = phase1(p1_source, policies, cfg, actions, sampler);

  EnvironmentSource p2_source(env, rng.split(streams::kPhase2Env));
  RngStream mix = rng.split(streams::kPhase2Mix);
  const auto result = phase2(p2_source, policies, ed, cfg, mix);

  // Every round costs exactly two environment draws.
  report.samples_total = (p1_source.draws() + p2_source.draws()) / 2;
  if (report.samples_total != cfg.T + cfg.n)
    throw std::logic_error("sample accounting mismatch");
  const auto values = policy_values_exact(env, policies);
  const auto best = best_policy_value(env, policies);
  report.chosen_policy = result.chosen;
  report.chosen_value = values[result.chosen];
  report.best_value = best.value;
  report.suboptimality = best.value - values[result.chosen];
  report.variance_by_policy = estimator_variances_exact(env, policies, ed, cfg.gamma);
  report.config = {{"T", static_cast<double>(cfg.T)},
                   {"n", static_cast<double>(cfg.n)},
                   {"eta", cfg.eta},
                   {"gamma", cfg.gamma},
                   {"T_multiplier", cfg.T_multiplier},
                   {"n_multiplier", cfg.n_multiplier},
                   {"eps", eps},
                   {"delta", delta},
                   {"s", env.sparsity().s},
                   {"actions", static_cast<double>(env.action_count())},
                   {"policies", static_cast<double>(policies.size())}};
  return report;
}

}  // namespace sparsecb
