#include "sparsecb/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sparsecb {

namespace {

constexpr double kProbTol = 1e-12;
constexpr double kCertTol = 1e-12;

std::vector<double> cumulative(std::span<const double> p) {
  std::vector<double> c(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    c[i] = acc;
  }
  return c;
}

// First index whose cumulative mass exceeds u * total, skipping zero-mass
// entries so that a sample never lands on an impossible outcome.
std::size_t search_cdf(const std::vector<double>& cdf, double u) {
  const double target = u * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i >= cdf.size()) i = cdf.size() - 1;
  while (i > 0 && cdf[i] == cdf[i - 1]) --i;
  return i;
}

double sq_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

double l1_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += std::abs(v);
  return s;
}

}  // namespace

std::string to_string(SparsityMode mode) {
  return mode == SparsityMode::l1 ? "l1" : "l2";
}

SparsityMode sparsity_mode_from_string(const std::string& name) {
  if (name == "l1" || name == "L1") return SparsityMode::l1;
  if (name == "l2" || name == "L2") return SparsityMode::l2;
  throw std::invalid_argument("unknown sparsity mode: " + name);
}

std::string to_string(RewardStyle style) {
  switch (style) {
    case RewardStyle::one_hot:
      return "one_hot";
    case RewardStyle::sparse_binary:
      return "sparse_binary";
    case RewardStyle::dense_scaled:
      return "dense_scaled";
  }
  return "one_hot";
}

RewardStyle reward_style_from_string(const std::string& name) {
  if (name == "one_hot") return RewardStyle::one_hot;
  if (name == "sparse_binary") return RewardStyle::sparse_binary;
  if (name == "dense_scaled") return RewardStyle::dense_scaled;
  throw std::invalid_argument("unknown reward style: " + name);
}

void validate_distribution(std::span<const double> p, double tol,
                           const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string(what) + " is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) +
                                  " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream msg;
    msg << what << " sums to " << sum << ", not 1";
    throw std::invalid_argument(msg.str());
  }
}

std::size_t sample_from_weights(std::span<const double> weights, double u) {
  if (weights.empty())
    throw std::invalid_argument("sample_from_weights: empty weights");
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = u * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

Environment::Environment(std::vector<double> context_probs,
                         std::vector<std::vector<RewardOutcome>> reward_law,
                         Sparsity sparsity, std::size_t action_count,
                         std::size_t subset_size)
    : context_probs_(std::move(context_probs)),
      reward_law_(std::move(reward_law)),
      sparsity_(sparsity),
      action_count_(action_count),
      subset_size_(subset_size) {
  if (action_count_ == 0)
    throw std::invalid_argument("environment needs at least one action");
  if (subset_size_ > action_count_)
    throw std::invalid_argument("subset size exceeds action count");
  if (!(sparsity_.s > 0.0) || !std::isfinite(sparsity_.s))
    throw std::invalid_argument("sparsity level must be positive");
  validate_distribution(context_probs_, kProbTol, "context distribution");
  if (reward_law_.size() != context_probs_.size())
    throw std::invalid_argument("one reward law per context is required");

  const std::size_t X = context_probs_.size();
  mean_.assign(X * action_count_, 0.0);
  mean_sq_.assign(X * action_count_, 0.0);
  outcome_cdf_.resize(X);
  for (std::size_t x = 0; x < X; ++x) {
    const auto& law = reward_law_[x];
    std::vector<double> probs;
    probs.reserve(law.size());
    for (const auto& o : law) {
      if (o.reward.size() != action_count_)
        throw std::invalid_argument("reward vector has the wrong length");
      for (double v : o.reward)
        if (!(v >= 0.0 && v <= 1.0))
          throw std::invalid_argument("reward entry outside [0,1]");
      probs.push_back(o.prob);
    }
    validate_distribution(probs, kProbTol, "reward law");
    for (const auto& o : law)
      for (std::size_t a = 0; a < action_count_; ++a) {
        mean_[x * action_count_ + a] += o.prob * o.reward[a];
        mean_sq_[x * action_count_ + a] += o.prob * o.reward[a] * o.reward[a];
      }
    outcome_cdf_[x] = cumulative(probs);
  }
  context_cdf_ = cumulative(context_probs_);

  const CertificateReport cert = check_certificate(*this);
  if (!cert.pass) throw std::invalid_argument(cert.detail);
}

ContextId Environment::context_at(double u) const {
  return ContextId{static_cast<std::uint32_t>(search_cdf(context_cdf_, u))};
}

const RewardOutcome& Environment::outcome_at(ContextId x, double u) const {
  return reward_law_[x.index][search_cdf(outcome_cdf_[x.index], u)];
}

CertificateReport check_certificate(const Environment& env) {
  CertificateReport rep;
  const auto probs = env.context_probs();
  for (std::size_t x = 0; x < env.context_count(); ++x) {
    for (const auto& o : env.reward_law(ContextId{static_cast<std::uint32_t>(x)})) {
      if (o.prob > 0.0) rep.worst_l1 = std::max(rep.worst_l1, l1_norm(o.reward));
      rep.expected_sq_norm += probs[x] * o.prob * sq_norm(o.reward);
    }
  }
  const double s = env.sparsity().s;
  std::ostringstream msg;
  if (env.sparsity().mode == SparsityMode::l1) {
    rep.pass = rep.worst_l1 <= s + kCertTol;
    if (!rep.pass)
      msg << "sparsity certificate fails: max ||r||_1 = " << rep.worst_l1
          << " > s = " << s;
  } else {
    rep.pass = rep.expected_sq_norm <= s + kCertTol;
    if (!rep.pass)
      msg << "sparsity certificate fails: E||r||_2^2 = "
          << rep.expected_sq_norm << " > s = " << s;
  }
  rep.detail = rep.pass ? "ok" : msg.str();
  return rep;
}

Round sample_round(const Environment& env, RngStream& rng) {
  const ContextId x = env.context_at(rng.uniform());
  const RewardOutcome& o = env.outcome_at(x, rng.uniform());
  return Round{x, o.reward};
}

ContextId EnvironmentSource::next_context() {
  const std::uint64_t before = rng_.draws();
  current_ = sample_round(*env_, rng_);
  draws_ += rng_.draws() - before;
  return current_.context;
}

double EnvironmentSource::observe(ActionId a) {
  if (current_.reward.empty())
    throw std::logic_error("observe called before next_context");
  return current_.reward[a.index];
}

Policy::Policy(std::vector<ActionId> action_of)
    : action_of_(std::move(action_of)) {
  if (action_of_.empty())
    throw std::invalid_argument("policy must cover at least one context");
}

PolicyClass::PolicyClass(const std::vector<Policy>& policies,
                         std::size_t action_count)
    : size_(policies.size()), contexts_(0), actions_(action_count) {
  if (policies.empty())
    throw std::invalid_argument("policy class must be non-empty");
  contexts_ = policies.front().context_count();
  table_.resize(contexts_ * size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto t = policies[i].table();
    if (t.size() != contexts_)
      throw std::invalid_argument("policies disagree on the context count");
    for (std::size_t x = 0; x < contexts_; ++x) {
      if (t[x].index >= actions_)
        throw std::invalid_argument("policy maps to an unknown action");
      table_[x * size_ + i] = t[x];
    }
  }
  std::set<std::vector<ActionId>> seen;
  for (const auto& p : policies) {
    std::vector<ActionId> key(p.table().begin(), p.table().end());
    if (!seen.insert(std::move(key)).second) ++duplicates_;
  }
}

Policy PolicyClass::policy(std::size_t index) const {
  std::vector<ActionId> t(contexts_);
  for (std::size_t x = 0; x < contexts_; ++x) t[x] = table_[x * size_ + index];
  return Policy(std::move(t));
}

double policy_value_exact(const Environment& env, const Policy& pi) {
  if (pi.context_count() != env.context_count())
    throw std::invalid_argument("policy and environment disagree on contexts");
  const auto probs = env.context_probs();
  double v = 0.0;
  for (std::size_t x = 0; x < probs.size(); ++x) {
    const ContextId cx{static_cast<std::uint32_t>(x)};
    v += probs[x] * env.mean_reward(cx, pi(cx));
  }
  return v;
}

std::vector<double> policy_values_exact(const Environment& env,
                                        const PolicyClass& policies) {
  if (policies.context_count() != env.context_count())
    throw std::invalid_argument("policy class and environment disagree");
  std::vector<double> v(policies.size(), 0.0);
  const auto probs = env.context_probs();
  for (std::size_t x = 0; x < probs.size(); ++x) {
    const ContextId cx{static_cast<std::uint32_t>(x)};
    const auto col = policies.column(cx);
    for (std::size_t i = 0; i < col.size(); ++i)
      v[i] += probs[x] * env.mean_reward(cx, col[i]);
  }
  return v;
}

double marginal_action_prob(std::span<const double> p,
                            const PolicyClass& policies, ContextId x,
                            ActionId a) {
  const auto col = policies.column(x);
  double m = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i)
    if (col[i] == a) m += p[i];
  return m;
}

std::vector<double> marginal_action_probs(std::span<const double> p,
                                          const PolicyClass& policies,
                                          ContextId x) {
  if (p.size() != policies.size())
    throw std::invalid_argument("distribution size differs from class size");
  std::vector<double> m(policies.action_count(), 0.0);
  const auto col = policies.column(x);
  for (std::size_t i = 0; i < col.size(); ++i) m[col[i].index] += p[i];
  return m;
}

BestPolicy best_policy_value(const Environment& env,
                             const PolicyClass& policies) {
  const auto v = policy_values_exact(env, policies);
  BestPolicy best{v[0], 0};
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > best.value) best = {v[i], i};
  return best;
}

LowerBoundInstance make_lower_bound_env(std::size_t action_count, double eps,
                                        RngStream& rng) {
  if (action_count < 2)
    throw std::invalid_argument("lower-bound instance needs |A| >= 2");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("lower-bound instance needs eps in (0,1)");
  const auto a_star = static_cast<std::uint32_t>(rng.uniform_index(action_count));
  RewardVector hot(action_count, 0.0);
  hot[a_star] = 1.0;
  std::vector<std::vector<RewardOutcome>> law = {
      {RewardOutcome{1.0, hot}},
      {RewardOutcome{1.0, RewardVector(action_count, 0.0)}}};
  Environment env({eps, 1.0 - eps}, std::move(law),
                  Sparsity{SparsityMode::l1, 1.0}, action_count);
  std::vector<Policy> pis;
  pis.reserve(action_count * action_count);
  for (std::uint32_t a1 = 0; a1 < action_count; ++a1)
    for (std::uint32_t a2 = 0; a2 < action_count; ++a2)
      pis.emplace_back(std::vector<ActionId>{ActionId{a1}, ActionId{a2}});
  return LowerBoundInstance{std::move(env), PolicyClass(pis, action_count),
                            ActionId{a_star}};
}

std::uint64_t count_maps(std::size_t contexts, std::size_t actions,
                         std::uint64_t cap) {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < contexts; ++i) {
    if (actions != 0 && n > cap / actions) return cap;
    n *= actions;
  }
  return std::min(n, cap);
}

namespace {

std::vector<double> random_simplex(std::size_t n, RngStream& rng, double floor) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& v : w) {
    v = floor + rng.uniform();
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

// k distinct indices from [0,n), weighted without replacement.
std::vector<std::size_t> weighted_subset(std::vector<double> weights,
                                         std::size_t k, RngStream& rng) {
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = sample_from_weights(weights, rng.uniform());
    out.push_back(i);
    weights[i] = 0.0;
  }
  return out;
}

std::vector<ActionId> decode_map(std::uint64_t code, std::size_t contexts,
                                 std::size_t actions) {
  std::vector<ActionId> t(contexts);
  for (std::size_t x = contexts; x-- > 0;) {
    t[x] = ActionId{static_cast<std::uint32_t>(code % actions)};
    code /= actions;
  }
  return t;
}

}  // namespace

SparseInstance make_sparse_env(const SparseEnvSpec& spec, RngStream& rng) {
  const std::size_t X = spec.contexts;
  const std::size_t A = spec.actions;
  if (X == 0 || A == 0)
    throw std::invalid_argument("sparse env needs contexts and actions");
  if (!(spec.s >= 1.0 && spec.s <= static_cast<double>(A)))
    throw std::invalid_argument("sparsity s must lie in [1, |A|]");
  if (spec.policies == 0)
    throw std::invalid_argument("policy class size must be positive");
  const std::uint64_t total_maps = count_maps(X, A, UINT64_MAX);
  if (static_cast<std::uint64_t>(spec.policies) > total_maps)
    throw std::invalid_argument("policy class larger than |A|^|X|");

  std::vector<double> context_probs = random_simplex(X, rng, 0.25);
  const std::size_t support =
      std::max<std::size_t>(1, std::min(spec.outcomes_per_context, A));
  std::vector<std::vector<RewardOutcome>> law(X);
  for (std::size_t x = 0; x < X; ++x) {
    const std::vector<double> probs = random_simplex(support, rng, 0.1);
    // Per-context preference over actions, skewed so that means differ.
    std::vector<double> pref(A);
    for (auto& v : pref) {
      const double u = rng.uniform();
      v = 0.05 + u * u * u;
    }
    switch (spec.style) {
      case RewardStyle::one_hot: {
        const auto labels = weighted_subset(pref, support, rng);
        for (std::size_t k = 0; k < support; ++k) {
          RewardVector r(A, 0.0);
          r[labels[k]] = 1.0;
          law[x].push_back({probs[k], std::move(r)});
        }
        break;
      }
      case RewardStyle::sparse_binary: {
        const auto ones = static_cast<std::size_t>(std::floor(spec.s));
        for (std::size_t k = 0; k < support; ++k) {
          RewardVector r(A, 0.0);
          for (std::size_t j : weighted_subset(pref, ones, rng)) r[j] = 1.0;
          law[x].push_back({probs[k], std::move(r)});
        }
        break;
      }
      case RewardStyle::dense_scaled: {
        for (std::size_t k = 0; k < support; ++k) {
          RewardVector r(A, 1.0);
          if (k > 0)
            for (std::size_t a = 0; a < A; ++a) r[a] = rng.uniform() * pref[a] / 1.05;
          if (spec.mode == SparsityMode::l1) {
            const double n1 = l1_norm(r);
            if (n1 > spec.s) {
              const double scale = spec.s / n1 * (1.0 - 1e-13);
              for (auto& v : r) v *= scale;
            }
          }
          law[x].push_back({probs[k], std::move(r)});
        }
        break;
      }
    }
  }
  if (spec.style == RewardStyle::dense_scaled && spec.mode == SparsityMode::l2) {
    double e2 = 0.0;
    for (std::size_t x = 0; x < X; ++x)
      for (const auto& o : law[x]) e2 += context_probs[x] * o.prob * sq_norm(o.reward);
    if (e2 > spec.s) {
      const double scale = std::sqrt(spec.s / e2) * (1.0 - 1e-13);
      for (auto& ctx : law)
        for (auto& o : ctx)
          for (auto& v : o.reward) v *= scale;
    }
  }

  Environment env(std::move(context_probs), std::move(law),
                  Sparsity{spec.mode, spec.s}, A);
  const CertificateReport cert = check_certificate(env);
  if (!cert.pass)
    throw std::logic_error("generator produced an invalid certificate: " +
                           cert.detail);

  // Per-context argmax map; lowest action wins ties.
  std::vector<ActionId> best(X);
  for (std::size_t x = 0; x < X; ++x) {
    const ContextId cx{static_cast<std::uint32_t>(x)};
    std::uint32_t arg = 0;
    for (std::uint32_t a = 1; a < A; ++a)
      if (env.mean_reward(cx, ActionId{a}) > env.mean_reward(cx, ActionId{arg}))
        arg = a;
    best[x] = ActionId{arg};
  }

  std::vector<std::vector<ActionId>> others;
  const std::size_t need = spec.policies - 1;
  if (total_maps <= 4 * static_cast<std::uint64_t>(spec.policies) &&
      total_maps <= (1u << 22)) {
    std::vector<std::vector<ActionId>> all;
    for (std::uint64_t c = 0; c < total_maps; ++c) {
      auto t = decode_map(c, X, A);
      if (t != best) all.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < need; ++i) {
      const std::size_t j = i + rng.uniform_index(all.size() - i);
      std::swap(all[i], all[j]);
      others.push_back(all[i]);
    }
  } else {
    std::set<std::vector<ActionId>> seen{best};
    while (others.size() < need) {
      std::vector<ActionId> t(X);
      for (auto& a : t) a = ActionId{static_cast<std::uint32_t>(rng.uniform_index(A))};
      if (seen.insert(t).second) others.push_back(std::move(t));
    }
  }
  const std::size_t optimal_index = rng.uniform_index(spec.policies);
  std::vector<Policy> pis;
  pis.reserve(spec.policies);
  for (std::size_t i = 0, k = 0; i < spec.policies; ++i)
    pis.emplace_back(i == optimal_index ? best : others[k++]);
  return SparseInstance{std::move(env), PolicyClass(pis, A), optimal_index};
}

}  // namespace sparsecb
