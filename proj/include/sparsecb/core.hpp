#pragma once

// Contexts, actions, rewards, policies and finite-support environments.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparsecb/rng.hpp"

namespace sparsecb {

struct ContextId {
  std::uint32_t index = 0;
  auto operator<=>(const ContextId&) const = default;
};

struct ActionId {
  std::uint32_t index = 0;
  auto operator<=>(const ActionId&) const = default;
};

using RewardVector = std::vector<double>;

enum class SparsityMode { l1, l2 };

struct Sparsity {
  SparsityMode mode = SparsityMode::l1;
  double s = 1.0;
};

std::string to_string(SparsityMode mode);
SparsityMode sparsity_mode_from_string(const std::string& name);

struct RewardOutcome {
  double prob = 0.0;
  RewardVector reward;
};

struct CertificateReport {
  bool pass = false;
  double worst_l1 = 0.0;          // max over support of ||r||_1
  double expected_sq_norm = 0.0;  // exact E ||r||_2^2
  std::string detail;
};

// Joint law over contexts and reward vectors with finite support.
//
// Validated at construction: context_probs and every per-context reward law
// sum to one within 1e-12, rewards lie in [0,1], and the sparsity certificate
// holds. A non-zero subset_size marks a semi-bandit environment whose
// policies pick subset_size coordinates out of action_count.
class Environment {
 public:
  Environment(std::vector<double> context_probs,
              std::vector<std::vector<RewardOutcome>> reward_law,
              Sparsity sparsity, std::size_t action_count,
              std::size_t subset_size = 0);

  std::size_t context_count() const { return context_probs_.size(); }
  std::size_t action_count() const { return action_count_; }
  std::size_t subset_size() const { return subset_size_; }
  bool subset_mode() const { return subset_size_ > 0; }
  const Sparsity& sparsity() const { return sparsity_; }

  std::span<const double> context_probs() const { return context_probs_; }
  std::span<const RewardOutcome> reward_law(ContextId x) const {
    return reward_law_[x.index];
  }

  // E[r(a) | x] and E[r(a)^2 | x], cached at construction.
  double mean_reward(ContextId x, ActionId a) const {
    return mean_[x.index * action_count_ + a.index];
  }
  double mean_sq_reward(ContextId x, ActionId a) const {
    return mean_sq_[x.index * action_count_ + a.index];
  }

  ContextId context_at(double u) const;
  const RewardOutcome& outcome_at(ContextId x, double u) const;

 private:
  std::vector<double> context_probs_;
  std::vector<std::vector<RewardOutcome>> reward_law_;
  Sparsity sparsity_;
  std::size_t action_count_;
  std::size_t subset_size_;
  std::vector<double> context_cdf_;
  std::vector<std::vector<double>> outcome_cdf_;
  std::vector<double> mean_;
  std::vector<double> mean_sq_;
};

CertificateReport check_certificate(const Environment& env);

// Environment side of one round. The reward view aliases env storage.
struct Round {
  ContextId context;
  std::span<const double> reward;
};

// Consumes exactly two draws: context, then reward outcome.
Round sample_round(const Environment& env, RngStream& rng);

// Bandit-feedback boundary between an environment and a learner. A learner
// only ever sees the context and the coordinates it asks to observe.
class RoundSource {
 public:
  virtual ~RoundSource() = default;
  virtual ContextId next_context() = 0;
  virtual double observe(ActionId a) = 0;
  virtual std::uint64_t draws() const = 0;
};

class EnvironmentSource final : public RoundSource {
 public:
  EnvironmentSource(const Environment& env, RngStream rng)
      : env_(&env), rng_(rng) {}

  ContextId next_context() override;
  double observe(ActionId a) override;
  std::uint64_t draws() const override { return draws_; }

 private:
  const Environment* env_;
  RngStream rng_;
  Round current_{};
  std::uint64_t draws_ = 0;
};

class Policy {
 public:
  explicit Policy(std::vector<ActionId> action_of);

  ActionId operator()(ContextId x) const { return action_of_[x.index]; }
  std::size_t context_count() const { return action_of_.size(); }
  std::span<const ActionId> table() const { return action_of_; }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::vector<ActionId> action_of_;
};

// Indexed finite policy class stored context-major, so that the actions of
// all policies at one context are contiguous.
class PolicyClass {
 public:
  PolicyClass(const std::vector<Policy>& policies, std::size_t action_count);

  std::size_t size() const { return size_; }
  std::size_t context_count() const { return contexts_; }
  std::size_t action_count() const { return actions_; }

  ActionId action(std::size_t policy, ContextId x) const {
    return table_[x.index * size_ + policy];
  }
  std::span<const ActionId> column(ContextId x) const {
    return {table_.data() + x.index * size_, size_};
  }
  Policy policy(std::size_t index) const;

  // Number of policies equal to an earlier one. Permitted, reported only.
  std::size_t duplicate_count() const { return duplicates_; }

 private:
  std::size_t size_;
  std::size_t contexts_;
  std::size_t actions_;
  std::vector<ActionId> table_;
  std::size_t duplicates_ = 0;
};

// Throws std::invalid_argument unless p is a probability vector within tol.
void validate_distribution(std::span<const double> p, double tol,
                           const char* what);

// Inverse CDF over unnormalized non-negative weights with one uniform u.
std::size_t sample_from_weights(std::span<const double> weights, double u);

double policy_value_exact(const Environment& env, const Policy& pi);
std::vector<double> policy_values_exact(const Environment& env,
                                        const PolicyClass& policies);

double marginal_action_prob(std::span<const double> p,
                            const PolicyClass& policies, ContextId x,
                            ActionId a);
std::vector<double> marginal_action_probs(std::span<const double> p,
                                          const PolicyClass& policies,
                                          ContextId x);

struct BestPolicy {
  double value = 0.0;
  std::size_t index = 0;
};

// Exact maximum over the class; lowest index wins ties.
BestPolicy best_policy_value(const Environment& env,
                             const PolicyClass& policies);

struct LowerBoundInstance {
  Environment env;
  PolicyClass policies;
  ActionId a_star;
};

// Two contexts with masses (eps, 1 - eps); the heavy context pays nothing and
// the light one pays 1 at a single hidden action. The class is all |A|^2 maps,
// indexed as a1 * |A| + a2 where a1 = pi(x1), a2 = pi(x2).
LowerBoundInstance make_lower_bound_env(std::size_t action_count, double eps,
                                        RngStream& rng);

enum class RewardStyle { one_hot, sparse_binary, dense_scaled };

std::string to_string(RewardStyle style);
RewardStyle reward_style_from_string(const std::string& name);

struct SparseEnvSpec {
  std::size_t contexts = 4;
  std::size_t actions = 8;
  double s = 1.0;
  SparsityMode mode = SparsityMode::l1;
  RewardStyle style = RewardStyle::one_hot;
  std::size_t policies = 16;
  std::size_t outcomes_per_context = 4;
};

struct SparseInstance {
  Environment env;
  PolicyClass policies;
  // Position of the per-context argmax map, which is optimal over X -> A.
  std::size_t optimal_index = 0;
};

SparseInstance make_sparse_env(const SparseEnvSpec& spec, RngStream& rng);

// Number of maps X -> A, saturating at cap.
std::uint64_t count_maps(std::size_t contexts, std::size_t actions,
                         std::uint64_t cap);

}  // namespace sparsecb
