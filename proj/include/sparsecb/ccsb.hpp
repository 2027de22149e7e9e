#pragma once

// Low-variance exploration for contextual combinatorial semi-bandits: each
// action is an m-subset of K base arms and the reward of every chosen arm is
// revealed.

#include <cstdint>
#include <vector>

#include "sparsecb/core.hpp"
#include "sparsecb/io.hpp"
#include "sparsecb/lve.hpp"
#include "sparsecb/rng.hpp"

namespace sparsecb {

class SubsetAction {
 public:
  // Sorts members; throws unless they are m distinct indices below K.
  SubsetAction(std::vector<std::uint32_t> members, std::size_t K);

  std::span<const std::uint32_t> members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool contains(std::uint32_t j) const;

  friend bool operator==(const SubsetAction&, const SubsetAction&) = default;

 private:
  std::vector<std::uint32_t> members_;
};

// Partial Fisher-Yates: exactly m draws.
SubsetAction uniform_msubset(std::size_t K, std::size_t m, RngStream& rng);

// Policies mapping each context to an m-subset of [K], context-major.
class SubsetPolicyClass {
 public:
  // policies[i][x] is policy i's subset at context x.
  SubsetPolicyClass(const std::vector<std::vector<SubsetAction>>& policies,
                    std::size_t K, std::size_t m);

  // Singleton subsets of a plain class; m = 1.
  static SubsetPolicyClass from_policy_class(const PolicyClass& policies);

  std::size_t size() const { return size_; }
  std::size_t context_count() const { return contexts_; }
  std::size_t K() const { return K_; }
  std::size_t m() const { return m_; }
  std::span<const std::uint32_t> members(std::size_t policy, ContextId x) const {
    return {table_.data() + (x.index * size_ + policy) * m_, m_};
  }
  std::size_t duplicate_count() const { return duplicates_; }

 private:
  std::size_t size_;
  std::size_t contexts_;
  std::size_t K_;
  std::size_t m_;
  std::vector<std::uint32_t> table_;
  std::size_t duplicates_ = 0;
};

// E[sum_{j in pi(x)} r(j)] for every policy.
std::vector<double> subset_policy_values_exact(const Environment& env,
                                               const SubsetPolicyClass& policies);

struct CcsbConfig {
  std::uint64_t T = 1;
  std::uint64_t n = 1;
  double eta = 0.25;
  double gamma = 0.5;
  double T_multiplier = 8.0;
  double n_multiplier = 16.0;
  std::size_t K = 1;
  std::size_t m = 1;
  double s = 1.0;

  // K min(s,m) / (gamma m); the largest Phase I reward.
  double reward_bound() const;
};

// T = ceil(Tm (K min(s,m)/(m eps)) log(|Pi|/delta) log(1/eps)),
// n = ceil(nm (K min(s,m)/(m eps) + s min(s,m)/eps^2) log(|Pi|/delta) log(1/eps)),
// eta = gamma m / (K min(s,m)), gamma = 1/2.
CcsbConfig derive_ccsb_config(std::size_t K, std::size_t m,
                              std::size_t policy_count, double s, double eps,
                              double delta, const LveOverrides& overrides = {},
                              std::vector<std::string>* diagnostics = nullptr);

struct SubsetRoundLog {
  std::uint64_t t = 0;
  ContextId context;
  std::vector<std::uint32_t> arms;
  std::vector<double> rewards;  // r(j) for j in arms, same order
  std::uint32_t policy = 0;
};

// Phase I. `actions` supplies m draws per round and `sampler` one.
ExplorationDistribution phase1_ccsb(RoundSource& source,
                                    const SubsetPolicyClass& policies,
                                    const CcsbConfig& cfg, RngStream& actions,
                                    RngStream& sampler,
                                    std::vector<SubsetRoundLog>* trace = nullptr);
ExplorationDistribution phase1_ccsb(const Environment& env,
                                    const SubsetPolicyClass& policies,
                                    const CcsbConfig& cfg, const RngStream& rng,
                                    std::vector<SubsetRoundLog>* trace = nullptr);

// Coverage counts for an arbitrary selection.
ExplorationDistribution ccsb_exploration_from_selection(
    std::vector<std::uint32_t> selected, const SubsetPolicyClass& policies);

// E[sum_j r(j) 1{j in pi(x)} / (gamma m/K + (1-gamma) Q(x,j))].
std::vector<double> estimator_variances_ccsb_exact(
    const Environment& env, const SubsetPolicyClass& policies,
    const ExplorationDistribution& ed, double gamma);
double estimator_variance_ccsb_exact(const Environment& env,
                                     const SubsetPolicyClass& policies,
                                     const ExplorationDistribution& ed,
                                     double gamma, std::size_t policy);

// Phase II. Each round takes one coin draw from `mix`, then either m draws
// for a uniform subset or one draw indexing the Phase I sample.
Phase2Result phase2_ccsb(RoundSource& source, const SubsetPolicyClass& policies,
                         const ExplorationDistribution& ed,
                         const CcsbConfig& cfg, RngStream& mix);
Phase2Result phase2_ccsb(const Environment& env,
                         const SubsetPolicyClass& policies,
                         const ExplorationDistribution& ed,
                         const CcsbConfig& cfg, const RngStream& rng);

RunReport run_ccsb(const Environment& env, const SubsetPolicyClass& policies,
                   double eps, double delta, const LveOverrides& overrides,
                   const RngStream& rng);

// C(K, m)^contexts, saturating at cap.
std::uint64_t count_subset_maps(std::size_t contexts, std::size_t K,
                                std::size_t m, std::uint64_t cap);

struct ListInstance {
  Environment env;
  SubsetPolicyClass policies;
  // Position of the per-context top-m map, optimal over all subset maps.
  std::size_t optimal_index = 0;
};

// Semi-bandit environment with K arms, one-hot or s-sparse binary rewards
// and a random class of m-subset maps containing the optimal one.
ListInstance make_list_env(std::size_t contexts, std::size_t K, std::size_t m,
                           double s, RewardStyle style, std::size_t policy_count,
                           RngStream& rng);

}  // namespace sparsecb
