#pragma once

// Two-phase low-variance exploration for contextual bandits.
//
// Phase I runs Hedge over the policy class with rewards that favour policies
// whose actions are rarely chosen by earlier samples, producing an
// exploration distribution p-hat. Phase II mixes p-hat with uniform play,
// collects importance-weighted estimates for every policy and returns the
// empirical best.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparsecb/core.hpp"
#include "sparsecb/io.hpp"
#include "sparsecb/rng.hpp"

namespace sparsecb {

struct LveConfig {
  std::uint64_t T = 1;
  std::uint64_t n = 1;
  double eta = 0.25;
  double gamma = 0.5;
  double T_multiplier = 8.0;
  double n_multiplier = 16.0;
};

// Any field left empty is derived. budget_scale multiplies both multipliers.
struct LveOverrides {
  std::optional<std::uint64_t> T;
  std::optional<std::uint64_t> n;
  std::optional<double> eta;
  std::optional<double> gamma;
  std::optional<double> T_multiplier;
  std::optional<double> n_multiplier;
  std::optional<double> budget_scale;
};

inline constexpr double kMinGamma = 1e-6;

// Validates gamma in (0, 1/2]; values below kMinGamma are raised to it and a
// warning is appended to diagnostics and printed to stderr.
double checked_gamma(double gamma, std::vector<std::string>* diagnostics);

// T = ceil(Tm (|A|/eps) log(|Pi|/delta) log(1/eps)),
// n = ceil(nm (|A|/eps + s/eps^2) log(|Pi|/delta) log(1/eps)),
// eta = gamma/|A|, gamma = 1/2.
LveConfig derive_lve_config(std::size_t action_count, std::size_t policy_count,
                            double s, double eps, double delta,
                            const LveOverrides& overrides = {},
                            std::vector<std::string>* diagnostics = nullptr);

// The T policies sampled in Phase I and their per-context coverage counts.
// counts(x, j) is the number of sampled policies whose choice at x is (or, in
// the semi-bandit case, contains) j.
class ExplorationDistribution {
 public:
  ExplorationDistribution(std::vector<std::uint32_t> selected,
                          std::size_t policy_count, std::size_t contexts,
                          std::size_t width, std::vector<double> counts);

  // Counts derived from a plain policy class.
  static ExplorationDistribution from_selection(
      std::vector<std::uint32_t> selected, const PolicyClass& policies);

  std::uint64_t T() const { return selected_.size(); }
  std::span<const std::uint32_t> selected() const { return selected_; }
  // p-hat(pi) = #{t : pi_t = pi} / T.
  const std::vector<double>& probabilities() const { return p_hat_; }
  double count(ContextId x, std::size_t j) const {
    return counts_[x.index * width_ + j];
  }
  // Q-tilde_{p-hat, x}(j) = count / T.
  double marginal(ContextId x, std::size_t j) const {
    return count(x, j) / static_cast<double>(selected_.size());
  }
  std::size_t width() const { return width_; }
  std::size_t context_count() const { return contexts_; }

 private:
  std::vector<std::uint32_t> selected_;
  std::vector<double> p_hat_;
  std::size_t contexts_;
  std::size_t width_;
  std::vector<double> counts_;
};

// Only r_t(a_t) is recorded.
struct RoundLog {
  std::uint64_t t = 0;
  ContextId context;
  ActionId action;
  double reward = 0.0;
  std::uint32_t policy = 0;
};

// Per-(context, action) lists of policy indices, ascending.
class PolicyColumns {
 public:
  explicit PolicyColumns(const PolicyClass& policies);
  std::span<const std::uint32_t> members(ContextId x, ActionId a) const {
    const std::size_t cell = x.index * actions_ + a.index;
    return {index_.data() + start_[cell], start_[cell + 1] - start_[cell]};
  }

 private:
  std::size_t actions_;
  std::vector<std::size_t> start_;
  std::vector<std::uint32_t> index_;
};

// Phase I. The source supplies contexts and reveals r(a) for the played a;
// actions consume one draw each from `actions`, policy samples one draw each
// from `sampler`.
ExplorationDistribution phase1(RoundSource& source, const PolicyClass& policies,
                               const LveConfig& cfg, RngStream& actions,
                               RngStream& sampler,
                               std::vector<RoundLog>* trace = nullptr);

// Phase I on env with the three sub-streams split from rng.
ExplorationDistribution phase1(const Environment& env,
                               const PolicyClass& policies,
                               const LveConfig& cfg, const RngStream& rng,
                               std::vector<RoundLog>* trace = nullptr);

// E_{(x,r)}[ sum_a r(a)^2 1{pi(x)=a} / (gamma/|A| + (1-gamma) Q(x,a)) ].
double estimator_variance_exact(const Environment& env,
                                const ExplorationDistribution& ed,
                                double gamma, const Policy& pi);
std::vector<double> estimator_variances_exact(const Environment& env,
                                              const PolicyClass& policies,
                                              const ExplorationDistribution& ed,
                                              double gamma);

struct Phase2Result {
  std::size_t chosen = 0;
  std::vector<double> estimates;  // sum_i R_i(pi) / n
};

// Phase II. Each round takes two draws from `mix`: the exploration coin,
// then either the uniform action or the index into the Phase I sample.
Phase2Result phase2(RoundSource& source, const PolicyClass& policies,
                    const ExplorationDistribution& ed, const LveConfig& cfg,
                    RngStream& mix);
Phase2Result phase2(const Environment& env, const PolicyClass& policies,
                    const ExplorationDistribution& ed, const LveConfig& cfg,
                    const RngStream& rng);

// Lowest index attaining the maximum.
std::size_t argmax_lowest(std::span<const double> v);

RunReport run_lve(const Environment& env, const PolicyClass& policies,
                  double eps, double delta, const LveOverrides& overrides,
                  const RngStream& rng);

}  // namespace sparsecb
