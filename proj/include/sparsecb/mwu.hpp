#pragma once

// Hedge (exponential weights) over a finite set of experts, kept in log space.

#include <cstddef>
#include <span>
#include <vector>

#include "sparsecb/rng.hpp"

namespace sparsecb {

class WeightVector {
 public:
  // Uniform start. Throws unless 0 < eta <= 1/reward_bound.
  WeightVector(std::size_t size, double eta, double reward_bound);

  std::size_t size() const { return log_weights_.size(); }
  double eta() const { return eta_; }
  double reward_bound() const { return reward_bound_; }
  std::span<const double> log_weights() const { return log_weights_; }

  // Softmax of the log weights.
  std::vector<double> probabilities() const;

 private:
  friend WeightVector hedge_step_unchecked(WeightVector w,
                                           std::span<const double> u);
  std::vector<double> log_weights_;
  double eta_;
  double reward_bound_;
};

enum class BoundCheck { enforce, skip };

// log w += eta * u, then shift so the largest log weight is zero. With
// BoundCheck::enforce every u(i) must lie in [0, R].
WeightVector hedge_step(const WeightVector& w, std::span<const double> u,
                        BoundCheck check = BoundCheck::enforce);

// Inverse CDF over the induced probabilities. One draw.
std::size_t sample_policy(const WeightVector& w, RngStream& rng);

// Replays Hedge from uniform on u_seq and returns
//   sum_t <u_t, p*> - (1 + eta R) sum_t <u_t, p_t> - log(N) / eta,
// which is never positive when every u_t lies in [0, R]^N and eta <= 1/R.
double hedge_regret_gap(const std::vector<std::vector<double>>& u_seq,
                        double eta, double reward_bound,
                        std::span<const double> p_star);

// Hedge specialised to rewards that are zero outside a few indices per round.
//
// Holds the same log weights as repeated hedge_step calls but updates only
// the touched indices and samples through a Fenwick tree, so a round costs
// O(k log N) for k touched indices instead of O(N).
class SparseHedge {
 public:
  SparseHedge(std::size_t size, double eta, double reward_bound);

  std::size_t size() const { return log_w_.size(); }
  double eta() const { return eta_; }
  double reward_bound() const { return reward_bound_; }

  // Adds eta * value to one log weight. value must lie in [0, R].
  void add(std::size_t index, double value);

  // Inverse CDF with one uniform in [0,1).
  std::size_t sample(double u) const;

  std::vector<double> probabilities() const;
  std::span<const double> log_weights() const { return log_w_; }

 private:
  void rebuild();
  void tree_add(std::size_t index, double delta);

  std::vector<double> log_w_;
  std::vector<double> w_;     // exp(log_w_ - offset_)
  std::vector<double> tree_;  // Fenwick sums of w_, 1-based
  double offset_ = 0.0;
  double eta_;
  double reward_bound_;
};

}  // namespace sparsecb
