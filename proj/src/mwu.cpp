#include "sparsecb/mwu.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sparsecb/core.hpp"

namespace sparsecb {

WeightVector::WeightVector(std::size_t size, double eta, double reward_bound)
    : log_weights_(size, 0.0), eta_(eta), reward_bound_(reward_bound) {
  if (size == 0) throw std::invalid_argument("weight vector must be non-empty");
  if (!(reward_bound > 0.0) || !std::isfinite(reward_bound))
    throw std::invalid_argument("reward bound must be positive");
  if (!(eta > 0.0) || eta * reward_bound > 1.0 + 1e-12) {
    std::ostringstream msg;
    msg << "hedge step size " << eta << " violates eta <= 1/R with R = "
        << reward_bound;
    throw std::invalid_argument(msg.str());
  }
}

std::vector<double> WeightVector::probabilities() const {
  const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
  std::vector<double> p(log_weights_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_weights_[i] - top);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

WeightVector hedge_step_unchecked(WeightVector w, std::span<const double> u) {
  double top = -INFINITY;
  for (std::size_t i = 0; i < u.size(); ++i) {
    w.log_weights_[i] += w.eta_ * u[i];
    top = std::max(top, w.log_weights_[i]);
  }
  for (auto& v : w.log_weights_) v -= top;
  return w;
}

WeightVector hedge_step(const WeightVector& w, std::span<const double> u,
                        BoundCheck check) {
  if (u.size() != w.size())
    throw std::invalid_argument("reward vector size differs from weights");
  if (check == BoundCheck::enforce) {
    const double R = w.reward_bound();
    for (double v : u)
      if (!(v >= 0.0 && v <= R * (1.0 + 1e-12))) {
        std::ostringstream msg;
        msg << "hedge reward " << v << " outside [0, " << R << "]";
        throw std::invalid_argument(msg.str());
      }
  }
  return hedge_step_unchecked(w, u);
}

std::size_t sample_policy(const WeightVector& w, RngStream& rng) {
  const auto p = w.probabilities();
  return sample_from_weights(p, rng.uniform());
}

double hedge_regret_gap(const std::vector<std::vector<double>>& u_seq,
                        double eta, double reward_bound,
                        std::span<const double> p_star) {
  WeightVector w(p_star.size(), eta, reward_bound);
  double comparator = 0.0, learner = 0.0;
  for (const auto& u : u_seq) {
    const auto p = w.probabilities();
    for (std::size_t i = 0; i < u.size(); ++i) {
      comparator += u[i] * p_star[i];
      learner += u[i] * p[i];
    }
    w = hedge_step(w, u);
  }
  return comparator - (1.0 + eta * reward_bound) * learner -
         std::log(static_cast<double>(p_star.size())) / eta;
}

}  // namespace sparsecb

namespace sparsecb {

namespace {
// Weights are stored relative to offset_; refresh before exp overflows.
constexpr double kRebuildSpan = 300.0;
}  // namespace

SparseHedge::SparseHedge(std::size_t size, double eta, double reward_bound)
    : log_w_(size, 0.0), eta_(eta), reward_bound_(reward_bound) {
  // Reuse the constructor checks of the dense learner.
  WeightVector check(size, eta, reward_bound);
  rebuild();
}

void SparseHedge::rebuild() {
  offset_ = *std::max_element(log_w_.begin(), log_w_.end());
  const std::size_t n = log_w_.size();
  w_.resize(n);
  tree_.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    w_[i] = std::exp(log_w_[i] - offset_);
    tree_[i + 1] += w_[i];
    const std::size_t parent = (i + 1) + ((i + 1) & (~(i + 1) + 1));
    if (parent <= n) tree_[parent] += tree_[i + 1];
  }
}

void SparseHedge::tree_add(std::size_t index, double delta) {
  for (std::size_t k = index + 1; k < tree_.size(); k += k & (~k + 1))
    tree_[k] += delta;
}

void SparseHedge::add(std::size_t index, double value) {
  if (!(value >= 0.0 && value <= reward_bound_ * (1.0 + 1e-12))) {
    std::ostringstream msg;
    msg << "hedge reward " << value << " outside [0, " << reward_bound_ << "]";
    throw std::invalid_argument(msg.str());
  }
  if (value == 0.0) return;
  log_w_[index] += eta_ * value;
  if (log_w_[index] - offset_ > kRebuildSpan) {
    rebuild();
    return;
  }
  const double fresh = std::exp(log_w_[index] - offset_);
  tree_add(index, fresh - w_[index]);
  w_[index] = fresh;
}

std::size_t SparseHedge::sample(double u) const {
  const std::size_t n = w_.size();
  double total = 0.0;
  for (std::size_t k = n; k > 0; k -= k & (~k + 1)) total += tree_[k];
  double target = u * total;
  std::size_t pos = 0;
  std::size_t step = 1;
  while (step * 2 <= n) step *= 2;
  for (; step > 0; step /= 2) {
    const std::size_t next = pos + step;
    if (next <= n && tree_[next] <= target) {
      pos = next;
      target -= tree_[next];
    }
  }
  // pos is the count of leading entries whose mass does not exceed target.
  if (pos < n && w_[pos] > 0.0) return pos;
  for (std::size_t i = std::min(pos, n - 1) + 1; i-- > 0;)
    if (w_[i] > 0.0) return i;
  return 0;
}

std::vector<double> SparseHedge::probabilities() const {
  const double top = *std::max_element(log_w_.begin(), log_w_.end());
  std::vector<double> p(log_w_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_w_[i] - top);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace sparsecb
