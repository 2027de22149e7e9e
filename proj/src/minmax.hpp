#pragma once

// Log-barrier interior-point solver for
//   min_x max_i F_i(x)
// with smooth convex pieces, simplex blocks and linear inequalities, in the
// epigraph form min t s.t. F_i(x) <= t. Internal to the library.

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sparsecb::detail {

struct LinearInequality {
  // sum coef * x[index] <= rhs
  std::vector<std::pair<std::size_t, double>> terms;
  double rhs = 0.0;
};

class MinMaxPieces {
 public:
  virtual ~MinMaxPieces() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t piece_count() const = 0;
  // Values of every piece; gradients as rows of G when G is non-null.
  virtual void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& values,
                        Eigen::MatrixXd* G) const = 0;
  // H += weight * Hessian of piece i at x. H may be larger than the
  // dimension; only the leading block is touched.
  virtual void add_hessian(std::size_t i, const Eigen::VectorXd& x,
                           double weight, Eigen::MatrixXd& H) const = 0;
};

struct BarrierConfig {
  double gap = 1e-9;        // stop when constraints / s drops below this
  double growth = 10.0;     // s multiplier per outer round
  std::size_t max_newton = 60;  // per outer round
};

struct BarrierResult {
  Eigen::VectorXd x;
  double value = 0.0;  // max_i F_i(x)
  std::size_t newton_steps = 0;
  bool converged = false;
};

// x0 must be strictly feasible: positive on every simplex block, each block
// summing to one, and every linear inequality strict.
BarrierResult solve_minmax_barrier(const MinMaxPieces& pieces,
                                   const std::vector<std::vector<std::size_t>>& simplex_blocks,
                                   const std::vector<LinearInequality>& linear,
                                   const Eigen::VectorXd& x0,
                                   const BarrierConfig& cfg = {});

}  // namespace sparsecb::detail
