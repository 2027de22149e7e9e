#include "minmax.hpp"

#include <cmath>
#include <limits>

namespace sparsecb::detail {

namespace {

constexpr double kCentred = 1e-5;

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Barrier {
 public:
  Barrier(const MinMaxPieces& pieces,
          const std::vector<std::vector<std::size_t>>& blocks,
          const std::vector<LinearInequality>& linear)
      : pieces_(pieces), blocks_(blocks), linear_(linear), n_(pieces.dimension()) {
    for (const auto& b : blocks_) simplex_vars_ += b.size();
  }

  std::size_t constraint_count() const {
    return pieces_.piece_count() + simplex_vars_ + linear_.size();
  }

  // Barrier value at z = (x, t); +inf outside the strict interior.
  double value(const VectorXd& z, double s, VectorXd& F) const {
    const VectorXd x = z.head(n_);
    const double t = z[n_];
    pieces_.evaluate(x, F, nullptr);
    double phi = s * t;
    for (Eigen::Index i = 0; i < F.size(); ++i) {
      const double sl = t - F[i];
      if (!(sl > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= std::log(sl);
    }
    for (const auto& b : blocks_)
      for (std::size_t j : b) {
        if (!(x[j] > 0.0)) return std::numeric_limits<double>::infinity();
        phi -= std::log(x[j]);
      }
    for (const auto& l : linear_) {
      double r = l.rhs;
      for (const auto& [j, c] : l.terms) r -= c * x[j];
      if (!(r > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= std::log(r);
    }
    return phi;
  }

  void derivatives(const VectorXd& z, double s, VectorXd& g, MatrixXd& H) const {
    const VectorXd x = z.head(n_);
    const double t = z[n_];
    VectorXd F;
    MatrixXd G;
    pieces_.evaluate(x, F, &G);
    g.setZero(n_ + 1);
    H.setZero(n_ + 1, n_ + 1);
    g[n_] = s;
    const Eigen::Index N = F.size();
    MatrixXd D(N, n_ + 1);
    D.leftCols(n_) = G;
    D.col(n_).setConstant(-1.0);
    VectorXd inv(N);
    for (Eigen::Index i = 0; i < N; ++i) inv[i] = 1.0 / (t - F[i]);
    g.noalias() += D.transpose() * inv;
    H.noalias() += D.transpose() * inv.cwiseAbs2().asDiagonal() * D;
    for (Eigen::Index i = 0; i < N; ++i)
      pieces_.add_hessian(static_cast<std::size_t>(i), x, inv[i], H);
    for (const auto& b : blocks_)
      for (std::size_t j : b) {
        g[j] -= 1.0 / x[j];
        H(j, j) += 1.0 / (x[j] * x[j]);
      }
    for (const auto& l : linear_) {
      double r = l.rhs;
      for (const auto& [j, c] : l.terms) r -= c * x[j];
      for (const auto& [j, c] : l.terms) g[j] += c / r;
      for (const auto& [j, c] : l.terms)
        for (const auto& [k, d] : l.terms) H(j, k) += c * d / (r * r);
    }
  }

 private:
  const MinMaxPieces& pieces_;
  const std::vector<std::vector<std::size_t>>& blocks_;
  const std::vector<LinearInequality>& linear_;
  std::size_t n_;
  std::size_t simplex_vars_ = 0;
};

}  // namespace

BarrierResult solve_minmax_barrier(const MinMaxPieces& pieces,
                                   const std::vector<std::vector<std::size_t>>& simplex_blocks,
                                   const std::vector<LinearInequality>& linear,
                                   const VectorXd& x0, const BarrierConfig& cfg) {
  const std::size_t n = pieces.dimension();
  const std::size_t E = simplex_blocks.size();
  Barrier barrier(pieces, simplex_blocks, linear);

  VectorXd F;
  pieces.evaluate(x0, F, nullptr);
  VectorXd z(n + 1);
  z.head(n) = x0;
  z[n] = F.maxCoeff() + 1.0;

  MatrixXd K = MatrixXd::Zero(n + 1 + E, n + 1 + E);
  for (std::size_t e = 0; e < E; ++e)
    for (std::size_t j : simplex_blocks[e]) {
      K(n + 1 + e, j) = 1.0;
      K(j, n + 1 + e) = 1.0;
    }

  BarrierResult out;
  const double m = static_cast<double>(barrier.constraint_count());
  double s = 1.0;
  VectorXd g, rhs(n + 1 + E), Fy;
  MatrixXd H;
  bool stalled = false;
  while (true) {
    double phi = barrier.value(z, s, F);
    for (std::size_t it = 0; it < cfg.max_newton; ++it) {
      barrier.derivatives(z, s, g, H);
      // Symmetric diagonal scaling keeps the solve accurate when the
      // Hessian entries span many orders of magnitude.
      VectorXd d(n + 1 + E);
      for (std::size_t j = 0; j < n + 1; ++j)
        d[j] = H(j, j) > 0.0 ? 1.0 / std::sqrt(H(j, j)) : 1.0;
      d.tail(E).setOnes();
      K.topLeftCorner(n + 1, n + 1) = H;
      const MatrixXd Ks = d.asDiagonal() * K * d.asDiagonal();
      rhs.setZero();
      rhs.head(n + 1) = -g;
      const VectorXd sol = Ks.fullPivLu().solve(d.asDiagonal() * rhs);
      const VectorXd dz = (d.asDiagonal() * sol).head(n + 1);
      const double decrement = -g.dot(dz);
      ++out.newton_steps;
      if (!(decrement > 1e-14)) break;
      double alpha = 1.0;
      double next = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 80; ++k, alpha *= 0.5) {
        next = barrier.value(z + alpha * dz, s, Fy);
        if (next <= phi - 0.25 * alpha * decrement) break;
      }
      if (!(next < phi)) {
        // Below the resolution of phi the point is as centred as it gets.
        if (decrement > kCentred) stalled = true;
        break;
      }
      z += alpha * dz;
      phi = next;
      if (decrement < 1e-10) break;
    }
    if (stalled || m / s < cfg.gap) break;
    s *= cfg.growth;
  }

  out.x = z.head(n);
  pieces.evaluate(out.x, F, nullptr);
  out.value = F.maxCoeff();
  out.converged = !stalled || m / s < 1e3 * cfg.gap;
  return out;
}

}  // namespace sparsecb::detail
