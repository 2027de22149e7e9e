#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "sparsecb/mwu.hpp"

using namespace sparsecb;

namespace {

// Direct exponential-weights replay in probability space.
double reference_regret_gap(const std::vector<std::vector<double>>& us,
                            double eta, double R,
                            const std::vector<double>& p_star) {
  const std::size_t n = p_star.size();
  std::vector<double> w(n, 1.0 / n);
  double comp = 0.0, learn = 0.0;
  for (const auto& u : us) {
    for (std::size_t i = 0; i < n; ++i) {
      comp += u[i] * p_star[i];
      learn += u[i] * w[i];
    }
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::exp(eta * u[i]);
      z += w[i];
    }
    for (auto& v : w) v /= z;
  }
  return comp - (1 + eta * R) * learn - std::log(double(n)) / eta;
}

}  // namespace

TEST_CASE("hedge_step examples") {
  const double eta = 0.25;
  WeightVector w(2, eta, 4.0);
  const std::vector<double> u{std::log(2.0) / eta, 0.0};
  const auto p = hedge_step(w, u).probabilities();
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  WeightVector v(5, 0.1, 10.0);
  const std::vector<double> zero(5, 0.0);
  for (int i = 0; i < 1000; ++i) v = hedge_step(v, zero);
  for (double q : v.probabilities()) CHECK(std::abs(q - 0.2) < 1e-12);
}

TEST_CASE("hedge_step rejects rewards outside [0,R] and bad step sizes") {
  WeightVector w(3, 0.5, 2.0);
  CHECK_THROWS_AS(hedge_step(w, std::vector<double>{-0.1, 0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(hedge_step(w, std::vector<double>{2.5, 0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(hedge_step(w, std::vector<double>{0, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(WeightVector(3, 0.6, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(WeightVector(0, 0.1, 2.0), std::invalid_argument);
}

TEST_CASE("normalization and shift invariance") {
  RngStream rng(9, 9);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(30);
    const double R = 0.5 + 8 * rng.uniform();
    WeightVector w(n, 1.0 / R, R);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> u(n);
      for (auto& v : u) v = R * rng.uniform();
      const double c = 20 * (rng.uniform() - 0.5);
      std::vector<double> shifted(u);
      for (auto& v : shifted) v += c;
      const auto a = hedge_step(w, u).probabilities();
      const auto b = hedge_step(w, shifted, BoundCheck::skip).probabilities();
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(a[i] - b[i]) < 1e-12);
        total += a[i];
      }
      CHECK(std::abs(total - 1.0) < 1e-10);
      w = hedge_step(w, u);
    }
  }
}

TEST_CASE("sample_policy frequencies") {
  WeightVector point(3, 0.1, 1.0);
  point = hedge_step(point, std::vector<double>{0.0, 0.0, 1.0});
  for (int k = 0; k < 2000; ++k) point = hedge_step(point, std::vector<double>{0.0, 0.0, 1.0});
  RngStream rng(1, 1);
  // After 2000 steps the mass on index 2 is 1 - O(e^-200).
  for (int i = 0; i < 1000; ++i) CHECK(sample_policy(point, rng) == 2);

  const int n = 100000;
  WeightVector uni(4, 0.1, 1.0);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < n; ++i) ++hits[sample_policy(uni, rng)];
  for (int h : hits) CHECK(std::abs(h / double(n) - 0.25) < 0.01);

  WeightVector skew(2, 1.0, 1.0);
  skew = hedge_step(skew, std::vector<double>{std::log(9.0), 0.0}, BoundCheck::skip);
  CHECK(skew.probabilities()[0] == doctest::Approx(0.9));
  int zero = 0;
  for (int i = 0; i < n; ++i) zero += sample_policy(skew, rng) == 0;
  CHECK(std::abs(zero / double(n) - 0.9) < 0.01);

  RngStream a(5, 5), b(5, 5);
  for (int i = 0; i < 100; ++i) CHECK(sample_policy(uni, a) == sample_policy(uni, b));
}

TEST_CASE("hedge_regret_gap examples") {
  const std::vector<double> uniform4(4, 0.25);
  std::vector<std::vector<double>> zeros(10, std::vector<double>(4, 0.0));
  CHECK(hedge_regret_gap(zeros, 0.5, 2.0, uniform4) ==
        doctest::Approx(-std::log(4.0) / 0.5));

  const double R = 3.0;
  const std::vector<double> p_star{1.0, 0.0};
  const double gap = hedge_regret_gap({{R, 0.0}}, 1.0 / R, R, p_star);
  CHECK(gap == doctest::Approx(-R * std::log(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(hedge_regret_gap({{R, 0.0}}, 1.0, R, p_star),
                  std::invalid_argument);
}

TEST_CASE("hedge_regret_gap is never positive and matches a direct replay") {
  RngStream rng(77, 0);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(32);
    const std::size_t T = 1 + rng.uniform_index(200);
    const double R = 0.1 + 7.9 * rng.uniform();
    const double eta = (0.05 + 0.95 * rng.uniform()) / R;
    std::vector<std::vector<double>> us(T, std::vector<double>(n));
    for (auto& u : us)
      for (auto& v : u) v = rng.uniform() < 0.3 ? 0.0 : R * rng.uniform();
    std::vector<double> p_star(n, 0.0);
    p_star[rng.uniform_index(n)] = 1.0;
    const double gap = hedge_regret_gap(us, eta, R, p_star);
    CHECK(gap <= 1e-9);
    CHECK(gap == doctest::Approx(reference_regret_gap(us, eta, R, p_star))
                     .epsilon(1e-9));
  }
}

TEST_CASE("SparseHedge tracks hedge_step") {
  RngStream rng(12, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(64);
    const double R = 1.0 + 15 * rng.uniform();
    const double eta = 1.0 / R;
    WeightVector dense(n, eta, R);
    SparseHedge sparse(n, eta, R);
    for (int t = 0; t < 3000; ++t) {
      std::vector<double> u(n, 0.0);
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t i = rng.uniform_index(n);
        u[i] = R * rng.uniform();
      }
      dense = hedge_step(dense, u);
      for (std::size_t i = 0; i < n; ++i) sparse.add(i, u[i]);
    }
    const auto a = dense.probabilities();
    const auto b = sparse.probabilities();
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
    // Fenwick sampling agrees with a linear inverse CDF away from boundaries.
    for (int k = 0; k < 200; ++k) {
      const double u = rng.uniform();
      const std::size_t i = sparse.sample(u);
      CHECK(b[i] > 0.0);
      double below = 0.0;
      for (std::size_t j = 0; j < i; ++j) below += b[j];
      CHECK(below <= u + 1e-9);
      CHECK(below + b[i] >= u - 1e-9);
    }
  }
  SparseHedge h(3, 0.5, 2.0);
  CHECK_THROWS_AS(h.add(0, 2.5), std::invalid_argument);
  CHECK_THROWS_AS(h.add(0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(SparseHedge(3, 0.6, 2.0), std::invalid_argument);
}
