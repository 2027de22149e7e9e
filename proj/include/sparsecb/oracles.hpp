#pragma once

// Executable forms of the supporting lemmas: exact inequalities evaluated on
// fuzzed inputs and probability statements checked as empirical coverage.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sparsecb/rng.hpp"

namespace sparsecb {

// 2 log(1 + sum a) - sum_i a_i / (1 + sum_{j<i} a_j). Throws unless every
// entry lies in [0, 1].
double harmonic_bound_gap(std::span<const double> a);

// An adapted sequence X_1..X_T in [0, B] together with the conditional means
// E[X_t | F_{t-1}], which must be known in closed form.
class MartingaleGenerator {
 public:
  virtual ~MartingaleGenerator() = default;
  virtual std::string name() const = 0;
  virtual double bound() const = 0;
  virtual void generate(std::size_t T, RngStream& rng, std::vector<double>& x,
                        std::vector<double>& mean) const = 0;
};

// X_t = c for every t.
class ConstantGenerator final : public MartingaleGenerator {
 public:
  ConstantGenerator(double c, double B);
  std::string name() const override { return "constant"; }
  double bound() const override { return B_; }
  void generate(std::size_t T, RngStream& rng, std::vector<double>& x,
                std::vector<double>& mean) const override;

 private:
  double c_;
  double B_;
};

// X_t = B * Bernoulli(p), independent.
class BernoulliGenerator final : public MartingaleGenerator {
 public:
  BernoulliGenerator(double p, double B);
  std::string name() const override { return "bernoulli"; }
  double bound() const override { return B_; }
  void generate(std::size_t T, RngStream& rng, std::vector<double>& x,
                std::vector<double>& mean) const override;

 private:
  double p_;
  double B_;
};

// X_t = B * Bernoulli(p_t) where p_t depends on the past: it starts at 0.02
// and is reset after every round to 0.02 + 0.9 * (fraction of ones so far)^2,
// so early successes push the mean up and long runs of zeros keep it small.
// Sums vary a lot between runs, which stresses the variance-adaptive form.
class AdaptedDriftGenerator final : public MartingaleGenerator {
 public:
  explicit AdaptedDriftGenerator(double B);
  std::string name() const override { return "adapted-drift"; }
  double bound() const override { return B_; }
  void generate(std::size_t T, RngStream& rng, std::vector<double>& x,
                std::vector<double>& mean) const override;

 private:
  double B_;
};

// Generators used by check_all_lemmas.
std::vector<std::unique_ptr<MartingaleGenerator>> shipped_generators();

struct CoverageReport {
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;  // larger of the two tails
  std::uint64_t upper_violations = 0;
  std::uint64_t lower_violations = 0;
  double delta = 0.0;
  bool pass = false;
};

// Allowed violation rate: delta + 3 sqrt(delta / trials).
double coverage_threshold(double delta, std::uint64_t trials);

// Simulates `trials` sequences of length T and counts how often
//   sum X > (1 + 1/a) sum E[X|F] + a B log(1/delta)   (upper tail)
//   sum X < (1 - 1/a) sum E[X|F] - a B log(1/delta)   (lower tail)
// Each tail passes when its rate is within coverage_threshold. Trial k uses
// the stream rng.split(k). Throws if the generator leaves [0, B].
CoverageReport freedman_mult_coverage(const MartingaleGenerator& gen,
                                      std::size_t T, double a, double delta,
                                      std::uint64_t trials,
                                      const RngStream& rng);

struct LemmaCheck {
  std::string name;
  std::uint64_t trials = 0;
  // Worst gap for exact lemmas (sign per lemma), violation rate for
  // coverage checks.
  double worst = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct LemmaSuiteConfig {
  std::uint64_t harmonic_sequences = 1000000;
  std::size_t harmonic_max_length = 500;
  std::uint64_t hedge_runs = 10000;
  std::uint64_t hellinger_triples = 100000;
  std::uint64_t coverage_trials = 10000;
  std::size_t coverage_length = 100;
  double coverage_a = 2.0;
  std::vector<double> deltas{0.01, 0.05, 0.1};
};

std::vector<LemmaCheck> check_exact_lemmas(const LemmaSuiteConfig& cfg,
                                           std::uint64_t seed);
std::vector<LemmaCheck> check_coverage_lemmas(const LemmaSuiteConfig& cfg,
                                              std::uint64_t seed);
// Both of the above, exact lemmas first.
std::vector<LemmaCheck> check_all_lemmas(const LemmaSuiteConfig& cfg,
                                         std::uint64_t seed);

// "name trials=.. worst=.. threshold=.. PASS|FAIL"
std::string format_lemma_check(const LemmaCheck& check);

}  // namespace sparsecb
