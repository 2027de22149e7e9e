#include "sparsecb/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sparsecb/exo.hpp"
#include "sparsecb/format.hpp"
#include "sparsecb/mwu.hpp"

namespace sparsecb {

namespace {

constexpr std::uint64_t kHarmonicStream = 0x51;
constexpr std::uint64_t kHedgeStream = 0x52;
constexpr std::uint64_t kHellingerStream = 0x53;
constexpr std::uint64_t kCoverageStream = 0x54;

void check_bound(double B) {
  if (!(B > 0.0) || !std::isfinite(B))
    throw std::invalid_argument("generator bound B must be positive and finite");
}

// Random length-n distribution; some entries are zeroed.
std::vector<double> fuzz_distribution(std::size_t n, RngStream& rng) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) {
    v = rng.uniform() < 0.25 ? 0.0 : -std::log(1.0 - rng.uniform());
    total += v;
  }
  if (total == 0.0) {
    p[rng.uniform_index(n)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

double fuzz_unit_entry(RngStream& rng) {
  switch (rng.uniform_index(4)) {
    case 0: return 0.0;
    case 1: return 1.0;
    case 2: return rng.uniform() * 1e-3;
    default: return rng.uniform();
  }
}

}  // namespace

double harmonic_bound_gap(std::span<const double> a) {
  double prefix = 0.0;
  double lhs = 0.0;
  for (double v : a) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("harmonic_bound_gap: entries must lie in [0,1]");
    lhs += v / (1.0 + prefix);
    prefix += v;
  }
  return 2.0 * std::log1p(prefix) - lhs;
}

ConstantGenerator::ConstantGenerator(double c, double B) : c_(c), B_(B) {
  check_bound(B);
  if (!(c >= 0.0 && c <= B))
    throw std::invalid_argument("ConstantGenerator: c must lie in [0, B]");
}

void ConstantGenerator::generate(std::size_t T, RngStream&, std::vector<double>& x,
                                 std::vector<double>& mean) const {
  x.assign(T, c_);
  mean.assign(T, c_);
}

BernoulliGenerator::BernoulliGenerator(double p, double B) : p_(p), B_(B) {
  check_bound(B);
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("BernoulliGenerator: p must lie in [0,1]");
}

void BernoulliGenerator::generate(std::size_t T, RngStream& rng,
                                  std::vector<double>& x,
                                  std::vector<double>& mean) const {
  x.resize(T);
  mean.assign(T, p_ * B_);
  for (std::size_t t = 0; t < T; ++t) x[t] = rng.uniform() < p_ ? B_ : 0.0;
}

AdaptedDriftGenerator::AdaptedDriftGenerator(double B) : B_(B) { check_bound(B); }

void AdaptedDriftGenerator::generate(std::size_t T, RngStream& rng,
                                     std::vector<double>& x,
                                     std::vector<double>& mean) const {
  x.resize(T);
  mean.resize(T);
  double ones = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double frac = t == 0 ? 0.0 : ones / static_cast<double>(t);
    const double p = 0.02 + 0.9 * frac * frac;
    mean[t] = p * B_;
    const bool hit = rng.uniform() < p;
    x[t] = hit ? B_ : 0.0;
    ones += hit ? 1.0 : 0.0;
  }
}

std::vector<std::unique_ptr<MartingaleGenerator>> shipped_generators() {
  std::vector<std::unique_ptr<MartingaleGenerator>> out;
  out.push_back(std::make_unique<ConstantGenerator>(0.3, 1.0));
  out.push_back(std::make_unique<BernoulliGenerator>(0.5, 1.0));
  out.push_back(std::make_unique<BernoulliGenerator>(0.05, 4.0));
  out.push_back(std::make_unique<AdaptedDriftGenerator>(1.0));
  return out;
}

double coverage_threshold(double delta, std::uint64_t trials) {
  return delta + 3.0 * std::sqrt(delta / static_cast<double>(trials));
}

CoverageReport freedman_mult_coverage(const MartingaleGenerator& gen,
                                      std::size_t T, double a, double delta,
                                      std::uint64_t trials,
                                      const RngStream& rng) {
  if (!(a >= 1.0)) throw std::invalid_argument("freedman_mult_coverage: a must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("freedman_mult_coverage: delta must lie in (0,1)");
  if (trials == 0) throw std::invalid_argument("freedman_mult_coverage: trials must be positive");
  const double B = gen.bound();
  const double slack = a * B * std::log(1.0 / delta);
  CoverageReport rep;
  rep.trials = trials;
  rep.delta = delta;
  std::vector<double> x, mean;
  for (std::uint64_t k = 0; k < trials; ++k) {
    RngStream r = rng.split(k);
    gen.generate(T, r, x, mean);
    double sx = 0.0, sm = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (!(x[t] >= 0.0 && x[t] <= B))
        throw std::domain_error("freedman_mult_coverage: generator " + gen.name() +
                                " emitted a value outside [0, B]");
      sx += x[t];
      sm += mean[t];
    }
    if (sx > (1.0 + 1.0 / a) * sm + slack) ++rep.upper_violations;
    if (sx < (1.0 - 1.0 / a) * sm - slack) ++rep.lower_violations;
  }
  rep.violations = std::max(rep.upper_violations, rep.lower_violations);
  rep.pass = static_cast<double>(rep.violations) / static_cast<double>(trials) <=
             coverage_threshold(delta, trials);
  return rep;
}

std::vector<LemmaCheck> check_exact_lemmas(const LemmaSuiteConfig& cfg,
                                           std::uint64_t seed) {
  std::vector<LemmaCheck> out;

  {
    LemmaCheck c{"harmonic", cfg.harmonic_sequences, std::numeric_limits<double>::infinity(), -1e-9, false};
    const RngStream base(seed, kHarmonicStream);
    std::vector<double> a;
    for (std::uint64_t k = 0; k < cfg.harmonic_sequences; ++k) {
      RngStream r = base.split(k);
      a.resize(1 + r.uniform_index(cfg.harmonic_max_length));
      for (auto& v : a) v = fuzz_unit_entry(r);
      c.worst = std::min(c.worst, harmonic_bound_gap(a));
    }
    c.pass = c.worst >= c.threshold;
    out.push_back(c);
  }

  {
    LemmaCheck c{"hedge-regret", cfg.hedge_runs, -std::numeric_limits<double>::infinity(), 1e-9, false};
    const RngStream base(seed, kHedgeStream);
    for (std::uint64_t k = 0; k < cfg.hedge_runs; ++k) {
      RngStream r = base.split(k);
      const std::size_t N = 1 + r.uniform_index(16);
      const std::size_t T = 1 + r.uniform_index(200);
      const double R = 0.1 + 20.0 * r.uniform();
      const double eta = (1.0 - r.uniform()) / R;
      std::vector<std::vector<double>> u(T, std::vector<double>(N));
      std::vector<double> totals(N, 0.0);
      for (auto& row : u)
        for (std::size_t i = 0; i < N; ++i) {
          row[i] = r.uniform() < 0.5 ? 0.0 : R * fuzz_unit_entry(r);
          totals[i] += row[i];
        }
      // The point mass on the best expert in hindsight is the hardest p*.
      std::vector<double> p_star(N, 0.0);
      p_star[static_cast<std::size_t>(std::max_element(totals.begin(), totals.end()) -
                                      totals.begin())] = 1.0;
      c.worst = std::max(c.worst, hedge_regret_gap(u, eta, R, p_star));
    }
    c.pass = c.worst <= c.threshold;
    out.push_back(c);
  }

  {
    LemmaCheck c{"hellinger-variance", cfg.hellinger_triples, std::numeric_limits<double>::infinity(), -1e-9, false};
    const RngStream base(seed, kHellingerStream);
    for (std::uint64_t k = 0; k < cfg.hellinger_triples; ++k) {
      RngStream r = base.split(k);
      const std::size_t n = 1 + r.uniform_index(8);
      const auto P = fuzz_distribution(n, r);
      auto Q = fuzz_distribution(n, r);
      if (r.uniform() < 0.3) {
        // Nearby pairs probe the small-distance regime.
        const double t = r.uniform() * 1e-2;
        for (std::size_t i = 0; i < n; ++i) Q[i] = (1.0 - t) * P[i] + t * Q[i];
      }
      std::vector<double> f(n);
      for (auto& v : f) v = r.uniform() < 0.3 ? (r.uniform() < 0.5 ? -1.0 : 1.0)
                                              : 2.0 * r.uniform() - 1.0;
      c.worst = std::min(c.worst, hellinger_variance_gap(P, Q, f));
    }
    c.pass = c.worst >= c.threshold;
    out.push_back(c);
  }
  return out;
}

std::vector<LemmaCheck> check_coverage_lemmas(const LemmaSuiteConfig& cfg,
                                              std::uint64_t seed) {
  std::vector<LemmaCheck> out;
  const RngStream base(seed, kCoverageStream);
  const auto gens = shipped_generators();
  for (std::size_t g = 0; g < gens.size(); ++g)
    for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
      const double delta = cfg.deltas[d];
      const auto rep = freedman_mult_coverage(*gens[g], cfg.coverage_length,
                                              cfg.coverage_a, delta,
                                              cfg.coverage_trials,
                                              base.split(g * 1000 + d));
      std::ostringstream name;
      name << "freedman-mult/" << gens[g]->name() << "(B=" << format_double(gens[g]->bound())
           << ")/delta=" << format_double(delta);
      out.push_back({name.str(), rep.trials,
                     static_cast<double>(rep.violations) / static_cast<double>(rep.trials),
                     coverage_threshold(delta, rep.trials), rep.pass});
    }
  return out;
}

std::vector<LemmaCheck> check_all_lemmas(const LemmaSuiteConfig& cfg,
                                         std::uint64_t seed) {
  auto out = check_exact_lemmas(cfg, seed);
  auto cov = check_coverage_lemmas(cfg, seed);
  out.insert(out.end(), cov.begin(), cov.end());
  return out;
}

std::string format_lemma_check(const LemmaCheck& c) {
  std::ostringstream os;
  os << c.name << " trials=" << c.trials << " worst=" << format_double(c.worst)
     << " threshold=" << format_double(c.threshold) << ' ' << (c.pass ? "PASS" : "FAIL");
  return os.str();
}

}  // namespace sparsecb
