#pragma once

// Exploration by optimization over a finite model class, the decision
// estimation coefficient, and the supporting divergence helpers.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsecb/core.hpp"
#include "sparsecb/rng.hpp"

namespace sparsecb {

// Squared Hellinger distance 0.5 sum (sqrt P - sqrt Q)^2.
double hellinger_sq(std::span<const double> P, std::span<const double> Q);

// RHS - LHS of |E_P f - E_Q f| <= 4 sqrt(E_Q f^2 D) + 4 D with D the squared
// Hellinger distance. Throws if some |f| > 1.
double hellinger_variance_gap(std::span<const double> P,
                              std::span<const double> Q,
                              std::span<const double> f);

// Observation law per action over a finite set O, with reward R: O -> [0,1].
class Model {
 public:
  Model(std::size_t actions, std::size_t observations,
        std::vector<double> obs_dist, std::vector<double> reward);

  std::size_t action_count() const { return A_; }
  std::size_t observation_count() const { return O_; }
  std::span<const double> row(std::size_t a) const {
    return {obs_.data() + a * O_, O_};
  }
  double prob(std::size_t a, std::size_t o) const { return obs_[a * O_ + o]; }
  std::span<const double> reward() const { return reward_; }

  // f(a) = E_{o ~ M(a)} R(o) and lambda(a) = E_{o ~ M(a)} R(o)^2.
  double value(std::size_t a) const { return value_[a]; }
  double second_moment(std::size_t a) const { return second_[a]; }
  double total_second_moment() const;
  // Lowest-index maximizer of f.
  std::size_t best_action() const;

  // Convex combination (1 - t) this + t other.
  Model mix(const Model& other, double t) const;

 private:
  std::size_t A_;
  std::size_t O_;
  std::vector<double> obs_;
  std::vector<double> reward_;
  std::vector<double> value_;
  std::vector<double> second_;
};

// Finite list of models sharing (A, O, R), each with sum_a lambda(a) <= s.
class ModelClass {
 public:
  ModelClass(std::vector<Model> models, double s);

  std::size_t size() const { return models_.size(); }
  const Model& operator[](std::size_t i) const { return models_[i]; }
  const std::vector<Model>& models() const { return models_; }
  double s() const { return s_; }
  std::size_t action_count() const { return models_.front().action_count(); }
  std::size_t observation_count() const { return models_.front().observation_count(); }

 private:
  std::vector<Model> models_;
  double s_;
};

nlohmann::json model_class_to_json(const ModelClass& mc);
ModelClass model_class_from_json(const nlohmann::json& doc);

// Binary observations with R(o) = o and Bernoulli means on a grid of step
// 1/resolution whose sum is at most s.
ModelClass make_bernoulli_grid(std::size_t actions, std::size_t resolution,
                               double s);

// Random sparse class: R(0) = 0, other rewards uniform; rows are shrunk
// toward observation 0 until the sparsity constraint holds.
ModelClass make_random_model_class(std::size_t actions,
                                   std::size_t observations, double s,
                                   std::size_t count, RngStream& rng);

inline constexpr double kXiCap = 20.0;
inline constexpr double kExponentClamp = 40.0;

// xi(a'; a, o), stored with a' fastest.
class XiTable {
 public:
  XiTable(std::size_t actions, std::size_t observations, double cap = kXiCap);

  double operator()(std::size_t a_prime, std::size_t a, std::size_t o) const {
    return values_[(a * O_ + o) * A_ + a_prime];
  }
  // Stores v clamped to [-cap, cap]; returns true if clamping was needed.
  bool set(std::size_t a_prime, std::size_t a, std::size_t o, double v);
  std::size_t action_count() const { return A_; }
  std::size_t observation_count() const { return O_; }
  double cap() const { return cap_; }
  std::span<const double> values() const { return values_; }

 private:
  std::size_t A_;
  std::size_t O_;
  double cap_;
  std::vector<double> values_;
};

// E_{a~p}[f(a*) - f(a)] - gamma E_{a~q} E_{o~M(a)} E_{a'~w}[1 - exp(xi(a';a,o) - xi(a*;a,o))].
// Exponent arguments are clamped to [-40, 40]; clamps are added to *clamped.
double gamma_objective(std::span<const double> w, double gamma,
                       std::span<const double> p, std::span<const double> q,
                       const XiTable& xi, const Model& M, std::size_t a_star,
                       std::size_t* clamped = nullptr);

// sup over the class and a* of gamma_objective.
double gamma_objective_sup(std::span<const double> w, double gamma,
                           std::span<const double> p, std::span<const double> q,
                           const XiTable& xi, const ModelClass& mc);

// The convex form used by the solver, with xi = zeta / (gamma q). zeta is
// laid out like XiTable. Entries with q(a) = 0 contribute nothing.
double reparam_objective(std::span<const double> w, double gamma,
                         std::span<const double> p, std::span<const double> q,
                         std::span<const double> zeta, const Model& M,
                         std::size_t a_star);

struct SolverConfig {
  std::size_t iterations = 2000;
  double step = 0.5;
  // Follow the subgradient phase with an interior-point polish of the
  // epigraph form.
  bool polish = true;
  // Converged when the best value moved by at most this much over the last
  // quarter of the iterations.
  double tolerance = 1e-6;
};

struct ExoSolution {
  std::vector<double> p;
  std::vector<double> q;
  XiTable xi;
  double objective = 0.0;
  std::size_t iterations = 0;
  double final_step_norm = 0.0;
  bool converged = false;
  std::size_t clamped = 0;
};

// Euclidean projection onto the probability simplex (sorting method).
std::vector<double> project_simplex(std::span<const double> v);

// Projected subgradient on (p, q, zeta) from the analytic start: p on the
// best action of the first model, q uniform, xi = 0. Returns the best iterate.
ExoSolution solve_exo(std::span<const double> w, double gamma,
                      const ModelClass& mc, const SolverConfig& cfg = {});

// Contexts with a true model each. Its Environment view has one reward vector
// per joint draw of observations across actions, under an l2 certificate.
class ModelEnvironment {
 public:
  ModelEnvironment(std::vector<double> context_probs,
                   std::vector<Model> models, double s);

  std::size_t context_count() const { return context_probs_.size(); }
  std::size_t action_count() const { return models_.front().action_count(); }
  std::span<const double> context_probs() const { return context_probs_; }
  const Model& model(ContextId x) const { return models_[x.index]; }
  double s() const { return s_; }
  Environment to_environment() const;

 private:
  std::vector<double> context_probs_;
  std::vector<Model> models_;
  double s_;
};

struct ExoRound {
  ContextId context;
  ActionId action;
  std::size_t observation = 0;
  double objective = 0.0;
};

struct ExoRunResult {
  // Output policy: row x is the action distribution at context x.
  std::vector<std::vector<double>> output;
  double output_value = 0.0;
  double best_value = 0.0;
  double suboptimality = 0.0;
  std::vector<ExoRound> trace;
  std::size_t unconverged_solves = 0;
  std::size_t clamped = 0;
  // max over t of |sum_pi W^(t)(pi) - 1|.
  double normalization_error = 0.0;
};

// Runs T rounds of exploration by optimization with exponential weights over
// the policy class, then forms the averaged output policy by re-solving at
// every cached weight snapshot for every context. Per round the env stream
// gives one context draw and one observation draw; the action stream one.
ExoRunResult run_exo(const ModelEnvironment& env, const PolicyClass& policies,
                     double gamma, std::uint64_t T, const ModelClass& mc,
                     const RngStream& rng, const SolverConfig& cfg = {});

// q(a) = (1/|A|)(1 - C/2s) + lambda(a)/2s with C = sum lambda. Throws if C > s.
std::vector<double> sparsity_weighted_q(const Model& Mbar, double s);

struct PdecEstimate {
  double value = 0.0;        // min of the two below
  double solver = 0.0;       // best solver iterate
  double certificate = 0.0;  // point mass on Mbar's best action, weighted q
  std::vector<double> p;
  std::vector<double> q;
  bool converged = false;
};

// sup over the class of E_p[f(a_M) - f(a)] - gamma E_q D^2(M(a), Mbar(a)).
double pdec_objective(const ModelClass& mc, const Model& Mbar, double gamma,
                      std::span<const double> p, std::span<const double> q);

PdecEstimate pdec_estimate(const ModelClass& mc, const Model& Mbar,
                           double gamma, const SolverConfig& cfg = {});

}  // namespace sparsecb
