#include "sparsecb/exo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "minmax.hpp"

namespace sparsecb {

namespace {

constexpr double kRowTol = 1e-12;
constexpr double kInputTol = 1e-10;

void check_probability(std::span<const double> v, const char* what) {
  validate_distribution(v, kInputTol, what);
}

double clamp_exponent(double z, std::size_t* clamped) {
  if (z > kExponentClamp) {
    if (clamped) ++*clamped;
    return kExponentClamp;
  }
  if (z < -kExponentClamp) {
    if (clamped) ++*clamped;
    return -kExponentClamp;
  }
  return z;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double hellinger_sq(std::span<const double> P, std::span<const double> Q) {
  if (P.size() != Q.size())
    throw std::invalid_argument("hellinger_sq: mismatched lengths");
  check_probability(P, "hellinger_sq P");
  check_probability(Q, "hellinger_sq Q");
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = std::sqrt(P[i]) - std::sqrt(Q[i]);
    s += d * d;
  }
  return std::min(1.0, 0.5 * s);
}

double hellinger_variance_gap(std::span<const double> P,
                              std::span<const double> Q,
                              std::span<const double> f) {
  if (f.size() != P.size())
    throw std::invalid_argument("hellinger_variance_gap: f has the wrong length");
  for (double v : f)
    if (!(std::abs(v) <= 1.0))
      throw std::invalid_argument("hellinger_variance_gap: |f| > 1");
  const double D = hellinger_sq(P, Q);
  double diff = 0.0;
  double q_sq = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    diff += (P[i] - Q[i]) * f[i];
    q_sq += Q[i] * f[i] * f[i];
  }
  return 4.0 * std::sqrt(q_sq * D) + 4.0 * D - std::abs(diff);
}

// ---------------------------------------------------------------- Model

Model::Model(std::size_t actions, std::size_t observations,
             std::vector<double> obs_dist, std::vector<double> reward)
    : A_(actions),
      O_(observations),
      obs_(std::move(obs_dist)),
      reward_(std::move(reward)) {
  if (A_ == 0 || O_ == 0)
    throw std::invalid_argument("Model: empty action or observation set");
  if (obs_.size() != A_ * O_)
    throw std::invalid_argument("Model: obs_dist must have |A| * |O| entries");
  if (reward_.size() != O_)
    throw std::invalid_argument("Model: reward must have |O| entries");
  for (double r : reward_)
    if (!(r >= 0.0 && r <= 1.0))
      throw std::invalid_argument("Model: reward outside [0,1]");
  value_.assign(A_, 0.0);
  second_.assign(A_, 0.0);
  for (std::size_t a = 0; a < A_; ++a) {
    validate_distribution(row(a), kRowTol, "Model row");
    for (std::size_t o = 0; o < O_; ++o) {
      value_[a] += prob(a, o) * reward_[o];
      second_[a] += prob(a, o) * reward_[o] * reward_[o];
    }
  }
}

double Model::total_second_moment() const {
  return std::accumulate(second_.begin(), second_.end(), 0.0);
}

std::size_t Model::best_action() const {
  return static_cast<std::size_t>(
      std::max_element(value_.begin(), value_.end()) - value_.begin());
}

Model Model::mix(const Model& other, double t) const {
  if (other.A_ != A_ || other.O_ != O_ || other.reward_ != reward_)
    throw std::invalid_argument("Model::mix: incompatible models");
  std::vector<double> obs(obs_.size());
  for (std::size_t i = 0; i < obs.size(); ++i)
    obs[i] = (1.0 - t) * obs_[i] + t * other.obs_[i];
  return Model(A_, O_, std::move(obs), reward_);
}

ModelClass::ModelClass(std::vector<Model> models, double s)
    : models_(std::move(models)), s_(s) {
  if (models_.empty()) throw std::invalid_argument("ModelClass: no models");
  if (!(s_ > 0.0)) throw std::invalid_argument("ModelClass: s must be positive");
  const Model& first = models_.front();
  for (const Model& m : models_) {
    if (m.action_count() != first.action_count() ||
        m.observation_count() != first.observation_count() ||
        !std::equal(m.reward().begin(), m.reward().end(),
                    first.reward().begin()))
      throw std::invalid_argument("ModelClass: members must share (A, O, R)");
    if (m.total_second_moment() > s_ + kRowTol)
      throw std::invalid_argument(
          "ModelClass: member violates sum_a E[R^2] <= s");
  }
}

nlohmann::json model_class_to_json(const ModelClass& mc) {
  nlohmann::json doc;
  doc["actions"] = mc.action_count();
  doc["observations"] = mc.observation_count();
  doc["s"] = mc.s();
  doc["R"] = std::vector<double>(mc[0].reward().begin(), mc[0].reward().end());
  auto models = nlohmann::json::array();
  for (const Model& m : mc.models()) {
    auto rows = nlohmann::json::array();
    for (std::size_t a = 0; a < m.action_count(); ++a)
      rows.push_back(std::vector<double>(m.row(a).begin(), m.row(a).end()));
    models.push_back(std::move(rows));
  }
  doc["models"] = std::move(models);
  return doc;
}

ModelClass model_class_from_json(const nlohmann::json& doc) {
  try {
    const auto A = doc.at("actions").get<std::size_t>();
    const auto O = doc.at("observations").get<std::size_t>();
    const auto R = doc.at("R").get<std::vector<double>>();
    const double s = doc.at("s").get<double>();
    std::vector<Model> models;
    for (const auto& rows : doc.at("models")) {
      if (rows.size() != A)
        throw std::invalid_argument("model needs one row per action");
      std::vector<double> obs;
      for (const auto& row : rows) {
        const auto r = row.get<std::vector<double>>();
        if (r.size() != O)
          throw std::invalid_argument("model row has the wrong length");
        obs.insert(obs.end(), r.begin(), r.end());
      }
      models.emplace_back(A, O, std::move(obs), R);
    }
    return ModelClass(std::move(models), s);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model class json: ") + e.what());
  }
}

ModelClass make_bernoulli_grid(std::size_t actions, std::size_t resolution,
                               double s) {
  if (actions == 0 || resolution == 0)
    throw std::invalid_argument("make_bernoulli_grid: empty grid");
  std::vector<Model> models;
  std::vector<std::size_t> level(actions, 0);
  const double step = 1.0 / static_cast<double>(resolution);
  while (true) {
    double total = 0.0;
    for (std::size_t l : level) total += static_cast<double>(l) * step;
    if (total <= s + 1e-12) {
      std::vector<double> obs;
      for (std::size_t l : level) {
        const double theta = static_cast<double>(l) * step;
        obs.push_back(1.0 - theta);
        obs.push_back(theta);
      }
      models.emplace_back(actions, 2, std::move(obs),
                          std::vector<double>{0.0, 1.0});
    }
    std::size_t i = 0;
    while (i < actions && level[i] == resolution) level[i++] = 0;
    if (i == actions) break;
    ++level[i];
  }
  return ModelClass(std::move(models), s);
}

ModelClass make_random_model_class(std::size_t actions,
                                   std::size_t observations, double s,
                                   std::size_t count, RngStream& rng) {
  if (actions == 0 || observations < 2 || count == 0)
    throw std::invalid_argument(
        "make_random_model_class: need |A| >= 1, |O| >= 2, count >= 1");
  std::vector<double> R(observations, 0.0);
  R[observations - 1] = 1.0;
  for (std::size_t o = 1; o + 1 < observations; ++o) R[o] = rng.uniform();

  std::vector<Model> models;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> obs(actions * observations, 0.0);
    double total = 0.0;
    for (std::size_t a = 0; a < actions; ++a) {
      double* row = obs.data() + a * observations;
      if (rng.uniform() < 0.5) {
        row[rng.uniform_index(observations)] = 1.0;
      } else {
        double sum = 0.0;
        for (std::size_t o = 0; o < observations; ++o) {
          row[o] = -std::log1p(-rng.uniform());
          sum += row[o];
        }
        for (std::size_t o = 0; o < observations; ++o) row[o] /= sum;
      }
      for (std::size_t o = 0; o < observations; ++o)
        total += row[o] * R[o] * R[o];
    }
    if (total > s) {
      // R(0) = 0, so mixing toward observation 0 scales the sum linearly.
      const double t = s / total * (1.0 - 1e-12);
      for (std::size_t a = 0; a < actions; ++a) {
        double* row = obs.data() + a * observations;
        double rest = 0.0;
        for (std::size_t o = 1; o < observations; ++o) {
          row[o] *= t;
          rest += row[o];
        }
        row[0] = 1.0 - rest;
      }
    }
    models.emplace_back(actions, observations, std::move(obs), R);
  }
  return ModelClass(std::move(models), s);
}

// ---------------------------------------------------------------- XiTable

XiTable::XiTable(std::size_t actions, std::size_t observations, double cap)
    : A_(actions),
      O_(observations),
      cap_(cap),
      values_(actions * actions * observations, 0.0) {
  if (!(cap_ > 0.0)) throw std::invalid_argument("XiTable: cap must be positive");
}

bool XiTable::set(std::size_t a_prime, std::size_t a, std::size_t o, double v) {
  const double c = std::clamp(v, -cap_, cap_);
  values_[(a * O_ + o) * A_ + a_prime] = c;
  return c != v;
}

// ---------------------------------------------------------------- objective

double gamma_objective(std::span<const double> w, double gamma,
                       std::span<const double> p, std::span<const double> q,
                       const XiTable& xi, const Model& M, std::size_t a_star,
                       std::size_t* clamped) {
  const std::size_t A = M.action_count();
  const std::size_t O = M.observation_count();
  double value = 0.0;
  for (std::size_t a = 0; a < A; ++a)
    value += p[a] * (M.value(a_star) - M.value(a));
  double err = 0.0;
  for (std::size_t a = 0; a < A; ++a) {
    if (q[a] == 0.0) continue;
    for (std::size_t o = 0; o < O; ++o) {
      const double m = M.prob(a, o);
      if (m == 0.0) continue;
      double inner = 0.0;
      for (std::size_t b = 0; b < A; ++b) {
        const double z = clamp_exponent(xi(b, a, o) - xi(a_star, a, o), clamped);
        inner += w[b] * (1.0 - std::exp(z));
      }
      err += q[a] * m * inner;
    }
  }
  return value - gamma * err;
}

double gamma_objective_sup(std::span<const double> w, double gamma,
                           std::span<const double> p, std::span<const double> q,
                           const XiTable& xi, const ModelClass& mc) {
  double best = -std::numeric_limits<double>::infinity();
  for (const Model& M : mc.models())
    for (std::size_t a = 0; a < M.action_count(); ++a)
      best = std::max(best, gamma_objective(w, gamma, p, q, xi, M, a));
  return best;
}

double reparam_objective(std::span<const double> w, double gamma,
                         std::span<const double> p, std::span<const double> q,
                         std::span<const double> zeta, const Model& M,
                         std::size_t a_star) {
  const std::size_t A = M.action_count();
  const std::size_t O = M.observation_count();
  double value = 0.0;
  for (std::size_t a = 0; a < A; ++a)
    value += p[a] * (M.value(a_star) - M.value(a));
  for (std::size_t a = 0; a < A; ++a) {
    if (q[a] <= 0.0) continue;
    const double scale = 1.0 / (gamma * q[a]);
    for (std::size_t o = 0; o < O; ++o) {
      const double* z = zeta.data() + (a * O + o) * A;
      double inner = 0.0;
      for (std::size_t b = 0; b < A; ++b)
        inner += w[b] * (std::exp((z[b] - z[a_star]) * scale) - 1.0);
      value += gamma * q[a] * M.prob(a, o) * inner;
    }
  }
  return value;
}

std::vector<double> project_simplex(std::span<const double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(0.0, v[i] - theta);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

// ---------------------------------------------------------------- solver

namespace {

// Evaluates every (M, a*) value at (p, q, zeta), with zeta = gamma * q * xi,
// and gradients of single pairs.
class ExoProblem {
 public:
  ExoProblem(std::span<const double> w, double gamma, const ModelClass& mc)
      : w_(w),
        gamma_(gamma),
        mc_(mc),
        A_(mc.action_count()),
        O_(mc.observation_count()),
        xi_(A_ * A_ * O_, 0.0),
        ex_(A_ * A_ * O_, 0.0),
        S_(A_ * O_, 0.0),
        values_(mc.size() * A_, 0.0) {}

  std::size_t zeta_size() const { return A_ * A_ * O_; }
  std::size_t pair_count() const { return values_.size(); }
  std::span<const double> values() const { return values_; }

  // Returns the max over pairs; *arg receives an argmax pair m * |A| + a*.
  double evaluate(std::span<const double> p, std::span<const double> q,
                  std::span<const double> zeta, std::size_t* arg = nullptr) {
    for (std::size_t a = 0; a < A_; ++a) {
      const double scale = q[a] > 0.0 && gamma_ > 0.0 ? 1.0 / (gamma_ * q[a]) : 0.0;
      for (std::size_t o = 0; o < O_; ++o) {
        const std::size_t base = (a * O_ + o) * A_;
        double S = 0.0;
        for (std::size_t b = 0; b < A_; ++b) {
          xi_[base + b] = zeta[base + b] * scale;
          ex_[base + b] = std::exp(xi_[base + b]);
          S += w_[b] * ex_[base + b];
        }
        S_[a * O_ + o] = S;
      }
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < mc_.size(); ++m) {
      const Model& M = mc_[m];
      double ep = 0.0;
      for (std::size_t a = 0; a < A_; ++a) ep += p[a] * M.value(a);
      for (std::size_t s = 0; s < A_; ++s) {
        double err = 0.0;
        for (std::size_t a = 0; a < A_; ++a) {
          if (q[a] <= 0.0) continue;
          double acc = 0.0;
          for (std::size_t o = 0; o < O_; ++o) {
            const double mp = M.prob(a, o);
            if (mp == 0.0) continue;
            const std::size_t base = (a * O_ + o) * A_;
            acc += mp * (S_[a * O_ + o] / ex_[base + s] - 1.0);
          }
          err += q[a] * acc;
        }
        const double v = M.value(s) - ep + gamma_ * err;
        values_[m * A_ + s] = v;
        if (v > best) {
          best = v;
          if (arg) *arg = m * A_ + s;
        }
      }
    }
    return best;
  }

  // Adds weight times the gradient of pair m * |A| + a* at the point of the
  // last evaluate() call.
  void add_gradient(std::span<const double> q, std::size_t pair, double weight,
                    std::vector<double>& gp, std::vector<double>& gq,
                    std::vector<double>& gz) const {
    const Model& M = mc_[pair / A_];
    const std::size_t s = pair % A_;
    for (std::size_t a = 0; a < A_; ++a)
      gp[a] += weight * (M.value(s) - M.value(a));
    for (std::size_t a = 0; a < A_; ++a) {
      if (q[a] <= 0.0) continue;
      for (std::size_t o = 0; o < O_; ++o) {
        const double mp = M.prob(a, o);
        if (mp == 0.0) continue;
        const std::size_t base = (a * O_ + o) * A_;
        const double inv_star = 1.0 / ex_[base + s];
        const double wm = weight * mp;
        double dq = 0.0;
        double total = 0.0;
        for (std::size_t b = 0; b < A_; ++b) {
          const double z = xi_[base + b] - xi_[base + s];
          const double e = ex_[base + b] * inv_star;
          dq += w_[b] * (e * (1.0 - z) - 1.0);
          gz[base + b] += wm * w_[b] * e;
          total += w_[b] * e;
        }
        gz[base + s] -= wm * total;
        gq[a] += gamma_ * wm * dq;
      }
    }
  }

  XiTable xi_table(std::span<const double> q, std::span<const double> zeta) const {
    XiTable t(A_, O_);
    for (std::size_t a = 0; a < A_; ++a) {
      const double scale = q[a] > 0.0 && gamma_ > 0.0 ? 1.0 / (gamma_ * q[a]) : 0.0;
      for (std::size_t o = 0; o < O_; ++o)
        for (std::size_t b = 0; b < A_; ++b)
          t.set(b, a, o, zeta[(a * O_ + o) * A_ + b] * scale);
    }
    return t;
  }

 private:
  std::span<const double> w_;
  double gamma_;
  const ModelClass& mc_;
  std::size_t A_;
  std::size_t O_;
  std::vector<double> xi_;
  std::vector<double> ex_;
  std::vector<double> S_;
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void scale_block(std::vector<double>& g, double step) {
  const double n = norm2(g);
  const double f = n > 0.0 ? step / n : 0.0;
  for (double& x : g) x *= f;
}

bool is_converged(const std::vector<double>& best_history, double tolerance) {
  if (best_history.size() < 4) return false;
  const double late = best_history[best_history.size() * 3 / 4];
  return late - best_history.back() <= tolerance;
}

// Solver iterate.
struct Point {
  std::vector<double> p, q, zeta;
};

class ExoSearch {
 public:
  ExoSearch(std::span<const double> w, double gamma, const ModelClass& mc)
      : prob_(w, gamma, mc),
        gamma_(gamma),
        A_(mc.action_count()),
        O_(mc.observation_count()) {}

  ExoProblem& problem() { return prob_; }

  // Maps an arbitrary step target back to the feasible set: simplex
  // projections for p and q, then the xi cap for zeta under the new q.
  void make_feasible(Point& x) const {
    x.p = project_simplex(x.p);
    x.q = project_simplex(x.q);
    for (std::size_t a = 0; a < A_; ++a) {
      const double cap = kXiCap * gamma_ * x.q[a];
      for (std::size_t i = a * O_ * A_; i < (a + 1) * O_ * A_; ++i)
        x.zeta[i] = std::clamp(x.zeta[i], -cap, cap);
    }
  }

 private:
  ExoProblem prob_;
  double gamma_;
  std::size_t A_;
  std::size_t O_;
};

// The same objective as ExoProblem in the layout of the barrier solver:
// x = (p, q, zeta). Each (a, o, b != a*) term is the perspective
// g(q, d) = gamma q (exp(d / (gamma q)) - 1) with d = zeta_b - zeta_{a*}.
class ExoPieces final : public detail::MinMaxPieces {
 public:
  ExoPieces(std::span<const double> w, double gamma, const ModelClass& mc)
      : w_(w), gamma_(gamma), mc_(mc), A_(mc.action_count()), O_(mc.observation_count()) {}

  std::size_t dimension() const override { return 2 * A_ + A_ * A_ * O_; }
  std::size_t piece_count() const override { return mc_.size() * A_; }

  std::size_t P(std::size_t a) const { return a; }
  std::size_t Q(std::size_t a) const { return A_ + a; }
  std::size_t Z(std::size_t a, std::size_t o, std::size_t b) const {
    return 2 * A_ + (a * O_ + o) * A_ + b;
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& values,
                Eigen::MatrixXd* G) const override {
    values.resize(static_cast<Eigen::Index>(piece_count()));
    if (G) G->setZero(static_cast<Eigen::Index>(piece_count()),
                      static_cast<Eigen::Index>(dimension()));
    for (std::size_t m = 0; m < mc_.size(); ++m) {
      const Model& M = mc_[m];
      for (std::size_t s = 0; s < A_; ++s) {
        const std::size_t i = m * A_ + s;
        double v = M.value(s);
        for (std::size_t a = 0; a < A_; ++a) {
          v -= x[P(a)] * M.value(a);
          if (G) (*G)(i, P(a)) = M.value(s) - M.value(a);
        }
        for (std::size_t a = 0; a < A_; ++a) {
          const double q = x[Q(a)];
          for (std::size_t o = 0; o < O_; ++o) {
            const double mp = M.prob(a, o);
            if (mp == 0.0) continue;
            for (std::size_t b = 0; b < A_; ++b) {
              if (b == s) continue;
              const double c = mp * w_[b];
              if (c == 0.0) continue;
              const double y = (x[Z(a, o, b)] - x[Z(a, o, s)]) / (gamma_ * q);
              const double e = std::exp(y);
              v += c * gamma_ * q * (e - 1.0);
              if (G) {
                (*G)(i, Q(a)) += c * gamma_ * (e - 1.0 - y * e);
                (*G)(i, Z(a, o, b)) += c * e;
                (*G)(i, Z(a, o, s)) -= c * e;
              }
            }
          }
        }
        values[i] = v;
      }
    }
  }

  void add_hessian(std::size_t i, const Eigen::VectorXd& x, double weight,
                   Eigen::MatrixXd& H) const override {
    const Model& M = mc_[i / A_];
    const std::size_t s = i % A_;
    for (std::size_t a = 0; a < A_; ++a) {
      const double q = x[Q(a)];
      for (std::size_t o = 0; o < O_; ++o) {
        const double mp = M.prob(a, o);
        if (mp == 0.0) continue;
        for (std::size_t b = 0; b < A_; ++b) {
          if (b == s) continue;
          const double c = weight * mp * w_[b];
          if (c == 0.0) continue;
          const double y = (x[Z(a, o, b)] - x[Z(a, o, s)]) / (gamma_ * q);
          const double e = std::exp(y);
          const double dd = c * e / (gamma_ * q);
          const double dq = -c * y * e / q;
          const double qq = c * gamma_ * y * y * e / q;
          const std::size_t iq = Q(a), ib = Z(a, o, b), is = Z(a, o, s);
          H(iq, iq) += qq;
          H(iq, ib) += dq;
          H(ib, iq) += dq;
          H(iq, is) -= dq;
          H(is, iq) -= dq;
          H(ib, ib) += dd;
          H(is, is) += dd;
          H(ib, is) -= dd;
          H(is, ib) -= dd;
        }
      }
    }
  }

  std::vector<std::vector<std::size_t>> simplex_blocks() const {
    std::vector<std::size_t> p, q;
    for (std::size_t a = 0; a < A_; ++a) {
      p.push_back(P(a));
      q.push_back(Q(a));
    }
    return {p, q};
  }

  // |zeta| <= cap * gamma * q(a) for every entry of slice a.
  std::vector<detail::LinearInequality> cap_constraints() const {
    std::vector<detail::LinearInequality> out;
    for (std::size_t a = 0; a < A_; ++a)
      for (std::size_t o = 0; o < O_; ++o)
        for (std::size_t b = 0; b < A_; ++b)
          for (double sign : {1.0, -1.0})
            out.push_back({{{Z(a, o, b), sign}, {Q(a), -kXiCap * gamma_}}, 0.0});
    return out;
  }

  Eigen::VectorXd interior_point(std::span<const double> p, std::span<const double> q,
                                 std::span<const double> zeta) const {
    constexpr double kPull = 0.01;
    Eigen::VectorXd x(static_cast<Eigen::Index>(dimension()));
    for (std::size_t a = 0; a < A_; ++a) {
      x[P(a)] = (1.0 - kPull) * p[a] + kPull / static_cast<double>(A_);
      x[Q(a)] = (1.0 - kPull) * q[a] + kPull / static_cast<double>(A_);
    }
    for (std::size_t j = 0; j < zeta.size(); ++j) x[2 * A_ + j] = (1.0 - kPull) * zeta[j];
    return x;
  }

  Point split(const Eigen::VectorXd& x) const {
    Point pt{std::vector<double>(A_), std::vector<double>(A_),
             std::vector<double>(A_ * A_ * O_)};
    double sp = 0.0, sq = 0.0;
    for (std::size_t a = 0; a < A_; ++a) {
      pt.p[a] = std::max(0.0, x[P(a)]);
      pt.q[a] = std::max(0.0, x[Q(a)]);
      sp += pt.p[a];
      sq += pt.q[a];
    }
    for (std::size_t a = 0; a < A_; ++a) {
      pt.p[a] /= sp;
      pt.q[a] /= sq;
    }
    for (std::size_t j = 0; j < pt.zeta.size(); ++j) {
      const std::size_t a = j / (O_ * A_);
      const double cap = kXiCap * gamma_ * pt.q[a];
      pt.zeta[j] = std::clamp(x[2 * A_ + j], -cap, cap);
    }
    return pt;
  }

 private:
  std::span<const double> w_;
  double gamma_;
  const ModelClass& mc_;
  std::size_t A_;
  std::size_t O_;
};

}  // namespace

ExoSolution solve_exo(std::span<const double> w, double gamma,
                      const ModelClass& mc, const SolverConfig& cfg) {
  const std::size_t A = mc.action_count();
  if (w.size() != A) throw std::invalid_argument("solve_exo: w has the wrong length");
  check_probability(w, "solve_exo w");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("solve_exo: gamma must be finite and >= 0");

  ExoSearch search(w, gamma, mc);
  ExoProblem& prob = search.problem();

  // Analytic start: the best point mass with xi = 0 and q uniform. This
  // covers the point mass on the best action of every member.
  Point x{std::vector<double>(A, 0.0), std::vector<double>(A, 1.0 / A),
          std::vector<double>(prob.zeta_size(), 0.0)};
  double start_value = std::numeric_limits<double>::infinity();
  std::size_t start_action = 0;
  for (std::size_t a = 0; a < A; ++a) {
    std::vector<double> e(A, 0.0);
    e[a] = 1.0;
    const double v = prob.evaluate(e, x.q, x.zeta);
    if (v < start_value) {
      start_value = v;
      start_action = a;
    }
  }
  x.p[start_action] = 1.0;

  Point best = x;
  double best_value = start_value;
  auto consider = [&](const Point& y, double v) {
    if (v < best_value) {
      best_value = v;
      best = y;
    }
  };

  std::vector<double> history;
  history.reserve(cfg.iterations + 2);
  double last_step = 0.0;
  bool stationary = false;
  bool polished = false;
  std::size_t used = 0;

  // Projected subgradient.
  Point g{std::vector<double>(A), std::vector<double>(A),
          std::vector<double>(prob.zeta_size())};
  for (std::size_t k = 1; k <= cfg.iterations; ++k) {
    std::size_t arg = 0;
    consider(x, prob.evaluate(x.p, x.q, x.zeta, &arg));
    history.push_back(best_value);
    ++used;
    std::fill(g.p.begin(), g.p.end(), 0.0);
    std::fill(g.q.begin(), g.q.end(), 0.0);
    std::fill(g.zeta.begin(), g.zeta.end(), 0.0);
    prob.add_gradient(x.q, arg, 1.0, g.p, g.q, g.zeta);
    if (norm2(g.p) == 0.0 && norm2(g.q) == 0.0 && norm2(g.zeta) == 0.0) {
      stationary = true;
      break;
    }
    // Each block is normalized on its own; the three blocks have very
    // different natural scales.
    const double step = cfg.step / std::sqrt(static_cast<double>(k));
    scale_block(g.p, step);
    scale_block(g.q, step);
    scale_block(g.zeta, step);
    for (std::size_t a = 0; a < A; ++a) {
      x.p[a] -= g.p[a];
      x.q[a] -= g.q[a];
    }
    for (std::size_t i = 0; i < x.zeta.size(); ++i) x.zeta[i] -= g.zeta[i];
    search.make_feasible(x);
    last_step = std::sqrt(dot(g.p, g.p) + dot(g.q, g.q) + dot(g.zeta, g.zeta));
  }
  if (!stationary) consider(x, prob.evaluate(x.p, x.q, x.zeta));

  // Interior-point polish from the best iterate, pulled slightly into the
  // interior.
  if (!stationary && cfg.polish && gamma > 0.0) {
    const ExoPieces pieces(w, gamma, mc);
    const Eigen::VectorXd x0 = pieces.interior_point(best.p, best.q, best.zeta);
    const auto res = detail::solve_minmax_barrier(pieces, pieces.simplex_blocks(),
                                                  pieces.cap_constraints(), x0);
    used += res.newton_steps;
    Point y = pieces.split(res.x);
    consider(y, prob.evaluate(y.p, y.q, y.zeta));
    history.push_back(best_value);
    polished = res.converged;
  }

  ExoSolution out{best.p, best.q, prob.xi_table(best.q, best.zeta), best_value};
  out.iterations = used;
  out.final_step_norm = last_step;
  out.converged = stationary || polished || is_converged(history, cfg.tolerance);
  // Re-evaluate through the public objective so the reported value and the
  // clamp counter refer to the returned table.
  double sup = -std::numeric_limits<double>::infinity();
  for (const Model& M : mc.models())
    for (std::size_t a = 0; a < A; ++a)
      sup = std::max(sup, gamma_objective(w, gamma, out.p, out.q, out.xi, M, a,
                                          &out.clamped));
  out.objective = sup;
  return out;
}

// ---------------------------------------------------------------- environment

ModelEnvironment::ModelEnvironment(std::vector<double> context_probs,
                                   std::vector<Model> models, double s)
    : context_probs_(std::move(context_probs)), models_(std::move(models)), s_(s) {
  validate_distribution(context_probs_, kRowTol, "context distribution");
  if (models_.size() != context_probs_.size())
    throw std::invalid_argument("ModelEnvironment: one model per context");
  for (const Model& m : models_) {
    if (m.action_count() != models_.front().action_count() ||
        m.observation_count() != models_.front().observation_count())
      throw std::invalid_argument("ModelEnvironment: models must share (A, O)");
    if (m.total_second_moment() > s_ + kRowTol)
      throw std::invalid_argument("ModelEnvironment: model violates sparsity");
  }
}

Environment ModelEnvironment::to_environment() const {
  const std::size_t A = action_count();
  const std::size_t O = models_.front().observation_count();
  double joint = 1.0;
  for (std::size_t a = 0; a < A; ++a) joint *= static_cast<double>(O);
  if (joint > 65536.0)
    throw std::invalid_argument("ModelEnvironment: joint outcome space too large");

  std::vector<std::vector<RewardOutcome>> law(context_count());
  for (std::size_t x = 0; x < context_count(); ++x) {
    const Model& M = models_[x];
    std::vector<std::size_t> obs(A, 0);
    while (true) {
      double pr = 1.0;
      RewardVector r(A);
      for (std::size_t a = 0; a < A; ++a) {
        pr *= M.prob(a, obs[a]);
        r[a] = M.reward()[obs[a]];
      }
      if (pr > 0.0) law[x].push_back({pr, std::move(r)});
      std::size_t i = 0;
      while (i < A && obs[i] == O - 1) obs[i++] = 0;
      if (i == A) break;
      ++obs[i];
    }
  }
  return Environment(context_probs_, std::move(law), {SparsityMode::l2, s_}, A);
}

// ---------------------------------------------------------------- run

namespace {

std::vector<double> softmax(std::span<const double> logw) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  std::vector<double> out(logw.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    out[i] = std::exp(logw[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> marginal(std::span<const double> W, const PolicyClass& pc,
                             ContextId x) {
  std::vector<double> w(pc.action_count(), 0.0);
  const auto col = pc.column(x);
  for (std::size_t i = 0; i < pc.size(); ++i) w[col[i].index] += W[i];
  return w;
}

}  // namespace

ExoRunResult run_exo(const ModelEnvironment& env, const PolicyClass& policies,
                     double gamma, std::uint64_t T, const ModelClass& mc,
                     const RngStream& rng, const SolverConfig& cfg) {
  const std::size_t A = env.action_count();
  const std::size_t X = env.context_count();
  if (policies.action_count() != A || policies.context_count() != X)
    throw std::invalid_argument("run_exo: policy class does not match env");
  if (mc.action_count() != A ||
      mc.observation_count() != env.model(ContextId{0}).observation_count())
    throw std::invalid_argument("run_exo: model class does not match env");
  if (T == 0) throw std::invalid_argument("run_exo: T must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("run_exo: gamma must be positive");

  RngStream env_rng = rng.split(streams::kExoEnv);
  RngStream act_rng = rng.split(streams::kExoActions);

  ExoRunResult out;
  out.trace.reserve(T);
  std::vector<double> logw(policies.size(), 0.0);
  std::vector<std::vector<double>> snapshots;
  snapshots.reserve(T);
  std::vector<std::vector<double>> round_p;
  round_p.reserve(T);

  for (std::uint64_t t = 0; t < T; ++t) {
    const std::vector<double> W = softmax(logw);
    const double total = std::accumulate(W.begin(), W.end(), 0.0);
    out.normalization_error = std::max(out.normalization_error, std::abs(total - 1.0));
    snapshots.push_back(W);

    const ContextId x{static_cast<std::uint32_t>(
        sample_from_weights(env.context_probs(), env_rng.uniform()))};
    const std::vector<double> w = marginal(W, policies, x);
    ExoSolution sol = solve_exo(w, gamma, mc, cfg);
    if (!sol.converged) ++out.unconverged_solves;
    out.clamped += sol.clamped;

    const std::size_t a = sample_from_weights(sol.q, act_rng.uniform());
    const Model& M = env.model(x);
    const std::size_t o = sample_from_weights(M.row(a), env_rng.uniform());

    const auto col = policies.column(x);
    for (std::size_t i = 0; i < policies.size(); ++i)
      logw[i] += sol.xi(col[i].index, a, o);
    const double mx = *std::max_element(logw.begin(), logw.end());
    for (double& v : logw) v -= mx;

    out.trace.push_back({x, ActionId{static_cast<std::uint32_t>(a)}, o,
                         sol.objective});
    round_p.push_back(std::move(sol.p));
  }

  // Online-to-batch output from the cached snapshots. The solver is
  // deterministic, so the round's own solve is reused at its context.
  out.output.assign(X, std::vector<double>(A, 0.0));
  for (std::size_t x = 0; x < X; ++x) {
    for (std::uint64_t t = 0; t < T; ++t) {
      std::vector<double> p;
      if (out.trace[t].context.index == x) {
        p = round_p[t];
      } else {
        const auto w = marginal(snapshots[t], policies,
                                ContextId{static_cast<std::uint32_t>(x)});
        ExoSolution sol = solve_exo(w, gamma, mc, cfg);
        if (!sol.converged) ++out.unconverged_solves;
        out.clamped += sol.clamped;
        p = std::move(sol.p);
      }
      for (std::size_t a = 0; a < A; ++a) out.output[x][a] += p[a];
    }
    for (double& v : out.output[x]) v /= static_cast<double>(T);
  }

  const auto rho = env.context_probs();
  out.output_value = 0.0;
  for (std::size_t x = 0; x < X; ++x) {
    const Model& M = env.model(ContextId{static_cast<std::uint32_t>(x)});
    for (std::size_t a = 0; a < A; ++a)
      out.output_value += rho[x] * out.output[x][a] * M.value(a);
  }
  out.best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < policies.size(); ++i) {
    double v = 0.0;
    for (std::size_t x = 0; x < X; ++x) {
      const ContextId cx{static_cast<std::uint32_t>(x)};
      v += rho[x] * env.model(cx).value(policies.action(i, cx).index);
    }
    out.best_value = std::max(out.best_value, v);
  }
  out.suboptimality = out.best_value - out.output_value;
  return out;
}

// ---------------------------------------------------------------- DEC

std::vector<double> sparsity_weighted_q(const Model& Mbar, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("sparsity_weighted_q: s must be positive");
  const std::size_t A = Mbar.action_count();
  double C = 0.0;
  for (std::size_t a = 0; a < A; ++a) C += Mbar.second_moment(a);
  if (C > s) throw std::invalid_argument("sparsity_weighted_q: C > s");
  std::vector<double> q(A);
  const double base = (1.0 - C / (2.0 * s)) / static_cast<double>(A);
  for (std::size_t a = 0; a < A; ++a) q[a] = base + Mbar.second_moment(a) / (2.0 * s);
  return q;
}

namespace {

struct PdecTables {
  // gap[m][a] = f^M(a_M) - f^M(a); dist[m][a] = D^2(M(a), Mbar(a)).
  std::vector<std::vector<double>> gap;
  std::vector<std::vector<double>> dist;
};

PdecTables pdec_tables(const ModelClass& mc, const Model& Mbar) {
  const std::size_t A = mc.action_count();
  if (Mbar.action_count() != A ||
      Mbar.observation_count() != mc.observation_count())
    throw std::invalid_argument("pdec: reference model does not match class");
  PdecTables t;
  for (const Model& M : mc.models()) {
    std::vector<double> g(A), d(A);
    const double top = M.value(M.best_action());
    for (std::size_t a = 0; a < A; ++a) {
      g[a] = top - M.value(a);
      d[a] = hellinger_sq(M.row(a), Mbar.row(a));
    }
    t.gap.push_back(std::move(g));
    t.dist.push_back(std::move(d));
  }
  return t;
}

double pdec_value(const PdecTables& t, double gamma, std::span<const double> p,
                  std::span<const double> q, std::size_t* arg) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < t.gap.size(); ++m) {
    double v = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a)
      v += p[a] * t.gap[m][a] - gamma * q[a] * t.dist[m][a];
    if (v > best) {
      best = v;
      if (arg) *arg = m;
    }
  }
  return best;
}

class PdecPieces final : public detail::MinMaxPieces {
 public:
  PdecPieces(const PdecTables& t, double gamma, std::size_t A) : t_(t), gamma_(gamma), A_(A) {}

  std::size_t dimension() const override { return 2 * A_; }
  std::size_t piece_count() const override { return t_.gap.size(); }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& values,
                Eigen::MatrixXd* G) const override {
    values.resize(static_cast<Eigen::Index>(piece_count()));
    if (G) G->resize(static_cast<Eigen::Index>(piece_count()),
                     static_cast<Eigen::Index>(dimension()));
    for (std::size_t m = 0; m < t_.gap.size(); ++m) {
      double v = 0.0;
      for (std::size_t a = 0; a < A_; ++a) {
        v += x[a] * t_.gap[m][a] - gamma_ * x[A_ + a] * t_.dist[m][a];
        if (G) {
          (*G)(m, a) = t_.gap[m][a];
          (*G)(m, A_ + a) = -gamma_ * t_.dist[m][a];
        }
      }
      values[m] = v;
    }
  }

  void add_hessian(std::size_t, const Eigen::VectorXd&, double,
                   Eigen::MatrixXd&) const override {}

 private:
  const PdecTables& t_;
  double gamma_;
  std::size_t A_;
};

}  // namespace

double pdec_objective(const ModelClass& mc, const Model& Mbar, double gamma,
                      std::span<const double> p, std::span<const double> q) {
  return pdec_value(pdec_tables(mc, Mbar), gamma, p, q, nullptr);
}

PdecEstimate pdec_estimate(const ModelClass& mc, const Model& Mbar,
                           double gamma, const SolverConfig& cfg) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("pdec_estimate: gamma must be finite and >= 0");
  const std::size_t A = mc.action_count();
  const PdecTables t = pdec_tables(mc, Mbar);

  std::vector<double> p(A, 0.0);
  p[Mbar.best_action()] = 1.0;
  std::vector<double> q = sparsity_weighted_q(Mbar, mc.s());

  PdecEstimate est;
  est.certificate = pdec_value(t, gamma, p, q, nullptr);
  est.solver = est.certificate;
  est.p = p;
  est.q = q;

  std::vector<double> history;
  history.reserve(cfg.iterations);
  std::vector<double> gp(A), gq(A);
  bool stationary = false;
  for (std::size_t k = 1; k <= cfg.iterations; ++k) {
    std::size_t m = 0;
    const double v = pdec_value(t, gamma, p, q, &m);
    if (v < est.solver) {
      est.solver = v;
      est.p = p;
      est.q = q;
    }
    history.push_back(est.solver);
    for (std::size_t a = 0; a < A; ++a) {
      gp[a] = t.gap[m][a];
      gq[a] = -gamma * t.dist[m][a];
    }
    if (norm2(gp) == 0.0 && norm2(gq) == 0.0) {
      stationary = true;
      break;
    }
    const double step = cfg.step / std::sqrt(static_cast<double>(k));
    scale_block(gp, step);
    scale_block(gq, step);
    for (std::size_t a = 0; a < A; ++a) {
      p[a] -= gp[a];
      q[a] -= gq[a];
    }
    p = project_simplex(p);
    q = project_simplex(q);
  }
  const double v = pdec_value(t, gamma, p, q, nullptr);
  if (v < est.solver) {
    est.solver = v;
    est.p = p;
    est.q = q;
  }
  history.push_back(est.solver);
  est.converged = stationary || is_converged(history, cfg.tolerance);

  if (cfg.polish && !stationary) {
    const PdecPieces pieces(t, gamma, A);
    std::vector<std::vector<std::size_t>> blocks(2);
    Eigen::VectorXd x0(2 * A);
    for (std::size_t a = 0; a < A; ++a) {
      blocks[0].push_back(a);
      blocks[1].push_back(A + a);
      x0[a] = 0.99 * est.p[a] + 0.01 / static_cast<double>(A);
      x0[A + a] = 0.99 * est.q[a] + 0.01 / static_cast<double>(A);
    }
    const detail::BarrierResult res = detail::solve_minmax_barrier(pieces, blocks, {}, x0);
    std::vector<double> bp(A), bq(A);
    for (std::size_t a = 0; a < A; ++a) {
      bp[a] = std::max(res.x[a], 0.0);
      bq[a] = std::max(res.x[A + a], 0.0);
    }
    bp = project_simplex(bp);
    bq = project_simplex(bq);
    const double bv = pdec_value(t, gamma, bp, bq, nullptr);
    if (bv < est.solver) {
      est.solver = bv;
      est.p = bp;
      est.q = bq;
    }
    est.converged = est.converged || res.converged;
  }
  est.value = std::min(est.solver, est.certificate);
  return est;
}

}  // namespace sparsecb
