#include "sparsecb/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparsecb/format.hpp"

namespace sparsecb {

using nlohmann::json;

json environment_to_json(const Environment& env, const PolicyClass* policies) {
  json doc;
  doc["contexts"] = std::vector<double>(env.context_probs().begin(),
                                        env.context_probs().end());
  json rewards = json::array();
  for (std::uint32_t x = 0; x < env.context_count(); ++x) {
    json law = json::array();
    for (const auto& o : env.reward_law(ContextId{x}))
      law.push_back({{"p", o.prob}, {"r", o.reward}});
    rewards.push_back(std::move(law));
  }
  doc["rewards"] = std::move(rewards);
  doc["sparsity"] = {{"mode", to_string(env.sparsity().mode)},
                     {"s", env.sparsity().s}};
  doc["actions"] = env.action_count();
  if (env.subset_mode()) doc["m"] = env.subset_size();
  if (policies != nullptr) {
    json list = json::array();
    for (std::size_t i = 0; i < policies->size(); ++i) {
      std::vector<std::uint32_t> row;
      for (std::uint32_t x = 0; x < policies->context_count(); ++x)
        row.push_back(policies->action(i, ContextId{x}).index);
      list.push_back(row);
    }
    doc["policies"] = std::move(list);
  }
  return doc;
}

LoadedEnvironment environment_from_json(const json& doc) {
  try {
    auto contexts = doc.at("contexts").get<std::vector<double>>();
    const auto actions = doc.at("actions").get<std::size_t>();
    std::vector<std::vector<RewardOutcome>> law;
    for (const auto& ctx : doc.at("rewards")) {
      std::vector<RewardOutcome> outcomes;
      for (const auto& o : ctx)
        outcomes.push_back(
            {o.at("p").get<double>(), o.at("r").get<std::vector<double>>()});
      law.push_back(std::move(outcomes));
    }
    const auto& sp = doc.at("sparsity");
    const Sparsity sparsity{
        sparsity_mode_from_string(sp.at("mode").get<std::string>()),
        sp.at("s").get<double>()};
    const std::size_t m = doc.value("m", std::size_t{0});
    Environment env(std::move(contexts), std::move(law), sparsity, actions, m);
    std::optional<PolicyClass> policies;
    if (doc.contains("policies")) {
      std::vector<Policy> pis;
      for (const auto& row : doc.at("policies")) {
        std::vector<ActionId> t;
        for (const auto& a : row) t.push_back(ActionId{a.get<std::uint32_t>()});
        if (t.size() != env.context_count())
          throw std::invalid_argument("policy row length differs from |X|");
        pis.emplace_back(std::move(t));
      }
      policies.emplace(pis, actions);
    }
    return LoadedEnvironment{std::move(env), std::move(policies)};
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed environment: ") +
                                e.what());
  }
}

LoadedEnvironment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open environment file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return environment_from_json(doc);
}

void save_environment(const std::string& path, const Environment& env,
                      const PolicyClass* policies) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << environment_to_json(env, policies).dump(2) << '\n';
}

double RunReport::config_value(const std::string& key) const {
  for (const auto& [k, v] : config)
    if (k == key) return v;
  throw std::out_of_range("no config key " + key);
}

json to_json(const RunReport& r) {
  json cfg = json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  json doc = {{"algorithm", r.algorithm},
              {"config", cfg},
              {"samples_total", r.samples_total},
              {"chosen_policy", r.chosen_policy},
              {"chosen_value", r.chosen_value},
              {"best_value", r.best_value},
              {"suboptimality", r.suboptimality},
              {"variance_by_policy", r.variance_by_policy},
              {"seed", r.seed}};
  if (r.K) doc["K"] = *r.K;
  if (r.m) doc["m"] = *r.m;
  if (!r.diagnostics.empty()) doc["diagnostics"] = r.diagnostics;
  return doc;
}

RunReport run_report_from_json(const json& doc) {
  RunReport r;
  r.algorithm = doc.at("algorithm").get<std::string>();
  for (const auto& [k, v] : doc.at("config").items())
    r.config.emplace_back(k, v.get<double>());
  r.samples_total = doc.at("samples_total").get<std::uint64_t>();
  r.chosen_policy = doc.at("chosen_policy").get<std::size_t>();
  r.chosen_value = doc.at("chosen_value").get<double>();
  r.best_value = doc.at("best_value").get<double>();
  r.suboptimality = doc.at("suboptimality").get<double>();
  r.variance_by_policy = doc.at("variance_by_policy").get<std::vector<double>>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("K")) r.K = doc.at("K").get<std::size_t>();
  if (doc.contains("m")) r.m = doc.at("m").get<std::size_t>();
  if (doc.contains("diagnostics"))
    r.diagnostics = doc.at("diagnostics").get<std::vector<std::string>>();
  return r;
}

std::string run_report_csv_header() {
  return "algorithm,seed,samples_total,chosen_policy,chosen_value,best_value,"
         "suboptimality,K,m";
}

std::string to_csv_row(const RunReport& r) {
  std::ostringstream out;
  out << r.algorithm << ',' << r.seed << ',' << r.samples_total << ','
      << r.chosen_policy << ',' << format_double(r.chosen_value) << ','
      << format_double(r.best_value) << ',' << format_double(r.suboptimality)
      << ',' << (r.K ? std::to_string(*r.K) : "") << ','
      << (r.m ? std::to_string(*r.m) : "");
  return out.str();
}

}  // namespace sparsecb
