#pragma once

// JSON serialization of environments and run reports.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sparsecb/core.hpp"

namespace sparsecb {

// Document layout:
//   {"contexts": [p...], "rewards": [[{"p": .., "r": [..]}, ..], ..],
//    "sparsity": {"mode": "l1", "s": ..}, "actions": n,
//    "m": optional subset size, "policies": optional [[a(x) for x], ..]}
nlohmann::json environment_to_json(const Environment& env,
                                   const PolicyClass* policies = nullptr);

struct LoadedEnvironment {
  Environment env;
  std::optional<PolicyClass> policies;
};

LoadedEnvironment environment_from_json(const nlohmann::json& doc);
LoadedEnvironment load_environment(const std::string& path);
void save_environment(const std::string& path, const Environment& env,
                      const PolicyClass* policies = nullptr);

struct RunReport {
  std::string algorithm;
  // Flat numeric configuration in insertion order.
  std::vector<std::pair<std::string, double>> config;
  std::uint64_t samples_total = 0;
  std::size_t chosen_policy = 0;
  double chosen_value = 0.0;
  double best_value = 0.0;
  double suboptimality = 0.0;
  std::vector<double> variance_by_policy;
  std::uint64_t seed = 0;
  std::optional<std::size_t> K;
  std::optional<std::size_t> m;
  std::vector<std::string> diagnostics;

  double config_value(const std::string& key) const;
};

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& doc);

// One CSV line without a trailing newline, and the matching header.
std::string run_report_csv_header();
std::string to_csv_row(const RunReport& report);

}  // namespace sparsecb
