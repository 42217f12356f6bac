#pragma once

#include <string>

#include <json.hpp>

#include "prowl/constraints.hpp"

namespace prowl {

// Budget files are flat JSON objects mapping template names to example
// counts, e.g. {"mutexT": 1568, "lp2": 140}. The short tuning-table names
// (mFT, lpF2, ...) are accepted on input and resolved per task mode;
// canonical names are written on output. R/NR/T/NT are ingestion cutoffs.
inline ConstraintBudget parse_budget(const std::string& text, TaskMode mode) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::runtime_error("budget file must be a JSON object");
  ConstraintBudget budget;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "seed") {
      budget.seed = it.value().get<uint64_t>();
      continue;
    }
    long v = it.value().get<long>();
    if (v < 0) throw std::runtime_error("budget count for " + it.key() + " is negative");
    if (it.key() == "R" || it.key() == "NR" || it.key() == "T" || it.key() == "NT") {
      budget.counts[it.key()] = v;
      continue;
    }
    auto kind = kind_from_name(it.key(), mode);
    if (!kind) throw std::runtime_error("unknown budget key " + it.key());
    budget.counts[kind_name(*kind)] += v;
  }
  return budget;
}

inline std::string budget_to_json(const ConstraintBudget& budget) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : budget.counts) j[k] = v;
  return j.dump(2);
}

}  // namespace prowl
