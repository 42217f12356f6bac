#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "prowl/learner.hpp"

namespace prowl {

struct Prediction {
  std::string instance;
  std::string label;  // argmax of answer scores, ties broken lexicographically
  double score = 0.0;
};

// correct / total over exactly one prediction per gold instance.
inline double accuracy(const std::vector<Prediction>& preds,
                       const std::unordered_map<std::string, std::string>& gold) {
  if (gold.empty()) throw std::runtime_error("accuracy: empty test set");
  if (preds.size() != gold.size())
    throw std::runtime_error("accuracy: got " + std::to_string(preds.size()) +
                             " predictions for " + std::to_string(gold.size()) +
                             " gold instances");
  long correct = 0;
  std::set<std::string> seen;
  for (const Prediction& p : preds) {
    auto it = gold.find(p.instance);
    if (it == gold.end())
      throw std::runtime_error("accuracy: prediction for unknown instance " + p.instance);
    if (!seen.insert(p.instance).second)
      throw std::runtime_error("accuracy: duplicate prediction for " + p.instance);
    if (it->second == p.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

// One IR-style query: a (title entity, relation) pair with the NPs retrieved
// for it (deduplicated, best score kept) and the gold NP set.
struct ExtractionResult {
  std::string entity;
  std::string relation;
  std::vector<std::pair<std::string, double>> retrieved;
  std::set<std::string> gold;

  void add_retrieved(const std::string& np, double score) {
    for (auto& [have, s] : retrieved) {
      if (have == np) {
        s = std::max(s, score);
        return;
      }
    }
    retrieved.emplace_back(np, score);
  }
};

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, fn = 0;
};

// Micro-averaged precision/recall/F1 over all (query, NP) decisions: an NP
// counts as predicted when it was retrieved for the query with score >=
// threshold. 0/0 ratios are 0 by convention.
inline PrfResult prf(const std::vector<ExtractionResult>& results, double threshold) {
  PrfResult out;
  for (const ExtractionResult& r : results) {
    std::set<std::string> predicted;
    for (const auto& [np, score] : r.retrieved)
      if (score >= threshold) predicted.insert(np);
    for (const std::string& np : predicted)
      r.gold.count(np) ? ++out.tp : ++out.fp;
    for (const std::string& np : r.gold)
      if (!predicted.count(np)) ++out.fn;
  }
  if (out.tp + out.fp > 0)
    out.precision = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp);
  if (out.tp + out.fn > 0)
    out.recall = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn);
  if (out.precision + out.recall > 0.0)
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

// Threshold sweep over all distinct retrieval scores, highest first, so
// recall is non-decreasing along the curve. Points are (recall, precision).
inline std::vector<std::pair<double, double>> pr_curve(
    const std::vector<ExtractionResult>& results) {
  std::set<double> scores;
  for (const ExtractionResult& r : results)
    for (const auto& [np, s] : r.retrieved) scores.insert(s);
  std::vector<std::pair<double, double>> curve;
  for (auto it = scores.rbegin(); it != scores.rend(); ++it) {
    PrfResult p = prf(results, *it);
    curve.emplace_back(p.recall, p.precision);
  }
  return curve;
}

inline std::string pr_curve_csv(const std::vector<ExtractionResult>& results) {
  std::string out = "recall,precision\n";
  for (const auto& [r, p] : pr_curve(results))
    out += format_double(r) + "," + format_double(p) + "\n";
  return out;
}

inline std::string predictions_tsv(const std::vector<Prediction>& preds) {
  std::string out;
  for (const Prediction& p : preds)
    out += p.instance + "\t" + p.label + "\t" + format_double(p.score) + "\n";
  return out;
}

}  // namespace prowl
