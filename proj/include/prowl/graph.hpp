#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prowl/ast.hpp"

namespace prowl {

using FeatId = int32_t;

// Interner for ground feature strings, e.g. "f(hope,sports)" or "id(3)".
// Dense ids key the parameter vector. Insertion is mutex-guarded so graphs
// may be grounded from several threads against one table.
class FeatureTable {
 public:
  FeatId intern(std::string_view s) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    names_.emplace_back(s);
    FeatId id = static_cast<FeatId>(names_.size() - 1);
    ids_.emplace(names_.back(), id);
    return id;
  }

  std::string name(FeatId id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return names_.at(static_cast<size_t>(id));
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return names_.size();
  }

 private:
  mutable std::mutex mu_;
  std::deque<std::string> names_;
  std::unordered_map<std::string_view, FeatId> ids_;
};

enum class EdgeKind : uint8_t { Rule, Reset, Loop };

inline const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Rule: return "RULE";
    case EdgeKind::Reset: return "RESET";
    case EdgeKind::Loop: return "LOOP";
  }
  return "?";
}

// Rule edges from feature-annotated rules carry the instantiated feature ids
// (sorted, deduplicated). Rule edges from fact resolution carry none and act
// as unannotated weight-one edges.
struct Edge {
  int32_t src = 0;
  int32_t dst = 0;
  EdgeKind kind = EdgeKind::Rule;
  std::vector<FeatId> features;
};

// The weighted graph of logic states reached by backward-chaining one query.
// Node 0 is the root (the query itself). Solution nodes are states with no
// goals left; each carries the ground answer its bindings spell out.
struct ProofGraph {
  Atom query;                   // canonical form: variables renamed to 0..k-1
  std::vector<Sym> query_vars;  // original variable symbols, by canonical index

  int32_t node_count = 0;
  static constexpr int32_t kRoot = 0;

  std::vector<Edge> edges;
  std::vector<std::vector<int32_t>> out;  // per node: indices of all outgoing edges

  std::vector<int32_t> solutions;     // ascending node ids
  std::vector<Atom> solution_answer;  // parallel to solutions

  bool truncated = false;
  std::vector<std::string> node_text;  // filled only when requested

  bool is_solution(int32_t node) const {
    for (size_t i = 0; i < solutions.size(); ++i)
      if (solutions[i] == node) return true;
    return false;
  }

  // Solution nodes whose binding instantiates the query to exactly `answer`.
  std::vector<int32_t> answer_nodes(const Atom& answer) const {
    std::vector<int32_t> out_nodes;
    for (size_t i = 0; i < solutions.size(); ++i)
      if (solution_answer[i] == answer) out_nodes.push_back(solutions[i]);
    return out_nodes;
  }

  // Distinct ground answers, in solution-node order.
  std::vector<Atom> answers() const {
    std::vector<Atom> out_answers;
    for (const Atom& a : solution_answer) {
      if (!a.ground()) continue;
      bool seen = false;
      for (const Atom& b : out_answers)
        if (a == b) {
          seen = true;
          break;
        }
      if (!seen) out_answers.push_back(a);
    }
    return out_answers;
  }
};

}  // namespace prowl
