#pragma once

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "prowl/graph.hpp"

namespace prowl {

// Sparse weight vector over feature ids; unseen features read default_weight.
struct ParameterTable {
  std::unordered_map<FeatId, double> weights;
  double default_weight = 0.0;

  double get(FeatId f) const {
    auto it = weights.find(f);
    return it == weights.end() ? default_weight : it->second;
  }
  void set(FeatId f, double v) { weights[f] = v; }
  void add(FeatId f, double dv) {
    auto [it, fresh] = weights.emplace(f, default_weight);
    it->second += dv;
  }
};

struct WalkConfig {
  double alpha = 0.1;       // reset weight, in (0,1)
  int iterations = 40;      // truncation horizon T
  double tolerance = 1e-7;  // early stop on L1 change; 0 forces exactly T steps
};

struct ScoreTable {
  std::vector<double> pi;
  int steps = 0;  // iterations actually executed
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Pre-normalization weight of an edge. Feature-annotated rule edges weigh the
// squashed feature sum; unannotated rule edges and solution self-loops weigh
// one. Reset edges weigh the walk's alpha, supplied by the caller because the
// parameter table has no say in it.
inline double edge_weight(const Edge& e, const ParameterTable& params) {
  switch (e.kind) {
    case EdgeKind::Reset:
      return 0.0;  // alpha-handled by the walk
    case EdgeKind::Loop:
      return 1.0;
    case EdgeKind::Rule: {
      if (e.features.empty()) return 1.0;
      double s = 0.0;
      for (FeatId f : e.features) s += params.get(f);
      return sigmoid(s);
    }
  }
  return 0.0;
}

namespace detail {

inline double walk_edge_weight(const Edge& e, const ParameterTable& params, double alpha) {
  return e.kind == EdgeKind::Reset ? alpha : edge_weight(e, params);
}

// Row-stochastic transitions over every outgoing edge of a node. Reset edges
// enter the normalization with fixed weight alpha, so feature-annotated edges
// compete with the reset for the node's mass; solution nodes have only their
// self-loop and retain it.
struct WalkMatrix {
  std::vector<double> edge_prob;   // per edge index
  std::vector<double> out_weight;  // per node

  void build(const ProofGraph& g, const ParameterTable& params, double alpha) {
    edge_prob.assign(g.edges.size(), 0.0);
    out_weight.assign(static_cast<size_t>(g.node_count), 0.0);
    for (int32_t v = 0; v < g.node_count; ++v) {
      double total = 0.0;
      for (int32_t e : g.out[static_cast<size_t>(v)])
        total += walk_edge_weight(g.edges[static_cast<size_t>(e)], params, alpha);
      out_weight[static_cast<size_t>(v)] = total;
      if (!g.out[static_cast<size_t>(v)].empty() && total <= 0.0)
        throw std::runtime_error("node with zero total outgoing weight in proof graph");
      if (total > 0.0)
        for (int32_t e : g.out[static_cast<size_t>(v)])
          edge_prob[static_cast<size_t>(e)] =
              walk_edge_weight(g.edges[static_cast<size_t>(e)], params, alpha) / total;
    }
  }
};

}  // namespace detail

// Truncated fixed-point iteration of pi <- alpha*e_root + (1-alpha)*pi'M,
// starting from a point mass on the root. Scores sum to one at every step.
inline ScoreTable walk(const ProofGraph& g, const ParameterTable& params,
                       const WalkConfig& cfg) {
  detail::WalkMatrix m;
  m.build(g, params, cfg.alpha);

  size_t n = static_cast<size_t>(g.node_count);
  ScoreTable result;
  result.pi.assign(n, 0.0);
  result.pi[ProofGraph::kRoot] = 1.0;
  std::vector<double> next(n, 0.0);

  for (int t = 0; t < cfg.iterations; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    next[ProofGraph::kRoot] = cfg.alpha;
    for (size_t v = 0; v < n; ++v) {
      double mass = (1.0 - cfg.alpha) * result.pi[v];
      if (mass == 0.0) continue;
      if (g.out[v].empty()) {  // only a root with no matching clause
        next[v] += mass;
        continue;
      }
      for (int32_t e : g.out[v])
        next[static_cast<size_t>(g.edges[static_cast<size_t>(e)].dst)] +=
            mass * m.edge_prob[static_cast<size_t>(e)];
    }
    double l1 = 0.0;
    for (size_t v = 0; v < n; ++v) l1 += std::abs(next[v] - result.pi[v]);
    result.pi.swap(next);
    ++result.steps;
    if (cfg.tolerance > 0.0 && l1 < cfg.tolerance) break;
  }
  return result;
}

// Total score mass on the solution nodes supporting one ground answer.
inline double answer_score(const ProofGraph& g, const ScoreTable& scores, const Atom& answer) {
  double s = 0.0;
  for (int32_t v : g.answer_nodes(answer)) s += scores.pi[static_cast<size_t>(v)];
  return s;
}

}  // namespace prowl
