#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "prowl/grounder.hpp"
#include "prowl/rng.hpp"
#include "prowl/walker.hpp"

namespace prowl {

constexpr double kScoreClip = 1e-12;

inline double clip_score(double s) {
  if (s < kScoreClip) return kScoreClip;
  if (s > 1.0 - kScoreClip) return 1.0 - kScoreClip;
  return s;
}

// -ln of positive-answer scores plus -ln of negative-answer complements,
// clipped away from the log singularities.
inline double example_loss(const ProofGraph& g, const ScoreTable& scores,
                           const TrainingExample& ex) {
  double loss = 0.0;
  for (const Atom& a : ex.positives) loss += -std::log(clip_score(answer_score(g, scores, a)));
  for (const Atom& b : ex.negatives)
    loss += -std::log(clip_score(1.0 - answer_score(g, scores, b)));
  return loss;
}

struct ExampleGradient {
  double loss = 0.0;
  std::vector<std::pair<FeatId, double>> grad;  // sorted by feature id
};

// Exact dloss/dw through the T unrolled walk steps and the squashed edge
// weights. The forward pass here always runs the full horizon (tolerance is
// ignored) so the derivative matches the computed quantity bit for bit.
inline ExampleGradient gradient(const ProofGraph& g, const ParameterTable& params,
                                const WalkConfig& cfg, const TrainingExample& ex) {
  size_t n = static_cast<size_t>(g.node_count);
  size_t t_max = static_cast<size_t>(cfg.iterations);
  double alpha = cfg.alpha;

  std::vector<double> edge_u(g.edges.size(), 0.0);
  std::vector<double> out_w(n, 0.0);
  for (size_t v = 0; v < n; ++v) {
    for (int32_t e : g.out[v]) {
      edge_u[static_cast<size_t>(e)] =
          detail::walk_edge_weight(g.edges[static_cast<size_t>(e)], params, alpha);
      out_w[v] += edge_u[static_cast<size_t>(e)];
    }
    if (!g.out[v].empty() && out_w[v] <= 0.0)
      throw std::runtime_error("node with zero total outgoing weight in proof graph");
  }

  // Forward, keeping every iterate for the reverse sweep.
  std::vector<std::vector<double>> pis(t_max + 1, std::vector<double>(n, 0.0));
  pis[0][ProofGraph::kRoot] = 1.0;
  for (size_t t = 1; t <= t_max; ++t) {
    std::vector<double>& next = pis[t];
    const std::vector<double>& cur = pis[t - 1];
    next[ProofGraph::kRoot] = alpha;
    for (size_t v = 0; v < n; ++v) {
      double mass = (1.0 - alpha) * cur[v];
      if (mass == 0.0) continue;
      if (g.out[v].empty()) {
        next[v] += mass;
        continue;
      }
      for (int32_t e : g.out[v])
        next[static_cast<size_t>(g.edges[static_cast<size_t>(e)].dst)] +=
            mass * edge_u[static_cast<size_t>(e)] / out_w[v];
    }
  }

  ExampleGradient result;
  const std::vector<double>& pi = pis[t_max];

  // Seed dL/dpi at the horizon.
  std::vector<double> gpi(n, 0.0);
  for (const Atom& a : ex.positives) {
    std::vector<int32_t> nodes = g.answer_nodes(a);
    double s = 0.0;
    for (int32_t v : nodes) s += pi[static_cast<size_t>(v)];
    result.loss += -std::log(clip_score(s));
    if (s > kScoreClip && s < 1.0 - kScoreClip)
      for (int32_t v : nodes) gpi[static_cast<size_t>(v)] += -1.0 / s;
  }
  for (const Atom& b : ex.negatives) {
    std::vector<int32_t> nodes = g.answer_nodes(b);
    double s = 0.0;
    for (int32_t v : nodes) s += pi[static_cast<size_t>(v)];
    result.loss += -std::log(clip_score(1.0 - s));
    if (1.0 - s > kScoreClip && 1.0 - s < 1.0 - kScoreClip)
      for (int32_t v : nodes) gpi[static_cast<size_t>(v)] += 1.0 / (1.0 - s);
  }

  // Reverse sweep: accumulate dL/d(p_e) and push dL/dpi backward.
  std::vector<double> gedge(g.edges.size(), 0.0);
  std::vector<double> gprev(n, 0.0);
  for (size_t t = t_max; t >= 1; --t) {
    const std::vector<double>& cur = pis[t - 1];
    std::fill(gprev.begin(), gprev.end(), 0.0);
    for (size_t v = 0; v < n; ++v) {
      if (g.out[v].empty()) {
        gprev[v] = (1.0 - alpha) * gpi[v];
        continue;
      }
      double acc = 0.0;
      for (int32_t e : g.out[v]) {
        size_t ei = static_cast<size_t>(e);
        double gd = gpi[static_cast<size_t>(g.edges[ei].dst)];
        acc += edge_u[ei] / out_w[v] * gd;
        gedge[ei] += (1.0 - alpha) * cur[v] * gd;
      }
      gprev[v] = (1.0 - alpha) * acc;
    }
    gpi.swap(gprev);
  }

  // Through the row normalization and the squashing function.
  std::unordered_map<FeatId, double> grad;
  for (size_t v = 0; v < n; ++v) {
    if (g.out[v].empty()) continue;
    double dot = 0.0;
    for (int32_t e : g.out[v])
      dot += gedge[static_cast<size_t>(e)] * edge_u[static_cast<size_t>(e)] / out_w[v];
    for (int32_t e : g.out[v]) {
      size_t ei = static_cast<size_t>(e);
      const Edge& edge = g.edges[ei];
      if (edge.kind != EdgeKind::Rule || edge.features.empty()) continue;
      double du = (gedge[ei] - dot) / out_w[v];
      double dsig = edge_u[ei] * (1.0 - edge_u[ei]);
      double dfeat = du * dsig;
      if (dfeat == 0.0) continue;
      for (FeatId f : edge.features) grad[f] += dfeat;
    }
  }
  result.grad.assign(grad.begin(), grad.end());
  std::sort(result.grad.begin(), result.grad.end());
  return result;
}

struct SgdConfig {
  int epochs = 40;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  uint64_t seed = 13;
  int batch = 1;
  bool shuffle = true;
  bool decay = true;  // per-epoch 1/sqrt(epoch) learning-rate schedule
  int threads = 1;

  static constexpr int kEpochCap = 10000;
};

struct GroundedExample {
  std::shared_ptr<const ProofGraph> graph;  // null when grounding failed
  TrainingExample ex;
};

struct TrainResult {
  ParameterTable params;
  std::vector<double> epoch_mean_loss;
  int skipped = 0;  // examples whose query failed to ground
  int vacuous = 0;  // queries that ground to a graph with no solutions
};

inline std::vector<GroundedExample> ground_examples(const Program& program,
                                                    const std::vector<TrainingExample>& examples,
                                                    const GroundingLimits& limits,
                                                    const SymbolTable& syms,
                                                    FeatureTable& feats) {
  std::vector<GroundedExample> out;
  out.reserve(examples.size());
  Grounder grounder(program, syms, feats);
  for (const TrainingExample& ex : examples) {
    GroundedExample ge;
    ge.ex = ex;
    try {
      ge.graph = std::make_shared<ProofGraph>(grounder.ground(ex.query, limits));
    } catch (const GroundingError&) {
      ge.graph = nullptr;
    }
    out.push_back(std::move(ge));
  }
  return out;
}

// Epoch-based SGD over pre-grounded examples. Supervised and constraint
// examples arrive pooled in one stream with equal per-example weight; the
// caller controls the mix by what it materializes.
inline TrainResult train_grounded(const std::vector<GroundedExample>& examples,
                                  const WalkConfig& walk_cfg, const SgdConfig& sgd,
                                  const ParameterTable* initial = nullptr) {
  TrainResult result;
  if (initial) result.params = *initial;

  WalkConfig fixed = walk_cfg;
  fixed.tolerance = 0.0;  // gradients differentiate the full fixed-T truncation

  std::vector<size_t> usable;
  for (size_t i = 0; i < examples.size(); ++i) {
    if (!examples[i].graph) {
      ++result.skipped;
      continue;
    }
    if (examples[i].graph->solutions.empty()) ++result.vacuous;
    usable.push_back(i);
  }
  if (usable.empty()) return result;

  rng::Stream shuffle_rng = rng::fork(sgd.seed, "sgd.shuffle");
  std::vector<size_t> order = usable;
  int epochs = std::min(sgd.epochs, SgdConfig::kEpochCap);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    if (sgd.shuffle) rng::shuffle(order, shuffle_rng);
    double lr = sgd.decay ? sgd.learning_rate / std::sqrt(static_cast<double>(epoch))
                          : sgd.learning_rate;
    double loss_sum = 0.0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(sgd.batch)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(sgd.batch));
      std::vector<ExampleGradient> grads(stop - start);

      auto compute = [&](size_t lo, size_t hi) {
        for (size_t k = lo; k < hi; ++k) {
          const GroundedExample& ge = examples[order[start + k]];
          grads[k] = gradient(*ge.graph, result.params, fixed, ge.ex);
        }
      };
      size_t count = stop - start;
      if (sgd.threads > 1 && count > 1) {
        size_t nthreads = std::min<size_t>(static_cast<size_t>(sgd.threads), count);
        std::vector<std::thread> pool;
        size_t chunk = (count + nthreads - 1) / nthreads;
        for (size_t t = 0; t < nthreads; ++t) {
          size_t lo = t * chunk, hi = std::min(count, lo + chunk);
          if (lo < hi) pool.emplace_back(compute, lo, hi);
        }
        for (std::thread& th : pool) th.join();
      } else {
        compute(0, count);
      }

      // Average the batch and apply one step with sparse L2 decay.
      std::unordered_map<FeatId, double> combined;
      for (const ExampleGradient& eg : grads) {
        loss_sum += eg.loss;
        for (const auto& [f, v] : eg.grad) combined[f] += v;
      }
      std::vector<std::pair<FeatId, double>> step(combined.begin(), combined.end());
      std::sort(step.begin(), step.end());
      double scale = 1.0 / static_cast<double>(count);
      for (const auto& [f, v] : step) {
        double w = result.params.get(f);
        result.params.set(f, w - lr * (v * scale + sgd.l2 * w));
      }
    }
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return result;
}

inline TrainResult train(const Program& program, const std::vector<TrainingExample>& examples,
                         const WalkConfig& walk_cfg, const SgdConfig& sgd,
                         const GroundingLimits& limits, const SymbolTable& syms,
                         FeatureTable& feats, const ParameterTable* initial = nullptr) {
  std::vector<GroundedExample> grounded = ground_examples(program, examples, limits, syms, feats);
  return train_grounded(grounded, walk_cfg, sgd, initial);
}

// ---- model and log serialization ---------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// TSV `featureString<TAB>weight`, sorted by feature string.
inline void write_model(std::ostream& os, const ParameterTable& params,
                        const FeatureTable& feats) {
  std::vector<std::pair<std::string, double>> rows;
  rows.reserve(params.weights.size());
  for (const auto& [f, w] : params.weights) rows.emplace_back(feats.name(f), w);
  std::sort(rows.begin(), rows.end());
  for (const auto& [name, w] : rows) os << name << "\t" << format_double(w) << "\n";
}

inline ParameterTable load_model(std::string_view text, FeatureTable& feats) {
  ParameterTable params;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    size_t tab = line.rfind('\t');
    if (tab == std::string_view::npos)
      throw std::runtime_error("bad model line: " + std::string(line));
    params.set(feats.intern(line.substr(0, tab)),
               std::stod(std::string(line.substr(tab + 1))));
  }
  return params;
}

inline void write_training_log(std::ostream& os, const TrainResult& r) {
  os << "epoch,mean_loss,examples_skipped\n";
  for (size_t i = 0; i < r.epoch_mean_loss.size(); ++i)
    os << (i + 1) << "," << format_double(r.epoch_mean_loss[i]) << "," << r.skipped << "\n";
}

}  // namespace prowl
