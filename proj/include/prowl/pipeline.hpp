#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "prowl/budget_io.hpp"
#include "prowl/constraints.hpp"
#include "prowl/datasets.hpp"
#include "prowl/entity.hpp"
#include "prowl/evaluate.hpp"
#include "prowl/grounder.hpp"
#include "prowl/learner.hpp"
#include "prowl/tuner.hpp"
#include "prowl/walker.hpp"

namespace prowl {

struct TaskConfig {
  WalkConfig walk;
  GroundingLimits limits;
  SgdConfig sgd;
};

namespace detail {

// Queries are cached per installed-template set: the same query grounds to
// the same graph across tuning trials that share an install mask, because
// trial budgets change only how many penalty examples are materialized.
inline std::string install_mask(const ConstraintBudget& budget) {
  std::string mask;
  for (ConstraintKind k : all_constraint_kinds())
    if (budget.counts.count(kind_name(k))) mask += kind_name(k), mask += ';';
  return mask;
}

}  // namespace detail

class GroundCache {
 public:
  std::shared_ptr<const ProofGraph> get(const Program& program, const Atom& query,
                                        const std::string& mask, const GroundingLimits& limits,
                                        const SymbolTable& syms, FeatureTable& feats) {
    std::string key = mask + to_string(query, syms);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::shared_ptr<const ProofGraph> graph;
    try {
      graph = std::make_shared<ProofGraph>(ground(program, query, limits, syms, feats));
    } catch (const GroundingError&) {
      graph = nullptr;
    }
    cache_.emplace(std::move(key), graph);
    return graph;
  }

  size_t size() const { return cache_.size(); }

 private:
  std::map<std::string, std::shared_ptr<const ProofGraph>> cache_;
};

// Argmax prediction for one query graph; ties break toward the smaller label
// string. The instance is the query's first argument, the label its last.
inline std::optional<Prediction> predict_one(const ProofGraph& graph,
                                             const ParameterTable& params,
                                             const WalkConfig& walk_cfg,
                                             const SymbolTable& syms) {
  ScoreTable pi = walk(graph, params, walk_cfg);
  std::optional<Prediction> best;
  for (const Atom& answer : graph.answers()) {
    double score = answer_score(graph, pi, answer);
    std::string label = syms.name(answer.args.back().sym);
    if (!best || score > best->score || (score == best->score && label < best->label)) {
      best = Prediction{syms.name(answer.args.front().sym), label, score};
    }
  }
  return best;
}

// ---- link-based classification -----------------------------------------

class ClassifyPipeline {
 public:
  SymbolTable syms;
  FeatureTable feats;

  void load_program(const std::string& text) {
    Program parsed = parse_program(text, syms);
    for (Rule& r : parsed.rules) base_.add_rule(std::move(r));
    for (const Atom& f : parsed.facts.all()) base_.facts.add(f);
  }

  void load_facts(const std::string& text) {
    FactSet fs = parse_facts(text, syms);
    for (const Atom& f : fs.all()) base_.facts.add(f);
  }

  void load_supervised(const std::string& text) {
    for (TrainingExample& ex : parse_examples(text, syms))
      supervised_.push_back(std::move(ex));
  }

  void load_citation_supervised(const std::string& text) {
    for (TrainingExample& ex : parse_examples(text, syms))
      citation_supervised_.push_back(std::move(ex));
  }

  // One id per line.
  void load_unlabeled(const std::string& text) {
    size_t start = 0;
    while (start < text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(start, end - start);
      start = end + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) unlabeled_.push_back({line, "", ""});
    }
  }

  // Label set from the pickLabel facts; labeled pool from the supervised
  // positives (the instances whose true label is known).
  void finalize() {
    labels_ = LabelSets{};
    auto pick = syms.lookup("pickLabel");
    if (pick)
      for (int idx : base_.facts.by_pred(*pick))
        labels_.labels.push_back(syms.name(base_.facts.fact(idx).args[0].sym));
    if (labels_.labels.empty())
      throw std::runtime_error("no pickLabel facts: label set unknown");
    labeled_.clear();
    for (const TrainingExample& ex : supervised_)
      if (!ex.positives.empty())
        labeled_.push_back({syms.name(ex.query.args.front().sym), "",
                            syms.name(ex.positives.front().args.back().sym)});
  }

  const LabelSets& labels() const { return labels_; }
  const std::vector<TrainingExample>& supervised() const { return supervised_; }
  const Program& base_program() const { return base_; }
  size_t unlabeled_pool_size() const { return unlabeled_.size(); }
  size_t labeled_pool_size() const { return labeled_.size(); }

  struct Prepared {
    Program program;
    std::vector<TrainingExample> examples;
    std::string mask;
    long clamped = 0;  // budget counts reduced to their pool size
  };

  // Install every template named in the budget (count zero included, so the
  // program is stable across tuning trials) and materialize the requested
  // example counts on top of the supervised stream.
  Prepared prepare(const ConstraintBudget& budget, bool clamp_to_pool = false) {
    Prepared out;
    out.program = base_;
    out.mask = detail::install_mask(budget);
    for (ConstraintKind k : all_constraint_kinds())
      if (budget.counts.count(kind_name(k)))
        out.program = install(k, out.program, labels_, syms, TaskMode::Link);

    out.examples = supervised_;
    bool co_active = budget.get(ConstraintKind::Co) > 0;
    if (co_active)
      out.examples.insert(out.examples.end(), citation_supervised_.begin(),
                          citation_supervised_.end());

    for (ConstraintKind k : all_constraint_kinds()) {
      long count = budget.get(k);
      if (count <= 0) continue;
      const std::vector<PoolItem>& pool =
          (k == ConstraintKind::Lp1 || k == ConstraintKind::Lp2) ? labeled_ : unlabeled_;
      if (clamp_to_pool && count > static_cast<long>(pool.size())) {
        out.clamped += count - static_cast<long>(pool.size());
        count = static_cast<long>(pool.size());
      }
      for (TrainingExample& ex : materialize(k, pool, count, budget.seed, syms))
        out.examples.push_back(std::move(ex));
    }
    return out;
  }

  TrainResult train_budget(const ConstraintBudget& budget, const TaskConfig& cfg,
                           bool clamp_to_pool = false) {
    Prepared p = prepare(budget, clamp_to_pool);
    std::vector<GroundedExample> grounded;
    grounded.reserve(p.examples.size());
    for (TrainingExample& ex : p.examples) {
      GroundedExample ge;
      ge.graph = cache_.get(p.program, ex.query, p.mask, cfg.limits, syms, feats);
      ge.ex = std::move(ex);
      grounded.push_back(std::move(ge));
    }
    return train_grounded(grounded, cfg.walk, cfg.sgd);
  }

  // Queries come from example files; gold is the positive answer.
  std::vector<Prediction> predict(const ParameterTable& params,
                                  const std::vector<TrainingExample>& queries,
                                  const ConstraintBudget& budget, const TaskConfig& cfg) {
    Prepared p = prepare_program_only(budget);
    std::vector<Prediction> preds;
    for (const TrainingExample& q : queries) {
      auto graph = cache_.get(p.program, q.query, p.mask, cfg.limits, syms, feats);
      if (!graph) throw std::runtime_error("query failed to ground: " + to_string(q.query, syms));
      auto pred = predict_one(*graph, params, cfg.walk, syms);
      if (!pred) throw std::runtime_error("query has no answers: " + to_string(q.query, syms));
      preds.push_back(std::move(*pred));
    }
    return preds;
  }

  double accuracy_on(const ParameterTable& params, const std::vector<TrainingExample>& queries,
                     const ConstraintBudget& budget, const TaskConfig& cfg) {
    std::unordered_map<std::string, std::string> gold;
    for (const TrainingExample& q : queries) {
      if (q.positives.empty())
        throw std::runtime_error("evaluation example without a positive answer");
      gold[syms.name(q.query.args.front().sym)] =
          syms.name(q.positives.front().args.back().sym);
    }
    return accuracy(predict(params, queries, budget, cfg), gold);
  }

 private:
  Prepared prepare_program_only(const ConstraintBudget& budget) {
    Prepared out;
    out.program = base_;
    out.mask = detail::install_mask(budget);
    for (ConstraintKind k : all_constraint_kinds())
      if (budget.counts.count(kind_name(k)))
        out.program = install(k, out.program, labels_, syms, TaskMode::Link);
    return out;
  }

  Program base_;
  std::vector<TrainingExample> supervised_;
  std::vector<TrainingExample> citation_supervised_;
  std::vector<PoolItem> unlabeled_;
  std::vector<PoolItem> labeled_;
  LabelSets labels_;
  GroundCache cache_;
};

// ---- entity-centric relation extraction ----------------------------------

class RelationPipeline {
 public:
  SymbolTable syms;
  FeatureTable feats;

  void load_program(const std::string& text) {
    Program parsed = parse_program(text, syms);
    for (Rule& r : parsed.rules) base_.add_rule(std::move(r));
    for (const Atom& f : parsed.facts.all()) base_.facts.add(f);
  }

  void load_facts(const std::string& text) {
    FactSet fs = parse_facts(text, syms);
    for (const Atom& f : fs.all()) base_.facts.add(f);
  }

  void load_corpus(const std::string& text) {
    corpus_ = load_entity_corpus(text);
    load_facts(emit_mention_facts(corpus_));
    labels_ = LabelSets{};
    for (const std::string& l : corpus_.relation_labels)
      labels_.labels.push_back(safe_token(l));
    for (const std::string& t : corpus_.type_labels)
      labels_.type_labels.push_back(safe_token(t));
    for (const auto& [rel, type] : corpus_.range_map)
      labels_.range.emplace_back(safe_token(rel), safe_token(type));
    labels_.other_label = safe_token("Other");

    for (const std::string& l : labels_.labels) {
      Atom f;
      f.pred = syms.intern("pickLabel");
      f.args = {Term::constant(syms.intern(l))};
      base_.facts.add(f);
    }
    for (const std::string& t : labels_.type_labels) {
      Atom f;
      f.pred = syms.intern("pickLabelT");
      f.args = {Term::constant(syms.intern(t))};
      base_.facts.add(f);
    }

    mention_pool_.clear();
    for (const EntityMention& m : corpus_.mentions) mention_pool_.push_back({safe_token(m.id), "", ""});
    auto pair_pool = [&](const std::vector<std::pair<int, int>>& pairs) {
      std::vector<PoolItem> out;
      for (const auto& [a, b] : pairs)
        out.push_back({safe_token(corpus_.mentions[static_cast<size_t>(a)].id),
                       safe_token(corpus_.mentions[static_cast<size_t>(b)].id), ""});
      return out;
    };
    doc_pool_ = pair_pool(corpus_.doc_pairs);
    sent_pool_ = pair_pool(corpus_.sent_pairs);
    title_pool_ = pair_pool(corpus_.title_pairs);
  }

  void load_relation_examples(const std::string& text) { relation_ranked_ = text; }
  void load_negative_relation_examples(const std::string& text) { neg_relation_ranked_ = text; }
  void load_type_examples(const std::string& text) { type_ranked_ = text; }
  void load_negative_type_examples(const std::string& text) { neg_type_ranked_ = text; }

  const EntityCorpus& corpus() const { return corpus_; }
  const LabelSets& labels() const { return labels_; }

  struct Prepared {
    Program program;
    std::vector<TrainingExample> examples;
    std::string mask;
    long clamped = 0;
  };

  Prepared prepare(const ConstraintBudget& budget, bool clamp_to_pool = false) {
    Prepared out;
    out.program = base_;
    out.mask = detail::install_mask(budget);
    for (ConstraintKind k : all_constraint_kinds())
      if (budget.counts.count(kind_name(k)))
        out.program = install(k, out.program, labels_, syms, TaskMode::Relation);

    auto ingest = [&](const std::string& text, const char* key) {
      if (text.empty()) return;
      long k = budget.counts.count(key) ? budget.get(key) : -1;
      for (TrainingExample& ex : load_ranked_examples(text, syms, k))
        out.examples.push_back(std::move(ex));
    };
    ingest(relation_ranked_, "R");
    ingest(neg_relation_ranked_, "NR");
    ingest(type_ranked_, "T");
    ingest(neg_type_ranked_, "NT");

    for (ConstraintKind k : all_constraint_kinds()) {
      long count = budget.get(k);
      if (count <= 0) continue;
      const std::vector<PoolItem>* pool = &mention_pool_;
      if (k == ConstraintKind::Doc) pool = &doc_pool_;
      if (k == ConstraintKind::Sent) pool = &sent_pool_;
      if (k == ConstraintKind::Title) pool = &title_pool_;
      if (clamp_to_pool && count > static_cast<long>(pool->size())) {
        out.clamped += count - static_cast<long>(pool->size());
        count = static_cast<long>(pool->size());
      }
      for (TrainingExample& ex : materialize(k, *pool, count, budget.seed, syms))
        out.examples.push_back(std::move(ex));
    }
    return out;
  }

  TrainResult train_budget(const ConstraintBudget& budget, const TaskConfig& cfg,
                           bool clamp_to_pool = false) {
    Prepared p = prepare(budget, clamp_to_pool);
    std::vector<GroundedExample> grounded;
    grounded.reserve(p.examples.size());
    for (TrainingExample& ex : p.examples) {
      GroundedExample ge;
      ge.graph = cache_.get(p.program, ex.query, p.mask, cfg.limits, syms, feats);
      ge.ex = std::move(ex);
      grounded.push_back(std::move(ge));
    }
    return train_grounded(grounded, cfg.walk, cfg.sgd);
  }

  // One relation prediction per mention, via predictR(mention, Y).
  std::vector<Prediction> predict_mentions(const ParameterTable& params,
                                           const ConstraintBudget& budget,
                                           const TaskConfig& cfg) {
    Prepared p = prepare(ConstraintBudget{{}, budget.seed}, false);
    std::vector<Prediction> preds;
    for (const EntityMention& m : corpus_.mentions) {
      Atom query;
      query.pred = syms.intern("predictR");
      query.args = {Term::constant(syms.intern(safe_token(m.id))),
                    Term::variable(syms.intern("Y"))};
      auto graph = cache_.get(p.program, query, p.mask, cfg.limits, syms, feats);
      if (!graph || graph->solutions.empty())
        throw std::runtime_error("mention query failed to ground: " + safe_token(m.id));
      auto pred = predict_one(*graph, params, cfg.walk, syms);
      preds.push_back(std::move(*pred));
    }
    return preds;
  }

  // IR view: every (document, real relation) pair is a query; the NPs of
  // mentions predicted with that relation are the retrieval results and the
  // NPs of gold-annotated mentions are the gold set.
  std::vector<ExtractionResult> extraction_results(const std::vector<Prediction>& preds) {
    std::unordered_map<std::string, const Prediction*> by_mention;
    for (const Prediction& p : preds) by_mention.emplace(p.instance, &p);

    std::vector<ExtractionResult> out;
    for (size_t d = 0; d < corpus_.documents.size(); ++d) {
      for (const std::string& rel : corpus_.relation_labels) {
        if (rel == "Other") continue;
        ExtractionResult r;
        r.entity = corpus_.documents[d].subject;
        r.relation = rel;
        for (const EntityMention& m : corpus_.mentions) {
          if (m.doc != static_cast<int>(d)) continue;
          if (m.gold_relation == rel)
            for (const std::string& np : m.nps) r.gold.insert(np);
          auto it = by_mention.find(safe_token(m.id));
          if (it != by_mention.end() && unsafe_token(it->second->label) == rel)
            for (const std::string& np : m.nps) r.add_retrieved(np, it->second->score);
        }
        if (!r.gold.empty() || !r.retrieved.empty()) out.push_back(std::move(r));
      }
    }
    return out;
  }

  PrfResult prf_on(const ParameterTable& params, const ConstraintBudget& budget,
                   const TaskConfig& cfg, double threshold) {
    return prf(extraction_results(predict_mentions(params, budget, cfg)), threshold);
  }

 private:
  Program base_;
  EntityCorpus corpus_;
  LabelSets labels_;
  std::string relation_ranked_, neg_relation_ranked_, type_ranked_, neg_type_ranked_;
  std::vector<PoolItem> mention_pool_, doc_pool_, sent_pool_, title_pool_;
  GroundCache cache_;
};

// ---- search-space presets -------------------------------------------------

// Tuning grids for the published datasets; ranges follow the reported tuning
// tables, steps chosen to divide the ranges evenly.
inline SearchSpace builtin_space(const std::string& name) {
  auto link = [](long cap, long lp_cap, long big_step) {
    return SearchSpace::make({SearchDim{"cF", 0, cap, big_step},
                              SearchDim{"lpF1", 0, lp_cap, 10},
                              SearchDim{"lpF2", 0, lp_cap, 10},
                              SearchDim{"mFT", 0, cap, big_step},
                              SearchDim{"mFC", 0, cap, big_step},
                              SearchDim{"sF", 0, cap, big_step}});
  };
  if (name == "citeseer") return link(2192, 120, 137);
  if (name == "cora") return link(1568, 140, 98);
  if (name == "pubmed") return link(4940, 60, 247);
  if (name == "disease")
    return SearchSpace::make(
        {SearchDim{"R", 10, 5000, 10}, SearchDim{"NR", 0, 10000, 100},
         SearchDim{"T", 0, 10000, 200}, SearchDim{"NT", 0, 20000, 1000},
         SearchDim{"cF", 0, 100000, 10000}, SearchDim{"mFR", 0, 20000, 2000},
         SearchDim{"mFT", 0, 20000, 2000}, SearchDim{"dF", 0, 30000, 2000},
         SearchDim{"sF", 0, 80000, 2000}, SearchDim{"tF", 0, 30000, 2000}});
  if (name == "drug")
    return SearchSpace::make(
        {SearchDim{"R", 10, 5000, 10}, SearchDim{"NR", 0, 10000, 100},
         SearchDim{"T", 0, 10000, 200}, SearchDim{"NT", 0, 20000, 1000},
         SearchDim{"cF", 0, 100000, 10000}, SearchDim{"mFR", 0, 20000, 2000},
         SearchDim{"mFT", 0, 20000, 2000}, SearchDim{"dF", 0, 20000, 2000},
         SearchDim{"sF", 0, 20000, 2000}, SearchDim{"tF", 0, 20000, 2000}});
  throw std::runtime_error("unknown space preset: " + name);
}

// Space files: a JSON array of {name, lower, upper, step}.
inline SearchSpace parse_space(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const nlohmann::json& arr = j.is_object() && j.contains("dims") ? j["dims"] : j;
  if (!arr.is_array()) throw std::runtime_error("space file must be a JSON array of dims");
  std::vector<SearchDim> dims;
  for (const auto& d : arr)
    dims.push_back(SearchDim{d.at("name").get<std::string>(), d.at("lower").get<long>(),
                             d.at("upper").get<long>(), d.at("step").get<long>()});
  return SearchSpace::make(dims);
}

// A tuner assignment becomes a budget through the task-mode aliases.
inline ConstraintBudget assignment_to_budget(const SearchSpace& space,
                                             const std::vector<long>& values, TaskMode mode,
                                             uint64_t seed) {
  ConstraintBudget budget;
  budget.seed = seed;
  for (size_t d = 0; d < space.dims.size(); ++d) {
    const std::string& name = space.dims[d].name;
    if (name == "R" || name == "NR" || name == "T" || name == "NT") {
      budget.counts[name] = values[d];
      continue;
    }
    auto kind = kind_from_name(name, mode);
    if (!kind) throw std::runtime_error("space dimension " + name + " is not a constraint");
    budget.counts[kind_name(*kind)] = values[d];
  }
  return budget;
}

}  // namespace prowl
