#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prowl/ast.hpp"
#include "prowl/parser.hpp"
#include "prowl/rng.hpp"

namespace prowl {

// The constraint templates: each one contributes rules to the program,
// materializes its support facts from the label sets, and turns pool items
// into penalty examples.
enum class ConstraintKind {
  MutexT,   // mutual exclusion, text-view (link) or type (relation) classifier
  MutexC,   // mutual exclusion, citation-view classifier
  MutexR,   // mutual exclusion, relation classifier
  Co,       // two-view co-training agreement (link task)
  CoRT,     // relation/type range agreement (relation task)
  Lp1,      // one-step label propagation
  Lp2,      // two-step label propagation
  Smooth,   // neighbor smoothing
  Smooth2,  // two-step neighbor smoothing
  Doc,      // same-document same-NP mention pairs
  Sent,     // single-relation-per-sentence mention pairs
  Title,    // matching-section-title mention pairs across documents
};

enum class TaskMode { Link, Relation };

inline const char* kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::MutexT: return "mutexT";
    case ConstraintKind::MutexC: return "mutexC";
    case ConstraintKind::MutexR: return "mutexR";
    case ConstraintKind::Co: return "co";
    case ConstraintKind::CoRT: return "coRT";
    case ConstraintKind::Lp1: return "lp1";
    case ConstraintKind::Lp2: return "lp2";
    case ConstraintKind::Smooth: return "smooth";
    case ConstraintKind::Smooth2: return "smooth2";
    case ConstraintKind::Doc: return "doc";
    case ConstraintKind::Sent: return "sent";
    case ConstraintKind::Title: return "title";
  }
  return "?";
}

inline const std::vector<ConstraintKind>& all_constraint_kinds() {
  static const std::vector<ConstraintKind> kinds = {
      ConstraintKind::MutexT, ConstraintKind::MutexC, ConstraintKind::MutexR,
      ConstraintKind::Co,     ConstraintKind::CoRT,   ConstraintKind::Lp1,
      ConstraintKind::Lp2,    ConstraintKind::Smooth, ConstraintKind::Smooth2,
      ConstraintKind::Doc,    ConstraintKind::Sent,   ConstraintKind::Title};
  return kinds;
}

// Short parameter names from the tuning tables, task-dependent: #sF counts
// smoothing examples in the link task but sentence examples in extraction.
inline std::optional<ConstraintKind> kind_from_name(const std::string& name, TaskMode mode) {
  for (ConstraintKind k : all_constraint_kinds())
    if (name == kind_name(k)) return k;
  if (mode == TaskMode::Link) {
    if (name == "cF") return ConstraintKind::Co;
    if (name == "lpF1") return ConstraintKind::Lp1;
    if (name == "lpF2") return ConstraintKind::Lp2;
    if (name == "mFT") return ConstraintKind::MutexT;
    if (name == "mFC") return ConstraintKind::MutexC;
    if (name == "sF") return ConstraintKind::Smooth;
  } else {
    if (name == "cF") return ConstraintKind::CoRT;
    if (name == "mFR") return ConstraintKind::MutexR;
    if (name == "mFT") return ConstraintKind::MutexT;
    if (name == "dF") return ConstraintKind::Doc;
    if (name == "sF") return ConstraintKind::Sent;
    if (name == "tF") return ConstraintKind::Title;
  }
  return std::nullopt;
}

// Penalty goal predicate of each template.
inline const char* failure_predicate(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::MutexT: return "mutexFailureT";
    case ConstraintKind::MutexC: return "mutexFailureC";
    case ConstraintKind::MutexR: return "mutexFailureR";
    case ConstraintKind::Co: return "coFailure";
    case ConstraintKind::CoRT: return "coFailure";
    case ConstraintKind::Lp1: return "lpFailure1";
    case ConstraintKind::Lp2: return "lpFailure2";
    case ConstraintKind::Smooth: return "smoothFailure";
    case ConstraintKind::Smooth2: return "smoothFailure2";
    case ConstraintKind::Doc: return "docFailure";
    case ConstraintKind::Sent: return "sentFailure";
    case ConstraintKind::Title: return "titleFailure";
  }
  return "?";
}

struct LabelSets {
  std::vector<std::string> labels;       // class labels (link) or relation labels
  std::vector<std::string> type_labels;  // relation task only
  std::vector<std::pair<std::string, std::string>> range;  // relation -> range type
  std::string other_label = "Other";
};

struct ConstraintBudget {
  std::map<std::string, long> counts;  // canonical template names + R/NR/T/NT
  uint64_t seed = 13;

  long get(ConstraintKind k) const {
    auto it = counts.find(kind_name(k));
    return it == counts.end() ? 0 : it->second;
  }
  long get(const std::string& key) const {
    auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }
};

namespace detail {

inline void add_fact2(Program& p, SymbolTable& syms, const char* pred, const std::string& a,
                      const std::string& b) {
  Atom f;
  f.pred = syms.intern(pred);
  f.args = {Term::constant(syms.intern(a)), Term::constant(syms.intern(b))};
  p.facts.add(f);
}

inline void add_fact1(Program& p, SymbolTable& syms, const char* pred, const std::string& a) {
  Atom f;
  f.pred = syms.intern(pred);
  f.args = {Term::constant(syms.intern(a))};
  p.facts.add(f);
}

inline void add_ordered_pairs(Program& p, SymbolTable& syms, const char* pred,
                              const std::vector<std::string>& labels) {
  for (const std::string& y1 : labels)
    for (const std::string& y2 : labels)
      if (y1 != y2) add_fact2(p, syms, pred, y1, y2);
}

// near(a,b) and near(b,a) for every cites(a,b) already in the program.
inline void add_near_facts(Program& p, SymbolTable& syms) {
  auto cites = syms.lookup("cites");
  if (!cites) return;
  std::vector<Atom> snapshot;
  for (int idx : p.facts.by_pred(*cites)) snapshot.push_back(p.facts.fact(idx));
  Sym near = syms.intern("near");
  for (const Atom& c : snapshot) {
    Atom f;
    f.pred = near;
    f.args = {c.args[0], c.args[1]};
    p.facts.add(f);
    f.args = {c.args[1], c.args[0]};
    p.facts.add(f);
  }
}

inline void append_rules(Program& p, const std::string& source, SymbolTable& syms) {
  Program parsed = parse_program(source, syms);
  for (Rule& r : parsed.rules) p.add_rule(std::move(r));
}

}  // namespace detail

// Returns a copy of the program extended with the template's rules and its
// materialized support facts. The base classifier rules the template refers
// to are the caller's responsibility (they live in the task program).
inline Program install(ConstraintKind kind, const Program& program, const LabelSets& labels,
                       SymbolTable& syms, TaskMode mode) {
  if (labels.labels.empty()) throw std::runtime_error("install: empty label set");
  Program out = program;

  std::vector<std::string> real_labels;
  for (const std::string& l : labels.labels)
    if (l != labels.other_label) real_labels.push_back(l);

  auto install_real_label_facts = [&] {
    for (const std::string& l : real_labels) detail::add_fact1(out, syms, "pickRealLabel", l);
  };

  switch (kind) {
    case ConstraintKind::MutexT:
      if (mode == TaskMode::Link) {
        detail::append_rules(out,
                             "mutexFailureT(X) :- pickMutex(Y1,Y2), classifyT(X,Y1), "
                             "classifyT(X,Y2).",
                             syms);
        detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      } else {
        if (labels.type_labels.empty())
          throw std::runtime_error("install mutexT: no type labels");
        detail::append_rules(out,
                             "mutexFailureT(X) :- pickMutexT(T1,T2), classifyT(X,T1), "
                             "classifyT(X,T2).",
                             syms);
        detail::add_ordered_pairs(out, syms, "pickMutexT", labels.type_labels);
      }
      break;
    case ConstraintKind::MutexC:
      detail::append_rules(
          out, "mutexFailureC(X) :- pickMutex(Y1,Y2), classifyC(X,Y1), classifyC(X,Y2).",
          syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      break;
    case ConstraintKind::MutexR:
      detail::append_rules(
          out, "mutexFailureR(X) :- pickMutex(Y1,Y2), classify(X,Y1), classify(X,Y2).", syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      break;
    case ConstraintKind::Co:
      detail::append_rules(out,
                           "coFailure(X) :- pickMutex(Y1,Y2), classifyT(X,Y1), "
                           "classifyC(X,Y2).\n"
                           "coFailure(X) :- pickMutex(Y1,Y2), classifyC(X,Y1), "
                           "classifyT(X,Y2).",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      break;
    case ConstraintKind::CoRT: {
      if (labels.range.empty()) throw std::runtime_error("install coRT: no range mapping");
      if (labels.type_labels.empty()) throw std::runtime_error("install coRT: no type labels");
      detail::append_rules(out,
                           "coFailure(X) :- predictR(X,Y), pickRealLabel(Y), inRangeT(Y,T1), "
                           "pickMutexT(T1,T2), predictT(X,T2).",
                           syms);
      install_real_label_facts();
      detail::add_ordered_pairs(out, syms, "pickMutexT", labels.type_labels);
      for (const auto& [rel, type] : labels.range) {
        bool known_rel = false;
        for (const std::string& l : labels.labels) known_rel |= (l == rel);
        bool known_type = false;
        for (const std::string& t : labels.type_labels) known_type |= (t == type);
        if (!known_rel || !known_type)
          throw std::runtime_error("install coRT: unknown label in range entry " + rel);
        detail::add_fact2(out, syms, "inRangeT", rel, type);
      }
      for (const std::string& l : labels.labels) detail::add_fact1(out, syms, "pickLabel", l);
      for (const std::string& t : labels.type_labels)
        detail::add_fact1(out, syms, "pickLabelT", t);
      break;
    }
    case ConstraintKind::Lp1:
      detail::append_rules(out,
                           "lpFailure1(X,Y) :- sim1(X,Z), pickMutex(Y,NY), predictT(Z,NY).\n"
                           "lpFailure1(X,Y) :- sim1(X,Z), pickMutex(NY,Y), predictT(Z,NY).\n"
                           "sim1(X1,X2) :- near(X1,Z), sim1(Z,X2).\n"
                           "sim1(X,X) :- true.",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      for (const std::string& l : labels.labels) detail::add_fact1(out, syms, "pickLabel", l);
      detail::add_near_facts(out, syms);
      break;
    case ConstraintKind::Lp2:
      detail::append_rules(out,
                           "lpFailure2(X,Y) :- sim2(X,Z), pickMutex(Y,NY), predictT(Z,NY).\n"
                           "lpFailure2(X,Y) :- sim2(X,Z), pickMutex(NY,Y), predictT(Z,NY).\n"
                           "sim2(X1,X2) :- near(X1,Z1), near(Z1,Z2), sim2(Z2,X2).\n"
                           "sim2(X,X) :- true.",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      for (const std::string& l : labels.labels) detail::add_fact1(out, syms, "pickLabel", l);
      detail::add_near_facts(out, syms);
      break;
    case ConstraintKind::Smooth:
      detail::append_rules(out,
                           "smoothFailure(X1) :- pickMutex(Y1,Y2), classifyT(X1,Y1), "
                           "near(X1,X2), classifyT(X2,Y2).",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      detail::add_near_facts(out, syms);
      break;
    case ConstraintKind::Smooth2:
      detail::append_rules(out,
                           "smoothFailure2(X1) :- pickMutex(Y1,Y2), classifyT(X1,Y1), "
                           "near(X1,Z), near(Z,X2), classifyT(X2,Y2).",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      detail::add_near_facts(out, syms);
      break;
    case ConstraintKind::Doc:
      detail::append_rules(out,
                           "docFailure(X1,X2) :- pickMutex(Y1,Y2), pickRealLabel(Y1), "
                           "pickRealLabel(Y2), classify(X1,Y1), classify(X2,Y2).",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      install_real_label_facts();
      break;
    case ConstraintKind::Sent:
      // Verbatim rule shape: no mutex guard, so even same-label double
      // extraction from one sentence is penalized.
      detail::append_rules(out,
                           "sentFailure(X1,X2) :- pickRealLabel(Y1), pickRealLabel(Y2), "
                           "classify(X1,Y1), classify(X2,Y2).",
                           syms);
      install_real_label_facts();
      break;
    case ConstraintKind::Title:
      detail::append_rules(out,
                           "titleFailure(X1,X2) :- pickMutex(Y1,Y2), pickRealLabel(Y1), "
                           "pickRealLabel(Y2), classify(X1,Y1), classify(X2,Y2).",
                           syms);
      detail::add_ordered_pairs(out, syms, "pickMutex", labels.labels);
      install_real_label_facts();
      break;
  }
  return out;
}

// One pool entry: an instance, a mention pair, or a labeled instance.
struct PoolItem {
  std::string a;
  std::string b;      // pair templates only
  std::string label;  // lp templates only
};

// Draws exactly `count` items without replacement (seeded) and emits one
// pure-penalty example per item.
inline std::vector<TrainingExample> materialize(ConstraintKind kind,
                                                const std::vector<PoolItem>& pool, long count,
                                                uint64_t seed, SymbolTable& syms) {
  if (count < 0) count = 0;
  if (count > static_cast<long>(pool.size()))
    throw std::runtime_error(std::string("materialize ") + kind_name(kind) + ": budget " +
                             std::to_string(count) + " exceeds pool size " +
                             std::to_string(pool.size()));
  std::vector<TrainingExample> out;
  if (count == 0) return out;

  rng::Stream stream = rng::fork(seed, std::string("materialize.") + kind_name(kind));
  std::vector<size_t> picks =
      rng::sample_without_replacement(pool.size(), static_cast<size_t>(count), stream);

  Sym pred = syms.intern(failure_predicate(kind));
  for (size_t i : picks) {
    const PoolItem& item = pool[i];
    Atom goal;
    goal.pred = pred;
    switch (kind) {
      case ConstraintKind::Lp1:
      case ConstraintKind::Lp2:
        goal.args = {Term::constant(syms.intern(item.a)), Term::constant(syms.intern(item.label))};
        break;
      case ConstraintKind::Doc:
      case ConstraintKind::Sent:
      case ConstraintKind::Title:
        goal.args = {Term::constant(syms.intern(item.a)), Term::constant(syms.intern(item.b))};
        break;
      default:
        goal.args = {Term::constant(syms.intern(item.a))};
        break;
    }
    TrainingExample ex;
    ex.query = goal;
    ex.negatives.push_back(goal);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace prowl
