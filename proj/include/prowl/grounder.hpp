#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "prowl/ast.hpp"
#include "prowl/graph.hpp"

namespace prowl {

class GroundingError : public std::runtime_error {
 public:
  explicit GroundingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GroundingLimits {
  int max_depth = 16;
  long max_nodes = 200000;
  bool keep_node_text = false;
};

namespace detail {

// Proof states use an index-based variable space: ids 0..Q-1 are the query's
// variables, ids >= Q are locals renamed in order of first occurrence, so
// identical subproblems hash identically and merge.
constexpr Sym kTempBase = 1 << 24;  // scratch ids for freshly renamed rule variables

struct GroundState {
  std::vector<Atom> goals;
  std::vector<Sym> qbind;  // per query var: >=0 constant; -1 unbound; <=-2 alias of var(-2-v)

  bool operator==(const GroundState& o) const { return qbind == o.qbind && goals == o.goals; }
};

struct GroundStateHash {
  size_t operator()(const GroundState& s) const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t x) { h = (h ^ x) * 1099511628211ull; };
    for (Sym b : s.qbind) mix(static_cast<uint64_t>(static_cast<int64_t>(b)) + 0x51ed2701);
    for (const Atom& a : s.goals) {
      mix(static_cast<uint64_t>(a.pred));
      for (const Term& t : a.args)
        mix((static_cast<uint64_t>(t.sym) << 1) | (t.is_var() ? 1 : 0));
    }
    return static_cast<size_t>(h);
  }
};

class Subst {
 public:
  Term resolve(Term t) const {
    while (t.is_var()) {
      auto it = map_.find(t.sym);
      if (it == map_.end()) break;
      t = it->second;
    }
    return t;
  }

  void bind(Sym var, Term value) {
    map_.emplace(var, value);
    trail_.push_back(var);
  }

  size_t mark() const { return trail_.size(); }

  void undo(size_t mark) {
    while (trail_.size() > mark) {
      map_.erase(trail_.back());
      trail_.pop_back();
    }
  }

  // Flat unification; terms are constants or variables, so no occurs check.
  // Variables bind toward lower ids, keeping query variables as
  // representatives of their alias classes.
  bool unify(const Atom& a, const Atom& b) {
    if (a.pred != b.pred || a.arity() != b.arity()) return false;
    for (size_t i = 0; i < a.args.size(); ++i) {
      Term x = resolve(a.args[i]);
      Term y = resolve(b.args[i]);
      if (x == y) continue;
      if (x.is_var() && y.is_var()) {
        if (x.sym > y.sym)
          bind(x.sym, y);
        else
          bind(y.sym, x);
      } else if (x.is_var()) {
        bind(x.sym, y);
      } else if (y.is_var()) {
        bind(y.sym, x);
      } else {
        return false;
      }
    }
    return true;
  }

  Atom apply(const Atom& a) const {
    Atom out;
    out.pred = a.pred;
    out.args.reserve(a.args.size());
    for (const Term& t : a.args) out.args.push_back(resolve(t));
    return out;
  }

 private:
  std::unordered_map<Sym, Term> map_;
  std::vector<Sym> trail_;
};

}  // namespace detail

class Grounder {
 public:
  Grounder(const Program& program, const SymbolTable& syms, FeatureTable& feats)
      : program_(program), syms_(syms), feats_(feats), true_sym_(syms.lookup("true").value_or(-1)) {}

  ProofGraph ground(const Atom& query, const GroundingLimits& limits) {
    if (!program_.has_predicate(query.pred, query.arity()))
      throw GroundingError("unknown predicate " + syms_.name(query.pred) + "/" +
                           std::to_string(query.arity()));

    ProofGraph g;
    limits_ = limits;
    graph_ = &g;
    states_.clear();
    ids_.clear();
    depth_.clear();

    // Canonicalize the query: variables become indexes 0..k-1.
    std::unordered_map<Sym, Sym> qmap;
    g.query.pred = query.pred;
    for (const Term& t : query.args) {
      if (!t.is_var()) {
        g.query.args.push_back(t);
        continue;
      }
      auto [it, fresh] = qmap.emplace(t.sym, static_cast<Sym>(g.query_vars.size()));
      if (fresh) g.query_vars.push_back(t.sym);
      g.query.args.push_back(Term::variable(it->second));
    }
    qvar_count_ = static_cast<Sym>(g.query_vars.size());

    detail::GroundState root;
    root.goals.push_back(g.query);
    root.qbind.assign(static_cast<size_t>(qvar_count_), -1);
    add_state(std::move(root), 0);

    for (size_t v = 0; v < states_.size(); ++v) {
      if (states_[v].goals.empty()) continue;  // solution
      if (depth_[v] >= limits_.max_depth) continue;
      expand(static_cast<int32_t>(v));
    }

    g.node_count = static_cast<int32_t>(states_.size());
    finalize_edges();
    collect_solutions();
    if (limits_.keep_node_text) render_node_text();
    graph_ = nullptr;
    return g;
  }

 private:
  void expand(int32_t v) {
    // Copies: states_ may reallocate while children are added.
    const Atom goal = states_[v].goals.front();
    const std::vector<Atom> rest(states_[v].goals.begin() + 1, states_[v].goals.end());

    // Facts first (file order), then rules (source order).
    const std::vector<int>* fact_idx = nullptr;
    if (!goal.args.empty() && !goal.args[0].is_var())
      fact_idx = &program_.facts.by_pred_first(goal.pred, goal.args[0].sym);
    else
      fact_idx = &program_.facts.by_pred(goal.pred);

    detail::Subst subst;
    for (int fi : *fact_idx) {
      const Atom& fact = program_.facts.fact(fi);
      size_t mark = subst.mark();
      if (subst.unify(goal, fact)) emit_child(v, rest, {}, subst, {});
      subst.undo(mark);
    }

    for (int ri : program_.rules_for(goal.pred, goal.arity())) {
      const Rule& rule = program_.rules[static_cast<size_t>(ri)];
      std::unordered_map<Sym, Sym> fresh;
      Atom head = rename_rule_atom(rule.head, fresh);
      size_t mark = subst.mark();
      if (subst.unify(goal, head)) {
        std::vector<Atom> body;
        body.reserve(rule.body.size());
        for (const Atom& b : rule.body) body.push_back(rename_rule_atom(b, fresh));
        std::vector<FeatId> features = instantiate_features(rule, fresh, subst);
        emit_child(v, rest, body, subst, std::move(features));
      }
      subst.undo(mark);
    }
  }

  Atom rename_rule_atom(const Atom& a, std::unordered_map<Sym, Sym>& fresh) const {
    Atom out;
    out.pred = a.pred;
    out.args.reserve(a.args.size());
    for (const Term& t : a.args) {
      if (!t.is_var()) {
        out.args.push_back(t);
      } else {
        auto [it, ins] =
            fresh.emplace(t.sym, detail::kTempBase + static_cast<Sym>(fresh.size()));
        (void)ins;
        out.args.push_back(Term::variable(it->second));
      }
    }
    return out;
  }

  // `rule_body` must already be renamed into the temp-variable space.
  void emit_child(int32_t parent, const std::vector<Atom>& rest,
                  const std::vector<Atom>& rule_body, detail::Subst& subst,
                  std::vector<FeatId> features) {
    detail::GroundState child;
    child.qbind = states_[parent].qbind;

    auto push_goal = [&](const Atom& a) {
      Atom resolved = subst.apply(a);
      if (resolved.pred == true_sym_ && resolved.args.empty()) return;
      child.goals.push_back(std::move(resolved));
    };
    for (const Atom& b : rule_body) push_goal(b);
    for (const Atom& r : rest) push_goal(r);

    // Record new query-variable bindings.
    for (Sym q = 0; q < qvar_count_; ++q) {
      if (child.qbind[static_cast<size_t>(q)] != -1) continue;
      Term t = subst.resolve(Term::variable(q));
      if (!t.is_var())
        child.qbind[static_cast<size_t>(q)] = t.sym;
      else if (t.sym != q)
        child.qbind[static_cast<size_t>(q)] = -2 - t.sym;  // alias of a lower query var
    }

    canonicalize(child);

    auto it = ids_.find(child);
    int32_t dst;
    if (it != ids_.end()) {
      dst = it->second;
    } else {
      if (static_cast<long>(states_.size()) >= limits_.max_nodes) {
        graph_->truncated = true;
        return;
      }
      dst = add_state(std::move(child), depth_[parent] + 1);
    }
    graph_->edges.push_back(Edge{parent, dst, EdgeKind::Rule, std::move(features)});
  }

  void canonicalize(detail::GroundState& s) const {
    std::unordered_map<Sym, Sym> remap;
    for (Atom& a : s.goals) {
      for (Term& t : a.args) {
        if (!t.is_var() || t.sym < qvar_count_) continue;
        auto [it, fresh] =
            remap.emplace(t.sym, qvar_count_ + static_cast<Sym>(remap.size()));
        (void)fresh;
        t.sym = it->second;
      }
    }
  }

  std::vector<FeatId> instantiate_features(const Rule& rule,
                                           std::unordered_map<Sym, Sym>& fresh,
                                           detail::Subst& subst) {
    std::vector<FeatId> out;
    if (!rule.annotation) {
      out.push_back(feats_.intern("id(" + std::to_string(rule.index) + ")"));
      return out;
    }
    std::vector<Atom> conds;
    conds.reserve(rule.annotation->conditions.size());
    for (const Atom& c : rule.annotation->conditions) conds.push_back(rename_rule_atom(c, fresh));
    std::vector<Atom> feats;
    feats.reserve(rule.annotation->features.size());
    for (const Atom& f : rule.annotation->features) feats.push_back(rename_rule_atom(f, fresh));

    solve_conditions(conds, 0, feats, subst, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void solve_conditions(const std::vector<Atom>& conds, size_t i,
                        const std::vector<Atom>& feats, detail::Subst& subst,
                        std::vector<FeatId>& out) {
    if (i == conds.size()) {
      for (const Atom& f : feats) {
        Atom ground = subst.apply(f);
        if (!ground.ground())
          throw GroundingError("free variable in feature " + render_feature(ground));
        out.push_back(feats_.intern(render_feature(ground)));
      }
      return;
    }
    Atom goal = subst.apply(conds[i]);
    const std::vector<int>* idx = nullptr;
    if (!goal.args.empty() && !goal.args[0].is_var())
      idx = &program_.facts.by_pred_first(goal.pred, goal.args[0].sym);
    else
      idx = &program_.facts.by_pred(goal.pred);
    for (int fi : *idx) {
      size_t mark = subst.mark();
      if (subst.unify(goal, program_.facts.fact(fi)))
        solve_conditions(conds, i + 1, feats, subst, out);
      subst.undo(mark);
    }
  }

  std::string render_feature(const Atom& a) const {
    std::string s;
    s += syms_.name(a.pred);
    if (!a.args.empty()) {
      s += '(';
      for (size_t i = 0; i < a.args.size(); ++i) {
        if (i) s += ',';
        if (a.args[i].is_var())
          s += "_" + std::to_string(a.args[i].sym);
        else
          s += syms_.name(a.args[i].sym);
      }
      s += ')';
    }
    return s;
  }

  int32_t add_state(detail::GroundState s, int depth) {
    int32_t id = static_cast<int32_t>(states_.size());
    states_.push_back(std::move(s));
    ids_.emplace(states_.back(), id);
    depth_.push_back(depth);
    return id;
  }

  void finalize_edges() {
    ProofGraph& g = *graph_;
    for (int32_t v = 0; v < g.node_count; ++v) {
      if (states_[static_cast<size_t>(v)].goals.empty())
        g.edges.push_back(Edge{v, v, EdgeKind::Loop, {}});
      else if (v != ProofGraph::kRoot)
        g.edges.push_back(Edge{v, ProofGraph::kRoot, EdgeKind::Reset, {}});
    }
    g.out.assign(static_cast<size_t>(g.node_count), {});
    for (size_t e = 0; e < g.edges.size(); ++e)
      g.out[static_cast<size_t>(g.edges[e].src)].push_back(static_cast<int32_t>(e));
  }

  void collect_solutions() {
    ProofGraph& g = *graph_;
    for (int32_t v = 0; v < g.node_count; ++v) {
      const detail::GroundState& s = states_[static_cast<size_t>(v)];
      if (!s.goals.empty()) continue;
      g.solutions.push_back(v);
      Atom answer;
      answer.pred = g.query.pred;
      for (const Term& t : g.query.args) {
        if (!t.is_var()) {
          answer.args.push_back(t);
          continue;
        }
        Sym q = t.sym;
        Sym b = s.qbind[static_cast<size_t>(q)];
        while (b <= -2) {
          q = -2 - b;
          b = s.qbind[static_cast<size_t>(q)];
        }
        if (b >= 0)
          answer.args.push_back(Term::constant(b));
        else
          answer.args.push_back(Term::variable(g.query_vars[static_cast<size_t>(q)]));
      }
      g.solution_answer.push_back(std::move(answer));
    }
  }

  void render_node_text() {
    ProofGraph& g = *graph_;
    g.node_text.resize(static_cast<size_t>(g.node_count));
    for (int32_t v = 0; v < g.node_count; ++v) {
      const detail::GroundState& s = states_[static_cast<size_t>(v)];
      std::string text;
      if (s.goals.empty()) text = "<solution>";
      for (size_t i = 0; i < s.goals.size(); ++i) {
        if (i) text += " & ";
        print_state_atom(text, s.goals[i]);
      }
      for (Sym q = 0; q < qvar_count_; ++q) {
        Sym b = s.qbind[static_cast<size_t>(q)];
        if (b == -1) continue;
        text += " | " + syms_.name(g.query_vars[static_cast<size_t>(q)]) + "=";
        if (b >= 0)
          text += syms_.name(b);
        else
          text += syms_.name(g.query_vars[static_cast<size_t>(-2 - b)]);
      }
      g.node_text[static_cast<size_t>(v)] = std::move(text);
    }
  }

  void print_state_atom(std::string& out, const Atom& a) const {
    out += syms_.name(a.pred);
    if (a.args.empty()) return;
    out += '(';
    for (size_t i = 0; i < a.args.size(); ++i) {
      if (i) out += ',';
      const Term& t = a.args[i];
      if (!t.is_var())
        out += syms_.name(t.sym);
      else if (t.sym < qvar_count_)
        out += syms_.name(graph_->query_vars[static_cast<size_t>(t.sym)]);
      else
        out += "_" + std::to_string(t.sym - qvar_count_);
    }
    out += ')';
  }

  const Program& program_;
  const SymbolTable& syms_;
  FeatureTable& feats_;
  Sym true_sym_;
  GroundingLimits limits_;
  Sym qvar_count_ = 0;

  ProofGraph* graph_ = nullptr;
  std::vector<detail::GroundState> states_;
  std::unordered_map<detail::GroundState, int32_t, detail::GroundStateHash> ids_;
  std::vector<int> depth_;
};

inline ProofGraph ground(const Program& program, const Atom& query,
                         const GroundingLimits& limits, const SymbolTable& syms,
                         FeatureTable& feats) {
  Grounder g(program, syms, feats);
  return g.ground(query, limits);
}

inline std::vector<int32_t> answer_nodes(const ProofGraph& graph, const Atom& answer) {
  return graph.answer_nodes(answer);
}

// Debug/oracle dump: a header line, one node row per node, one edge row per
// edge with the feature list comma-joined (feature names may themselves
// contain commas inside parentheses; split_feature_list undoes the join).
inline void write_graph_tsv(std::ostream& os, const ProofGraph& g, const FeatureTable& feats) {
  os << "# proofgraph\tnodes=" << g.node_count << "\tedges=" << g.edges.size()
     << "\ttruncated=" << (g.truncated ? "true" : "false") << "\n";
  for (int32_t v = 0; v < g.node_count; ++v) {
    os << "node\t" << v << "\t";
    if (v == ProofGraph::kRoot)
      os << "root";
    else if (g.is_solution(v))
      os << "solution";
    else
      os << "state";
    if (!g.node_text.empty()) os << "\t" << g.node_text[static_cast<size_t>(v)];
    os << "\n";
  }
  for (const Edge& e : g.edges) {
    os << "edge\t" << e.src << "\t" << e.dst << "\t" << to_string(e.kind) << "\t";
    for (size_t i = 0; i < e.features.size(); ++i) {
      if (i) os << ",";
      os << feats.name(e.features[i]);
    }
    os << "\n";
  }
}

inline std::vector<std::string> split_feature_list(std::string_view joined) {
  std::vector<std::string> out;
  if (joined.empty()) return out;
  int depth = 0;
  std::string cur;
  for (char c : joined) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace prowl
