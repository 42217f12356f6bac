#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace prowl {

using Sym = int32_t;

// Injective string interning; ids are dense and stable for the lifetime of
// the table. One table per engine instance.
class SymbolTable {
 public:
  Sym intern(std::string_view s) {
    auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    names_.emplace_back(s);
    Sym id = static_cast<Sym>(names_.size() - 1);
    ids_.emplace(names_.back(), id);
    return id;
  }

  std::optional<Sym> lookup(std::string_view s) const {
    auto it = ids_.find(s);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(Sym id) const { return names_.at(static_cast<size_t>(id)); }
  size_t size() const { return names_.size(); }

 private:
  std::deque<std::string> names_;  // deque: stable addresses for the views below
  std::unordered_map<std::string_view, Sym> ids_;
};

enum class TermKind : uint8_t { Constant, Variable };

struct Term {
  TermKind kind;
  Sym sym;  // interned name for parsed terms; grounder-local index inside proof states

  static Term constant(Sym s) { return {TermKind::Constant, s}; }
  static Term variable(Sym s) { return {TermKind::Variable, s}; }
  bool is_var() const { return kind == TermKind::Variable; }
  bool operator==(const Term& o) const { return kind == o.kind && sym == o.sym; }
};

struct Atom {
  Sym pred = -1;
  std::vector<Term> args;

  size_t arity() const { return args.size(); }
  bool ground() const {
    for (const Term& t : args)
      if (t.is_var()) return false;
    return true;
  }
  bool operator==(const Atom& o) const { return pred == o.pred && args == o.args; }
};

struct AtomHash {
  size_t operator()(const Atom& a) const {
    uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<uint64_t>(a.pred);
    for (const Term& t : a.args) {
      uint64_t x = (static_cast<uint64_t>(t.sym) << 1) | (t.is_var() ? 1u : 0u);
      h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<size_t>(h);
  }
};

// Feature annotation on a rule: `{ f1, f2 : cond1, cond2 }`. The condition
// atoms are generator goals matched against ground facts at rule-application
// time; each solution grounds one copy of every feature atom. An annotation
// without conditions is a fixed feature set.
struct FeatureTemplate {
  std::vector<Atom> features;
  std::vector<Atom> conditions;
  bool is_constant() const { return conditions.empty(); }
};

struct Rule {
  Atom head;
  std::vector<Atom> body;  // proven left to right
  std::optional<FeatureTemplate> annotation;
  int index = 0;  // source order across the whole program; names the default feature id(<index>)
};

namespace detail {
inline uint64_t pred_first_key(Sym pred, Sym first) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(pred)) << 32) |
         static_cast<uint32_t>(first);
}
}  // namespace detail

// Ground facts, deduplicated, with (predicate) and (predicate, first-argument)
// indexes for goal resolution.
class FactSet {
 public:
  bool add(const Atom& fact) {
    if (!seen_.insert(fact).second) return false;
    int idx = static_cast<int>(facts_.size());
    facts_.push_back(fact);
    by_pred_[fact.pred].push_back(idx);
    if (!fact.args.empty())
      by_pred_first_[detail::pred_first_key(fact.pred, fact.args[0].sym)].push_back(idx);
    return true;
  }

  bool contains(const Atom& fact) const { return seen_.count(fact) > 0; }
  const std::vector<Atom>& all() const { return facts_; }
  size_t size() const { return facts_.size(); }

  static const std::vector<int>& empty_index() {
    static const std::vector<int> none;
    return none;
  }

  const std::vector<int>& by_pred(Sym pred) const {
    auto it = by_pred_.find(pred);
    return it == by_pred_.end() ? empty_index() : it->second;
  }

  // Candidates for a goal whose first argument is already a constant.
  const std::vector<int>& by_pred_first(Sym pred, Sym first) const {
    auto it = by_pred_first_.find(detail::pred_first_key(pred, first));
    return it == by_pred_first_.end() ? empty_index() : it->second;
  }

  const Atom& fact(int idx) const { return facts_[static_cast<size_t>(idx)]; }

 private:
  std::vector<Atom> facts_;
  std::unordered_set<Atom, AtomHash> seen_;
  std::unordered_map<Sym, std::vector<int>> by_pred_;
  std::unordered_map<uint64_t, std::vector<int>> by_pred_first_;
};

// A parsed theory: rules in source order plus ground facts. Immutable by
// convention once built; extend by copying (constraint installation does).
struct Program {
  std::vector<Rule> rules;
  FactSet facts;

  std::unordered_map<uint64_t, std::vector<int>> rules_by_pred_arity;

  void add_rule(Rule r) {
    r.index = static_cast<int>(rules.size());
    uint64_t key = detail::pred_first_key(r.head.pred, static_cast<Sym>(r.head.arity()));
    rules.push_back(std::move(r));
    rules_by_pred_arity[key].push_back(static_cast<int>(rules.size() - 1));
  }

  const std::vector<int>& rules_for(Sym pred, size_t arity) const {
    auto it = rules_by_pred_arity.find(detail::pred_first_key(pred, static_cast<Sym>(arity)));
    return it == rules_by_pred_arity.end() ? FactSet::empty_index() : it->second;
  }

  bool has_predicate(Sym pred, size_t arity) const {
    return !rules_for(pred, arity).empty() || !facts.by_pred(pred).empty();
  }
};

// One training unit: a query goal plus signed ground answers. Examples with
// no positives are pure penalties (the encoding of SSL constraints).
struct TrainingExample {
  Atom query;
  std::vector<Atom> positives;
  std::vector<Atom> negatives;
};

// ---- printing ----------------------------------------------------------

inline bool plain_constant_token(std::string_view s) {
  if (s.empty()) return false;
  char c0 = s[0];
  if (c0 >= 'A' && c0 <= 'Z') return false;
  if (c0 == '_') return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

inline void print_term(std::string& out, const Term& t, const SymbolTable& syms) {
  if (t.is_var()) {
    out += syms.name(t.sym);
    return;
  }
  const std::string& s = syms.name(t.sym);
  if (plain_constant_token(s)) {
    out += s;
  } else {
    out += '\'';
    for (char c : s) {
      if (c == '\'' || c == '\\') out += '\\';
      out += c;
    }
    out += '\'';
  }
}

inline void print_atom(std::string& out, const Atom& a, const SymbolTable& syms) {
  out += syms.name(a.pred);
  if (a.args.empty()) return;
  out += '(';
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ',';
    print_term(out, a.args[i], syms);
  }
  out += ')';
}

inline std::string to_string(const Atom& a, const SymbolTable& syms) {
  std::string out;
  print_atom(out, a, syms);
  return out;
}

inline std::string to_string(const Rule& r, const SymbolTable& syms) {
  std::string out;
  print_atom(out, r.head, syms);
  out += " :- ";
  for (size_t i = 0; i < r.body.size(); ++i) {
    if (i) out += ", ";
    print_atom(out, r.body[i], syms);
  }
  if (r.annotation) {
    out += " { ";
    for (size_t i = 0; i < r.annotation->features.size(); ++i) {
      if (i) out += ", ";
      print_atom(out, r.annotation->features[i], syms);
    }
    if (!r.annotation->conditions.empty()) {
      out += " : ";
      for (size_t i = 0; i < r.annotation->conditions.size(); ++i) {
        if (i) out += ", ";
        print_atom(out, r.annotation->conditions[i], syms);
      }
    }
    out += " }";
  }
  out += '.';
  return out;
}

inline std::string to_string(const Program& p, const SymbolTable& syms) {
  std::string out;
  for (const Rule& r : p.rules) {
    out += to_string(r, syms);
    out += '\n';
  }
  return out;
}

}  // namespace prowl
