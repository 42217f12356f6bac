#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prowl/ast.hpp"

namespace prowl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " at " + std::to_string(line) + ":" + std::to_string(col)),
        line(line),
        col(col) {}
  int line;
  int col;
};

namespace detail {

enum class Tok : uint8_t { Ident, Var, Quoted, Punct, End };

struct Token {
  Tok kind;
  std::string text;  // unescaped for Quoted
  char punct = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, tok_.line, tok_.col);
  }

 private:
  static bool ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_';
  }

  void advance() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '\n') {
        ++pos_;
        ++line_;
        col_ = 1;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
        ++col_;
      } else {
        break;
      }
    }
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_ = {Tok::End, "", 0, line_, col_};
      return;
    }
    char c = src_[pos_];
    if (c == '\'') {
      std::string text;
      ++pos_;
      ++col_;
      while (true) {
        if (pos_ >= src_.size()) throw ParseError("unterminated quoted constant", line_, col_);
        char q = src_[pos_];
        if (q == '\\' && pos_ + 1 < src_.size()) {
          text += src_[pos_ + 1];
          pos_ += 2;
          col_ += 2;
        } else if (q == '\'') {
          ++pos_;
          ++col_;
          break;
        } else {
          if (q == '\n') {
            ++line_;
            col_ = 0;
          }
          text += q;
          ++pos_;
          ++col_;
        }
      }
      tok_ = {Tok::Quoted, std::move(text), 0, tok_.line, tok_.col};
      return;
    }
    if (ident_char(c)) {
      size_t start = pos_;
      while (pos_ < src_.size() && ident_char(src_[pos_])) {
        ++pos_;
        ++col_;
      }
      std::string text(src_.substr(start, pos_ - start));
      bool var = (c >= 'A' && c <= 'Z');
      tok_ = {var ? Tok::Var : Tok::Ident, std::move(text), 0, tok_.line, tok_.col};
      return;
    }
    if (c == ':' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
      pos_ += 2;
      col_ += 2;
      tok_ = {Tok::Punct, ":-", 0, tok_.line, tok_.col};  // punct 0 keeps ":-" distinct from ':'
      return;
    }
    if (c == '(' || c == ')' || c == ',' || c == '.' || c == '{' || c == '}' || c == ':') {
      ++pos_;
      ++col_;
      tok_ = {Tok::Punct, std::string(1, c), c, tok_.line, tok_.col};
      return;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

class ProgramParser {
 public:
  ProgramParser(std::string_view src, SymbolTable& syms) : lex_(src), syms_(syms) {}

  Program parse() {
    Program prog;
    while (lex_.peek().kind != Tok::End) prog.add_rule(clause());
    check_arities(prog);
    return prog;
  }

  void expect_end() {
    if (lex_.peek().kind != Tok::End) lex_.fail("trailing input after atom");
  }

  Atom atom() {
    Token t = lex_.take();
    if (t.kind != Tok::Ident)
      throw ParseError("expected predicate name, got '" + t.text + "'", t.line, t.col);
    Atom a;
    a.pred = syms_.intern(t.text);
    if (lex_.peek().kind == Tok::Punct && lex_.peek().punct == '(') {
      lex_.take();
      while (true) {
        a.args.push_back(term());
        Token p = lex_.take();
        if (p.kind == Tok::Punct && p.punct == ')') break;
        if (!(p.kind == Tok::Punct && p.punct == ','))
          throw ParseError("expected ',' or ')' in argument list, got '" + p.text + "'",
                           p.line, p.col);
      }
    }
    return a;
  }

 private:
  Term term() {
    Token t = lex_.take();
    switch (t.kind) {
      case Tok::Var:
        return Term::variable(syms_.intern(t.text));
      case Tok::Ident:
      case Tok::Quoted:
        return Term::constant(syms_.intern(t.text));
      default:
        throw ParseError("expected term, got '" + t.text + "'", t.line, t.col);
    }
  }

  std::vector<Atom> atom_list() {
    std::vector<Atom> atoms;
    atoms.push_back(atom());
    while (lex_.peek().kind == Tok::Punct && lex_.peek().punct == ',') {
      lex_.take();
      atoms.push_back(atom());
    }
    return atoms;
  }

  Rule clause() {
    Rule r;
    r.head = atom();
    if (lex_.peek().kind == Tok::Punct && lex_.peek().text == ":-") {
      lex_.take();
      r.body = atom_list();
    } else {
      // `head.` abbreviates `head :- true.`
      r.body.push_back(Atom{syms_.intern("true"), {}});
    }
    if (lex_.peek().kind == Tok::Punct && lex_.peek().punct == '{') {
      Token brace = lex_.take();
      FeatureTemplate ft;
      ft.features = atom_list();
      if (lex_.peek().kind == Tok::Punct && lex_.peek().punct == ':') {
        lex_.take();
        ft.conditions = atom_list();
      }
      Token close = lex_.take();
      if (!(close.kind == Tok::Punct && close.punct == '}'))
        throw ParseError("expected '}' to close feature annotation", close.line, close.col);
      check_template_bound(r, ft, brace);
      r.annotation = std::move(ft);
    }
    Token dot = lex_.take();
    if (!(dot.kind == Tok::Punct && dot.punct == '.'))
      throw ParseError("expected '.' to end clause, got '" + dot.text + "'", dot.line,
                       dot.col);
    return r;
  }

  void check_template_bound(const Rule& r, const FeatureTemplate& ft, const Token& at) {
    std::unordered_map<Sym, bool> bound;
    auto mark = [&](const Atom& a) {
      for (const Term& t : a.args)
        if (t.is_var()) bound[t.sym] = true;
    };
    mark(r.head);
    for (const Atom& b : r.body) mark(b);
    for (const Atom& c : ft.conditions) mark(c);
    for (const Atom& f : ft.features)
      for (const Term& t : f.args)
        if (t.is_var() && !bound.count(t.sym))
          throw ParseError("unbound template variable " + syms_.name(t.sym), at.line, at.col);
  }

  void check_arities(const Program& prog) {
    std::unordered_map<Sym, size_t> arity;
    auto check = [&](const Atom& a) {
      auto [it, fresh] = arity.emplace(a.pred, a.arity());
      if (!fresh && it->second != a.arity())
        throw ParseError("arity conflict for predicate " + syms_.name(a.pred) + ": " +
                             std::to_string(it->second) + " vs " + std::to_string(a.arity()),
                         1, 1);
    };
    for (const Rule& r : prog.rules) {
      check(r.head);
      for (const Atom& b : r.body) check(b);
      if (r.annotation)
        for (const Atom& c : r.annotation->conditions) check(c);
    }
  }

  Lexer lex_;
  SymbolTable& syms_;
};

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline bool variable_like(std::string_view tok) {
  return !tok.empty() && tok[0] >= 'A' && tok[0] <= 'Z';
}

}  // namespace detail

inline Program parse_program(std::string_view source, SymbolTable& syms) {
  detail::ProgramParser p(source, syms);
  return p.parse();
}

// A single goal atom, e.g. a CLI query.
inline Atom parse_query(std::string_view source, SymbolTable& syms) {
  detail::ProgramParser p(source, syms);
  Atom a = p.atom();
  p.expect_end();
  return a;
}

// Fact files: one TAB-separated `predicate arg1 ... argN` per line.
inline FactSet parse_facts(std::string_view source, SymbolTable& syms) {
  FactSet facts;
  int line_no = 0;
  size_t start = 0;
  while (start <= source.size()) {
    size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    std::string_view line = source.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (end == source.size()) break;
      continue;
    }
    auto fields = detail::split_tabs(line);
    if (detail::variable_like(fields[0]))
      throw ParseError("variable-like predicate '" + fields[0] + "' in fact", line_no, 1);
    Atom fact;
    fact.pred = syms.intern(fields[0]);
    for (size_t i = 1; i < fields.size(); ++i) {
      if (detail::variable_like(fields[i]))
        throw ParseError("variable-like token '" + fields[i] + "' in fact", line_no,
                         static_cast<int>(i + 1));
      fact.args.push_back(Term::constant(syms.intern(fields[i])));
    }
    facts.add(fact);
    if (end == source.size()) break;
  }
  return facts;
}

namespace detail {

// Answer must be a ground instance of the query: constants agree positionally
// and repeated query variables bind consistently.
inline bool instance_of(const Atom& query, const Atom& answer) {
  if (query.pred != answer.pred || query.arity() != answer.arity()) return false;
  std::unordered_map<Sym, Sym> binding;
  for (size_t i = 0; i < query.args.size(); ++i) {
    if (answer.args[i].is_var()) return false;
    if (query.args[i].is_var()) {
      auto [it, fresh] = binding.emplace(query.args[i].sym, answer.args[i].sym);
      if (!fresh && it->second != answer.args[i].sym) return false;
    } else if (query.args[i].sym != answer.args[i].sym) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Example files: `query<TAB>+answer<TAB>-answer...` per line.
inline std::vector<TrainingExample> parse_examples(std::string_view source,
                                                   SymbolTable& syms) {
  std::vector<TrainingExample> out;
  int line_no = 0;
  size_t start = 0;
  while (start <= source.size()) {
    size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    std::string_view line = source.substr(start, end - start);
    ++line_no;
    bool last = end == source.size();
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (last) break;
      continue;
    }
    auto fields = detail::split_tabs(line);
    TrainingExample ex;
    try {
      ex.query = parse_query(fields[0], syms);
    } catch (const ParseError& e) {
      throw ParseError(std::string("bad example query: ") + e.what(), line_no, 1);
    }
    for (size_t i = 1; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      if (f.empty()) continue;
      if (f[0] != '+' && f[0] != '-')
        throw ParseError("answer must start with '+' or '-'", line_no, static_cast<int>(i + 1));
      Atom ans = parse_query(std::string_view(f).substr(1), syms);
      if (!detail::instance_of(ex.query, ans))
        throw ParseError("answer " + to_string(ans, syms) +
                             " is not a ground instance of query " + to_string(ex.query, syms),
                         line_no, static_cast<int>(i + 1));
      (f[0] == '+' ? ex.positives : ex.negatives).push_back(std::move(ans));
    }
    if (ex.positives.empty() && ex.negatives.empty())
      throw ParseError("example line has no signed answers", line_no, 1);
    out.push_back(std::move(ex));
    if (last) break;
  }
  return out;
}

}  // namespace prowl
