#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rnnhard/csp.hpp"
#include "rnnhard/random.hpp"

namespace rnnhard {

// DIMACS CNF for SAT formulas; "t" format for T and MIXED:
//
//   c kind MIXED
//   c planted 1 -1 1 ...
//   t <n_vars> <n_constraints> <K> <q>
//   - 1 -2 3 | 4 5 -6
//
// Variables are 1-based on disk. `manifest` lines are emitted as
// "c manifest <line>" comments and ignored by the readers.

namespace detail {

inline void write_comment_block(std::ostream& os, std::string_view manifest) {
  std::istringstream in{std::string(manifest)};
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) os << "c manifest " << line << '\n';
}

inline void write_literal(std::ostream& os, const Literal& l) { os << l.sign * (l.var + 1); }

inline Literal parse_literal(long long v, int n_vars) {
  if (v == 0 || v > n_vars || -v > n_vars) throw std::runtime_error("literal out of range: " + std::to_string(v));
  return {v > 0 ? 1 : -1, static_cast<int>((v > 0 ? v : -v) - 1)};
}

inline Assignment parse_planted(std::istringstream& ls) {
  Assignment a;
  int v;
  while (ls >> v) {
    if (v != 1 && v != -1) throw std::runtime_error("planted values must be +1 or -1");
    a.values.push_back(v);
  }
  return a;
}

inline Origin parse_origin(const std::string& s) {
  if (s == "random") return Origin::random;
  if (s == "planted") return Origin::planted;
  return Origin::unknown;
}

}  // namespace detail

inline void write_formula(std::ostream& os, const Formula& f, std::string_view manifest = {}) {
  detail::write_comment_block(os, manifest);
  os << "c kind " << kind_name(f.kind) << '\n';
  os << "c origin " << origin_name(f.origin) << '\n';
  if (f.planted) {
    os << "c planted";
    for (int v : f.planted->values) os << ' ' << v;
    os << '\n';
  }
  if (f.kind == FormulaKind::sat) {
    os << "c arity " << f.K << '\n';
    os << "p cnf " << f.n_vars << ' ' << f.size() << '\n';
    for (const auto& c : f.constraints) {
      for (const auto& l : c.clauses.front()) {
        detail::write_literal(os, l);
        os << ' ';
      }
      os << "0\n";
    }
    return;
  }
  os << "t " << f.n_vars << ' ' << f.size() << ' ' << f.K << ' ' << f.q << '\n';
  for (const auto& c : f.constraints) {
    os << (c.polarity == Polarity::positive ? '+' : '-');
    for (std::size_t j = 0; j < c.clauses.size(); ++j) {
      if (j) os << " |";
      for (const auto& l : c.clauses[j]) {
        os << ' ';
        detail::write_literal(os, l);
      }
    }
    os << '\n';
  }
}

inline std::string formula_to_string(const Formula& f, std::string_view manifest = {}) {
  std::ostringstream os;
  write_formula(os, f, manifest);
  return os.str();
}

inline Formula read_formula(std::istream& is) {
  Formula f;
  std::optional<FormulaKind> declared;
  bool header = false;
  std::size_t declared_count = 0;
  int arity = 0;
  std::string line;
  SignedTuple pending;  // DIMACS clauses may span lines
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "c") {
      std::string key;
      ls >> key;
      if (key == "planted") {
        f.planted = detail::parse_planted(ls);
      } else if (key == "kind") {
        std::string k;
        ls >> k;
        declared = k == "SAT" ? FormulaKind::sat : k == "T" ? FormulaKind::conjunction : FormulaKind::mixed;
      } else if (key == "origin") {
        std::string o;
        ls >> o;
        f.origin = detail::parse_origin(o);
      } else if (key == "arity") {
        ls >> arity;
      }
      continue;
    }
    if (tok == "p") {
      std::string cnf;
      ls >> cnf >> f.n_vars >> declared_count;
      if (cnf != "cnf" || !ls) throw std::runtime_error("bad DIMACS header");
      f.kind = FormulaKind::sat;
      f.q = 1;
      header = true;
      continue;
    }
    if (tok == "t") {
      ls >> f.n_vars >> declared_count >> f.K >> f.q;
      if (!ls) throw std::runtime_error("bad t header");
      f.kind = declared.value_or(FormulaKind::mixed);
      if (f.kind == FormulaKind::sat) throw std::runtime_error("t header with SAT kind");
      header = true;
      continue;
    }
    if (!header) throw std::runtime_error("constraint before header");
    if (f.kind == FormulaKind::sat) {
      std::istringstream vs(line);
      long long v;
      while (vs >> v) {
        if (v == 0) {
          f.constraints.push_back({{pending}, Polarity::positive});
          pending.clear();
        } else {
          pending.push_back(detail::parse_literal(v, f.n_vars));
        }
      }
      continue;
    }
    Constraint c;
    if (tok == "+") c.polarity = Polarity::positive;
    else if (tok == "-") c.polarity = Polarity::negated;
    else throw std::runtime_error("constraint line must start with + or -");
    c.clauses.emplace_back();
    while (ls >> tok) {
      if (tok == "|") {
        c.clauses.emplace_back();
        continue;
      }
      c.clauses.back().push_back(detail::parse_literal(std::stoll(tok), f.n_vars));
    }
    f.constraints.push_back(std::move(c));
  }
  if (!header) throw std::runtime_error("missing formula header");
  if (!pending.empty()) throw std::runtime_error("unterminated DIMACS clause");
  if (f.kind == FormulaKind::sat)
    f.K = arity > 0 ? arity : (f.constraints.empty() ? 1 : static_cast<int>(f.constraints.front().clauses.front().size()));
  if (f.constraints.size() != declared_count) throw std::runtime_error("constraint count does not match header");
  validate(f);
  return f;
}

inline Formula formula_from_string(const std::string& s) {
  std::istringstream is(s);
  return read_formula(is);
}

// Content hash of the canonical serialization.
inline std::string formula_id(const Formula& f) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "F%016llx", static_cast<unsigned long long>(fnv1a(formula_to_string(f))));
  return buf;
}

}  // namespace rnnhard
