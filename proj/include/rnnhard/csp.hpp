#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnhard/random.hpp"

namespace rnnhard {

struct Literal {
  int sign = 1;  // +1 or -1
  int var = 0;   // 0-based variable index

  bool operator==(const Literal&) const = default;
};

// A signed K-tuple: K literals over distinct variables. Read as a clause it
// is the disjunction of its literals.
using SignedTuple = std::vector<Literal>;

enum class Polarity { positive, negated };  // P and not-P

enum class FormulaKind { sat, conjunction, mixed };  // SAT_K, T_{K,q}, MIXED

enum class Origin { random, planted, unknown };

struct Constraint {
  std::vector<SignedTuple> clauses;
  Polarity polarity = Polarity::positive;

  bool operator==(const Constraint&) const = default;
};

struct Assignment {
  std::vector<int> values;  // entries in {-1, +1}

  std::size_t size() const { return values.size(); }
  int operator[](std::size_t i) const { return values[i]; }
  bool operator==(const Assignment&) const = default;
};

struct Formula {
  int n_vars = 0;
  FormulaKind kind = FormulaKind::sat;
  int K = 0;
  int q = 1;
  std::vector<Constraint> constraints;
  std::optional<Assignment> planted;
  Origin origin = Origin::unknown;

  std::size_t size() const { return constraints.size(); }
  bool operator==(const Formula&) const = default;
};

inline const char* kind_name(FormulaKind k) {
  switch (k) {
    case FormulaKind::sat: return "SAT";
    case FormulaKind::conjunction: return "T";
    case FormulaKind::mixed: return "MIXED";
  }
  return "?";
}

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::random: return "random";
    case Origin::planted: return "planted";
    case Origin::unknown: return "unknown";
  }
  return "?";
}

// ---------------------------------------------------------------- evaluation

inline bool literal_true(const Literal& l, const Assignment& psi) {
  return l.sign * psi[static_cast<std::size_t>(l.var)] == 1;
}

inline bool evaluate_clause(const SignedTuple& clause, const Assignment& psi) {
  for (const auto& l : clause)
    if (literal_true(l, psi)) return true;
  return false;
}

inline bool evaluate_conjunction(const std::vector<SignedTuple>& clauses, const Assignment& psi) {
  for (const auto& c : clauses)
    if (!evaluate_clause(c, psi)) return false;
  return true;
}

inline bool evaluate_constraint(const Constraint& c, const Assignment& psi) {
  const bool t = evaluate_conjunction(c.clauses, psi);
  return c.polarity == Polarity::positive ? t : !t;
}

inline std::size_t count_satisfied(const Formula& f, const Assignment& psi) {
  std::size_t n = 0;
  for (const auto& c : f.constraints) n += evaluate_constraint(c, psi) ? 1 : 0;
  return n;
}

inline bool satisfies_all(const Formula& f, const Assignment& psi) {
  return count_satisfied(f, psi) == f.size();
}

inline SignedTuple negate(const SignedTuple& clause) {
  SignedTuple out = clause;
  for (auto& l : out) l.sign = -l.sign;
  return out;
}

// ---------------------------------------------------------------- validation

inline void validate_tuple(const SignedTuple& t, int n_vars) {
  for (std::size_t a = 0; a < t.size(); ++a) {
    if (t[a].sign != 1 && t[a].sign != -1) throw std::invalid_argument("literal sign must be +1 or -1");
    if (t[a].var < 0 || t[a].var >= n_vars) throw std::invalid_argument("literal variable out of range");
    for (std::size_t b = 0; b < a; ++b)
      if (t[a].var == t[b].var) throw std::invalid_argument("repeated variable in signed tuple");
  }
}

inline void validate(const Formula& f) {
  if (f.n_vars < 0 || f.K < 1 || f.q < 1) throw std::invalid_argument("invalid formula shape");
  for (const auto& c : f.constraints) {
    const std::size_t want_q = f.kind == FormulaKind::sat ? 1 : static_cast<std::size_t>(f.q);
    if (c.clauses.size() != want_q) throw std::invalid_argument("constraint has wrong clause count");
    if (f.kind != FormulaKind::mixed && c.polarity != Polarity::positive)
      throw std::invalid_argument("only MIXED formulas carry negated constraints");
    std::vector<char> seen(static_cast<std::size_t>(f.n_vars), 0);
    for (const auto& cl : c.clauses) {
      if (cl.size() != static_cast<std::size_t>(f.K)) throw std::invalid_argument("clause has wrong arity");
      validate_tuple(cl, f.n_vars);
      if (f.kind != FormulaKind::sat) {
        for (const auto& l : cl) {
          if (seen[static_cast<std::size_t>(l.var)]) throw std::invalid_argument("clauses of a constraint share a variable");
          seen[static_cast<std::size_t>(l.var)] = 1;
        }
      }
    }
  }
  if (f.planted && f.planted->size() != static_cast<std::size_t>(f.n_vars))
    throw std::invalid_argument("planted assignment has wrong length");
}

// ---------------------------------------------------------------- sampling

namespace detail {

inline void check_arity(int n_vars, int K) {
  if (K < 1 || K > n_vars) throw std::invalid_argument("invalid-parameter: need 1 <= K <= n_vars");
}

// `count` distinct variables, uniform over ordered selections.
inline std::vector<int> distinct_vars(Rng& rng, int n_vars, int count) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  if (2 * count <= n_vars) {
    while (static_cast<int>(out.size()) < count) {
      const int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vars)));
      bool dup = false;
      for (int u : out) dup = dup || (u == v);
      if (!dup) out.push_back(v);
    }
  } else {
    std::vector<int> pool(static_cast<std::size_t>(n_vars));
    for (int i = 0; i < n_vars; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n_vars - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      out.push_back(pool[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

inline SignedTuple signed_from(Rng& rng, const std::vector<int>& vars, std::size_t from, int K) {
  SignedTuple t(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j) t[static_cast<std::size_t>(j)] = {rng.sign(), vars[from + static_cast<std::size_t>(j)]};
  return t;
}

inline void resign(Rng& rng, SignedTuple& t) {
  for (auto& l : t) l.sign = rng.sign();
}

inline Assignment random_assignment(Rng& rng, int n_vars) {
  Assignment a;
  a.values.resize(static_cast<std::size_t>(n_vars));
  for (auto& v : a.values) v = rng.sign();
  return a;
}

}  // namespace detail

inline SignedTuple uniform_tuple(Rng& rng, int n_vars, int K) {
  return detail::signed_from(rng, detail::distinct_vars(rng, n_vars, K), 0, K);
}

// q clauses over K*q distinct variables, signs independent.
inline std::vector<SignedTuple> uniform_conjunction(Rng& rng, int n_vars, int K, int q) {
  if (K * q > n_vars) throw std::invalid_argument("invalid-parameter: need K*q <= n_vars");
  const auto vars = detail::distinct_vars(rng, n_vars, K * q);
  std::vector<SignedTuple> out;
  out.reserve(static_cast<std::size_t>(q));
  for (int c = 0; c < q; ++c) out.push_back(detail::signed_from(rng, vars, static_cast<std::size_t>(c * K), K));
  return out;
}

inline Formula sample_random_ksat(int n_vars, std::size_t n_constraints, int K, std::uint64_t seed) {
  detail::check_arity(n_vars, K);
  Rng rng(seed, "random-ksat");
  Formula f{n_vars, FormulaKind::sat, K, 1, {}, std::nullopt, Origin::random};
  f.constraints.reserve(n_constraints);
  for (std::size_t i = 0; i < n_constraints; ++i)
    f.constraints.push_back({{uniform_tuple(rng, n_vars, K)}, Polarity::positive});
  return f;
}

// psi uniform; each clause's signs are redrawn until psi satisfies it.
inline Formula sample_planted_ksat(int n_vars, std::size_t n_constraints, int K, std::uint64_t seed) {
  detail::check_arity(n_vars, K);
  Rng rng(seed, "planted-ksat");
  Formula f{n_vars, FormulaKind::sat, K, 1, {}, detail::random_assignment(rng, n_vars), Origin::planted};
  f.constraints.reserve(n_constraints);
  for (std::size_t i = 0; i < n_constraints; ++i) {
    SignedTuple t = uniform_tuple(rng, n_vars, K);
    while (!evaluate_clause(t, *f.planted)) detail::resign(rng, t);
    f.constraints.push_back({{std::move(t)}, Polarity::positive});
  }
  return f;
}

// Uniform T_{K,q} tuples with fair-coin polarity.
inline Formula sample_random_mixed(int n_vars, std::size_t n_constraints, int K, int q, std::uint64_t seed) {
  detail::check_arity(n_vars, K);
  if (q < 1) throw std::invalid_argument("invalid-parameter: q must be positive");
  Rng rng(seed, "random-mixed");
  Formula f{n_vars, FormulaKind::mixed, K, q, {}, std::nullopt, Origin::random};
  f.constraints.reserve(n_constraints);
  for (std::size_t i = 0; i < n_constraints; ++i) {
    const Polarity pol = rng.coin() ? Polarity::negated : Polarity::positive;
    f.constraints.push_back({uniform_conjunction(rng, n_vars, K, q), pol});
  }
  return f;
}

// Fair-coin polarity; each constraint is uniform conditioned on being
// satisfied by the planted psi. P sides redraw clause signs per clause,
// not-P sides redraw the whole tuple until some clause is falsified.
inline Formula sample_planted_mixed(int n_vars, std::size_t n_constraints, int K, int q, std::uint64_t seed) {
  detail::check_arity(n_vars, K);
  if (q < 1) throw std::invalid_argument("invalid-parameter: q must be positive");
  Rng rng(seed, "planted-mixed");
  Formula f{n_vars, FormulaKind::mixed, K, q, {}, detail::random_assignment(rng, n_vars), Origin::planted};
  const Assignment& psi = *f.planted;
  f.constraints.reserve(n_constraints);
  for (std::size_t i = 0; i < n_constraints; ++i) {
    Constraint c;
    c.polarity = rng.coin() ? Polarity::negated : Polarity::positive;
    if (c.polarity == Polarity::positive) {
      c.clauses = uniform_conjunction(rng, n_vars, K, q);
      for (auto& cl : c.clauses)
        while (!evaluate_clause(cl, psi)) detail::resign(rng, cl);
    } else {
      do {
        c.clauses = uniform_conjunction(rng, n_vars, K, q);
      } while (evaluate_conjunction(c.clauses, psi));
    }
    f.constraints.push_back(std::move(c));
  }
  return f;
}

// ---------------------------------------------------------------- reductions

struct GreedyOutcome {
  std::optional<Formula> formula;  // empty on Fail
  std::size_t groups_formed = 0;
  std::size_t clauses_used = 0;
  std::string reason;

  bool ok() const { return formula.has_value(); }
};

// Greedy grouping of SAT clauses into q-clause conjunctions with pairwise
// disjoint variables. Clauses skipped by one group stay available to later
// groups. Deterministic: the scan follows input order.
inline GreedyOutcome reduce_sat_to_T(const Formula& in, int q, std::size_t n_groups) {
  if (in.kind != FormulaKind::sat) throw std::invalid_argument("reduce_sat_to_T expects a SAT formula");
  if (q < 1) throw std::invalid_argument("q must be positive");
  GreedyOutcome out;
  if (static_cast<std::size_t>(q) * n_groups > in.size()) {
    out.reason = "not enough clauses: q*n_groups exceeds the clause count";
    return out;
  }
  Formula f{in.n_vars, FormulaKind::conjunction, in.K, q, {}, in.planted, in.origin};
  f.constraints.reserve(n_groups);
  std::vector<char> used(in.size(), 0);
  std::vector<char> taken(static_cast<std::size_t>(in.n_vars), 0);
  std::size_t first_free = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::fill(taken.begin(), taken.end(), 0);
    Constraint c;
    while (first_free < in.size() && used[first_free]) ++first_free;
    for (std::size_t i = first_free; i < in.size() && static_cast<int>(c.clauses.size()) < q; ++i) {
      if (used[i]) continue;
      const SignedTuple& cl = in.constraints[i].clauses.front();
      bool clash = false;
      for (const auto& l : cl) clash = clash || taken[static_cast<std::size_t>(l.var)];
      if (clash) continue;
      for (const auto& l : cl) taken[static_cast<std::size_t>(l.var)] = 1;
      used[i] = 1;
      c.clauses.push_back(cl);
    }
    if (static_cast<int>(c.clauses.size()) < q) {
      out.groups_formed = g;
      out.reason = "greedy ran out of disjoint clauses at group " + std::to_string(g);
      return out;
    }
    out.clauses_used += static_cast<std::size_t>(q);
    f.constraints.push_back(std::move(c));
  }
  out.groups_formed = n_groups;
  out.formula = std::move(f);
  return out;
}

// Each constraint is kept (polarity P) with probability 1/2, otherwise
// replaced by a fresh uniform constraint of polarity not-P.
inline Formula flip_to_mixed(const Formula& in, std::uint64_t seed) {
  if (in.kind != FormulaKind::conjunction) throw std::invalid_argument("flip_to_mixed expects a T formula");
  Rng rng(seed, "flip");
  Formula f{in.n_vars, FormulaKind::mixed, in.K, in.q, {}, in.planted, in.origin};
  f.constraints.reserve(in.size());
  for (const auto& c : in.constraints) {
    if (rng.coin()) {
      f.constraints.push_back({uniform_conjunction(rng, in.n_vars, in.K, in.q), Polarity::negated});
    } else {
      f.constraints.push_back({c.clauses, Polarity::positive});
    }
  }
  return f;
}

struct FlipStats {
  std::size_t constraints = 0;
  std::size_t negated = 0;
  std::size_t negated_unsatisfied = 0;  // by the planted assignment
};

inline FlipStats flip_stats(const Formula& f) {
  FlipStats s;
  s.constraints = f.size();
  for (const auto& c : f.constraints) {
    if (c.polarity != Polarity::negated) continue;
    ++s.negated;
    if (f.planted && !evaluate_constraint(c, *f.planted)) ++s.negated_unsatisfied;
  }
  return s;
}

}  // namespace rnnhard
