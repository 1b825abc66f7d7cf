#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rnnhard/csp.hpp"
#include "rnnhard/csp_io.hpp"

namespace rnnhard {

enum class SampleKind { unknown, scattered, realizable };

inline const char* sample_kind_name(SampleKind k) {
  switch (k) {
    case SampleKind::unknown: return "UNKNOWN";
    case SampleKind::scattered: return "SCATTERED";
    case SampleKind::realizable: return "REALIZABLE";
  }
  return "?";
}

inline SampleKind parse_sample_kind(const std::string& s) {
  if (s == "SCATTERED") return SampleKind::scattered;
  if (s == "REALIZABLE") return SampleKind::realizable;
  if (s == "UNKNOWN") return SampleKind::unknown;
  throw std::runtime_error("unknown provenance kind: " + s);
}

// `source` names the generating formula; `transforms` lists every transform
// applied since, oldest first.
struct Provenance {
  SampleKind kind = SampleKind::unknown;
  std::string source;
  std::vector<std::string> transforms;

  bool operator==(const Provenance&) const = default;
};

struct LabeledSample {
  int n_vars = 0;  // 0 when not a gadget sample
  int q = 0;
  int K = 0;
  Eigen::MatrixXd features;  // dim x size, one point per column
  std::vector<int> labels;
  Provenance provenance;
  double norm_bound = 0.0;
  std::string manifest;

  LabeledSample() = default;
  explicit LabeledSample(Eigen::Index dim, std::size_t size = 0)
      : features(Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(size))), labels(size, 0) {}

  Eigen::Index dim() const { return features.rows(); }
  std::size_t size() const { return labels.size(); }
  auto point(std::size_t i) const { return features.col(static_cast<Eigen::Index>(i)); }
  auto point(std::size_t i) { return features.col(static_cast<Eigen::Index>(i)); }

  double max_norm() const {
    double m = 0.0;
    for (Eigen::Index j = 0; j < features.cols(); ++j) m = std::max(m, features.col(j).norm());
    return m;
  }
};

// Shared CNN filter. n == 0 leaves the input dimension open.
struct CnnFilter {
  Eigen::VectorXd w;
  Eigen::Index n = 0;

  Eigen::Index patch() const { return w.size(); }
};

inline Eigen::VectorXd encode_clause(const SignedTuple& clause, int n_vars) {
  validate_tuple(clause, n_vars);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n_vars + 1);
  for (const auto& l : clause) z(l.var) = l.sign;
  z(n_vars) = -(static_cast<double>(clause.size()) - 1.0);
  return z;
}

// Both polarities encode the DNF whose terms are the negated clauses: for
// P it is the negation of the CNF (label 0), for not-P it is the constraint
// itself (label 1).
inline std::pair<Eigen::VectorXd, int> encode_constraint(const Constraint& c, int n_vars) {
  const Eigen::Index s = n_vars + 1;
  Eigen::VectorXd x(s * static_cast<Eigen::Index>(c.clauses.size()));
  for (std::size_t j = 0; j < c.clauses.size(); ++j)
    x.segment(static_cast<Eigen::Index>(j) * s, s) = encode_clause(negate(c.clauses[j]), n_vars);
  return {std::move(x), c.polarity == Polarity::negated ? 1 : 0};
}

inline LabeledSample encode_formula(const Formula& f) {
  if (f.kind != FormulaKind::mixed) throw std::invalid_argument("encode_formula expects a MIXED formula");
  const Eigen::Index n = static_cast<Eigen::Index>(f.n_vars + 1) * f.q;
  LabeledSample s(n, f.size());
  s.n_vars = f.n_vars;
  s.q = f.q;
  s.K = f.K;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto [x, y] = encode_constraint(f.constraints[i], f.n_vars);
    if (x.size() != n) throw std::invalid_argument("constraint has wrong clause count");
    s.point(i) = x;
    s.labels[i] = y;
  }
  if (f.planted && satisfies_all(f, *f.planted)) s.provenance.kind = SampleKind::realizable;
  else if (f.origin == Origin::random) s.provenance.kind = SampleKind::scattered;
  else s.provenance.kind = SampleKind::unknown;
  s.provenance.source = formula_id(f);
  s.norm_bound = std::sqrt(static_cast<double>(f.q) * (f.K + (f.K - 1.0) * (f.K - 1.0)));
  return s;
}

inline CnnFilter realizing_weights(const Assignment& psi, int q = 0) {
  CnnFilter f;
  const auto t = static_cast<Eigen::Index>(psi.size()) + 1;
  f.w.resize(t);
  for (Eigen::Index i = 0; i + 1 < t; ++i) f.w(i) = psi[static_cast<std::size_t>(i)];
  f.w(t - 1) = 1.0;
  f.n = q > 0 ? t * q : 0;
  return f;
}

}  // namespace rnnhard
