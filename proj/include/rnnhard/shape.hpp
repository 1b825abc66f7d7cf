#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnnhard {

// All logarithms in bounds and shapes are natural logarithms.
inline double ln(double x) { return std::log(x); }

inline double ln_sq(double x) {
  const double l = std::log(x);
  return l * l;
}

// Clauses per constraint: ceil(ln^2 n'), at least 1.
inline int canonical_q(int n_vars) {
  if (n_vars < 1) throw std::invalid_argument("n_vars must be positive");
  return std::max(1, static_cast<int>(std::ceil(ln_sq(static_cast<double>(n_vars)))));
}

inline bool is_canonical_shape(int n_vars, int q) { return n_vars >= 1 && q == canonical_q(n_vars); }

inline int sample_dim(int n_vars, int q) { return (n_vars + 1) * q; }

}  // namespace rnnhard
