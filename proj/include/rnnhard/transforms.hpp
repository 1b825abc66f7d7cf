#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnhard/distribution.hpp"
#include "rnnhard/gadget.hpp"
#include "rnnhard/network.hpp"
#include "rnnhard/parallel.hpp"

namespace rnnhard {

struct SingularTransform : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double smallest_singular_value(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
}

// n x n diagonal-blocks matrix, k x k blocks of size s, block (a, b) being
// diag(z^{ab}). Entry M[a*s + i][b*s + i] = z^{ab}_i. The submatrix on the
// coordinates S_i = {a*s + i} is M_{S_i}[a][b] = z^{ab}_i and M is
// permutation-similar to diag(M_{S_1}, ..., M_{S_s}).
class BlockTransform {
 public:
  BlockTransform() = default;

  // diagonals[((a*k) + b)*s + i] = z^{ab}_i
  BlockTransform(Eigen::Index blocks, Eigen::Index block_size, std::vector<double> diagonals, std::string family)
      : k_(blocks), s_(block_size), z_(std::move(diagonals)), family_(std::move(family)) {
    if (k_ < 1 || s_ < 1) throw std::invalid_argument("block transform needs positive shape");
    if (z_.size() != static_cast<std::size_t>(k_ * k_ * s_)) throw std::invalid_argument("diagonal count does not match shape");
    subs_.resize(static_cast<std::size_t>(s_));
    lu_.resize(static_cast<std::size_t>(s_));
    block_smin_.resize(static_cast<std::size_t>(s_));
    smin_ = std::numeric_limits<double>::infinity();
    smax_ = 0.0;
    for (Eigen::Index i = 0; i < s_; ++i) {
      Eigen::MatrixXd m(k_, k_);
      for (Eigen::Index a = 0; a < k_; ++a)
        for (Eigen::Index b = 0; b < k_; ++b) m(a, b) = diag(a, b, i);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      const auto& sv = svd.singularValues();
      block_smin_[static_cast<std::size_t>(i)] = sv.minCoeff();
      smin_ = std::min(smin_, sv.minCoeff());
      smax_ = std::max(smax_, sv.maxCoeff());
      lu_[static_cast<std::size_t>(i)].compute(m.transpose());
      subs_[static_cast<std::size_t>(i)] = std::move(m);
    }
  }

  Eigen::Index blocks() const { return k_; }
  Eigen::Index block_size() const { return s_; }
  Eigen::Index dim() const { return k_ * s_; }
  const std::string& family() const { return family_; }
  const std::vector<double>& diagonals() const { return z_; }

  double diag(Eigen::Index a, Eigen::Index b, Eigen::Index i) const {
    return z_[static_cast<std::size_t>((a * k_ + b) * s_ + i)];
  }

  const Eigen::MatrixXd& submatrix(Eigen::Index i) const { return subs_[static_cast<std::size_t>(i)]; }
  double block_smin(Eigen::Index i) const { return block_smin_[static_cast<std::size_t>(i)]; }

  double smin() const { return smin_; }
  double smax() const { return smax_; }
  double condition() const { return smin_ > 0.0 ? smax_ / smin_ : std::numeric_limits<double>::infinity(); }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim(), dim());
    for (Eigen::Index a = 0; a < k_; ++a)
      for (Eigen::Index b = 0; b < k_; ++b)
        for (Eigen::Index i = 0; i < s_; ++i) M(a * s_ + i, b * s_ + i) = diag(a, b, i);
    return M;
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd>& transpose_lu(Eigen::Index i) const { return lu_[static_cast<std::size_t>(i)]; }

 private:
  Eigen::Index k_ = 0, s_ = 0;
  std::vector<double> z_;
  std::string family_;
  std::vector<Eigen::MatrixXd> subs_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
  std::vector<double> block_smin_;
  double smin_ = 0.0, smax_ = 0.0;
};

inline double smin_blockwise(const BlockTransform& M) { return M.smin(); }

inline BlockTransform identity_transform(Eigen::Index k, Eigen::Index s) {
  std::vector<double> z(static_cast<std::size_t>(k * k * s), 0.0);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index i = 0; i < s; ++i) z[static_cast<std::size_t>((a * k + a) * s + i)] = 1.0;
  return BlockTransform(k, s, std::move(z), "identity");
}

// x' = (M^T)^{-1} x, one k x k solve per index i.
template <class Vec>
Eigen::VectorXd apply_inverse_transpose(const BlockTransform& M, const Vec& x) {
  if (x.size() != M.dim()) throw std::invalid_argument("dimension mismatch in apply_inverse_transpose");
  if (!(M.smin() > 0.0)) throw SingularTransform("transform is singular");
  const Eigen::Index k = M.blocks(), s = M.block_size();
  Eigen::VectorXd out(M.dim()), rhs(k);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index a = 0; a < k; ++a) rhs(a) = x(a * s + i);
    const Eigen::VectorXd u = M.transpose_lu(i).solve(rhs);
    for (Eigen::Index a = 0; a < k; ++a) out(a * s + i) = u(a);
  }
  return out;
}

// W' = M * cnn_to_matrix(w, k): W'(a*s + r, j) = z^{aj}_r * w_r.
inline Eigen::MatrixXd push_weights(const BlockTransform& M, const Eigen::VectorXd& w) {
  const Eigen::Index k = M.blocks(), s = M.block_size();
  if (w.size() != s) throw std::invalid_argument("filter length must equal block size");
  Eigen::MatrixXd W(M.dim(), k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index r = 0; r < s; ++r) W(a * s + r, j) = M.diag(a, j, r) * w(r);
  return W;
}

// Fresh transform for the iid and sphere families. Sphere: the k vectors
// z^j = (z^{0j}, ..., z^{(k-1)j}) in R^{k*s} are uniform on the r-sphere.
inline BlockTransform sample_fc_transform(const DistributionSpec& spec, int n_vars, Eigen::Index k, std::uint64_t seed) {
  const Eigen::Index s = n_vars + 1;
  if (n_vars < 0 || k < 1) throw std::invalid_argument("invalid transform shape");
  Rng rng(seed, "fc-transform");
  std::vector<double> z(static_cast<std::size_t>(k * k * s));
  switch (spec.family()) {
    case Family::iid:
      for (auto& v : z) v = sample_law(spec.law(), spec.scale(), rng);
      break;
    case Family::sphere_cols:
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::VectorXd col = sample_sphere(k * s, spec.radius(), rng);
        for (Eigen::Index a = 0; a < k; ++a)
          for (Eigen::Index i = 0; i < s; ++i) z[static_cast<std::size_t>((a * k + j) * s + i)] = col(a * s + i);
      }
      break;
    case Family::gaussian_cols:
      throw std::invalid_argument("unsupported family: Gaussian columns use a two-stage transform");
  }
  return BlockTransform(k, s, std::move(z), spec.tag());
}

// Patch-level transform pair: filter' = weight_map * w and patch' =
// patch_map * x_p, so that <filter', patch'> = <w, x_p>.
struct CnnTransform {
  std::string family;
  Eigen::MatrixXd weight_map;
  Eigen::MatrixXd patch_map;
  double min_abs_diag = 0.0;  // diagonal stage of the iid and Gaussian cases
  double smin = 0.0;          // of weight_map
  double smax = 0.0;

  double condition() const { return smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity(); }
};

inline CnnTransform sample_cnn_transform(const DistributionSpec& spec, Eigen::Index t, std::uint64_t seed) {
  if (t < 1) throw std::invalid_argument("patch length must be positive");
  Rng rng(seed, "cnn-transform");
  CnnTransform T;
  T.family = spec.tag();
  auto nonzero_diag = [&](Law law, double scale) {
    Eigen::VectorXd z(t);
    do {
      for (Eigen::Index i = 0; i < t; ++i) z(i) = sample_law(law, scale, rng);
    } while (!(z.cwiseAbs().minCoeff() > 0.0));
    return z;
  };
  switch (spec.family()) {
    case Family::iid: {
      const Eigen::VectorXd z = nonzero_diag(spec.law(), spec.scale());
      T.weight_map = z.asDiagonal();
      T.patch_map = z.cwiseInverse().asDiagonal();
      T.min_abs_diag = z.cwiseAbs().minCoeff();
      break;
    }
    case Family::sphere_cols: {
      const Eigen::MatrixXd Q = sample_haar_orthogonal(t, rng);
      const double c = spec.radius() / std::sqrt(static_cast<double>(t));
      T.weight_map = c * Q;
      T.patch_map = Q / c;
      break;
    }
    case Family::gaussian_cols: {
      if (spec.dim() != t) throw std::invalid_argument("covariance dimension must equal the patch length");
      const Eigen::VectorXd z = nonzero_diag(Law::normal, 1.0);
      T.weight_map = spec.correlator().factor * z.asDiagonal();
      T.patch_map = spec.correlator().inverse_transpose * z.cwiseInverse().asDiagonal();
      T.min_abs_diag = z.cwiseAbs().minCoeff();
      break;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T.weight_map);
  T.smin = svd.singularValues().minCoeff();
  T.smax = svd.singularValues().maxCoeff();
  return T;
}

inline CnnFilter push_filter(const CnnTransform& T, const CnnFilter& f) {
  if (f.patch() != T.weight_map.cols()) throw std::invalid_argument("filter length does not match transform");
  return {T.weight_map * f.w, f.n};
}

template <class Vec>
Eigen::VectorXd apply_patch_map(const CnnTransform& T, const Vec& x) {
  const Eigen::Index t = T.patch_map.cols();
  if (x.size() % t != 0) throw std::invalid_argument("patch length must divide the input");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index p = 0; p < x.size(); p += t) out.segment(p, t) = T.patch_map * x.segment(p, t);
  return out;
}

// Applies f to every point of a sample; labels and metadata are copied.
template <class F>
LabeledSample map_points(const LabeledSample& in, Eigen::Index out_dim, unsigned threads, F&& f) {
  LabeledSample out = in;
  out.features.resize(out_dim, static_cast<Eigen::Index>(in.size()));
  parallel_for(in.size(), threads, [&](std::size_t i) { out.point(i) = f(in.point(i)); });
  return out;
}

}  // namespace rnnhard
