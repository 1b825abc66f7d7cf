#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "rnnhard/random.hpp"
#include "rnnhard/shape.hpp"

namespace rnnhard {

// Sigma = U Lambda U^T. factor = U Lambda^{1/2} satisfies factor factor^T =
// Sigma; inverse_transpose = U Lambda^{-1/2} is (factor^T)^{-1}.
struct Correlator {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd factor;
  Eigen::MatrixXd inverse_transpose;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

inline Correlator gaussian_correlator(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw std::invalid_argument("invalid-parameter: Sigma must be square");
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw std::invalid_argument("invalid-parameter: Sigma must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw std::invalid_argument("invalid-parameter: eigendecomposition failed");
  const Eigen::VectorXd lam = eig.eigenvalues();
  if (!(lam.minCoeff() > 0.0)) throw std::invalid_argument("invalid-parameter: Sigma is not positive definite");
  Correlator c;
  c.sigma = sigma;
  c.factor = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
  c.inverse_transpose = eig.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  c.lambda_min = lam.minCoeff();
  c.lambda_max = lam.maxCoeff();
  return c;
}

// Sigma_ab = scale * rho^|a-b|.
inline Eigen::MatrixXd ar1_covariance(Eigen::Index dim, double rho, double scale = 1.0) {
  if (!(rho > -1.0 && rho < 1.0) || !(scale > 0.0)) throw std::invalid_argument("invalid-parameter: need |rho| < 1, scale > 0");
  Eigen::MatrixXd s(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < dim; ++b) s(a, b) = scale * std::pow(rho, static_cast<double>(std::abs(a - b)));
  return s;
}

enum class Family { iid, gaussian_cols, sphere_cols };
enum class Law { normal, uniform, bernoulli };

class DistributionSpec {
 public:
  static DistributionSpec normal(double sigma) { return iid(Law::normal, sigma); }
  static DistributionSpec uniform(double r) { return iid(Law::uniform, r); }
  static DistributionSpec bernoulli(double r) { return iid(Law::bernoulli, r); }

  static DistributionSpec gaussian_cols(const Eigen::MatrixXd& sigma) {
    DistributionSpec d;
    d.family_ = Family::gaussian_cols;
    d.correlator_ = std::make_shared<const Correlator>(gaussian_correlator(sigma));
    return d;
  }

  static DistributionSpec sphere(double r) {
    if (!(r > 0.0)) throw std::invalid_argument("invalid-parameter: radius must be positive");
    DistributionSpec d;
    d.family_ = Family::sphere_cols;
    d.scale_ = r;
    return d;
  }

  Family family() const { return family_; }
  Law law() const { return law_; }
  // sigma for normal, r for uniform / bernoulli / sphere.
  double scale() const { return scale_; }

  // Standard deviation of one iid entry.
  double sigma() const {
    switch (law_) {
      case Law::normal: return scale_;
      case Law::uniform: return scale_ / std::sqrt(3.0);
      case Law::bernoulli: return scale_;
    }
    return scale_;
  }

  double radius() const { return scale_; }

  const Correlator& correlator() const {
    if (!correlator_) throw std::logic_error("distribution has no covariance");
    return *correlator_;
  }
  Eigen::Index dim() const { return correlator_ ? correlator_->sigma.rows() : 0; }
  double lambda_min() const { return correlator().lambda_min; }

  // Lower tail scale for the minimum |z_i| over t iid draws: r for
  // bernoulli, r/(t ln t) for uniform, sigma/(t ln t) for normal.
  double concentration(double t) const {
    if (family_ != Family::iid) throw std::logic_error("concentration is defined for iid laws");
    if (law_ == Law::bernoulli) return scale_;
    const double tl = t * std::log(t);
    return scale_ / (tl > 0.0 ? tl : 1.0);
  }

  std::string tag() const {
    switch (family_) {
      case Family::iid:
        return law_ == Law::normal ? "iid-normal" : law_ == Law::uniform ? "iid-uniform" : "iid-bernoulli";
      case Family::gaussian_cols: return "gaussian-cols";
      case Family::sphere_cols: return "sphere";
    }
    return "?";
  }

 private:
  static DistributionSpec iid(Law law, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("invalid-parameter: scale must be positive");
    DistributionSpec d;
    d.family_ = Family::iid;
    d.law_ = law;
    d.scale_ = scale;
    return d;
  }

  Family family_ = Family::iid;
  Law law_ = Law::normal;
  double scale_ = 1.0;
  std::shared_ptr<const Correlator> correlator_;
};

inline double sample_law(Law law, double scale, Rng& rng) {
  switch (law) {
    case Law::normal: return scale * rng.normal();
    case Law::uniform: return rng.uniform(-scale, scale);
    case Law::bernoulli: return scale * rng.sign();
  }
  return 0.0;
}

inline Eigen::VectorXd sample_normal_vector(Eigen::Index dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.normal();
  return v;
}

// Uniform on the radius-r sphere in R^dim.
inline Eigen::VectorXd sample_sphere(Eigen::Index dim, double r, Rng& rng) {
  for (;;) {
    Eigen::VectorXd g = sample_normal_vector(dim, rng);
    const double nrm = g.norm();
    if (nrm > 0.0) return g * (r / nrm);
  }
}

// Haar orthogonal matrix: QR of a Gaussian matrix with R's diagonal made
// positive.
inline Eigen::MatrixXd sample_haar_orthogonal(Eigen::Index t, Rng& rng) {
  Eigen::MatrixXd g(t, t);
  for (Eigen::Index j = 0; j < t; ++j)
    for (Eigen::Index i = 0; i < t; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < t; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

// Direct draw of a dim x cols weight matrix from the target law: iid
// entries, or independent columns for the column families.
inline Eigen::MatrixXd sample_direct(const DistributionSpec& spec, Eigen::Index dim, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd W(dim, cols);
  switch (spec.family()) {
    case Family::iid:
      for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < dim; ++i) W(i, j) = sample_law(spec.law(), spec.scale(), rng);
      break;
    case Family::sphere_cols:
      for (Eigen::Index j = 0; j < cols; ++j) W.col(j) = sample_sphere(dim, spec.radius(), rng);
      break;
    case Family::gaussian_cols:
      if (spec.dim() != dim) throw std::invalid_argument("covariance dimension does not match");
      for (Eigen::Index j = 0; j < cols; ++j) W.col(j) = spec.correlator().factor * sample_normal_vector(dim, rng);
      break;
  }
  return W;
}

}  // namespace rnnhard
