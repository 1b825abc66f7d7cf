#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <variant>

#include "rnnhard/gadget.hpp"

namespace rnnhard {

// Depth-2 networks x -> clip(sum_j ReLU(<w_j, x>)). FC weights are n x m
// with one hidden unit per column.
struct NetworkWeights {
  std::variant<Eigen::MatrixXd, CnnFilter> form;

  NetworkWeights() = default;
  NetworkWeights(Eigen::MatrixXd W) : form(std::move(W)) {}
  NetworkWeights(CnnFilter f) : form(std::move(f)) {}

  bool is_fc() const { return std::holds_alternative<Eigen::MatrixXd>(form); }
  bool is_cnn() const { return std::holds_alternative<CnnFilter>(form); }
  const Eigen::MatrixXd& fc() const { return std::get<Eigen::MatrixXd>(form); }
  const CnnFilter& cnn() const { return std::get<CnnFilter>(form); }
};

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

inline double clip01(double s) { return std::min(1.0, std::max(0.0, s)); }

template <class Vec>
double pre_clip_fc(const Eigen::MatrixXd& W, const Vec& x) {
  if (W.rows() != x.size()) throw std::invalid_argument("dimension mismatch: W has " + std::to_string(W.rows()) +
                                                        " rows, x has " + std::to_string(x.size()));
  double s = 0.0;
  for (Eigen::Index j = 0; j < W.cols(); ++j) s += relu(W.col(j).dot(x));
  return s;
}

template <class Vec>
double pre_clip_cnn(const CnnFilter& f, const Vec& x) {
  const Eigen::Index t = f.patch();
  if (t == 0 || x.size() % t != 0) throw std::invalid_argument("dimension mismatch: filter length must divide input");
  if (f.n != 0 && f.n != x.size()) throw std::invalid_argument("dimension mismatch: filter bound to another input size");
  double s = 0.0;
  for (Eigen::Index p = 0; p < x.size(); p += t) s += relu(f.w.dot(x.segment(p, t)));
  return s;
}

template <class Vec>
double eval_fc(const Eigen::MatrixXd& W, const Vec& x) {
  return clip01(pre_clip_fc(W, x));
}

template <class Vec>
double eval_cnn(const CnnFilter& f, const Vec& x) {
  return clip01(pre_clip_cnn(f, x));
}

template <class Vec>
double pre_clip(const NetworkWeights& net, const Vec& x) {
  return net.is_fc() ? pre_clip_fc(net.fc(), x) : pre_clip_cnn(net.cnn(), x);
}

template <class Vec>
double eval(const NetworkWeights& net, const Vec& x) {
  return clip01(pre_clip(net, x));
}

// Column i holds w in the i-th block of length t.
inline Eigen::MatrixXd cnn_to_matrix(const CnnFilter& f, Eigen::Index k) {
  const Eigen::Index t = f.patch();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(t * k, k);
  for (Eigen::Index i = 0; i < k; ++i) W.block(i * t, i, t, 1) = f.w;
  return W;
}

}  // namespace rnnhard
