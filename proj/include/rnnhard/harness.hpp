#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rnnhard/distribution.hpp"
#include "rnnhard/gadget.hpp"
#include "rnnhard/network.hpp"
#include "rnnhard/parallel.hpp"
#include "rnnhard/stats.hpp"
#include "rnnhard/transforms.hpp"

namespace rnnhard {

using json = nlohmann::ordered_json;

// ------------------------------------------------------------------ reports

enum class Outcome { pass, fail, inconclusive };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::inconclusive: return "inconclusive";
  }
  return "?";
}

inline Outcome parse_outcome(const std::string& s) {
  if (s == "pass") return Outcome::pass;
  if (s == "fail") return Outcome::fail;
  return Outcome::inconclusive;
}

// `threshold` is the significance level for tests with a p-value and the
// tolerance for exact checks.
struct StatReport {
  std::string test;
  double statistic = 0.0;
  std::optional<double> p_value;
  Outcome outcome = Outcome::inconclusive;
  std::size_t sample_size = 0;
  double threshold = 0.0;
  std::string note;
};

inline StatReport p_report(std::string test, double statistic, double p, double alpha, std::size_t n, std::string note = {}) {
  return {std::move(test), statistic, p, p > alpha ? Outcome::pass : Outcome::fail, n, alpha, std::move(note)};
}

inline StatReport exact_report(std::string test, double deviation, double tol, std::size_t n, std::string note = {}) {
  return {std::move(test), deviation, std::nullopt, deviation <= tol ? Outcome::pass : Outcome::fail, n, tol, std::move(note)};
}

inline StatReport inconclusive_report(std::string test, std::size_t n, std::string note) {
  return {std::move(test), 0.0, std::nullopt, Outcome::inconclusive, n, 0.0, std::move(note)};
}

inline json to_json(const StatReport& r) {
  json j;
  j["test"] = r.test;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value ? json(*r.p_value) : json(nullptr);
  j["outcome"] = outcome_name(r.outcome);
  j["sample_size"] = r.sample_size;
  j["threshold"] = r.threshold;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline StatReport stat_report_from_json(const json& j) {
  StatReport r;
  r.test = j.at("test").get<std::string>();
  r.statistic = j.at("statistic").get<double>();
  if (!j.at("p_value").is_null()) r.p_value = j.at("p_value").get<double>();
  r.outcome = parse_outcome(j.at("outcome").get<std::string>());
  r.sample_size = j.at("sample_size").get<std::size_t>();
  r.threshold = j.at("threshold").get<double>();
  if (j.contains("note")) r.note = j.at("note").get<std::string>();
  return r;
}

inline json to_json(const std::vector<StatReport>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back(to_json(r));
  return a;
}

inline std::string render_table(const std::vector<StatReport>& rs) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-34s %14s %12s %10s %10s  %s\n", "test", "statistic", "p-value", "n", "threshold", "outcome");
  os << line;
  for (const auto& r : rs) {
    char p[32] = "-";
    if (r.p_value) std::snprintf(p, sizeof p, "%.4g", *r.p_value);
    std::snprintf(line, sizeof line, "%-34s %14.6g %12s %10zu %10.3g  %s\n", r.test.c_str(), r.statistic, p, r.sample_size,
                  r.threshold, outcome_name(r.outcome));
    os << line;
  }
  return os.str();
}

// 0 all pass, 1 any failure, 2 inconclusive without failures.
inline int exit_code(const std::vector<StatReport>& rs) {
  bool inconclusive = false;
  for (const auto& r : rs) {
    if (r.outcome == Outcome::fail) return 1;
    inconclusive = inconclusive || r.outcome == Outcome::inconclusive;
  }
  return inconclusive ? 2 : 0;
}

inline bool all_pass(const std::vector<StatReport>& rs) { return exit_code(rs) == 0; }

// ------------------------------------------------------------ realizability

struct Realizability {
  bool realizable = false;
  double max_residual = 0.0;  // distance of pre-clip sums from the label's target set
  std::size_t violations = 0;
  std::size_t exact_matches = 0;  // clipped output bit-equal to the label
};

// Label 1 needs a pre-clip sum >= 1 - tol, label 0 one <= tol. With tol = 0
// a pass means every clipped output equals its label exactly.
inline Realizability check_realizable(const LabeledSample& s, const NetworkWeights& net, double tol = 0.0,
                                      unsigned threads = 1) {
  std::vector<double> sums(s.size());
  parallel_for(s.size(), threads, [&](std::size_t i) { sums[i] = pre_clip(net, s.point(i)); });
  Realizability r;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double y = s.labels[i];
    const double res = y == 1.0 ? std::max(0.0, 1.0 - sums[i]) : std::max(0.0, sums[i]);
    const double out = clip01(sums[i]);
    r.max_residual = std::max(r.max_residual, res);
    if (out == y) ++r.exact_matches;
    if (res > tol || std::abs(out - y) > tol) ++r.violations;
  }
  r.realizable = r.violations == 0;
  return r;
}

// ---------------------------------------------------------------- scattered

inline std::vector<StatReport> test_scattered(const LabeledSample& s, double alpha = 0.001) {
  const std::size_t m = s.size();
  if (m < 100) return {inconclusive_report("scattered", m, "needs at least 100 points")};
  std::vector<StatReport> out;
  std::size_t ones = 0;
  for (int y : s.labels) ones += y == 1 ? 1 : 0;
  out.push_back(p_report("label-balance-binomial", static_cast<double>(ones) / static_cast<double>(m),
                         stats::binomial_two_sided_p(ones, m), alpha, m, "fraction of label 1 vs Binomial(m, 1/2)"));
  std::vector<double> col(m);
  double min_p = 1.0, max_r = 0.0;
  std::size_t tested = 0;
  for (Eigen::Index j = 0; j < s.dim(); ++j) {
    for (std::size_t i = 0; i < m; ++i) col[i] = s.features(j, static_cast<Eigen::Index>(i));
    const auto c = stats::point_biserial(col, s.labels);
    if (c.degenerate) continue;
    ++tested;
    min_p = std::min(min_p, c.p_value);
    max_r = std::max(max_r, std::abs(c.r));
  }
  if (tested == 0) {
    out.push_back(inconclusive_report("feature-label-independence", m, "all coordinates constant"));
  } else {
    out.push_back(p_report("feature-label-independence", max_r, std::min(1.0, min_p * static_cast<double>(tested)), alpha, m,
                           "max |point-biserial r| over " + std::to_string(tested) + " coordinates, Bonferroni"));
  }
  return out;
}

// ------------------------------------------------------------- distribution

// `draws`: matrices whose columns are independent weight vectors (FC hidden
// units or CNN filters). They are compared against direct samples of the
// same shapes drawn from `reference_seed`.
inline std::vector<StatReport> test_distribution(const std::vector<Eigen::MatrixXd>& draws, const DistributionSpec& spec,
                                                 std::uint64_t reference_seed, double alpha = 0.01) {
  if (draws.empty()) throw std::invalid_argument("no weights to test");
  const Eigen::Index dim = draws.front().rows();
  for (const auto& d : draws)
    if (d.rows() != dim) throw std::invalid_argument("weight draws differ in dimension");
  if (spec.family() == Family::gaussian_cols && spec.dim() != dim)
    throw std::invalid_argument("family mismatch: covariance dimension differs from weight dimension");

  Rng rng(reference_seed, "reference");
  std::vector<Eigen::MatrixXd> ref;
  for (const auto& d : draws) ref.push_back(sample_direct(spec, dim, d.cols(), rng));
  auto pooled = [](const std::vector<Eigen::MatrixXd>& ms) {
    std::vector<double> v;
    for (const auto& m : ms) v.insert(v.end(), m.data(), m.data() + m.size());
    return v;
  };
  auto columns = [](const std::vector<Eigen::MatrixXd>& ms) {
    std::vector<Eigen::VectorXd> v;
    for (const auto& m : ms)
      for (Eigen::Index j = 0; j < m.cols(); ++j) v.emplace_back(m.col(j));
    return v;
  };

  std::vector<StatReport> out;
  const std::string tag = spec.tag();
  switch (spec.family()) {
    case Family::iid: {
      const auto a = pooled(draws), b = pooled(ref);
      if (spec.law() == Law::bernoulli) {
        double dev = 0.0;
        for (double x : a) dev = std::max(dev, std::abs(std::abs(x) - spec.scale()));
        out.push_back(exact_report(tag + ":magnitude", dev, 0.0, a.size(), "every |entry| equals r bit-exactly"));
      }
      const auto ks = stats::ks_two_sample(a, b);
      out.push_back(p_report(tag + ":ks-entries", ks.statistic, ks.p_value, alpha, a.size()));
      for (int order = 1; order <= 4; ++order) {
        const auto mt = stats::compare_moment(a, b, order);
        out.push_back(p_report(tag + ":moment-" + std::to_string(order), mt.z, mt.p_value, alpha / 4.0, a.size(),
                               "raw moment z-test, Bonferroni over 4 orders"));
      }
      break;
    }
    case Family::sphere_cols: {
      const auto ca = columns(draws), cb = columns(ref);
      const double r = spec.radius();
      double dev = 0.0;
      for (const auto& c : ca) dev = std::max(dev, std::abs(c.norm() - r));
      out.push_back(exact_report(tag + ":column-norm", dev, 1e-9 * std::max(1.0, r), ca.size(), "| ||w_j|| - r |"));
      Rng prng(reference_seed, "projection");
      const Eigen::VectorXd u = sample_sphere(dim, 1.0, prng);
      std::vector<double> pa, pb;
      for (const auto& c : ca) pa.push_back(c.dot(u));
      for (const auto& c : cb) pb.push_back(c.dot(u));
      const auto ks = stats::ks_two_sample(pa, pb);
      out.push_back(p_report(tag + ":ks-projection", ks.statistic, ks.p_value, alpha, pa.size(), "fixed random direction"));
      break;
    }
    case Family::gaussian_cols: {
      const auto ca = columns(draws), cb = columns(ref);
      const auto N = static_cast<double>(ca.size());
      const Eigen::MatrixXd& sigma = spec.correlator().sigma;
      if (ca.size() < 30) {
        out.push_back(inconclusive_report(tag + ":covariance", ca.size(), "fewer than 30 columns"));
      } else {
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto& c : ca) S.noalias() += c * c.transpose();
        S /= N;
        double max_z = 0.0;
        for (Eigen::Index a = 0; a < dim; ++a)
          for (Eigen::Index b = a; b < dim; ++b) {
            const double sd = std::sqrt((sigma(a, a) * sigma(b, b) + sigma(a, b) * sigma(a, b)) / N);
            max_z = std::max(max_z, std::abs(S(a, b) - sigma(a, b)) / sd);
          }
        const double entries = static_cast<double>(dim * (dim + 1) / 2);
        const double zcrit = stats::normal_upper_quantile(alpha / (2.0 * entries));
        StatReport rep{tag + ":covariance", max_z, std::nullopt, max_z <= zcrit ? Outcome::pass : Outcome::fail, ca.size(),
                       zcrit, "max |S_ab - Sigma_ab| / sd_ab vs Bonferroni normal quantile"};
        out.push_back(rep);
      }
      double min_p = 1.0, max_d = 0.0;
      std::vector<double> xa(ca.size()), xb(cb.size());
      for (Eigen::Index a = 0; a < dim; ++a) {
        for (std::size_t i = 0; i < ca.size(); ++i) xa[i] = ca[i](a);
        for (std::size_t i = 0; i < cb.size(); ++i) xb[i] = cb[i](a);
        const auto ks = stats::ks_two_sample(xa, xb);
        min_p = std::min(min_p, ks.p_value);
        max_d = std::max(max_d, ks.statistic);
      }
      out.push_back(p_report(tag + ":ks-coordinates", max_d, std::min(1.0, min_p * static_cast<double>(dim)), alpha, ca.size(),
                             "per-coordinate KS, Bonferroni"));
      break;
    }
  }
  return out;
}

inline std::vector<StatReport> test_distribution(const NetworkWeights& net, const DistributionSpec& spec,
                                                 std::uint64_t reference_seed, double alpha = 0.01) {
  if (net.is_fc()) return test_distribution(std::vector<Eigen::MatrixXd>{net.fc()}, spec, reference_seed, alpha);
  return test_distribution(std::vector<Eigen::MatrixXd>{Eigen::MatrixXd(net.cnn().w)}, spec, reference_seed, alpha);
}

// ----------------------------------------------------------- spectral tails

inline double iid_smin_threshold(const DistributionSpec& spec, int n_vars) {
  const double n = n_vars;
  return spec.sigma() / (n * ln_sq(n));
}

inline double sphere_smin_threshold(const DistributionSpec& spec, int n_vars, double c_prime = 1.0) {
  const double n = n_vars, l = ln(n);
  return c_prime * spec.radius() / (n * std::sqrt(n) * std::pow(l, 5));
}

inline double default_smin_threshold(const DistributionSpec& spec, int n_vars) {
  return spec.family() == Family::sphere_cols ? sphere_smin_threshold(spec, n_vars) : iid_smin_threshold(spec, n_vars);
}

struct SminTail {
  std::vector<double> smin;
  double threshold = 0.0;
  std::size_t exceed = 0;  // trials with smin <= threshold
  double exceedance = 0.0;
};

inline SminTail mc_smin_tail(const DistributionSpec& spec, int n_vars, Eigen::Index k, std::size_t trials, double threshold,
                             std::uint64_t seed, unsigned threads = 1) {
  if (trials < 100) throw std::invalid_argument("inconclusive: mc_smin_tail needs at least 100 trials");
  SminTail t;
  t.threshold = threshold;
  t.smin.resize(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    t.smin[i] = sample_fc_transform(spec, n_vars, k, derive_seed(seed, "smin-trial", i)).smin();
  });
  for (double v : t.smin) t.exceed += v <= threshold ? 1 : 0;
  t.exceedance = static_cast<double>(t.exceed) / static_cast<double>(trials);
  return t;
}

// ------------------------------------------------------------ distinguisher

using Predictor = std::function<double(const Eigen::VectorXd&)>;

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform draws with replacement from a fixed sample, at most `budget`.
class ExampleOracle {
 public:
  ExampleOracle(const LabeledSample& s, std::uint64_t seed, std::size_t budget)
      : sample_(s), rng_(seed, "oracle"), budget_(budget) {}

  std::pair<Eigen::VectorXd, int> draw() {
    if (draws_ >= budget_) throw BudgetExceeded("learner exceeded its budget of " + std::to_string(budget_) + " examples");
    ++draws_;
    const auto i = static_cast<std::size_t>(rng_.below(sample_.size()));
    return {sample_.point(i), sample_.labels[i]};
  }

  std::size_t draws() const { return draws_; }
  std::size_t budget() const { return budget_; }
  Eigen::Index dim() const { return sample_.dim(); }

 private:
  const LabeledSample& sample_;
  Rng rng_;
  std::size_t budget_;
  std::size_t draws_ = 0;
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  virtual Predictor learn(ExampleOracle& oracle) = 0;
};

// Ignores the oracle and returns the realizing network.
class CheatingLearner : public Learner {
 public:
  explicit CheatingLearner(NetworkWeights net) : net_(std::move(net)) {}
  std::string name() const override { return "cheating"; }
  Predictor learn(ExampleOracle&) override {
    return [net = net_](const Eigen::VectorXd& x) { return eval(net, x); };
  }

 private:
  NetworkWeights net_;
};

class ConstantLearner : public Learner {
 public:
  explicit ConstantLearner(double c = 0.5) : c_(c) {}
  std::string name() const override { return "constant"; }
  Predictor learn(ExampleOracle&) override {
    return [c = c_](const Eigen::VectorXd&) { return c; };
  }

 private:
  double c_;
};

// Spends the whole budget, answers seen points from memory and 1/2 elsewhere.
class MemorizingLearner : public Learner {
 public:
  std::string name() const override { return "memorizing"; }
  Predictor learn(ExampleOracle& oracle) override {
    auto memory = std::make_shared<std::map<std::vector<double>, int>>();
    while (oracle.draws() < oracle.budget()) {
      auto [x, y] = oracle.draw();
      (*memory)[std::vector<double>(x.data(), x.data() + x.size())] = y;
    }
    return [memory](const Eigen::VectorXd& x) {
      auto it = memory->find(std::vector<double>(x.data(), x.data() + x.size()));
      return it == memory->end() ? 0.5 : static_cast<double>(it->second);
    };
  }
};

enum class Verdict { scattered, realizable };

inline const char* verdict_name(Verdict v) { return v == Verdict::realizable ? "realizable" : "scattered"; }

struct DistinguishResult {
  Verdict verdict = Verdict::scattered;
  double loss = 0.0;
  std::size_t draws = 0;
  std::size_t sample_size = 0;
  bool aborted = false;
  std::string reason;
};

inline constexpr double kDistinguishThreshold = 0.1;

// The learner sees at most m examples; its predictor is then scored by mean
// squared error over the whole sample, realizable iff the loss is <= 1/10.
inline DistinguishResult distinguish_with_learner(Learner& learner, const LabeledSample& s, std::size_t m,
                                                  std::uint64_t seed) {
  const std::size_t need = 9 * m + static_cast<std::size_t>(s.dim());
  if (s.size() < need) throw std::invalid_argument("sample needs at least 9m + n = " + std::to_string(need) + " points");
  DistinguishResult r;
  r.sample_size = s.size();
  ExampleOracle oracle(s, seed, m);
  Predictor h;
  try {
    h = learner.learn(oracle);
  } catch (const BudgetExceeded& e) {
    r.aborted = true;
    r.draws = oracle.draws();
    r.reason = e.what();
    return r;
  }
  r.draws = oracle.draws();
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = h(s.point(i)) - s.labels[i];
    loss += d * d;
  }
  r.loss = loss / static_cast<double>(s.size());
  r.verdict = r.loss <= kDistinguishThreshold ? Verdict::realizable : Verdict::scattered;
  return r;
}

}  // namespace rnnhard
