#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnhard/csp.hpp"
#include "rnnhard/distribution.hpp"
#include "rnnhard/gadget.hpp"
#include "rnnhard/harness.hpp"
#include "rnnhard/network.hpp"
#include "rnnhard/shape.hpp"
#include "rnnhard/transforms.hpp"

namespace rnnhard {

// ------------------------------------------------------------------ reports

enum class StageStatus { ok, failed, skipped };

inline const char* stage_status_name(StageStatus s) {
  switch (s) {
    case StageStatus::ok: return "ok";
    case StageStatus::failed: return "failed";
    case StageStatus::skipped: return "skipped";
  }
  return "?";
}

struct StageRecord {
  std::string name;
  StageStatus status = StageStatus::ok;
  std::string reason;
  json data = json::object();
};

struct ReductionReport {
  std::vector<StageRecord> stages;
  std::vector<StatReport> tests;

  StageRecord& add(std::string name, StageStatus status = StageStatus::ok, std::string reason = {}) {
    stages.push_back({std::move(name), status, std::move(reason), json::object()});
    return stages.back();
  }

  void skip(std::initializer_list<const char*> names, const std::string& reason) {
    for (const char* n : names) add(n, StageStatus::skipped, reason);
  }

  const StageRecord* find(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }

  bool ok() const {
    for (const auto& s : stages)
      if (s.status == StageStatus::failed) return false;
    return true;
  }

  void append(const ReductionReport& other) {
    stages.insert(stages.end(), other.stages.begin(), other.stages.end());
    tests.insert(tests.end(), other.tests.begin(), other.tests.end());
  }

  json to_json() const {
    json j;
    j["ok"] = ok();
    json st = json::array();
    for (const auto& s : stages) {
      json e;
      e["name"] = s.name;
      e["status"] = stage_status_name(s.status);
      if (!s.reason.empty()) e["reason"] = s.reason;
      e["data"] = s.data;
      st.push_back(std::move(e));
    }
    j["stages"] = std::move(st);
    j["tests"] = rnnhard::to_json(tests);
    return j;
  }
};

// ------------------------------------------------------------------ options

struct TransformOptions {
  double condition_cap = 1e12;  // reject when smin < smax / condition_cap
  int retry_cap = 16;
  double realizability_tol = 1e-6;
  Eigen::Index pad_to = 0;  // 0: no padding
  bool distribution_tests = true;
  unsigned threads = 1;
};

struct Reduction {
  LabeledSample sample;
  std::optional<NetworkWeights> weights;
  ReductionReport report;
  bool ok = false;
};

namespace detail {

inline bool acceptable(double smin, double smax, double cap) {
  return std::isfinite(smin) && std::isfinite(smax) && smin > 0.0 && smin * cap >= smax;
}

struct Accepted {
  std::optional<BlockTransform> M;
  int attempts = 0;
  double last_condition = 0.0;
};

inline Accepted accept_fc_transform(const DistributionSpec& spec, int n_vars, Eigen::Index k, std::uint64_t seed,
                                    const TransformOptions& opt) {
  Accepted a;
  for (int t = 0; t < std::max(1, opt.retry_cap); ++t) {
    ++a.attempts;
    BlockTransform M = sample_fc_transform(spec, n_vars, k, derive_seed(seed, "attempt", static_cast<std::uint64_t>(t)));
    a.last_condition = M.condition();
    if (acceptable(M.smin(), M.smax(), opt.condition_cap)) {
      a.M = std::move(M);
      return a;
    }
  }
  return a;
}

inline std::string hex_seed(std::uint64_t s) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(s));
  return buf;
}

inline double max_norm_of(const LabeledSample& s) { return s.max_norm(); }

inline int infer_block(const LabeledSample& sample, const std::optional<CnnFilter>& filter) {
  int s = 0;
  if (filter) s = static_cast<int>(filter->patch());
  else if (sample.n_vars > 0) s = sample.n_vars + 1;
  else throw std::invalid_argument("cannot infer the block size: sample has no gadget shape and no filter given");
  if (sample.n_vars > 0 && s != sample.n_vars + 1) throw std::invalid_argument("filter length does not match n'+1");
  if (s < 2 || sample.dim() % s != 0) throw std::invalid_argument("sample dim must be a multiple of n'+1");
  return s;
}

inline void record_realizability(ReductionReport& rep, const LabeledSample& in, const LabeledSample& out,
                                 const std::optional<CnnFilter>& filter, const std::optional<NetworkWeights>& w,
                                 const TransformOptions& opt) {
  if (!filter || !w) {
    rep.add("realizability", StageStatus::skipped, "no realizing filter");
    return;
  }
  const NetworkWeights before(*filter);
  double transport = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i)
    transport = std::max(transport, std::abs(pre_clip(*w, out.point(i)) - pre_clip(before, in.point(i))));
  const auto r_in = check_realizable(in, before, 0.0, opt.threads);
  const auto r_out = check_realizable(out, *w, opt.realizability_tol, opt.threads);
  StageRecord* st;
  if (r_in.realizable) {
    st = &rep.add("realizability", r_out.realizable ? StageStatus::ok : StageStatus::failed,
                  r_out.realizable ? "" : "transformed sample not realizable by the pushed weights");
  } else {
    st = &rep.add("realizability", StageStatus::skipped, "input sample is not realizable by the filter");
  }
  st->data["input_residual"] = r_in.max_residual;
  st->data["residual"] = r_out.max_residual;
  st->data["tolerance"] = opt.realizability_tol;
  st->data["realizable"] = r_out.realizable;
  st->data["violations"] = r_out.violations;
  st->data["exact_label_matches"] = r_out.exact_matches;
  st->data["output_transport_error"] = transport;
  st->data["points"] = in.size();
}

inline void record_distribution(ReductionReport& rep, const std::optional<NetworkWeights>& w, const DistributionSpec& spec,
                                std::uint64_t seed, const TransformOptions& opt) {
  if (!w || !opt.distribution_tests) {
    rep.add("distribution", StageStatus::skipped, w ? "disabled" : "no weights");
    return;
  }
  auto tests = test_distribution(*w, spec, derive_seed(seed, "reference"));
  auto& st = rep.add("distribution");
  st.data["informational"] = true;
  st.data["all_pass"] = all_pass(tests);
  json ps = json::object();
  for (const auto& t : tests) ps[t.test] = t.p_value ? json(*t.p_value) : json(t.statistic);
  st.data["values"] = ps;
  rep.tests.insert(rep.tests.end(), tests.begin(), tests.end());
}

inline bool labels_equal(const LabeledSample& a, const LabeledSample& b) { return a.labels == b.labels; }

}  // namespace detail

// ------------------------------------------------------------------ padding

inline LabeledSample pad_sample(const LabeledSample& s, Eigen::Index target_dim) {
  if (target_dim < s.dim()) throw std::invalid_argument("target dimension below sample dimension");
  LabeledSample out = s;
  if (target_dim == s.dim()) return out;
  out.features = Eigen::MatrixXd::Zero(target_dim, static_cast<Eigen::Index>(s.size()));
  out.features.topRows(s.dim()) = s.features;
  out.provenance.transforms.push_back("pad:" + std::to_string(target_dim));
  return out;
}

// Appends rows drawn iid from the law (the appended inputs are zero, so the
// outputs do not change).
inline Eigen::MatrixXd pad_fc_weights(const Eigen::MatrixXd& W, Eigen::Index target_dim, Law law, double scale,
                                      std::uint64_t seed) {
  if (target_dim < W.rows()) throw std::invalid_argument("target dimension below weight rows");
  Rng rng(seed, "pad-rows");
  Eigen::MatrixXd out(target_dim, W.cols());
  out.topRows(W.rows()) = W;
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    for (Eigen::Index i = W.rows(); i < target_dim; ++i) out(i, j) = sample_law(law, scale, rng);
  return out;
}

inline CnnFilter pad_cnn_filter(const CnnFilter& f, Eigen::Index target_dim) {
  if (target_dim % f.patch() != 0) throw std::invalid_argument("padded dimension must be a multiple of the patch length");
  return {f.w, target_dim};
}

// ------------------------------------------------------------- norm bounds

struct NormBound {
  double max_norm_in = 0.0;
  double max_norm_out = 0.0;
  double operator_bound = 0.0;  // max_norm_in * ||transform^{-T}||
  double theorem_bound = 0.0;
  double event_threshold = 0.0;
  double event_value = 0.0;
  bool event = false;
  double input_radius = 0.0;  // ln^2 n', the radius the bounds assume
  bool input_radius_ok = false;
  bool bound_ok = false;
  bool operator_ok = false;
  std::string formula;

  bool violation() const { return !operator_ok || (event && input_radius_ok && !bound_ok); }

  json to_json() const {
    json j;
    j["max_norm_in"] = max_norm_in;
    j["max_norm_out"] = max_norm_out;
    j["operator_bound"] = operator_bound;
    j["operator_ok"] = operator_ok;
    j["theorem_bound"] = theorem_bound;
    j["theorem_formula"] = formula;
    j["event_threshold"] = event_threshold;
    j["event_value"] = event_value;
    j["event_held"] = event;
    j["input_radius"] = input_radius;
    j["input_radius_ok"] = input_radius_ok;
    j["bound_ok"] = bound_ok;
    j["violation"] = violation();
    return j;
  }
};

namespace detail {

inline void finish_bound(NormBound& b, int n_vars) {
  b.input_radius = ln_sq(n_vars);
  b.input_radius_ok = b.max_norm_in <= b.input_radius;
  b.bound_ok = b.max_norm_out <= b.theorem_bound;
  b.operator_ok = b.max_norm_out <= b.operator_bound * (1.0 + 1e-9);
}

inline void record_bound(ReductionReport& rep, const NormBound& b) {
  auto& st = rep.add("norm_bound", b.violation() ? StageStatus::failed : StageStatus::ok,
                     b.violation() ? "norm bound violated while its event held" : "");
  st.data = b.to_json();
}

}  // namespace detail

// ------------------------------------------------------------------- FC

// x' = (M^T)^{-1} x for a fresh block transform M; the filter, if given, is
// pushed to W' = M cnn_to_matrix(w, k). Gaussian columns: an iid normal(1)
// block transform followed by the correlator C, x'' = (C^T)^{-1} x' and
// W'' = C W'.
inline Reduction reduce_to_random_fc(const LabeledSample& in, const std::optional<CnnFilter>& filter,
                                     const DistributionSpec& spec, std::uint64_t seed, const TransformOptions& opt = {}) {
  Reduction out;
  auto& rep = out.report;
  const int s = detail::infer_block(in, filter);
  const int n_vars = s - 1;
  const Eigen::Index k = in.dim() / s;
  const Eigen::Index n = in.dim();
  const Eigen::Index padded = opt.pad_to > 0 ? opt.pad_to : n;
  if (padded < n) throw std::invalid_argument("pad target below sample dimension");
  if (spec.family() == Family::sphere_cols && padded != n)
    throw std::invalid_argument("padding does not preserve the sphere-columns law");
  if (spec.family() == Family::gaussian_cols && spec.dim() != padded)
    throw std::invalid_argument("covariance dimension must equal the (padded) sample dimension");

  const bool gauss = spec.family() == Family::gaussian_cols;
  const DistributionSpec stage1 = gauss ? DistributionSpec::normal(1.0) : spec;
  const auto acc = detail::accept_fc_transform(stage1, n_vars, k, derive_seed(seed, "fc"), opt);
  auto& ts = rep.add("transform", acc.M ? StageStatus::ok : StageStatus::failed,
                     acc.M ? "" : "transform singular or ill-conditioned after " + std::to_string(acc.attempts) + " attempts");
  ts.data["architecture"] = "fc";
  ts.data["family"] = spec.tag();
  ts.data["blocks"] = k;
  ts.data["block_size"] = s;
  ts.data["attempts"] = acc.attempts;
  ts.data["condition_cap"] = opt.condition_cap;
  if (!acc.M) {
    ts.data["last_condition"] = acc.last_condition;
    rep.skip({"realizability", "norm_bound", "distribution"}, "transform failed");
    return out;
  }
  const BlockTransform& M = *acc.M;
  ts.data["smin"] = M.smin();
  ts.data["smax"] = M.smax();
  ts.data["condition"] = M.condition();
  if (gauss) {
    ts.data["lambda_min"] = spec.lambda_min();
    ts.data["lambda_max"] = spec.correlator().lambda_max;
  }

  LabeledSample x1 = map_points(in, n, opt.threads, [&](const auto& x) { return apply_inverse_transpose(M, x); });
  std::optional<Eigen::MatrixXd> W;
  if (filter) W = push_weights(M, filter->w);
  if (padded != n) {
    x1 = pad_sample(x1, padded);
    if (W) W = gauss ? pad_fc_weights(*W, padded, Law::normal, 1.0, derive_seed(seed, "pad"))
                     : pad_fc_weights(*W, padded, spec.law(), spec.scale(), derive_seed(seed, "pad"));
  }
  if (gauss) {
    const auto& C = spec.correlator();
    x1 = map_points(x1, padded, opt.threads, [&](const auto& x) -> Eigen::VectorXd { return C.inverse_transpose * x; });
    if (W) W = (C.factor * *W).eval();
  }
  out.sample = std::move(x1);
  out.sample.provenance.transforms.push_back("fc:" + spec.tag() + ":" + detail::hex_seed(seed));
  out.sample.norm_bound = out.sample.max_norm();
  if (W) out.weights = NetworkWeights(std::move(*W));
  ts.data["labels_unchanged"] = detail::labels_equal(in, out.sample);

  detail::record_realizability(rep, in, out.sample, filter, out.weights, opt);

  NormBound b;
  b.max_norm_in = in.max_norm();
  b.max_norm_out = out.sample.max_norm();
  const double nn = static_cast<double>(n), nv = n_vars;
  switch (spec.family()) {
    case Family::iid:
      b.operator_bound = b.max_norm_in / M.smin();
      b.event_threshold = iid_smin_threshold(spec, n_vars);
      b.theorem_bound = nn * ln_sq(nn) / spec.sigma();
      b.formula = "n ln^2(n) / sigma";
      break;
    case Family::sphere_cols:
      b.operator_bound = b.max_norm_in / M.smin();
      b.event_threshold = sphere_smin_threshold(spec, n_vars);
      b.theorem_bound = nn * std::sqrt(nn) * std::pow(ln(nn), 4) / spec.radius();
      b.formula = "n sqrt(n) ln^4(n) / r  (c' = 1)";
      break;
    case Family::gaussian_cols:
      b.operator_bound = b.max_norm_in / M.smin() / std::sqrt(spec.lambda_min());
      b.event_threshold = 1.0 / (nv * ln_sq(nv));
      b.theorem_bound = nn * ln_sq(nn) / std::sqrt(spec.lambda_min());
      b.formula = "n ln^2(n) / sqrt(lambda_min)";
      break;
  }
  b.event_value = M.smin();
  b.event = M.smin() > b.event_threshold;
  detail::finish_bound(b, n_vars);
  detail::record_bound(rep, b);
  if (spec.family() == Family::sphere_cols && out.weights) {
    double dev = 0.0;
    for (Eigen::Index j = 0; j < out.weights->fc().cols(); ++j)
      dev = std::max(dev, std::abs(out.weights->fc().col(j).norm() - spec.radius()));
    rep.stages.back().data["column_norm_deviation"] = dev;
  }
  detail::record_distribution(rep, out.weights, spec, seed, opt);
  out.ok = rep.ok();
  return out;
}

// ------------------------------------------------------------------- CNN

// Each length-t patch is mapped by the patch-side map; the filter by the
// weight-side map. Padding appends zero patches.
inline Reduction reduce_to_random_cnn(const LabeledSample& in, const std::optional<CnnFilter>& filter,
                                      const DistributionSpec& spec, std::uint64_t seed, const TransformOptions& opt = {}) {
  Reduction out;
  auto& rep = out.report;
  const int t = detail::infer_block(in, filter);
  const int n_vars = t - 1;
  const Eigen::Index n = in.dim();
  const Eigen::Index padded = opt.pad_to > 0 ? opt.pad_to : n;
  if (padded < n || padded % t != 0) throw std::invalid_argument("pad target must be >= n and a multiple of the patch length");

  std::optional<CnnTransform> T;
  int attempts = 0;
  double last_condition = 0.0;
  for (int a = 0; a < std::max(1, opt.retry_cap) && !T; ++a) {
    ++attempts;
    CnnTransform cand = sample_cnn_transform(spec, t, derive_seed(derive_seed(seed, "cnn"), "attempt", static_cast<std::uint64_t>(a)));
    last_condition = cand.condition();
    if (detail::acceptable(cand.smin, cand.smax, opt.condition_cap)) T = std::move(cand);
  }
  const std::size_t transform_stage = rep.stages.size();
  auto& ts = rep.add("transform", T ? StageStatus::ok : StageStatus::failed,
                     T ? "" : "transform singular or ill-conditioned after " + std::to_string(attempts) + " attempts");
  ts.data["architecture"] = "cnn";
  ts.data["family"] = spec.tag();
  ts.data["patch"] = t;
  ts.data["patches"] = n / t;
  ts.data["attempts"] = attempts;
  ts.data["condition_cap"] = opt.condition_cap;
  if (!T) {
    ts.data["last_condition"] = last_condition;
    rep.skip({"realizability", "norm_bound", "distribution"}, "transform failed");
    return out;
  }
  ts.data["smin"] = T->smin;
  ts.data["smax"] = T->smax;
  ts.data["condition"] = T->condition();
  if (spec.family() != Family::sphere_cols) ts.data["min_abs_diag"] = T->min_abs_diag;
  if (spec.family() == Family::gaussian_cols) ts.data["lambda_min"] = spec.lambda_min();

  out.sample = map_points(in, n, opt.threads, [&](const auto& x) { return apply_patch_map(*T, x); });
  if (filter) {
    CnnFilter f = push_filter(*T, *filter);
    f.n = n;
    ts.data["filter_norm"] = f.w.norm();
    out.weights = NetworkWeights(std::move(f));
  }
  out.sample.provenance.transforms.push_back("cnn:" + spec.tag() + ":" + detail::hex_seed(seed));
  out.sample.norm_bound = out.sample.max_norm();
  ts.data["labels_unchanged"] = detail::labels_equal(in, out.sample);

  detail::record_realizability(rep, in, out.sample, filter, out.weights, opt);

  NormBound b;
  b.max_norm_in = in.max_norm();
  b.max_norm_out = out.sample.max_norm();
  b.operator_bound = b.max_norm_in * Eigen::JacobiSVD<Eigen::MatrixXd>(T->patch_map).singularValues().maxCoeff();
  const double nn = static_cast<double>(n), nv = n_vars;
  switch (spec.family()) {
    case Family::iid: {
      const double f = spec.concentration(nv);
      b.event_threshold = f;
      b.event_value = T->min_abs_diag;
      b.event = T->min_abs_diag >= f;
      b.theorem_bound = ln_sq(nv) / f;
      b.formula = "ln^2(n') / f(n')";
      break;
    }
    case Family::gaussian_cols: {
      const double f = 1.0 / (nv * ln(nv));
      b.event_threshold = f;
      b.event_value = T->min_abs_diag;
      b.event = T->min_abs_diag >= f;
      b.theorem_bound = nn * ln(nn) / std::sqrt(spec.lambda_min());
      b.formula = "n ln(n) / sqrt(lambda_min)";
      break;
    }
    case Family::sphere_cols: {
      b.event = true;
      b.theorem_bound = std::sqrt(nn) * ln(nn) / spec.radius();
      b.formula = "sqrt(n) ln(n) / r";
      double dev = 0.0;
      const double factor = static_cast<double>(t) / (spec.radius() * spec.radius());
      for (std::size_t i = 0; i < in.size(); ++i) {
        const double want = factor * in.point(i).squaredNorm();
        const double got = out.sample.point(i).squaredNorm();
        dev = std::max(dev, std::abs(got - want) / std::max(1.0, want));
      }
      rep.stages[transform_stage].data["norm_identity_deviation"] = dev;
      break;
    }
  }
  detail::finish_bound(b, n_vars);
  detail::record_bound(rep, b);
  detail::record_distribution(rep, out.weights, spec, seed, opt);

  if (padded != n) {
    out.sample = pad_sample(out.sample, padded);
    if (out.weights) out.weights = NetworkWeights(pad_cnn_filter(out.weights->cnn(), padded));
  }
  out.ok = rep.ok();
  return out;
}

// ------------------------------------------------------------ end to end

enum class Mode { random, planted };
enum class Route { sat, direct };
enum class Architecture { fc, cnn };

struct EndToEndConfig {
  Mode mode = Mode::planted;
  Route route = Route::sat;
  Architecture architecture = Architecture::fc;
  int n_vars = 63;
  int K = 3;
  int q = 0;                    // 0: canonical ceil(ln^2 n')
  std::size_t constraints = 8;  // groups for the SAT route, constraints for the direct route
  std::size_t sat_clauses = 0;  // 0: 2 * q * constraints + 1000
  double pad_exponent = 0.0;    // > 0: pad to n^c (FC) or t^c (CNN)
  Eigen::Index pad_to = 0;
  std::uint64_t seed = 0;
  TransformOptions options;
  bool scattered_tests = true;
};

struct EndToEnd {
  std::optional<Formula> formula;  // the MIXED formula that was encoded
  LabeledSample gadget;            // before transforms
  LabeledSample sample;
  std::optional<NetworkWeights> weights;
  ReductionReport report;
  bool ok = false;
};

// CSP stages of a run: K-SAT, greedy grouping and flips (SAT route) or a
// direct MIXED draw. Returns nothing when the greedy grouping fails.
inline std::optional<Formula> generate_mixed(const EndToEndConfig& cfg, int q, ReductionReport& rep) {
  const bool planted = cfg.mode == Mode::planted;
  const auto csp_seed = derive_seed(cfg.seed, "csp");
  if (cfg.route == Route::direct) {
    Formula mixed = planted ? sample_planted_mixed(cfg.n_vars, cfg.constraints, cfg.K, q, csp_seed)
                            : sample_random_mixed(cfg.n_vars, cfg.constraints, cfg.K, q, csp_seed);
    auto& cs = rep.add("csp");
    cs.data["kind"] = "MIXED";
    cs.data["constraints"] = cfg.constraints;
    cs.data["planted"] = planted;
    rep.skip({"greedy", "flip"}, "direct MIXED route");
    return mixed;
  }
  const std::size_t clauses = cfg.sat_clauses > 0 ? cfg.sat_clauses : 2 * static_cast<std::size_t>(q) * cfg.constraints + 1000;
  Formula sat = planted ? sample_planted_ksat(cfg.n_vars, clauses, cfg.K, csp_seed)
                        : sample_random_ksat(cfg.n_vars, clauses, cfg.K, csp_seed);
  auto& cs = rep.add("csp");
  cs.data["kind"] = "SAT";
  cs.data["clauses"] = clauses;
  cs.data["planted"] = planted;

  auto g = reduce_sat_to_T(sat, q, cfg.constraints);
  auto& gs = rep.add("greedy", g.ok() ? StageStatus::ok : StageStatus::failed, g.reason);
  gs.data["groups_requested"] = cfg.constraints;
  gs.data["groups_formed"] = g.groups_formed;
  gs.data["clauses_used"] = g.clauses_used;
  if (!g.ok()) {
    rep.add("flip", StageStatus::skipped, "greedy failed");
    return std::nullopt;
  }
  if (planted && !satisfies_all(*g.formula, *g.formula->planted))
    throw std::logic_error("greedy grouping broke the planted assignment");
  Formula mixed = flip_to_mixed(*g.formula, derive_seed(cfg.seed, "flip"));
  const auto fs = flip_stats(mixed);
  auto& st = rep.add("flip");
  st.data["constraints"] = fs.constraints;
  st.data["negated"] = fs.negated;
  st.data["expected_unsatisfied_rate"] = std::pow(1.0 - std::pow(2.0, -cfg.K), q);
  if (planted) {
    st.data["negated_unsatisfied"] = fs.negated_unsatisfied;
    st.data["realizability_broken"] = fs.negated_unsatisfied > 0;
  }
  return mixed;
}

inline EndToEnd end_to_end(const EndToEndConfig& cfg, const DistributionSpec& spec) {
  if (cfg.n_vars < 1 || cfg.K < 1 || cfg.K > cfg.n_vars) throw std::invalid_argument("invalid-parameter: need 1 <= K <= n'");
  EndToEnd out;
  auto& rep = out.report;
  const int q = cfg.q > 0 ? cfg.q : canonical_q(cfg.n_vars);
  const bool planted = cfg.mode == Mode::planted;
  const Eigen::Index n = sample_dim(cfg.n_vars, q);
  const Eigen::Index t = cfg.n_vars + 1;

  auto& shape = rep.add("shape");
  shape.data["n_vars"] = cfg.n_vars;
  shape.data["K"] = cfg.K;
  shape.data["q"] = q;
  shape.data["n"] = n;
  shape.data["canonical"] = is_canonical_shape(cfg.n_vars, q);
  shape.data["q_convention"] = "ceil(ln^2 n'), natural log";
  shape.data["mode"] = planted ? "planted" : "random";
  shape.data["route"] = cfg.route == Route::sat ? "sat" : "direct";
  shape.data["architecture"] = cfg.architecture == Architecture::fc ? "fc" : "cnn";
  shape.data["seed"] = cfg.seed;
  if (cfg.K * q > cfg.n_vars) {
    shape.status = StageStatus::failed;
    shape.reason = "K*q exceeds n': constraints cannot use disjoint variables";
    rep.skip({"csp", "greedy", "flip", "encode", "transform", "realizability", "norm_bound", "distribution"}, "invalid shape");
    return out;
  }

  auto generated = generate_mixed(cfg, q, rep);
  if (!generated) {
    rep.skip({"encode", "transform", "realizability", "norm_bound", "distribution"}, "greedy failed");
    return out;
  }
  Formula mixed = std::move(*generated);

  out.gadget = encode_formula(mixed);
  auto& es = rep.add("encode");
  es.data["points"] = out.gadget.size();
  es.data["dim"] = out.gadget.dim();
  es.data["provenance"] = sample_kind_name(out.gadget.provenance.kind);
  es.data["formula_id"] = out.gadget.provenance.source;
  {
    const double want = q * (cfg.K + (cfg.K - 1.0) * (cfg.K - 1.0));
    double dev = 0.0;
    for (std::size_t i = 0; i < out.gadget.size(); ++i) dev = std::max(dev, std::abs(out.gadget.point(i).squaredNorm() - want));
    es.data["norm_squared"] = want;
    es.data["norm_identity_deviation"] = dev;
  }
  std::optional<CnnFilter> filter;
  if (planted) {
    filter = realizing_weights(*mixed.planted, q);
    const auto r = check_realizable(out.gadget, NetworkWeights(*filter), 0.0, cfg.options.threads);
    es.data["gadget_realizable"] = r.realizable;
    es.data["gadget_residual"] = r.max_residual;
  }
  out.formula = std::move(mixed);

  TransformOptions opt = cfg.options;
  double c = cfg.pad_exponent;
  if (c > 0.0) {
    if (cfg.architecture == Architecture::fc) {
      opt.pad_to = static_cast<Eigen::Index>(std::ceil(std::pow(static_cast<double>(n), c)));
    } else {
      const auto target = static_cast<Eigen::Index>(std::ceil(std::pow(static_cast<double>(t), c)));
      opt.pad_to = std::max(n, (target + t - 1) / t * t);
    }
  } else if (cfg.pad_to > 0) {
    opt.pad_to = cfg.pad_to;
    c = std::log(static_cast<double>(cfg.pad_to)) /
        std::log(static_cast<double>(cfg.architecture == Architecture::fc ? n : t));
  }

  const auto tseed = derive_seed(cfg.seed, "transform");
  Reduction red = cfg.architecture == Architecture::fc ? reduce_to_random_fc(out.gadget, filter, spec, tseed, opt)
                                                       : reduce_to_random_cnn(out.gadget, filter, spec, tseed, opt);
  rep.append(red.report);
  if (opt.pad_to > 0) {
    auto& ps = rep.add("pad");
    ps.data["target_dim"] = opt.pad_to;
    ps.data["exponent"] = c;
    // FC (iid, Gaussian) and CNN sphere lose 2/c in the exponent, CNN iid and Gaussian 3/c.
    const bool three = cfg.architecture == Architecture::cnn && spec.family() != Family::sphere_cols;
    ps.data["implied_epsilon"] = c > 0.0 ? (three ? 3.0 : 2.0) / c : 0.0;
  }
  out.sample = std::move(red.sample);
  out.weights = std::move(red.weights);

  if (!planted && cfg.scattered_tests && red.ok) {
    auto tests = test_scattered(out.sample);
    const int code = exit_code(tests);
    auto& ss = rep.add("scattered", code == 1 ? StageStatus::failed : StageStatus::ok,
                       code == 1 ? "labels not consistent with fair coins" : code == 2 ? "inconclusive" : "");
    ss.data["points"] = out.sample.size();
    rep.tests.insert(rep.tests.end(), tests.begin(), tests.end());
  }
  out.ok = rep.ok() && red.ok;
  return out;
}

}  // namespace rnnhard
