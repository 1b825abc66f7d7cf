#pragma once

// Subcommand bodies shared by the command-line tool and the tests. Every
// command takes a RunManifest, fills in defaults, and embeds the resolved
// manifest in each file it writes.

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "rnnhard/csp_io.hpp"
#include "rnnhard/harness.hpp"
#include "rnnhard/manifest.hpp"
#include "rnnhard/pipeline.hpp"
#include "rnnhard/serialize.hpp"

namespace rnnhard::app {

inline json manifest_json(const RunManifest& m) {
  json j = json::object();
  for (const auto& [k, v] : m.values()) j[k] = v;
  return j;
}

inline std::string csv_header(const RunManifest& m) {
  std::string out;
  std::istringstream in(m.to_text());
  std::string line;
  while (std::getline(in, line)) out += "# " + line + "\n";
  return out;
}

inline Encoding encoding_of(const RunManifest& m) {
  const std::string f = m.get("format", "binary");
  if (f == "binary") return Encoding::binary;
  if (f == "text") return Encoding::text;
  throw UsageError("--format must be text or binary");
}

inline void write_text_file(const std::string& path, const std::string& body) {
  write_file(path, [&](std::ostream& os) { os << body; });
}

inline std::string fixed(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Defaults are written back so the embedded manifest fully pins the run.
inline void default_to(RunManifest& m, const std::string& key, const std::string& value) {
  if (!m.has(key)) m.set(key, value);
}

inline Mode parse_mode(const std::string& s) {
  if (s == "planted") return Mode::planted;
  if (s == "random") return Mode::random;
  throw UsageError("--mode must be planted or random");
}

inline Route parse_route(const std::string& s) {
  if (s == "sat") return Route::sat;
  if (s == "direct") return Route::direct;
  throw UsageError("--route must be sat or direct");
}

inline Eigen::MatrixXd load_matrix(const std::string& path, Eigen::Index dim) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read covariance file: " + path);
  Eigen::MatrixXd s(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      if (!(is >> s(i, j))) throw UsageError("covariance file must hold a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  return s;
}

// law: normal | uniform | bernoulli | gaussian | sphere (with or without an
// "iid-" prefix). `dim` sizes the covariance of the Gaussian family.
inline DistributionSpec make_spec(RunManifest& m, std::string law, Eigen::Index dim) {
  if (law.rfind("iid-", 0) == 0) law = law.substr(4);
  if (law == "gaussian-cols") law = "gaussian";
  if (law == "normal") {
    default_to(m, "sigma", "1");
    return DistributionSpec::normal(m.get_double("sigma", 1.0));
  }
  if (law == "uniform" || law == "bernoulli" || law == "sphere") {
    default_to(m, "radius", "1");
    const double r = m.get_double("radius", 1.0);
    return law == "uniform" ? DistributionSpec::uniform(r) : law == "bernoulli" ? DistributionSpec::bernoulli(r) : DistributionSpec::sphere(r);
  }
  if (law == "gaussian") {
    default_to(m, "cov", "ar1");
    const std::string cov = m.get("cov");
    if (cov == "ar1") {
      default_to(m, "rho", "0.5");
      default_to(m, "cov_scale", "1");
      return DistributionSpec::gaussian_cols(ar1_covariance(dim, m.get_double("rho", 0.5), m.get_double("cov_scale", 1.0)));
    }
    if (cov == "identity") return DistributionSpec::gaussian_cols(Eigen::MatrixXd::Identity(dim, dim));
    return DistributionSpec::gaussian_cols(load_matrix(cov, dim));
  }
  throw UsageError("unknown distribution family: " + law);
}

struct Shape {
  int n_vars = 0, K = 0, q = 0;
};

inline Shape resolve_shape(RunManifest& m) {
  Shape s;
  s.n_vars = static_cast<int>(m.require_int("nvars"));
  default_to(m, "k", "3");
  s.K = static_cast<int>(m.get_int("k", 3));
  if (s.n_vars < 1 || s.K < 1 || s.K > s.n_vars) throw UsageError("need 1 <= k <= nvars");
  s.q = static_cast<int>(m.get_int("q", 0));
  if (s.q <= 0) s.q = canonical_q(s.n_vars);
  m.set("q", std::to_string(s.q));
  return s;
}

inline EndToEndConfig run_config(RunManifest& m, const Shape& s, Route default_route, const char* default_constraints) {
  EndToEndConfig c;
  default_to(m, "mode", "planted");
  default_to(m, "route", default_route == Route::sat ? "sat" : "direct");
  default_to(m, "constraints", default_constraints);
  default_to(m, "seed", "0");
  c.mode = parse_mode(m.get("mode"));
  c.route = parse_route(m.get("route"));
  c.n_vars = s.n_vars;
  c.K = s.K;
  c.q = s.q;
  c.constraints = static_cast<std::size_t>(m.get_u64("constraints", 8));
  c.sat_clauses = static_cast<std::size_t>(m.get_u64("clauses", 0));
  c.seed = m.get_u64("seed", 0);
  return c;
}

// ---------------------------------------------------------------------- gen

inline int cmd_gen(RunManifest m, std::ostream& out, std::ostream& err) {
  const Shape shape = resolve_shape(m);
  EndToEndConfig cfg = run_config(m, shape, Route::direct, "100");
  default_to(m, "format", "binary");
  default_to(m, "formula_out", "formula.txt");
  default_to(m, "sample_out", "sample.bin");
  const Encoding enc = encoding_of(m);
  if (cfg.K * shape.q > shape.n_vars) throw UsageError("k*q exceeds nvars: constraints cannot use disjoint variables");

  ReductionReport rep;
  auto formula = generate_mixed(cfg, shape.q, rep);
  if (!formula) {
    err << "greedy grouping failed: " << rep.find("greedy")->reason << '\n';
    return 1;
  }
  const std::string manifest = m.to_text();
  LabeledSample s = encode_formula(*formula);
  s.manifest = manifest;
  write_text_file(m.get("formula_out"), formula_to_string(*formula, manifest));
  write_file(m.get("sample_out"), [&](std::ostream& os) { write_sample(os, s, enc); });
  if (m.has("weights_out")) {
    if (!formula->planted) throw UsageError("--weights-out needs --mode planted");
    write_file(m.get("weights_out"),
               [&](std::ostream& os) { write_weights(os, NetworkWeights(realizing_weights(*formula->planted, shape.q)), enc, manifest); });
  }
  const auto fs = flip_stats(*formula);
  out << "formula " << s.provenance.source << " constraints " << formula->size() << " negated " << fs.negated << '\n';
  if (formula->planted) out << "negated_unsatisfied " << fs.negated_unsatisfied << '\n';
  out << "sample points " << s.size() << " dim " << s.dim() << " provenance " << sample_kind_name(s.provenance.kind) << '\n';
  return 0;
}

// ------------------------------------------------------------------- reduce

inline TransformOptions transform_options(RunManifest& m, unsigned threads) {
  TransformOptions o;
  default_to(m, "condition_cap", "1e12");
  default_to(m, "retries", "16");
  default_to(m, "tolerance", "1e-6");
  o.condition_cap = m.get_double("condition_cap", 1e12);
  o.retry_cap = static_cast<int>(m.get_int("retries", 16));
  o.realizability_tol = m.get_double("tolerance", 1e-6);
  o.pad_to = static_cast<Eigen::Index>(m.get_int("pad_to", 0));
  o.threads = threads;
  return o;
}

inline void write_norms_csv(const std::string& path, const RunManifest& m, const LabeledSample& in, const LabeledSample& out,
                            const ReductionReport& rep) {
  std::ostringstream os;
  os << csv_header(m);
  const StageRecord* nb = rep.find("norm_bound");
  const bool have = nb && nb->status != StageStatus::skipped;
  os << "index,label,norm_in,norm_out,theorem_bound,event_held\n";
  for (std::size_t i = 0; i < in.size() && i < out.size(); ++i) {
    os << i << ',' << in.labels[i] << ',' << fixed(in.point(i).norm()) << ',' << fixed(out.point(i).norm()) << ','
       << (have ? fixed(nb->data["theorem_bound"].get<double>()) : std::string("nan")) << ','
       << (have && nb->data["event_held"].get<bool>() ? 1 : 0) << '\n';
  }
  write_text_file(path, os.str());
}

inline int cmd_reduce(RunManifest m, std::ostream& out, std::ostream& err, unsigned threads) {
  const std::string target = m.require("target");
  const auto dash = target.find('-');
  if (dash == std::string::npos) throw UsageError("--target must look like fc-normal or cnn-sphere");
  const std::string arch = target.substr(0, dash), law = target.substr(dash + 1);
  if (arch != "fc" && arch != "cnn") throw UsageError("--target must start with fc- or cnn-");
  default_to(m, "format", "binary");
  default_to(m, "sample_out", "reduced.bin");
  default_to(m, "weights_out", "weights.bin");
  default_to(m, "report_out", "report.json");
  const Encoding enc = encoding_of(m);
  TransformOptions opt = transform_options(m, threads);
  const double pad_c = m.get_double("pad_exponent", 0.0);

  ReductionReport report;
  LabeledSample before, after;
  std::optional<NetworkWeights> weights;
  bool ok = false;
  if (m.has("sample")) {
    before = read_file(m.get("sample"), [](std::istream& is) { return read_sample(is); });
    std::optional<CnnFilter> filter;
    if (m.has("weights")) {
      auto wf = read_file(m.get("weights"), [](std::istream& is) { return read_weights(is); });
      if (!wf.weights.is_cnn()) throw UsageError("--weights must hold a CNN filter for reduce");
      filter = wf.weights.cnn();
    }
    default_to(m, "seed", "0");
    const auto seed = m.get_u64("seed", 0);
    const Eigen::Index t = filter ? filter->patch() : before.n_vars + 1;
    if (pad_c > 0.0) throw UsageError("--pad-exponent needs a generated run; use --pad-to with --sample");
    const Eigen::Index gdim = arch == "cnn" ? t : (opt.pad_to > 0 ? opt.pad_to : before.dim());
    const DistributionSpec spec = make_spec(m, law, gdim);
    Reduction r = arch == "fc" ? reduce_to_random_fc(before, filter, spec, seed, opt) : reduce_to_random_cnn(before, filter, spec, seed, opt);
    report = std::move(r.report);
    after = std::move(r.sample);
    weights = std::move(r.weights);
    ok = r.ok;
  } else {
    const Shape shape = resolve_shape(m);
    EndToEndConfig cfg = run_config(m, shape, Route::sat, "8");
    cfg.architecture = arch == "fc" ? Architecture::fc : Architecture::cnn;
    cfg.pad_exponent = pad_c;
    cfg.pad_to = opt.pad_to;
    opt.pad_to = 0;
    cfg.options = opt;
    const Eigen::Index n = sample_dim(shape.n_vars, shape.q), t = shape.n_vars + 1;
    Eigen::Index gdim = arch == "cnn" ? t : n;
    if (arch == "fc" && pad_c > 0.0) gdim = static_cast<Eigen::Index>(std::ceil(std::pow(static_cast<double>(n), pad_c)));
    else if (arch == "fc" && cfg.pad_to > 0) gdim = cfg.pad_to;
    const DistributionSpec spec = make_spec(m, law, gdim);
    EndToEnd r = end_to_end(cfg, spec);
    report = std::move(r.report);
    before = std::move(r.gadget);
    after = std::move(r.sample);
    weights = std::move(r.weights);
    ok = r.ok;
  }

  const std::string manifest = m.to_text();
  json doc;
  doc["tool_version"] = kToolVersion;
  doc["manifest"] = manifest_json(m);
  doc["report"] = report.to_json();
  write_text_file(m.get("report_out"), doc.dump(2) + "\n");
  if (after.size() > 0 || after.dim() > 0) {
    after.manifest = manifest;
    write_file(m.get("sample_out"), [&](std::ostream& os) { write_sample(os, after, enc); });
  }
  if (weights) write_file(m.get("weights_out"), [&](std::ostream& os) { write_weights(os, *weights, enc, manifest); });
  if (m.has("norms_csv") && after.size() > 0) write_norms_csv(m.get("norms_csv"), m, before, after, report);

  for (const auto& st : report.stages)
    if (st.status == StageStatus::failed) err << "stage " << st.name << " failed: " << st.reason << '\n';
  out << "reduce " << target << (ok ? " ok" : " FAILED") << " points " << after.size() << " dim " << after.dim()
      << " provenance " << sample_kind_name(after.provenance.kind) << '\n';
  if (const auto* ts = report.find("transform"); ts && ts->data.contains("filter_norm"))
    out << "filter_norm " << fixed(ts->data["filter_norm"].get<double>()) << '\n';
  if (const auto* rs = report.find("realizability"); rs && rs->data.contains("residual"))
    out << "residual " << fixed(rs->data["residual"].get<double>()) << '\n';
  return ok ? 0 : 1;
}

// ------------------------------------------------------------------- verify

inline int finish_reports(RunManifest& m, const std::vector<StatReport>& reports, std::ostream& out) {
  out << render_table(reports);
  if (m.has("report_out")) {
    json doc;
    doc["tool_version"] = kToolVersion;
    doc["manifest"] = manifest_json(m);
    doc["tests"] = to_json(reports);
    write_text_file(m.get("report_out"), doc.dump(2) + "\n");
  }
  return exit_code(reports);
}

inline int verify_realizable(RunManifest m, std::ostream& out) {
  const auto s = read_file(m.require("sample"), [](std::istream& is) { return read_sample(is); });
  const auto w = read_file(m.require("weights"), [](std::istream& is) { return read_weights(is); });
  default_to(m, "tolerance", "1e-6");
  const double tol = m.get_double("tolerance", 1e-6);
  const auto r = check_realizable(s, w.weights, tol);
  out << "realizable " << (r.realizable ? "true" : "false") << " residual " << fixed(r.max_residual) << " violations "
      << r.violations << " points " << s.size() << '\n';
  std::vector<StatReport> reps{exact_report("realizable", r.max_residual, tol, s.size(),
                                            std::to_string(r.violations) + " violating points")};
  if (!r.realizable) reps.back().outcome = Outcome::fail;
  if (m.has("report_out")) finish_reports(m, reps, out);
  return r.realizable ? 0 : 1;
}

inline int verify_smin_tail(RunManifest m, std::ostream& out, unsigned threads) {
  default_to(m, "family", "iid-normal");
  default_to(m, "nvars", "63");
  default_to(m, "trials", "200");
  default_to(m, "seed", "0");
  default_to(m, "max_exceedance", "0.05");
  default_to(m, "csv_out", "smin.csv");
  const int n_vars = static_cast<int>(m.get_int("nvars", 63));
  if (n_vars < 2) throw UsageError("--nvars must be at least 2");
  const Eigen::Index k = m.get_int("blocks", canonical_q(n_vars));
  m.set("blocks", std::to_string(k));
  const std::string fam = m.get("family");
  if (fam.find("gaussian") != std::string::npos) throw UsageError("smin-tail supports iid laws and sphere");
  const DistributionSpec spec = make_spec(m, fam, 0);
  default_to(m, "c_prime", "1");
  double threshold = spec.family() == Family::sphere_cols ? sphere_smin_threshold(spec, n_vars, m.get_double("c_prime", 1.0))
                                                          : iid_smin_threshold(spec, n_vars);
  if (m.has("threshold") && m.get("threshold") != "auto") threshold = m.get_double("threshold", threshold);
  else m.set("threshold", "auto");
  const auto trials = static_cast<std::size_t>(m.get_u64("trials", 200));
  const SminTail t = mc_smin_tail(spec, n_vars, k, trials, threshold, m.get_u64("seed", 0), threads);

  std::ostringstream csv;
  csv << csv_header(m) << "trial,smin,below_threshold\n";
  for (std::size_t i = 0; i < t.smin.size(); ++i) csv << i << ',' << fixed(t.smin[i]) << ',' << (t.smin[i] <= threshold ? 1 : 0) << '\n';
  csv << "# threshold=" << fixed(threshold) << " exceedance=" << fixed(t.exceedance) << '\n';
  write_text_file(m.get("csv_out"), csv.str());
  if (m.has("hist_csv")) {
    const int bins = static_cast<int>(m.get_int("bins", 30));
    double lo = 1e300, hi = -1e300;
    for (double v : t.smin) {
      const double l = std::log10(std::max(v, 1e-300));
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    if (hi <= lo) hi = lo + 1.0;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : t.smin) {
      const double l = std::log10(std::max(v, 1e-300));
      counts[std::min<std::size_t>(static_cast<std::size_t>(bins - 1), static_cast<std::size_t>((l - lo) / (hi - lo) * bins))]++;
    }
    std::ostringstream h;
    h << csv_header(m) << "log10_lo,log10_hi,count\n";
    for (int b = 0; b < bins; ++b)
      h << fixed(lo + (hi - lo) * b / bins) << ',' << fixed(lo + (hi - lo) * (b + 1) / bins) << ',' << counts[static_cast<std::size_t>(b)] << '\n';
    write_text_file(m.get("hist_csv"), h.str());
  }
  const double cap = m.get_double("max_exceedance", 0.05);
  std::vector<StatReport> reps{{"smin-tail:" + spec.tag(), t.exceedance, std::nullopt,
                                t.exceedance <= cap ? Outcome::pass : Outcome::fail, trials, cap,
                                "fraction of trials with smin <= " + fixed(threshold)}};
  return finish_reports(m, reps, out);
}

inline int verify_distinguish(RunManifest m, std::ostream& out) {
  const auto s = read_file(m.require("sample"), [](std::istream& is) { return read_sample(is); });
  default_to(m, "learner", "memorizing");
  default_to(m, "budget", "100");
  default_to(m, "seed", "0");
  const std::string name = m.get("learner");
  std::unique_ptr<Learner> learner;
  if (name == "memorizing") learner = std::make_unique<MemorizingLearner>();
  else if (name == "constant") learner = std::make_unique<ConstantLearner>(0.5);
  else if (name == "cheating")
    learner = std::make_unique<CheatingLearner>(read_file(m.require("weights"), [](std::istream& is) { return read_weights(is); }).weights);
  else throw UsageError("--learner must be memorizing, constant or cheating");
  const auto r = distinguish_with_learner(*learner, s, static_cast<std::size_t>(m.get_u64("budget", 100)), m.get_u64("seed", 0));
  if (r.aborted) {
    out << "aborted: " << r.reason << '\n';
    return 1;
  }
  out << "verdict " << verdict_name(r.verdict) << " loss " << fixed(r.loss) << " draws " << r.draws << " sample " << r.sample_size << '\n';
  if (m.has("expect")) return m.get("expect") == verdict_name(r.verdict) ? 0 : 1;
  return 0;
}

inline int verify_scattered(RunManifest m, std::ostream& out) {
  const auto s = read_file(m.require("sample"), [](std::istream& is) { return read_sample(is); });
  default_to(m, "alpha", "0.001");
  return finish_reports(m, test_scattered(s, m.get_double("alpha", 0.001)), out);
}

inline int verify_distribution(RunManifest m, std::ostream& out) {
  const auto w = read_file(m.require("weights"), [](std::istream& is) { return read_weights(is); }).weights;
  const std::string fam = m.require("family");
  default_to(m, "seed", "0");
  default_to(m, "alpha", "0.01");
  const Eigen::Index dim = w.is_fc() ? w.fc().rows() : w.cnn().patch();
  const DistributionSpec spec = make_spec(m, fam, dim);
  return finish_reports(m, test_distribution(w, spec, m.get_u64("seed", 0), m.get_double("alpha", 0.01)), out);
}

inline int cmd_verify(RunManifest m, std::ostream& out, unsigned threads) {
  const std::string check = m.require("check");
  if (check == "realizable") return verify_realizable(std::move(m), out);
  if (check == "smin-tail") return verify_smin_tail(std::move(m), out, threads);
  if (check == "distinguish") return verify_distinguish(std::move(m), out);
  if (check == "scattered") return verify_scattered(std::move(m), out);
  if (check == "distribution") return verify_distribution(std::move(m), out);
  throw UsageError("unknown verify check: " + check);
}

// ------------------------------------------------------------------- report

inline int cmd_report(RunManifest m, std::ostream& out) {
  std::ifstream is(m.require("report_in"));
  if (!is) throw UsageError("cannot read report: " + m.get("report_in"));
  const json doc = json::parse(is);
  if (m.get("format", "table") == "json") {
    out << doc.dump(2) << '\n';
    return 0;
  }
  bool ok = true;
  if (doc.contains("report")) {
    const json& r = doc["report"];
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-8s  %s\n", "stage", "status", "reason");
    out << line;
    for (const auto& st : r["stages"]) {
      std::snprintf(line, sizeof line, "%-16s %-8s  %s\n", st["name"].get<std::string>().c_str(),
                    st["status"].get<std::string>().c_str(), st.value("reason", std::string()).c_str());
      out << line;
    }
    ok = r["ok"].get<bool>();
  }
  std::vector<StatReport> tests;
  const json* t = doc.contains("report") ? &doc["report"]["tests"] : doc.contains("tests") ? &doc["tests"] : nullptr;
  if (t)
    for (const auto& e : *t) tests.push_back(stat_report_from_json(e));
  if (!tests.empty()) out << '\n' << render_table(tests);
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- dispatch

// Returns the process exit code: 0 success, 1 failure, 2 usage error or
// inconclusive.
inline int run(const RunManifest& m, std::ostream& out, std::ostream& err, unsigned threads = 1) {
  try {
    const std::string sub = m.require("subcommand");
    if (sub == "gen") return cmd_gen(m, out, err);
    if (sub == "reduce") return cmd_reduce(m, out, err, threads);
    if (sub == "verify") return cmd_verify(m, out, threads);
    if (sub == "report") return cmd_report(m, out);
    throw UsageError("unknown subcommand: " + sub);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "invalid parameter: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rnnhard::app
