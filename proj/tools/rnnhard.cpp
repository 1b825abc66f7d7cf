#include <iostream>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rnnhard/app.hpp"

namespace {

using rnnhard::RunManifest;

struct Bound {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

// Each option is stored under its manifest key: --formula-out -> formula_out.
class Options {
 public:
  void add(CLI::App* app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    for (auto& c : flag)
      if (c == '_') c = '-';
    auto& b = bound_[app].emplace_back();
    b.key = key;
    b.opt = app->add_option(flag, b.value, help);
  }

  void apply(CLI::App* app, RunManifest& m) const {
    auto it = bound_.find(app);
    if (it == bound_.end()) return;
    for (const auto& b : it->second)
      if (b.opt->count() > 0) m.set(b.key, b.value);
  }

 private:
  std::map<CLI::App*, std::deque<Bound>> bound_;
};

void add_all(Options& o, CLI::App* app, const std::vector<std::pair<std::string, std::string>>& keys) {
  for (const auto& [k, h] : keys) o.add(app, k, h);
}

const std::vector<std::pair<std::string, std::string>> kShape = {
    {"nvars", "number of boolean variables n'"},
    {"k", "clause arity K (default 3)"},
    {"q", "clauses per constraint (default ceil(ln^2 n'))"},
    {"mode", "planted | random"},
    {"route", "direct | sat"},
    {"constraints", "constraints (direct route) or groups (sat route)"},
    {"clauses", "K-SAT clauses drawn for the sat route (default 2*q*constraints+1000)"},
    {"seed", "master seed"},
};

const std::vector<std::pair<std::string, std::string>> kLaw = {
    {"sigma", "normal standard deviation"},
    {"radius", "uniform / bernoulli / sphere radius r"},
    {"cov", "ar1 | identity | path to a whitespace matrix"},
    {"rho", "AR(1) correlation"},
    {"cov_scale", "AR(1) variance"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardness-reduction toolkit: random CSPs, gadget samples, random ReLU networks"};
  app.fallthrough();  // global flags also accepted after the subcommand
  app.require_subcommand(1);
  std::string manifest_path;
  unsigned threads = 1;
  app.add_option("--manifest", manifest_path, "load parameters from a key=value manifest (flags override)");
  app.add_option("--threads", threads, "worker threads (outputs do not depend on it)")->check(CLI::Range(1u, 1024u));
  Options opts;

  auto* gen = app.add_subcommand("gen", "generate a MIXED formula and its gadget sample");
  add_all(opts, gen, kShape);
  add_all(opts, gen, {{"format", "binary | text"},
                      {"formula_out", "formula file"},
                      {"sample_out", "sample file"},
                      {"weights_out", "realizing filter (planted mode)"}});

  auto* reduce = app.add_subcommand("reduce", "transform a sample into one realizable by a random network");
  add_all(opts, reduce, kShape);
  add_all(opts, reduce, kLaw);
  add_all(opts, reduce, {{"target", "fc-|cnn- followed by normal, uniform, bernoulli, gaussian, sphere"},
                         {"sample", "input sample (otherwise a sample is generated)"},
                         {"weights", "realizing CNN filter for --sample"},
                         {"condition_cap", "reject transforms with condition number above this"},
                         {"retries", "transform attempts before failing"},
                         {"tolerance", "pre-clip realizability tolerance"},
                         {"pad_to", "zero-pad the sample to this dimension"},
                         {"pad_exponent", "pad to n^c (FC) or t^c (CNN)"},
                         {"format", "binary | text"},
                         {"sample_out", "output sample"},
                         {"weights_out", "output weights"},
                         {"report_out", "JSON report"},
                         {"norms_csv", "per-point norm CSV"}});

  auto* verify = app.add_subcommand("verify", "run a check");
  verify->require_subcommand(1);
  auto* v_real = verify->add_subcommand("realizable", "exact realizability of a sample by weights");
  add_all(opts, v_real, {{"sample", "sample file"}, {"weights", "weights file"}, {"tolerance", "pre-clip tolerance"}, {"report_out", "JSON report"}});
  auto* v_smin = verify->add_subcommand("smin-tail", "Monte Carlo smallest-singular-value tail");
  add_all(opts, v_smin, kLaw);
  add_all(opts, v_smin, {{"family", "iid-normal | iid-uniform | iid-bernoulli | sphere"},
                         {"nvars", "n' (block size n'+1)"},
                         {"blocks", "k (default ceil(ln^2 n'))"},
                         {"trials", "number of transforms"},
                         {"threshold", "auto or a number"},
                         {"c_prime", "constant for the sphere threshold"},
                         {"max_exceedance", "pass if the exceedance is at most this"},
                         {"seed", "master seed"},
                         {"csv_out", "per-trial CSV"},
                         {"hist_csv", "log10 histogram CSV"},
                         {"bins", "histogram bins"},
                         {"report_out", "JSON report"}});
  auto* v_dist = verify->add_subcommand("distinguish", "learner-to-distinguisher wrapper");
  add_all(opts, v_dist, {{"learner", "memorizing | constant | cheating"},
                         {"sample", "sample file"},
                         {"weights", "weights for the cheating learner"},
                         {"budget", "oracle draws m"},
                         {"seed", "oracle seed"},
                         {"expect", "scattered | realizable: exit 1 on a different verdict"}});
  auto* v_scat = verify->add_subcommand("scattered", "fair-coin label tests");
  add_all(opts, v_scat, {{"sample", "sample file"}, {"alpha", "significance level"}, {"report_out", "JSON report"}});
  auto* v_law = verify->add_subcommand("distribution", "weights against a target law");
  add_all(opts, v_law, kLaw);
  add_all(opts, v_law, {{"weights", "weights file"},
                        {"family", "iid-normal | iid-uniform | iid-bernoulli | gaussian-cols | sphere"},
                        {"seed", "reference seed"},
                        {"alpha", "significance level"},
                        {"report_out", "JSON report"}});

  auto* report = app.add_subcommand("report", "render a JSON report");
  add_all(opts, report, {{"report_in", "report file"}, {"format", "table | json"}});

  auto* run = app.add_subcommand("run", "replay a manifest (requires --manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunManifest m;
  try {
    if (!manifest_path.empty()) m = RunManifest::load(manifest_path);
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  if (run->parsed()) {
    if (manifest_path.empty()) {
      std::cerr << "usage error: run needs --manifest\n";
      return 2;
    }
    return rnnhard::app::run(m, std::cout, std::cerr, threads);
  }
  try {
    for (auto* sub : app.get_subcommands()) {
      m.set("subcommand", sub->get_name());
      opts.apply(sub, m);
      for (auto* leaf : sub->get_subcommands()) {
        m.set("check", leaf->get_name());
        opts.apply(leaf, m);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  return rnnhard::app::run(m, std::cout, std::cerr, threads);
}
