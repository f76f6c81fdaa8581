#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "precmom/dataio.hpp"
#include "precmom/errors.hpp"
#include "precmom/format.hpp"
#include "precmom/objective.hpp"
#include "precmom/optimizer.hpp"
#include "precmom/preconditioner.hpp"
#include "precmom/suite.hpp"
#include "precmom/verify.hpp"

namespace precmom {

// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,       // bad flags, unreadable files, malformed input
  kExitDiverged = 2,    // the requested run (or every tuning candidate) blew up
  kExitCheckFailed = 3  // a verification check failed
};

enum class GammaSpec { Number, Theory, Grid };

struct CliOptions {
  std::string command;  // run | compare | verify | tune

  // Problem source: exactly one of dataset/synthetic.
  std::string dataset_path;
  std::string synthetic;  // e.g. "quad:d=10,kappa=100" or "logtoy:n=200,d=20"
  bool normalize = false;
  double train_fraction = 0.8;
  double lambda = 1e-3;
  std::size_t dim_min = 0;  // widen parsed datasets to at least this many columns

  std::vector<std::string> methods{"phb"};  // run/tune use the first entry
  GammaSpec gamma_spec = GammaSpec::Theory;
  double gamma = 0.0;
  double beta1 = 0.9;
  std::string beta2 = "0.999";  // number | 1-k | 1-K
  std::string precond = "identity";
  std::string chain = "default";  // default | clamped | unclamped
  int probes = 1;
  double floor_e = 1e-8;
  long iters = 1000;
  long tune_iters = -1;  // -1: same as iters
  double tol = 0.0;      // squared gradient-norm threshold
  std::uint64_t seed = 42;
  std::string theory_bounds;  // "" | "e,Gamma" | "observed"
  bool average = false;
  bool record = false;

  std::string out;    // csv destination
  std::string suite = "all";  // verify: props | lemmas | envelopes | all
  double l_scale = 1.0;       // verify: scale L fed into envelope machinery
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> parse_kv_list(
    const std::string& body) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidConstantsError("malformed key=value item '" + item + "'");
    }
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

inline double kv_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!parse_double(value, v)) {
    throw InvalidConstantsError("value of '" + key + "' is not numeric: '" +
                                value + "'");
  }
  return v;
}

}  // namespace detail

struct BuiltProblem {
  ObjectiveProblem train;
  std::optional<ObjectiveProblem> test;  // unregularized held-out loss
  std::string description;
};

// "quad:d=10,kappa=100[,seed=7]" or
// "logtoy:n=200,d=20[,spread=100][,flip=0.05][,seed=7]"; the logistic toy
// respects --lambda.
inline BuiltProblem build_synthetic_problem(const CliOptions& opt) {
  auto colon = opt.synthetic.find(':');
  std::string family = opt.synthetic.substr(0, colon);
  std::string body =
      colon == std::string::npos ? "" : opt.synthetic.substr(colon + 1);
  auto kvs = detail::parse_kv_list(body);
  auto get = [&kvs](const std::string& key,
                    std::optional<double> fallback) -> double {
    for (const auto& [k, v] : kvs) {
      if (k == key) return detail::kv_double(k, v);
    }
    if (!fallback) {
      throw InvalidConstantsError("synthetic spec is missing '" + key + "'");
    }
    return *fallback;
  };
  BuiltProblem built{ObjectiveProblem::quadratic_diag({1.0}, {0.0}), {}, {}};
  if (family == "quad") {
    auto d = static_cast<std::size_t>(get("d", std::nullopt));
    double kappa = get("kappa", std::nullopt);
    auto seed = static_cast<std::uint64_t>(get("seed", opt.seed));
    built.train = make_synthetic_quadratic(d, kappa, seed);
    built.description = "synthetic quadratic " + opt.synthetic;
  } else if (family == "logtoy") {
    auto n = static_cast<std::size_t>(get("n", std::nullopt));
    auto d = static_cast<std::size_t>(get("d", std::nullopt));
    double spread = get("spread", 1.0);
    double flip = get("flip", 0.0);
    auto seed = static_cast<std::uint64_t>(get("seed", opt.seed));
    built.train = make_logistic_toy(n, d, seed, opt.lambda, spread, flip);
    built.description = "synthetic logistic " + opt.synthetic;
  } else {
    throw InvalidConstantsError("unknown synthetic family '" + family +
                                "' (expected quad or logtoy)");
  }
  return built;
}

inline BuiltProblem build_dataset_problem(const CliOptions& opt) {
  Dataset full = parse_libsvm_file(opt.dataset_path, opt.dim_min);
  if (opt.normalize) normalize_columns_maxabs(full);
  auto [train, test] = split_dataset(full, opt.train_fraction, opt.seed);
  BuiltProblem built{
      ObjectiveProblem::logistic_l2(std::move(train.features), train.n,
                                    train.d, std::move(train.labels),
                                    opt.lambda),
      ObjectiveProblem::logistic_l2(std::move(test.features), test.n, test.d,
                                    std::move(test.labels), 0.0),
      opt.dataset_path + " (" + std::to_string(train.n) + " train / " +
          std::to_string(test.n) + " test rows, " + std::to_string(train.d) +
          " features)"};
  return built;
}

inline BuiltProblem build_problem(const CliOptions& opt) {
  const bool has_dataset = !opt.dataset_path.empty();
  const bool has_synth = !opt.synthetic.empty();
  if (has_dataset == has_synth) {
    throw InvalidConstantsError(
        "exactly one of --dataset and --synthetic is required");
  }
  return has_dataset ? build_dataset_problem(opt)
                     : build_synthetic_problem(opt);
}

inline Method parse_method(const std::string& name) {
  if (name == "gd") return Method::Gd;
  if (name == "hb") return Method::HeavyBall;
  if (name == "nesterov") return Method::Nesterov;
  if (name == "phb") return Method::Phb;
  if (name == "pn") return Method::Pn;
  throw InvalidConstantsError("unknown method '" + name +
                              "' (expected gd|hb|nesterov|phb|pn)");
}

inline PrecondRule parse_precond(const CliOptions& opt) {
  PrecondRule rule;
  if (opt.precond == "identity") {
    rule = PrecondRule::identity();
  } else if (opt.precond == "adagrad") {
    rule = PrecondRule::adagrad();
  } else if (opt.precond == "adam") {
    rule = PrecondRule::adam();
  } else if (opt.precond == "oasis") {
    rule = PrecondRule::oasis();
  } else {
    throw InvalidConstantsError(
        "unknown preconditioner '" + opt.precond +
        "' (expected identity|adagrad|adam|oasis)");
  }
  if (opt.beta2 == "1-k") {
    rule.beta2.mode = Beta2Schedule::Mode::InvIter;
  } else if (opt.beta2 == "1-K") {
    rule.beta2.mode = Beta2Schedule::Mode::InvHorizon;
    rule.beta2.horizon = opt.iters;
  } else {
    rule.beta2.mode = Beta2Schedule::Mode::Fixed;
    rule.beta2.fixed_value = detail::kv_double("beta2", opt.beta2);
  }
  if (opt.chain == "clamped") {
    rule.chain = ChainMode::Clamped;
  } else if (opt.chain == "unclamped") {
    rule.chain = ChainMode::Unclamped;
  } else if (opt.chain != "default") {
    throw InvalidConstantsError("unknown chain mode '" + opt.chain + "'");
  }
  rule.hutchinson_probes = std::max(1, opt.probes);
  return rule;
}

inline RunConfig make_run_config(const CliOptions& opt, Method method) {
  RunConfig cfg;
  cfg.method = method;
  cfg.rule = parse_precond(opt);
  cfg.gamma_mode = opt.gamma_spec == GammaSpec::Theory ? GammaMode::Theory
                                                       : GammaMode::Explicit;
  cfg.gamma = opt.gamma;
  cfg.beta1 = opt.beta1;
  cfg.iters = opt.iters;
  cfg.tol_grad_sq = opt.tol;
  cfg.seed = opt.seed;
  cfg.floor_e = opt.floor_e;
  cfg.average_output = opt.average;
  cfg.record_iterates = opt.record;
  if (!opt.theory_bounds.empty() && opt.theory_bounds != "observed") {
    std::stringstream ss(opt.theory_bounds);
    std::string e_str, g_str;
    if (!std::getline(ss, e_str, ',') || !std::getline(ss, g_str)) {
      throw InvalidConstantsError(
          "--theory-bounds expects 'e,Gamma' or 'observed'");
    }
    cfg.bounds.e = detail::kv_double("theory-bounds e", e_str);
    cfg.bounds.Gamma = detail::kv_double("theory-bounds Gamma", g_str);
  }
  return cfg;
}

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Gd: return "gd";
    case Method::HeavyBall: return "hb";
    case Method::Nesterov: return "nesterov";
    case Method::Phb: return "phb";
    case Method::Pn: return "pn";
  }
  return "?";
}

inline void write_run_csv(std::ostream& out, const RunReport& rep) {
  const bool with_test = !rep.rows.empty() && rep.rows.front().test_loss;
  out << "iter,f,grad_sq_norm,elapsed_ms,dhat_min,dhat_max";
  if (with_test) out << ",test_loss";
  out << "\n";
  for (const RunRow& r : rep.rows) {
    out << r.iter << ',' << fmt_double(r.f) << ',' << fmt_double(r.grad_sq)
        << ',' << fmt_double(r.elapsed_ms) << ',' << fmt_double(r.dhat_min)
        << ',' << fmt_double(r.dhat_max);
    if (with_test) out << ',' << fmt_double(r.test_loss ? *r.test_loss : 0.0);
    out << "\n";
  }
}

inline void write_file_or_throw(const std::string& path,
                                const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError(0, "cannot write '" + path + "'");
  out << content;
}

// Resolves "--gamma grid" by tuning first; other modes pass through.
inline RunConfig resolve_gamma_spec(const CliOptions& opt, RunConfig cfg,
                                    const ObjectiveProblem& obj,
                                    std::ostream& log) {
  if (opt.gamma_spec != GammaSpec::Grid) return cfg;
  RunConfig tune_cfg = cfg;
  tune_cfg.iters = opt.tune_iters >= 0 ? opt.tune_iters : opt.iters;
  tune_cfg.record_iterates = false;
  tune_cfg.average_output = false;
  TuneResult tuned = tune_gamma(tune_cfg, obj);
  cfg.gamma_mode = GammaMode::Explicit;
  cfg.gamma = tuned.best_gamma();
  log << "tuned gamma for " << method_name(cfg.method) << ": "
      << fmt_double(cfg.gamma) << "\n";
  return cfg;
}

inline int cmd_run(const CliOptions& opt, std::ostream& log = std::cout) {
  BuiltProblem built = build_problem(opt);
  RunConfig cfg = make_run_config(opt, parse_method(opt.methods.at(0)));
  cfg = resolve_gamma_spec(opt, cfg, built.train, log);
  const ObjectiveProblem* test = built.test ? &*built.test : nullptr;
  RunReport rep;
  if (opt.theory_bounds == "observed") {
    rep = run_two_phase(cfg, built.train, test).final;
  } else {
    rep = run(cfg, built.train, test);
  }
  if (!opt.out.empty()) {
    std::ostringstream csv;
    write_run_csv(csv, rep);
    write_file_or_throw(opt.out, csv.str());
  }
  log << built.description << "\n";
  log << "method " << method_name(rep.method) << ", gamma "
      << fmt_double(rep.gamma) << ", " << (rep.rows.size() - (rep.rows.empty() ? 0 : 1))
      << " steps recorded\n";
  if (!rep.rows.empty()) {
    log << "final f " << fmt_double(rep.rows.back().f) << ", grad_sq "
        << fmt_double(rep.rows.back().grad_sq) << ", dhat range ["
        << fmt_double(rep.observed_e) << ", " << fmt_double(rep.observed_Gamma)
        << "]\n";
  }
  if (rep.diverged) {
    log << "diverged at iteration " << rep.diverged_at << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

struct CompareSummaryRow {
  std::string method;
  double gamma = 0.0;
  long iterations = 0;  // to tolerance, or the full budget if never reached
  bool reached = false;
  double final_f = 0.0;
  double final_grad_sq = 0.0;
  bool diverged = false;
};

inline int cmd_compare(const CliOptions& opt, std::ostream& log = std::cout) {
  if (opt.methods.empty()) {
    throw InvalidConstantsError("compare needs at least one --methods entry");
  }
  BuiltProblem built = build_problem(opt);
  built.train.constants();  // warm the cache before forking threads
  const ObjectiveProblem* test = built.test ? &*built.test : nullptr;

  std::vector<RunConfig> configs;
  for (std::size_t i = 0; i < opt.methods.size(); ++i) {
    RunConfig cfg = make_run_config(opt, parse_method(opt.methods[i]));
    cfg.seed = RngStream::derive(opt.seed, i).seed();
    cfg = resolve_gamma_spec(opt, cfg, built.train, log);
    configs.push_back(std::move(cfg));
  }
  std::vector<std::future<RunReport>> futures;
  for (const RunConfig& cfg : configs) {
    futures.push_back(std::async(std::launch::async, [&built, test, cfg]() {
      return run(cfg, built.train, test);
    }));
  }
  std::vector<RunReport> reports;
  for (auto& f : futures) reports.push_back(f.get());

  std::ostringstream long_csv;
  const bool with_test = test != nullptr;
  long_csv << "method,iter,f,grad_sq_norm";
  if (with_test) long_csv << ",test_loss";
  long_csv << "\n";
  std::vector<CompareSummaryRow> summary;
  bool any_completed = false;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RunReport& rep = reports[i];
    for (const RunRow& r : rep.rows) {
      long_csv << opt.methods[i] << ',' << r.iter << ',' << fmt_double(r.f)
               << ',' << fmt_double(r.grad_sq);
      if (with_test) {
        long_csv << ',' << fmt_double(r.test_loss ? *r.test_loss : 0.0);
      }
      long_csv << "\n";
    }
    CompareSummaryRow row;
    row.method = opt.methods[i];
    row.gamma = rep.gamma;
    row.diverged = rep.diverged;
    row.reached = rep.reached_tolerance();
    row.iterations = row.reached && !rep.rows.empty() ? rep.rows.back().iter
                                                      : rep.iters_requested;
    if (!rep.rows.empty()) {
      row.final_f = rep.rows.back().f;
      row.final_grad_sq = rep.rows.back().grad_sq;
    }
    summary.push_back(row);
    if (!rep.diverged) any_completed = true;
  }
  std::ostringstream summary_csv;
  summary_csv
      << "method,gamma,iterations,reached_tol,final_f,final_grad_sq,diverged\n";
  for (const CompareSummaryRow& row : summary) {
    summary_csv << row.method << ',' << fmt_double(row.gamma) << ','
                << row.iterations << ',' << (row.reached ? 1 : 0) << ','
                << fmt_double(row.final_f) << ','
                << fmt_double(row.final_grad_sq) << ','
                << (row.diverged ? 1 : 0) << "\n";
  }
  if (!opt.out.empty()) {
    write_file_or_throw(opt.out, long_csv.str());
    std::string summary_path = opt.out;
    if (auto dot = summary_path.rfind(".csv");
        dot != std::string::npos && dot == summary_path.size() - 4) {
      summary_path.resize(dot);
    }
    summary_path += ".summary.csv";
    write_file_or_throw(summary_path, summary_csv.str());
  }
  log << built.description << "\n" << summary_csv.str();
  return any_completed ? kExitOk : kExitDiverged;
}

inline int cmd_tune(const CliOptions& opt, std::ostream& log = std::cout) {
  BuiltProblem built = build_problem(opt);
  RunConfig cfg = make_run_config(opt, parse_method(opt.methods.at(0)));
  cfg.iters = opt.tune_iters >= 0 ? opt.tune_iters : opt.iters;
  cfg.record_iterates = false;
  TuneResult tuned = tune_gamma(cfg, built.train);
  std::ostringstream csv;
  csv << "gamma,final_f,final_grad_sq,iters_run,diverged,selected\n";
  for (std::size_t i = 0; i < tuned.entries.size(); ++i) {
    const TuneEntry& e = tuned.entries[i];
    csv << fmt_double(e.gamma) << ',' << fmt_double(e.final_f) << ','
        << fmt_double(e.final_grad_sq) << ',' << e.iters_run << ','
        << (e.diverged ? 1 : 0) << ',' << (i == tuned.best_index ? 1 : 0)
        << "\n";
  }
  if (!opt.out.empty()) write_file_or_throw(opt.out, csv.str());
  log << built.description << "\n" << csv.str();
  log << "best gamma: " << fmt_double(tuned.best_gamma()) << "\n";
  return kExitOk;
}

inline const char* status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::NotApplicable: return "not_applicable";
  }
  return "?";
}

inline int cmd_verify(const CliOptions& opt, std::ostream& log = std::cout) {
  std::vector<SuiteCheck> checks =
      run_verify_suite(opt.suite, opt.seed, opt.l_scale);
  std::ostringstream csv;
  csv << "check,status,items,worst_margin,note\n";
  std::size_t failed = 0;
  for (const SuiteCheck& c : checks) {
    std::string note = c.report.note;
    for (char& ch : note) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv << c.report.name << ',' << status_name(c.report.status) << ','
        << c.report.items << ',' << fmt_double(c.report.worst_margin) << ','
        << note << "\n";
    if (c.gating && c.report.status == CheckStatus::Fail) ++failed;
  }
  if (!opt.out.empty()) write_file_or_throw(opt.out, csv.str());
  log << csv.str();
  log << "suite '" << opt.suite << "': " << checks.size() << " checks, "
      << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace precmom
