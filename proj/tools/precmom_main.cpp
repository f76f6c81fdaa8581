// Command-line driver: run, compare, tune, verify.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "precmom/precmom.hpp"

namespace {

// Problem-source and solver flags shared by run, compare, and tune.
void add_problem_flags(CLI::App* cmd, precmom::CliOptions& opt) {
  cmd->configurable();
  cmd->add_option("--dataset", opt.dataset_path,
                  "libsvm-format file with +1/-1 (or 0/1) labels");
  cmd->add_option("--synthetic", opt.synthetic,
                  "quad:d=..,kappa=.. or logtoy:n=..,d=..[,spread=..][,flip=..]");
  cmd->add_flag("--normalize", opt.normalize,
                "scale each feature column to max |value| = 1");
  cmd->add_option("--train-frac", opt.train_fraction,
                  "fraction of dataset rows used for training")
      ->capture_default_str();
  cmd->add_option("--lambda", opt.lambda, "l2 regularization strength")
      ->capture_default_str();
  cmd->add_option("--dim", opt.dim_min,
                  "widen parsed datasets to at least this many features");
}

void add_solver_flags(CLI::App* cmd, precmom::CliOptions& opt,
                      std::string& gamma_str) {
  cmd->add_option("--gamma", gamma_str,
                  "step size: a number, 'theory', or 'grid'")
      ->capture_default_str();
  cmd->add_option("--beta1", opt.beta1, "momentum factor")
      ->capture_default_str();
  cmd->add_option("--beta2", opt.beta2,
                  "smoothing factor: a number, '1-k', or '1-K'")
      ->capture_default_str();
  cmd->add_option("--precond", opt.precond,
                  "scaling rule: identity|adagrad|adam|oasis")
      ->capture_default_str();
  cmd->add_option("--chain", opt.chain,
                  "smoothing chains over: default|clamped|unclamped")
      ->capture_default_str();
  cmd->add_option("--probes", opt.probes,
                  "sketch probes per curvature estimate")
      ->capture_default_str();
  cmd->add_option("--floor-e", opt.floor_e, "diagonal clamp floor")
      ->capture_default_str();
  cmd->add_option("--iters", opt.iters, "iteration budget")
      ->capture_default_str();
  cmd->add_option("--tol", opt.tol,
                  "stop when the squared gradient norm reaches this")
      ->capture_default_str();
  cmd->add_option("--seed", opt.seed, "master random seed")
      ->capture_default_str();
  cmd->add_option("--theory-bounds", opt.theory_bounds,
                  "assumed diagonal range 'e,Gamma', or 'observed' to probe "
                  "for it first");
  cmd->add_flag("--average", opt.average,
                "also maintain the weighted iterate average");
  cmd->add_flag("--record", opt.record, "keep the full iterate trace");
  cmd->add_option("--out", opt.out, "write per-iteration csv here");
}

int resolve_gamma(const std::string& gamma_str, precmom::CliOptions& opt) {
  if (gamma_str == "theory") {
    opt.gamma_spec = precmom::GammaSpec::Theory;
  } else if (gamma_str == "grid") {
    opt.gamma_spec = precmom::GammaSpec::Grid;
  } else {
    opt.gamma_spec = precmom::GammaSpec::Number;
    if (!precmom::parse_double(gamma_str, opt.gamma)) {
      std::cerr << "--gamma expects a number, 'theory', or 'grid'; got '"
                << gamma_str << "'\n";
      return precmom::kExitUsage;
    }
  }
  return precmom::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  precmom::CliOptions opt;
  std::string gamma_str = "theory";
  std::string method_single = "phb";

  CLI::App app{"Diagonally scaled momentum and accelerated solvers"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "ini/toml file with a [run]/[compare]/[tune]/[verify] "
                 "section per subcommand");

  CLI::App* run_cmd =
      app.add_subcommand("run", "optimize once and report the trajectory");
  run_cmd->add_option("--method", method_single,
                      "gd|hb|nesterov|phb|pn")
      ->capture_default_str();
  add_problem_flags(run_cmd, opt);
  add_solver_flags(run_cmd, opt, gamma_str);

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "run several methods on one problem");
  compare_cmd
      ->add_option("--methods", opt.methods,
                   "comma-separated subset of gd,hb,nesterov,phb,pn")
      ->delimiter(',')
      ->capture_default_str();
  add_problem_flags(compare_cmd, opt);
  add_solver_flags(compare_cmd, opt, gamma_str);

  CLI::App* tune_cmd =
      app.add_subcommand("tune", "sweep the step-size grid and report");
  tune_cmd->add_option("--method", method_single, "gd|hb|nesterov|phb|pn")
      ->capture_default_str();
  tune_cmd->add_option("--tune-iters", opt.tune_iters,
                       "iteration budget per grid point (-1: use --iters)")
      ->capture_default_str();
  add_problem_flags(tune_cmd, opt);
  add_solver_flags(tune_cmd, opt, gamma_str);

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "check the stated guarantees on instrumented runs");
  verify_cmd->configurable();
  verify_cmd->add_option("--suite", opt.suite,
                         "props|lemmas|envelopes|all")
      ->capture_default_str();
  verify_cmd->add_option("--seed", opt.seed, "master random seed")
      ->capture_default_str();
  verify_cmd
      ->add_option("--l-scale", opt.l_scale,
                   "scale the smoothness constant fed to the envelope runs; "
                   "values below 1 should make the suite fail")
      ->capture_default_str();
  verify_cmd->add_option("--out", opt.out, "write the check table csv here");

  compare_cmd->add_option("--tune-iters", opt.tune_iters,
                          "iteration budget per grid point (-1: use --iters)");
  run_cmd->add_option("--tune-iters", opt.tune_iters,
                      "iteration budget per grid point (-1: use --iters)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return precmom::kExitUsage;
  }

  if (int rc = resolve_gamma(gamma_str, opt); rc != precmom::kExitOk) {
    return rc;
  }

  try {
    if (app.got_subcommand(run_cmd)) {
      opt.command = "run";
      opt.methods = {method_single};
      return precmom::cmd_run(opt);
    }
    if (app.got_subcommand(compare_cmd)) {
      opt.command = "compare";
      return precmom::cmd_compare(opt);
    }
    if (app.got_subcommand(tune_cmd)) {
      opt.command = "tune";
      opt.methods = {method_single};
      return precmom::cmd_tune(opt);
    }
    opt.command = "verify";
    return precmom::cmd_verify(opt);
  } catch (const precmom::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return precmom::kExitDiverged;
  } catch (const precmom::TuningError& e) {
    std::cerr << "tuning failed: " << e.what() << "\n";
    return precmom::kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return precmom::kExitUsage;
  }
}
