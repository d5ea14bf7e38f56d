#include "bdab/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "bdab/io.hpp"
#include "bdab/rate_distortion.hpp"

namespace bdab::cli {

namespace {

int schedule_f1(int t) { return 5 + t; }
// Base of the log is taken as natural; see README.
int schedule_f2(int t) { return static_cast<int>(std::ceil(5.0 + 3.0 * std::log(t))); }

struct SolveOptions {
  std::string problem_path;
  std::string algorithm;
  double gamma = 50.0;
  double epsilon = 1e-4;
  double tol = 1e-10;
  int max_iter = 10000;
  std::string schedule = "f1";
  std::string trace_path;
  std::string out_path;
  int seed = 0;  // reserved
};

RdSolveResult dispatch(const RdProblem& problem, const SolveOptions& opt) {
  SolverConfig config;
  config.gamma = opt.gamma;
  config.max_iterations = opt.max_iter;
  config.objective_tolerance = opt.tol;

  if (opt.algorithm == "minfree") {
    const int d0 = problem.d1() * (problem.d2() - 1) - 1;
    return rd_solve_minfree(problem, config, opt.epsilon, Eigen::VectorXd::Zero(d0));
  }
  if (opt.algorithm == "mirror") {
    const int d0 = problem.d1() * (problem.d2() - 1) - 1;
    return rd_solve_mirror(problem, config, opt.epsilon, Eigen::VectorXd::Zero(d0));
  }
  if (opt.algorithm == "em") return em_solve(problem, config);
  if (opt.algorithm == "em-newton")
    return em_solve_newton(problem, config,
                           opt.schedule == "f2" ? schedule_f2 : schedule_f1);
  throw ArgumentError("unknown algorithm: " + opt.algorithm);
}

int exit_code_for(Termination reason) {
  switch (reason) {
    case Termination::kTolerance:
      return 0;
    case Termination::kMaxIterations:
      return 2;
    case Termination::kError:
      return 1;
  }
  return 1;
}

int run_solve(const SolveOptions& opt) {
  const RdProblem problem = load_problem(opt.problem_path);
  const RdSolveResult result = dispatch(problem, opt);
  if (result.core.reason == Termination::kError) {
    std::cerr << "error: " << result.core.message << "\n";
    return 1;
  }
  if (result.w.size() > 0 && result.w.minCoeff() < -1e-9) {
    std::cerr << "error: the solution table has negative entries (min "
              << result.w.minCoeff()
              << "); the clipped surrogate converged to an invalid minimizer "
                 "on this instance. Try the em baseline.\n";
    return 1;
  }

  RunReport report;
  report.algorithm = opt.algorithm;
  report.gamma = opt.gamma;
  report.epsilon = opt.epsilon;
  report.tolerance = opt.tol;
  report.max_iterations = opt.max_iter;
  if (opt.algorithm == "em-newton") report.schedule = opt.schedule;
  report.seed = opt.seed;
  report.objective = result.core.objective;
  report.w = result.w;
  report.distortion = result.distortion;
  report.iterations = result.core.iterations;
  report.cumulative_inner = result.core.trace.records.empty()
                                ? 0
                                : result.core.trace.records.back().cumulative_inner;
  report.termination = to_string(result.core.reason);

  const std::string text = report_to_json(report).dump(2) + "\n";
  if (opt.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(opt.out_path);
    if (!out) throw ArgumentError("cannot open output file: " + opt.out_path);
    out << text;
  }
  if (!opt.trace_path.empty()) emit_trace(result.core.trace, opt.trace_path);
  return exit_code_for(result.core.reason);
}

int run_compare(const std::string& problem_path, const std::string& out_path) {
  const RdProblem problem = load_problem(problem_path);
  SolverConfig config;  // gamma 50, tol 1e-10, max_iter 10000
  const double epsilon = 1e-4;
  const int d0 = problem.d1() * (problem.d2() - 1) - 1;

  struct Run {
    std::string name;
    RdSolveResult result;
  };
  std::vector<Run> runs;
  runs.push_back({"minfree", rd_solve_minfree(problem, config, epsilon,
                                              Eigen::VectorXd::Zero(d0))});
  runs.push_back({"em-newton-f1", em_solve_newton(problem, config, schedule_f1)});
  runs.push_back({"em-newton-f2", em_solve_newton(problem, config, schedule_f2)});

  int worst = 0;
  double best_final = std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    if (run.result.core.reason == Termination::kError) {
      std::cerr << "error: " << run.name << ": " << run.result.core.message << "\n";
      return 1;
    }
    worst = std::max(worst, exit_code_for(run.result.core.reason));
    best_final = std::min(best_final, run.result.core.objective);
  }

  std::ofstream out(out_path);
  if (!out) throw ArgumentError("cannot open output file: " + out_path);
  out << "algorithm,cumulative_inner_iterations,objective_gap\n";
  char buf[40];
  for (const auto& run : runs) {
    for (const auto& rec : run.result.core.trace.records) {
      std::snprintf(buf, sizeof(buf), "%.12g", rec.objective - best_final);
      out << run.name << ',' << rec.cumulative_inner << ',' << buf << '\n';
    }
  }
  out.flush();
  if (!out) throw ArgumentError("failed writing comparison file: " + out_path);
  return worst;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Bregman-divergence Arimoto-Blahut solvers for rate-distortion problems"};
  app.require_subcommand(1);

  SolveOptions opt;
  auto* solve = app.add_subcommand("solve", "Solve one problem with one algorithm");
  solve->add_option("--problem", opt.problem_path, "Problem JSON file")->required();
  solve->add_option("--algorithm", opt.algorithm, "Solver to run")
      ->required()
      ->check(CLI::IsMember({"minfree", "em", "em-newton", "mirror"}));
  solve->add_option("--gamma", opt.gamma, "Step parameter gamma")->check(CLI::PositiveNumber);
  solve->add_option("--epsilon", opt.epsilon, "Clipping constant")->check(CLI::PositiveNumber);
  solve->add_option("--tol", opt.tol, "Relative objective-decrease stop");
  solve->add_option("--max-iter", opt.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  solve->add_option("--schedule", opt.schedule, "Inner-iteration schedule (em-newton)")
      ->check(CLI::IsMember({"f1", "f2"}));
  solve->add_option("--trace", opt.trace_path, "Write per-iteration CSV here");
  solve->add_option("--out", opt.out_path, "Write the run report here (default stdout)");
  solve->add_option("--seed", opt.seed, "Reserved");

  std::string cmp_problem, cmp_out;
  auto* compare = app.add_subcommand("compare", "Gap-vs-inner-iteration curves for "
                                                "minfree and both em-newton schedules");
  compare->add_option("--problem", cmp_problem, "Problem JSON file")->required();
  compare->add_option("--out", cmp_out, "Output CSV path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (solve->parsed()) return run_solve(opt);
    if (compare->parsed()) return run_compare(cmp_problem, cmp_out);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace bdab::cli
