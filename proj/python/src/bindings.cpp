#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

#include "bdab/rate_distortion.hpp"

namespace py = pybind11;
using namespace bdab;

namespace {

RdProblem build_problem(const Eigen::VectorXd& p_x, const Eigen::MatrixXd& distortion,
                        double c) {
  return make_rd_problem(make_distribution(p_x), distortion, c);
}

int schedule_f1(int t) { return 5 + t; }
int schedule_f2(int t) { return static_cast<int>(std::ceil(5.0 + 3.0 * std::log(t))); }

py::dict result_to_dict(const RdSolveResult& result) {
  py::dict out;
  out["objective"] = result.core.objective;
  out["w"] = result.w;
  out["distortion"] = result.distortion;
  out["iterations"] = result.core.iterations;
  out["termination"] = to_string(result.core.reason);
  out["cumulative_inner"] = result.core.trace.records.empty()
                                ? std::int64_t{0}
                                : result.core.trace.records.back().cumulative_inner;
  const auto& records = result.core.trace.records;
  Eigen::VectorXd objectives(records.size());
  Eigen::VectorXd inner(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    objectives[static_cast<int>(i)] = records[i].objective;
    inner[static_cast<int>(i)] = static_cast<double>(records[i].cumulative_inner);
  }
  out["trace_objective"] = objectives;
  out["trace_cumulative_inner"] = inner;
  if (result.em_sign != 0) out["em_sign"] = result.em_sign;
  return out;
}

py::dict solve(const Eigen::VectorXd& p_x, const Eigen::MatrixXd& distortion, double c,
               const std::string& algorithm, double gamma, double epsilon, double tol,
               int max_iter, const std::string& schedule) {
  const RdProblem problem = build_problem(p_x, distortion, c);
  SolverConfig config;
  config.gamma = gamma;
  config.max_iterations = max_iter;
  config.objective_tolerance = tol;

  RdSolveResult result;
  if (algorithm == "minfree") {
    const int d0 = problem.d1() * (problem.d2() - 1) - 1;
    result = rd_solve_minfree(problem, config, epsilon, Eigen::VectorXd::Zero(d0));
  } else if (algorithm == "mirror") {
    const int d0 = problem.d1() * (problem.d2() - 1) - 1;
    result = rd_solve_mirror(problem, config, epsilon, Eigen::VectorXd::Zero(d0));
  } else if (algorithm == "em") {
    result = em_solve(problem, config);
  } else if (algorithm == "em-newton") {
    result = em_solve_newton(problem, config,
                             schedule == "f2" ? schedule_f2 : schedule_f1);
  } else {
    throw ArgumentError("unknown algorithm: " + algorithm);
  }
  if (result.core.reason == Termination::kError)
    throw std::runtime_error(result.core.message);
  return result_to_dict(result);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bregman-divergence Arimoto-Blahut rate-distortion solvers";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  m.def("solve", &solve, py::arg("p_x"), py::arg("distortion"), py::arg("c"),
        py::arg("algorithm") = "minfree", py::arg("gamma") = 50.0,
        py::arg("epsilon") = 1e-4, py::arg("tol") = 1e-10, py::arg("max_iter") = 10000,
        py::arg("schedule") = "f1",
        "Solve a rate-distortion instance; returns a dict with the objective "
        "(nats), the conditional distribution w, the achieved distortion and "
        "the iteration trace.");

  m.def(
      "mutual_information",
      [](const Eigen::VectorXd& p_x, const Eigen::MatrixXd& w) {
        return mutual_information(make_distribution(p_x), make_conditional(w));
      },
      py::arg("p_x"), py::arg("w"), "I(X;Y) in nats for a row-stochastic w.");

  m.def(
      "expected_distortion",
      [](const Eigen::VectorXd& p_x, const Eigen::MatrixXd& w,
         const Eigen::MatrixXd& distortion) {
        return expected_distortion(make_distribution(p_x), make_conditional(w), distortion);
      },
      py::arg("p_x"), py::arg("w"), py::arg("distortion"));

  m.def(
      "rd_objective",
      [](const Eigen::VectorXd& p_x, const Eigen::MatrixXd& distortion, double c,
         double epsilon, const Eigen::VectorXd& eta) {
        const RdProblem problem = build_problem(p_x, distortion, c);
        return rd_objective(problem, build_rd_basis(problem), epsilon, eta);
      },
      py::arg("p_x"), py::arg("distortion"), py::arg("c"), py::arg("epsilon"),
      py::arg("eta"), "Clipped reduced objective at mixture coordinates eta.");
}
