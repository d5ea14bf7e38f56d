#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bdab/rate_distortion.hpp"

namespace bdab {

/// Parses {"p_x": [...], "distortion": [[...]], "c": real}; every problem
/// invariant is re-checked with key-named (and, for syntax errors,
/// line-referenced) messages.
RdProblem load_problem(const std::filesystem::path& path);
RdProblem problem_from_json(const nlohmann::json& doc);
nlohmann::json problem_to_json(const RdProblem& problem);

struct RunReport {
  std::string algorithm;
  double gamma = 0.0;
  double epsilon = 0.0;
  double tolerance = 0.0;
  int max_iterations = 0;
  std::string schedule;  ///< empty unless em-newton
  int seed = 0;
  double objective = 0.0;
  Eigen::MatrixXd w;
  double distortion = 0.0;
  int iterations = 0;
  std::int64_t cumulative_inner = 0;
  std::string termination;
};

/// Reals are rounded to 12 significant digits before serialization so the
/// emitted document is diff-stable; emission re-validates that w is
/// row-stochastic.
nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// CSV with the fixed header
/// iter,objective,constraint_residual,min_entry,cumulative_inner,elapsed_ns.
void emit_trace(const IterationTrace& trace, std::ostream& out);
void emit_trace(const IterationTrace& trace, const std::filesystem::path& path);

}  // namespace bdab
