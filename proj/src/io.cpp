#include "bdab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace bdab {

namespace {

using nlohmann::json;

/// Round-trips x through a 12-significant-digit decimal form.
json real12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return json(std::strtod(buf, nullptr));
}

std::string csv_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

Eigen::VectorXd require_real_array(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ArgumentError("missing key: " + key);
  const auto& node = doc.at(key);
  if (!node.is_array() || node.empty())
    throw ArgumentError(key + " must be a nonempty array of reals");
  Eigen::VectorXd values(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].is_number()) throw ArgumentError(key + " must contain only reals");
    values[static_cast<int>(i)] = node[i].get<double>();
  }
  return values;
}

Eigen::MatrixXd require_real_matrix(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ArgumentError("missing key: " + key);
  const auto& node = doc.at(key);
  if (!node.is_array() || node.empty())
    throw ArgumentError(key + " must be a nonempty array of rows");
  std::size_t cols = 0;
  for (std::size_t r = 0; r < node.size(); ++r) {
    if (!node[r].is_array() || node[r].empty())
      throw ArgumentError(key + " row " + std::to_string(r) + " must be a nonempty array");
    if (r == 0) cols = node[r].size();
    if (node[r].size() != cols)
      throw ArgumentError(key + " row " + std::to_string(r) + " has " +
                          std::to_string(node[r].size()) + " columns, expected " +
                          std::to_string(cols));
  }
  Eigen::MatrixXd values(node.size(), cols);
  for (std::size_t r = 0; r < node.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (!node[r][c].is_number())
        throw ArgumentError(key + " must contain only reals");
      values(static_cast<int>(r), static_cast<int>(c)) = node[r][c].get<double>();
    }
  return values;
}

}  // namespace

RdProblem problem_from_json(const json& doc) {
  if (!doc.is_object()) throw ArgumentError("problem document must be a JSON object");
  const Eigen::VectorXd p_x = require_real_array(doc, "p_x");
  const Eigen::MatrixXd distortion = require_real_matrix(doc, "distortion");
  if (!doc.contains("c")) throw ArgumentError("missing key: c");
  if (!doc.at("c").is_number()) throw ArgumentError("c must be a real number");

  DiscreteDistribution source;
  try {
    source = make_distribution(p_x);
  } catch (const ArgumentError& e) {
    if (std::string(e.what()).find("sum to 1") != std::string::npos)
      throw ArgumentError("p_x must sum to 1");
    throw ArgumentError(std::string("p_x: ") + e.what());
  }
  try {
    return make_rd_problem(std::move(source), distortion, doc.at("c").get<double>());
  } catch (const ArgumentError& e) {
    throw ArgumentError(std::string("problem: ") + e.what());
  }
}

RdProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open problem file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + byte, '\n');
    throw ArgumentError(path.string() + ":" + std::to_string(line) +
                        ": JSON syntax error: " + e.what());
  }
  return problem_from_json(doc);
}

nlohmann::json problem_to_json(const RdProblem& problem) {
  json doc;
  doc["p_x"] = json::array();
  for (int x = 0; x < problem.d1(); ++x) doc["p_x"].push_back(real12(problem.p_x.probs[x]));
  doc["distortion"] = json::array();
  for (int x = 0; x < problem.d1(); ++x) {
    json row = json::array();
    for (int y = 0; y < problem.d2(); ++y) row.push_back(real12(problem.distortion(x, y)));
    doc["distortion"].push_back(std::move(row));
  }
  doc["c"] = real12(problem.level);
  return doc;
}

nlohmann::json report_to_json(const RunReport& report) {
  for (int x = 0; x < report.w.rows(); ++x) {
    if (std::abs(report.w.row(x).sum() - 1.0) > 1e-9 || report.w.row(x).minCoeff() < -1e-9)
      throw ArgumentError("report: emitted W is not row-stochastic (row " +
                          std::to_string(x) + ")");
  }
  json doc;
  doc["algorithm"] = report.algorithm;
  json config;
  config["gamma"] = real12(report.gamma);
  config["epsilon"] = real12(report.epsilon);
  config["tol"] = real12(report.tolerance);
  config["max_iter"] = report.max_iterations;
  if (!report.schedule.empty()) config["schedule"] = report.schedule;
  config["seed"] = report.seed;
  doc["config"] = std::move(config);
  doc["objective"] = real12(report.objective);
  json w = json::array();
  for (int x = 0; x < report.w.rows(); ++x) {
    json row = json::array();
    for (int y = 0; y < report.w.cols(); ++y) row.push_back(real12(report.w(x, y)));
    w.push_back(std::move(row));
  }
  doc["w"] = std::move(w);
  doc["distortion"] = real12(report.distortion);
  doc["iterations"] = report.iterations;
  doc["cumulative_inner_iterations"] = report.cumulative_inner;
  doc["termination"] = report.termination;
  return doc;
}

RunReport report_from_json(const nlohmann::json& doc) {
  RunReport report;
  report.algorithm = doc.at("algorithm").get<std::string>();
  const auto& config = doc.at("config");
  report.gamma = config.at("gamma").get<double>();
  report.epsilon = config.at("epsilon").get<double>();
  report.tolerance = config.at("tol").get<double>();
  report.max_iterations = config.at("max_iter").get<int>();
  if (config.contains("schedule")) report.schedule = config.at("schedule").get<std::string>();
  report.seed = config.at("seed").get<int>();
  report.objective = doc.at("objective").get<double>();
  report.w = require_real_matrix(doc, "w");
  report.distortion = doc.at("distortion").get<double>();
  report.iterations = doc.at("iterations").get<int>();
  report.cumulative_inner = doc.at("cumulative_inner_iterations").get<std::int64_t>();
  report.termination = doc.at("termination").get<std::string>();
  return report;
}

void emit_trace(const IterationTrace& trace, std::ostream& out) {
  out << "iter,objective,constraint_residual,min_entry,cumulative_inner,elapsed_ns\n";
  for (const auto& rec : trace.records) {
    out << rec.iteration << ',' << csv_real(rec.objective) << ','
        << csv_real(rec.constraint_residual) << ',' << csv_real(rec.min_entry) << ','
        << rec.cumulative_inner << ',' << rec.elapsed_ns << '\n';
  }
}

void emit_trace(const IterationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open trace file for writing: " + path.string());
  emit_trace(trace, out);
  out.flush();
  if (!out) throw ArgumentError("failed writing trace file: " + path.string());
}

}  // namespace bdab
