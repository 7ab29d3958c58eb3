#include "gradflow/metrics.hpp"

#include "gradflow/rng.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gradflow {

namespace {

constexpr const char* kReportHeader = "d,L2 relative error,max error,mean error,method,points,time nodes,runtime s";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ErrorReport evaluate(const Approximation& approx, const Problem& problem, const TimeGrid& grid,
                     const EvaluationConfig& config) {
  if (!problem.has_exact()) throw std::invalid_argument("problem '" + problem.name + "' has no exact solution");
  if (config.points_per_node < 1) throw std::invalid_argument("need at least one test point per time node");

  ErrorReport r;
  r.dimension = problem.dimension();
  r.time_nodes = grid.steps();
  double sq_err = 0.0, sq_ref = 0.0, abs_sum = 0.0, abs_max = 0.0;
  for (int k = 1; k <= grid.steps(); ++k) {
    const double t = grid.node(k);
    std::mt19937_64 rng(derive_seed(config.seed, {static_cast<std::uint64_t>(k)}));
    const Eigen::MatrixXd x = sample_interior(problem.domain, config.points_per_node, rng);
    const Eigen::VectorXd u = sample_field(problem.exact, t, x);
    const Eigen::VectorXd v = approx(k, t, x);
    if (v.size() != u.size()) throw std::logic_error("approximation returned the wrong number of values");
    const Eigen::ArrayXd e = (u - v).array().abs();
    if (!e.allFinite()) throw std::runtime_error("approximation is not finite at t = " + std::to_string(t));
    const double node_err = e.square().sum();
    const double node_ref = u.squaredNorm();
    sq_err += node_err;
    sq_ref += node_ref;
    abs_sum += e.sum();
    abs_max = std::max(abs_max, e.maxCoeff());
    r.times.push_back(t);
    r.node_relative.push_back(node_ref > 0.0 ? std::sqrt(node_err / node_ref) : std::sqrt(node_err));
  }
  r.points = config.points_per_node * grid.steps();
  r.relative_l2 = sq_ref > 0.0 ? std::sqrt(sq_err / sq_ref) : std::sqrt(sq_err);
  r.max_error = abs_max;
  r.mean_error = abs_sum / static_cast<double>(r.points);
  return r;
}

void write_report_csv(const std::vector<ErrorReport>& reports, std::ostream& out) {
  out << kReportHeader << '\n';
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : reports) {
    out << r.dimension << ',' << r.relative_l2 << ',' << r.max_error << ',' << r.mean_error << ',' << r.method << ','
        << r.points << ',' << r.time_nodes << ',' << r.runtime_seconds << '\n';
  }
  out.precision(old);
}

std::vector<ErrorReport> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw std::runtime_error("not an error report (expected header '" + std::string(kReportHeader) + "')");
  }
  std::vector<ErrorReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 8) throw std::runtime_error("malformed error report row: " + line);
    ErrorReport r;
    r.dimension = std::stoi(cells[0]);
    r.relative_l2 = std::stod(cells[1]);
    r.max_error = std::stod(cells[2]);
    r.mean_error = std::stod(cells[3]);
    r.method = cells[4];
    r.points = std::stoll(cells[5]);
    r.time_nodes = std::stoi(cells[6]);
    r.runtime_seconds = std::stod(cells[7]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_node_errors_csv(const ErrorReport& report, std::ostream& out) {
  out << "t,relative L2 error\n";
  for (std::size_t i = 0; i < report.times.size(); ++i) out << report.times[i] << ',' << report.node_relative[i] << '\n';
}

}  // namespace gradflow
