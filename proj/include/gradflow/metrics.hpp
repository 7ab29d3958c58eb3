#pragma once

#include "gradflow/problem.hpp"
#include "gradflow/time_grid.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace gradflow {

struct EvaluationConfig {
  Index points_per_node = 4096;
  std::uint64_t seed = 7;
};

/// Errors over the space-time test set {(t_k, x) : k = 1..N, x in a fresh
/// uniform cloud per node}:
///   relative L2 = sqrt(sum (u - v)^2 / sum u^2), max = max |u - v|,
///   mean = mean |u - v|.
struct ErrorReport {
  std::string method;
  int dimension = 0;
  double relative_l2 = 0.0;
  double max_error = 0.0;
  double mean_error = 0.0;
  Index points = 0;
  int time_nodes = 0;
  double runtime_seconds = 0.0;
  std::vector<double> times;         // t_1..t_N
  std::vector<double> node_relative; // relative L2 at each node
};

/// Approximation at time node k (t = t_k) evaluated at the columns of x.
using Approximation = std::function<Eigen::VectorXd(int, double, const Eigen::MatrixXd&)>;

ErrorReport evaluate(const Approximation& approx, const Problem& problem, const TimeGrid& grid,
                     const EvaluationConfig& config = {});

/// CSV with header: d,L2 relative error,max error,mean error,method,points,time nodes,runtime s
void write_report_csv(const std::vector<ErrorReport>& reports, std::ostream& out);
std::vector<ErrorReport> read_report_csv(std::istream& in);

/// CSV: t,relative L2 error
void write_node_errors_csv(const ErrorReport& report, std::ostream& out);

}  // namespace gradflow
