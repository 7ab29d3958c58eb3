#pragma once

#include <vector>

namespace gradflow {

/// Nodes 0 = t_0 < t_1 < ... < t_N = T.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> steps);
  /// N = round(T / tau) equal steps; tau must divide T up to rounding.
  static TimeGrid uniform(double final_time, double tau);

  int steps() const { return static_cast<int>(steps_.size()); }
  /// tau_k for k = 1..N.
  double step(int k) const { return steps_.at(static_cast<std::size_t>(k - 1)); }
  /// t_k for k = 0..N.
  double node(int k) const { return nodes_.at(static_cast<std::size_t>(k)); }
  double final_time() const { return nodes_.back(); }
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  std::vector<double> steps_;
  std::vector<double> nodes_;
};

}  // namespace gradflow
