#include "gradflow/time_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradflow {

TimeGrid::TimeGrid(std::vector<double> steps) : steps_(std::move(steps)) {
  if (steps_.empty()) throw std::invalid_argument("time grid needs at least one step");
  nodes_.reserve(steps_.size() + 1);
  nodes_.push_back(0.0);
  for (double tau : steps_) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("time steps must be positive");
    nodes_.push_back(nodes_.back() + tau);
  }
}

TimeGrid TimeGrid::uniform(double final_time, double tau) {
  if (!(final_time > 0.0)) throw std::invalid_argument("final time must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("time step must be positive");
  const double n = std::round(final_time / tau);
  if (n < 1.0 || std::abs(n * tau - final_time) > 1e-9 * final_time) {
    throw std::invalid_argument("time step " + std::to_string(tau) + " does not divide T = " +
                                std::to_string(final_time));
  }
  TimeGrid g(std::vector<double>(static_cast<std::size_t>(n), final_time / n));
  g.nodes_.back() = final_time;
  return g;
}

}  // namespace gradflow
