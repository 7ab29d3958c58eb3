#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace gradflow {

/// Piecewise-constant learning rate: breakpoints (first epoch, rate) with
/// strictly increasing epochs; epochs are counted from 1.
class LrSchedule {
 public:
  LrSchedule() : LrSchedule(1e-3) {}
  explicit LrSchedule(double rate) : LrSchedule(std::vector<std::pair<int, double>>{{1, rate}}) {}
  explicit LrSchedule(std::vector<std::pair<int, double>> breakpoints);

  double rate(int epoch) const;
  const std::vector<std::pair<int, double>>& breakpoints() const { return breakpoints_; }

  /// "1:1e-2,10000:1e-3" or a single rate "1e-3".
  static LrSchedule parse(const std::string& text);
  std::string str() const;

 private:
  std::vector<std::pair<int, double>> breakpoints_;
};

/// theta - rate * gradient; throws on a non-finite result.
Eigen::VectorXd sgd_step(const Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, double rate);

enum class OptimizerKind { sgd, momentum, adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Stateful first-order update rule; plain SGD keeps no state.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, Eigen::Index size);

  Eigen::VectorXd step(const Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, double rate);
  void reset();
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  Eigen::VectorXd m_, v_;
  long long t_ = 0;
};

}  // namespace gradflow
