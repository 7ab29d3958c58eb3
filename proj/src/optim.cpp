#include "gradflow/optim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gradflow {

LrSchedule::LrSchedule(std::vector<std::pair<int, double>> breakpoints) : breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.empty()) throw std::invalid_argument("learning-rate schedule is empty");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i].second > 0.0) || !std::isfinite(breakpoints_[i].second)) {
      throw std::invalid_argument("learning rates must be positive");
    }
    if (i > 0 && breakpoints_[i].first <= breakpoints_[i - 1].first) {
      throw std::invalid_argument("learning-rate breakpoints must be strictly increasing");
    }
  }
}

double LrSchedule::rate(int epoch) const {
  double r = breakpoints_.front().second;
  for (const auto& [first, rate] : breakpoints_) {
    if (epoch >= first) r = rate;
  }
  return r;
}

LrSchedule LrSchedule::parse(const std::string& text) {
  std::vector<std::pair<int, double>> points;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) {
        points.emplace_back(1, std::stod(item));
      } else {
        points.emplace_back(std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
      }
    } catch (const std::logic_error&) {
      throw std::invalid_argument("malformed learning-rate schedule '" + text + "'");
    }
  }
  return LrSchedule(std::move(points));
}

std::string LrSchedule::str() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (i) out << ',';
    out << breakpoints_[i].first << ':' << breakpoints_[i].second;
  }
  return out.str();
}

Eigen::VectorXd sgd_step(const Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, double rate) {
  if (theta.size() != gradient.size()) throw std::invalid_argument("gradient and parameters differ in length");
  Eigen::VectorXd next = theta - rate * gradient;
  if (!next.allFinite()) throw std::runtime_error("non-finite parameter update");
  return next;
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "momentum") return OptimizerKind::momentum;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd, momentum or adam)");
}

Optimizer::Optimizer(OptimizerConfig config, Eigen::Index size) : config_(config) {
  m_ = Eigen::VectorXd::Zero(size);
  v_ = Eigen::VectorXd::Zero(size);
}

void Optimizer::reset() {
  m_.setZero();
  v_.setZero();
  t_ = 0;
}

Eigen::VectorXd Optimizer::step(const Eigen::VectorXd& theta, const Eigen::VectorXd& gradient, double rate) {
  switch (config_.kind) {
    case OptimizerKind::sgd: return sgd_step(theta, gradient, rate);
    case OptimizerKind::momentum:
      m_ = config_.momentum * m_ + gradient;
      return sgd_step(theta, m_, rate);
    case OptimizerKind::adam: {
      ++t_;
      m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * gradient;
      v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * gradient.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
      const Eigen::VectorXd dir = (m_ / c1).array() / ((v_ / c2).array().sqrt() + config_.epsilon);
      return sgd_step(theta, dir, rate);
    }
  }
  throw std::logic_error("bad optimizer");
}

}  // namespace gradflow
