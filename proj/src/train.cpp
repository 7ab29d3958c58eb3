#include "gradflow/train.hpp"

#include "gradflow/diagnostics.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace gradflow {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epoch budget must be non-negative");
  if (!(tol >= 0.0)) throw std::invalid_argument("stopping tolerance must be non-negative");
  if (!(divergence_factor > 0.0)) throw std::invalid_argument("divergence factor must be positive");
}

TrainResult train(Network& net, const TrainConfig& config, const Objective& objective, int step,
                  std::vector<EpochRecord>* log) {
  config.validate();
  const Index n = net.parameters().size();
  const Index first = std::clamp<Index>(config.trainable_first, 0, n);
  const Index count = config.trainable_count < 0 ? n - first : std::min(config.trainable_count, n - first);

  Optimizer opt(config.optimizer, count);
  TrainResult r;
  Eigen::VectorXd theta = net.parameters();
  Eigen::VectorXd good = theta;
  double reference = 0.0;
  for (int m = 1; m <= config.epochs; ++m) {
    EpochRecord rec;
    rec.step = step;
    rec.epoch = m;
    rec.rate = config.schedule.rate(m);
    ValueGradient vg;
    bool finite = true;
    try {
      vg = objective(m, theta, rec);
      finite = std::isfinite(vg.value) && vg.gradient.allFinite();
    } catch (const ad::NonFiniteError& e) {
      diag::warn(std::string("step ") + std::to_string(step) + ", epoch " + std::to_string(m) + ": " + e.what());
      finite = false;
    }
    if (m == 1 && finite) {
      r.initial_loss = vg.value;
      reference = std::max(std::abs(vg.value), 1e-8);
    }
    if (!finite || std::abs(vg.value) > config.divergence_factor * reference) {
      diag::warn("step " + std::to_string(step) + " diverged at epoch " + std::to_string(m) + " (loss " +
                 std::to_string(vg.value) + ", initial " + std::to_string(r.initial_loss) + ")");
      r.diverged = true;
      break;
    }
    rec.loss = vg.value;
    if (log) log->push_back(rec);
    r.final_loss = vg.value;
    r.epochs = m;
    good = theta;

    Eigen::VectorXd next = theta;
    next.segment(first, count) = opt.step(theta.segment(first, count), vg.gradient.segment(first, count), rec.rate);
    const double change = (next - theta).norm();
    theta = std::move(next);
    if (change < config.tol) {
      r.converged = true;
      break;
    }
  }
  net.set_parameters(r.diverged ? good : theta);
  return r;
}

void write_log_csv(const std::vector<EpochRecord>& log, LogFormat format, std::ostream& out) {
  const auto old = out.precision(12);
  if (format == LogFormat::nitsche) {
    out << "step,epoch,loss,gamma,rate\n";
    for (const auto& r : log) out << r.step << ',' << r.epoch << ',' << r.loss << ',' << r.gamma << ',' << r.rate << '\n';
  } else {
    out << "step,epoch,loss,ot_cost,entropy,sinkhorn_iters,marginal_residual\n";
    for (const auto& r : log) {
      out << r.step << ',' << r.epoch << ',' << r.loss << ',' << r.ot_cost << ',' << r.entropy << ','
          << r.sinkhorn_iterations << ',' << r.marginal_residual << '\n';
    }
  }
  out.precision(old);
}

}  // namespace gradflow
