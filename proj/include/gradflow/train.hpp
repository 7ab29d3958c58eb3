#pragma once

#include "gradflow/assembly.hpp"
#include "gradflow/network.hpp"
#include "gradflow/optim.hpp"

#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

namespace gradflow {

struct TrainConfig {
  int epochs = 2000;
  LrSchedule schedule{1e-3};
  OptimizerConfig optimizer;
  /// Stop once ||theta_{m+1} - theta_m|| < tol.
  double tol = 1e-8;
  /// Abort when |loss| exceeds this multiple of max(|initial loss|, 1e-8).
  double divergence_factor = 1e6;
  /// Optional parameter window [first, first + count) that is trained; the
  /// rest stays fixed. count < 0 trains everything.
  Index trainable_first = 0;
  Index trainable_count = -1;

  void validate() const;
};

/// One row of a training log. Fields not used by a method stay NaN / 0.
struct EpochRecord {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double rate = 0.0;
  double ot_cost = std::numeric_limits<double>::quiet_NaN();
  double entropy = std::numeric_limits<double>::quiet_NaN();
  int sinkhorn_iterations = 0;
  double marginal_residual = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  int epochs = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool converged = false;
  bool diverged = false;
};

/// Loss and gradient at theta for epoch m (1-based); may fill method-specific
/// fields of the record.
using Objective = std::function<ValueGradient(int epoch, const Eigen::VectorXd& theta, EpochRecord& record)>;

/// Runs up to config.epochs descent steps on net's parameters. On divergence
/// (or a non-finite loss) the last parameters with an acceptable loss are
/// kept and the result is flagged.
TrainResult train(Network& net, const TrainConfig& config, const Objective& objective, int step,
                  std::vector<EpochRecord>* log);

enum class LogFormat { nitsche, jko };

/// nitsche: step,epoch,loss,gamma,rate
/// jko:     step,epoch,loss,ot_cost,entropy,sinkhorn_iters,marginal_residual
void write_log_csv(const std::vector<EpochRecord>& log, LogFormat format, std::ostream& out);

}  // namespace gradflow
