#pragma once

// Time-stepping by L2 gradient flow: one network per time node, each step
// minimizing
//
//   l2_weight * |O|/N_I sum (w - u^{k-1})^2 + tau_k * N(w; gamma)
//
// from a warm start at u^{k-1}, on fresh point clouds every epoch.

#include "gradflow/metrics.hpp"
#include "gradflow/nitsche.hpp"
#include "gradflow/time_grid.hpp"
#include "gradflow/train.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace gradflow {

struct StepSummary {
  int step = 0;
  int epochs = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool diverged = false;
  double seconds = 0.0;
  int sinkhorn_failures = 0;  // epochs whose transport solve hit the cap
};

/// Networks u^0..u^N on the time grid with per-step diagnostics.
struct Trajectory {
  TimeGrid grid;
  std::vector<Network> networks;
  std::vector<StepSummary> steps;  // steps[k] describes u^k (k = 0 is the initial fit)
  std::vector<EpochRecord> log;
};

/// Seed of the point clouds drawn for (step, epoch); frozen clouds use epoch 0.
std::uint64_t cloud_seed(std::uint64_t seed, int step, int epoch);

/// Evaluates u^k at time node k.
Approximation trajectory_approximation(const Trajectory& trajectory);

struct FitConfig {
  Index interior_points = 1200;
  TrainConfig train{.epochs = 4000, .schedule = LrSchedule(1e-3), .optimizer = {}};
  bool frozen_clouds = false;
};

/// Least-squares fit of u_0: minimizes |O|/N_I sum (w - u_0)^2 starting from
/// `start` (Xavier initialization when absent).
Network fit_initial(const Problem& problem, const Architecture& arch, const FitConfig& config, std::uint64_t seed,
                    std::vector<EpochRecord>* log = nullptr, TrainResult* result = nullptr);

/// Everything one step loss needs besides the trained network.
struct StepData {
  PointClouds clouds;
  NitscheData data;
  Eigen::VectorXd previous;  // u^{k-1} at the interior points
  Eigen::VectorXd gamma;
  double tau = 0.0;
  double l2_weight = 0.5;
};

StepData make_step_data(const Problem& problem, const Network& previous, double t, double tau, PointClouds clouds,
                        Eigen::VectorXd gamma, double l2_weight);

/// Step loss on a single tape bound to w's parameters.
ad::Var step_loss(ad::Tape& tape, const Network& w, const StepData& step, const DiffusionSpec& diffusion);

/// The same loss and its gradient, assembled chunk by chunk.
ValueGradient step_loss_gradient(const Network& w, const StepData& step, const DiffusionSpec& diffusion,
                                 Index chunk = kDefaultChunk);

struct NitscheConfig {
  Index interior_points = 1200;
  Index per_face = 600;
  PenaltyConfig penalty;
  /// Weight of the L2 distance term; 1/2 gives the backward Euler step.
  double l2_weight = 0.5;
  TrainConfig train{.epochs = 2000, .schedule = LrSchedule({{1, 1e-3}, {500, 1e-4}}), .optimizer = {}};
  FitConfig initial;
  bool frozen_clouds = false;
  std::uint64_t seed = 1;
  Index chunk = kDefaultChunk;

  void validate() const;
};

/// Called after every finished time node (including the initial fit, k = 0).
using StepCallback = std::function<void(int step, const Network& net, const StepSummary& summary)>;

/// Runs the full time-stepping scheme. Networks in `resume` (u^0..u^{K-1})
/// are taken as already computed and stepping continues at K.
Trajectory solve(const Problem& problem, const Architecture& arch, const TimeGrid& grid, const NitscheConfig& config,
                 const StepCallback& on_step = {}, std::vector<Network> resume = {});

}  // namespace gradflow
