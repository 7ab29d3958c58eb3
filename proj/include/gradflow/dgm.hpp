#pragma once

// Space-time least squares on one network w(t, x) with input (t, x_1..x_d):
//
//   T|O|/N_I  sum (w_t - lap_x w - F)^2
// + T|G_D|/N_D sum (w - g_D)^2 + T|G_N|/N_N sum (n.grad_x w - g_N)^2
// + |O|/N_0   sum (w(0, .) - u_0)^2
//
// with all three terms weighted equally.

#include "gradflow/gradient_flow.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace gradflow {

/// Points stored as (d+1) x n columns with t in row 0.
struct SpaceTimeCloud {
  Eigen::MatrixXd interior;  // t uniform on (0, T], x inside
  Eigen::MatrixXd dirichlet;
  Eigen::MatrixXd neumann;
  Eigen::MatrixXd neumann_normals;  // d x n_N, spatial normals
  Eigen::MatrixXd initial;          // t = 0
  double interior_measure = 0.0;    // T |O|
  double dirichlet_measure = 0.0;   // T |G_D|
  double neumann_measure = 0.0;     // T |G_N|
  double initial_measure = 0.0;     // |O|
};

SpaceTimeCloud sample_space_time(const BoxDomain& domain, double final_time, Index interior, Index per_face,
                                 Index initial, std::uint64_t seed);

/// Problem data sampled on a space-time cloud.
struct DgmData {
  Eigen::VectorXd forcing, dirichlet, neumann, initial;
};

DgmData sample_dgm_data(const Problem& problem, const SpaceTimeCloud& cloud);

// Term builders on recorded jets of w(t, x) (direction 0 is t); `weight` is
// the quadrature weight.

/// weight * sum((w_t - lap_x w - f)^2); needs an order-2 jet with lap_first = 1.
ad::Var heat_residual_term(const ad::SpatialJet& w, const Eigen::VectorXd& forcing, double weight);
/// weight * sum((w - g)^2)
ad::Var value_residual_term(const ad::SpatialJet& w, const Eigen::VectorXd& g, double weight);
/// weight * sum((n . grad_x w - g)^2) with spatial normals n (d x batch).
ad::Var flux_residual_term(const ad::SpatialJet& w, const Eigen::MatrixXd& normals, const Eigen::VectorXd& g,
                           double weight);

/// The loss on a single tape bound to w's parameters. Needs A = I.
ad::Var dgm_loss(ad::Tape& tape, const Network& w, const SpaceTimeCloud& cloud, const DgmData& data);

/// The same loss and its gradient, assembled chunk by chunk.
ValueGradient dgm_loss_gradient(const Network& w, const SpaceTimeCloud& cloud, const DgmData& data,
                                Index chunk = kDefaultChunk);

struct DgmConfig {
  Index interior_points = 1800;
  Index per_face = 600;
  Index initial_points = 1200;
  TrainConfig train{.epochs = 10000, .schedule = LrSchedule({{1, 1e-2}, {2000, 1e-3}, {8000, 1e-4}}),
                    .optimizer = {}};
  bool frozen_clouds = false;
  std::uint64_t seed = 1;
  Index chunk = kDefaultChunk;

  void validate() const;
};

struct DgmResult {
  Network network;
  TrainResult train;
  std::vector<EpochRecord> log;
  double seconds = 0.0;
};

/// Trains one space-time network (input width d + 1) from a Xavier start.
/// Called with the loss of every `every`-th epoch.
using DgmProgress = std::function<void(int epoch, double loss)>;

DgmResult solve_dgm(const Problem& problem, const Architecture& arch, const DgmConfig& config,
                    const DgmProgress& on_progress = {}, int every = 500);

/// Evaluates w(t_k, x).
Approximation space_time_approximation(const Network& w);

}  // namespace gradflow
