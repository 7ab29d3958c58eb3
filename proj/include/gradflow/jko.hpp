#pragma once

// Minimizing-movement steps in the Wasserstein metric: each step minimizes
//
//   1/2 d(u^{k-1}, w)^2 + tau * |O|/N_I sum p log p
//
// over networks w, where both densities live on one interior cloud, d^2 is
// the entropic transport cost between the normalized weight vectors and p is
// w normalized to unit mass on the cloud.

#include "gradflow/gradient_flow.hpp"
#include "gradflow/sinkhorn.hpp"

namespace gradflow {

/// Weights of a density sampled on a cloud.
struct DiscreteMeasure {
  Eigen::VectorXd weights;  // clamp(values, floor) / sum, sums to 1
  Index clamped = 0;        // values below the floor
  double total = 0.0;       // sum of the clamped values
};

DiscreteMeasure density_to_measure(const Eigen::VectorXd& values, double floor);

/// weight * sum(v log v) with v = max(density, floor) elementwise.
ad::Var entropy_term(ad::Var density, double weight, double floor);
/// The Monte Carlo entropy (|O|/N) sum w log w of a network on a cloud.
ad::Var entropy_term(ad::Tape& tape, const Network& w, const Eigen::MatrixXd& points, double measure, double floor,
                     Index* clamped = nullptr);

struct JkoConfig {
  Index interior_points = 200;
  /// Entropic regularization; <= 0 selects 0.01 * squared domain diameter.
  double epsilon = 0.0;
  SinkhornConfig sinkhorn{.epsilon = 0.0, .tol = 1e-9, .max_iterations = 20000};
  double density_floor = 1e-8;
  /// Use the debiased divergence OT(a,b) - OT(a,a)/2 - OT(b,b)/2.
  bool debiased = false;
  /// Weight of (m(w) - m(u^{k-1}))^2 with m the Monte Carlo mass on the step
  /// cloud. Both other terms only see w / m(w), so this fixes the otherwise
  /// free output scale without moving the normalized minimizer.
  double mass_weight = 1.0;
  TrainConfig train{.epochs = 100, .schedule = LrSchedule(1e-5), .optimizer = {}};
  FitConfig initial{.interior_points = 200,
                    .train = {.epochs = 4000, .schedule = LrSchedule({{1, 1e-3}, {2000, 1e-4}}), .optimizer = {}},
                    .frozen_clouds = false};
  bool frozen_clouds = false;
  std::uint64_t seed = 1;

  void validate() const;
  double resolved_epsilon(const BoxDomain& domain) const;
};

/// One step's cloud, cost matrix and previous measure.
struct JkoStepData {
  Eigen::MatrixXd points;
  Eigen::MatrixXd cost;
  DiscreteMeasure previous;
  double previous_mass = 1.0;  // |O|/N sum max(u^{k-1}, floor)
  double measure = 1.0;        // |O|
  double tau = 0.0;
};

JkoStepData make_jko_step_data(const Network& previous, Eigen::MatrixXd points, double measure, double tau,
                               double floor);

struct JkoLoss {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double ot_cost = 0.0;         // d^2 entering the loss (regularized optimum or divergence)
  double transport_cost = 0.0;  // <P, C> of the plan
  double entropy = 0.0;
  double mass = 0.0;  // |O|/N sum max(w, floor)
  Index clamped = 0;
  int sinkhorn_iterations = 0;
  double marginal_residual = 0.0;
  bool converged = true;
};

/// Potentials carried from one epoch to the next on a frozen cloud.
struct JkoWarmStart {
  Eigen::VectorXd cross;  // column potential of OT(a, b)
  Eigen::VectorXd self;   // potential of OT(b, b)
  /// OT(a, a), fixed within a step; NaN until computed.
  double previous_self = std::numeric_limits<double>::quiet_NaN();
};

/// Loss and parameter gradient. The transport part is differentiated through
/// the converged column potential g (d OT / d b_j = g_j) composed with the
/// normalization b = v / sum(v); the entropy part through the tape.
/// When `warm` is given its potentials seed the solves and are updated.
JkoLoss jko_step_loss(const Network& w, const JkoStepData& step, double epsilon, const JkoConfig& config,
                      JkoWarmStart* warm = nullptr);

/// Algorithm for pure homogeneous Neumann problems with zero forcing.
Trajectory solve_jko(const Problem& problem, const Architecture& arch, const TimeGrid& grid, const JkoConfig& config,
                     const StepCallback& on_step = {}, std::vector<Network> resume = {});

}  // namespace gradflow
