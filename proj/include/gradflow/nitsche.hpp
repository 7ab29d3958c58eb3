#pragma once

// Discrete Nitsche energy with Monte Carlo quadrature:
//
//   N(w; v) = |O|/N_I sum (1/2 |sqrt(A) grad w|^2 - F w)
//           - |G_D|/N_D sum n.A grad w (w - g_D)
//           + |G_D|/N_D sum gamma/2 (w - g_D)^2
//           - |G_N|/N_N sum g_N w
//
// where the penalty gamma is computed from a second network v and enters as
// a constant.

#include "gradflow/assembly.hpp"
#include "gradflow/diffusion.hpp"
#include "gradflow/domain.hpp"
#include "gradflow/network.hpp"
#include "gradflow/problem.hpp"

namespace gradflow {

/// pointwise and max follow the gradient-ratio rule; fixed uses gamma = factor
/// everywhere (for quadratic test instances).
enum class PenaltyMode { pointwise, max, fixed };

std::string to_string(PenaltyMode m);
PenaltyMode parse_penalty_mode(const std::string& s);

struct PenaltyConfig {
  PenaltyMode mode = PenaltyMode::max;
  double factor = 500.0;
  double floor = 1.0;
  MatchPolicy matching = MatchPolicy::recycle;

  void validate() const;
};

struct Penalty {
  Eigen::VectorXd gamma;  // one value per Dirichlet point
  Matching matching;
  double scale = 0.0;     // |G_D| N_I lambda_d^2 / (|O| N_D lambda_1)
  bool fallback = false;  // some points had no admissible partner
};

double penalty_scale(const PointClouds& clouds, const DiffusionSpec& diffusion);

/// gamma_n = factor * scale * |grad w(x_n)|^2 / |grad w(y_n)|^2 with y_n the
/// matched interior point (pointwise), or the maximum of these over n (max);
/// never below the floor. Points without a partner fall back to
/// floor * factor * scale.
Penalty penalty(const PointClouds& clouds, const Eigen::VectorXd& boundary_grad_norms,
                const Eigen::VectorXd& interior_grad_norms, const Matching& matching, const PenaltyConfig& config,
                const DiffusionSpec& diffusion);

/// Evaluates the gradient norms of `v` on the clouds, matches and applies the rule.
Penalty penalty_for(const Network& v, const PointClouds& clouds, const PenaltyConfig& config,
                    const DiffusionSpec& diffusion);

/// Problem data sampled on the clouds at time t.
struct NitscheData {
  Eigen::VectorXd forcing;    // interior
  Eigen::VectorXd dirichlet;  // Dirichlet points
  Eigen::VectorXd neumann;    // Neumann points
};

NitscheData sample_nitsche_data(const Problem& problem, double t, const PointClouds& clouds);

// Term builders on recorded first-order jets; `weight` is the quadrature weight.

/// weight * sum(1/2 |sqrt(A) grad w|^2 - f w)
ad::Var interior_energy(const ad::SpatialJet& w, const Eigen::VectorXd& forcing, const DiffusionSpec& diffusion,
                        double weight);
/// weight * sum(gamma/2 (w - g)^2 - n.A grad w (w - g))
ad::Var dirichlet_terms(const ad::SpatialJet& w, const Eigen::MatrixXd& normals, const Eigen::VectorXd& g,
                        const Eigen::VectorXd& gamma, const DiffusionSpec& diffusion, double weight);
/// -weight * sum(g w)
ad::Var neumann_term(const ad::SpatialJet& w, const Eigen::VectorXd& g, double weight);

/// N(w; gamma) on a single tape bound to w's parameters.
ad::Var nitsche_functional(ad::Tape& tape, const Network& w, const Eigen::VectorXd& gamma, const PointClouds& clouds,
                           const NitscheData& data, const DiffusionSpec& diffusion);

/// The same value and its gradient, assembled chunk by chunk.
ValueGradient nitsche_value_gradient(const Network& w, const Eigen::VectorXd& gamma, const PointClouds& clouds,
                                     const NitscheData& data, const DiffusionSpec& diffusion,
                                     Index chunk = kDefaultChunk);

/// Tape-free evaluation of the individual sums (each including its weight).
struct NitscheParts {
  double energy = 0.0;       // |O|/N_I sum 1/2 |sqrt(A) grad w|^2
  double forcing = 0.0;      // |O|/N_I sum F w
  double consistency = 0.0;  // |G_D|/N_D sum n.A grad w (w - g_D)
  double penalty = 0.0;      // |G_D|/N_D sum gamma/2 (w - g_D)^2
  double neumann = 0.0;      // |G_N|/N_N sum g_N w

  double value() const { return energy - forcing - consistency + penalty - neumann; }
  /// |O|/N_I sum (1/4 |sqrt(A) grad w|^2 - F w) + |G_D|/N_D sum gamma/4 (w - g_D)^2 - |G_N|/N_N sum g_N w
  double coercivity_bound() const { return 0.5 * energy - forcing + 0.5 * penalty - neumann; }
};

NitscheParts nitsche_parts(const Network& w, const Eigen::VectorXd& gamma, const PointClouds& clouds,
                           const NitscheData& data, const DiffusionSpec& diffusion);

double coercivity_bound(const Network& w, const PointClouds& clouds, const Eigen::VectorXd& gamma,
                        const NitscheData& data, const DiffusionSpec& diffusion);

}  // namespace gradflow
