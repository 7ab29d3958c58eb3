#include "gradflow/nitsche.hpp"

#include "gradflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gradflow {

namespace {

using ad::Var;

Eigen::MatrixXd as_row(const Eigen::VectorXd& v) { return v.transpose(); }

/// 1 x (d*B): block i holds row i of the d x B matrix.
Eigen::MatrixXd flatten_blocks(const Eigen::MatrixXd& m) {
  const Index d = m.rows(), b = m.cols();
  Eigen::MatrixXd out(1, d * b);
  for (Index i = 0; i < d; ++i) out.block(0, i * b, 1, b) = m.row(i);
  return out;
}

Var require_tangents(const ad::SpatialJet& w) {
  if (w.order < 1 || !w.tangents) throw std::invalid_argument("Nitsche terms need first spatial derivatives");
  return *w.tangents;
}

}  // namespace

std::string to_string(PenaltyMode m) {
  switch (m) {
    case PenaltyMode::pointwise: return "pointwise";
    case PenaltyMode::max: return "max";
    case PenaltyMode::fixed: return "fixed";
  }
  return "?";
}

PenaltyMode parse_penalty_mode(const std::string& s) {
  if (s == "max") return PenaltyMode::max;
  if (s == "pointwise") return PenaltyMode::pointwise;
  if (s == "fixed") return PenaltyMode::fixed;
  throw std::invalid_argument("unknown penalty mode '" + s + "' (expected max, pointwise or fixed)");
}

void PenaltyConfig::validate() const {
  if (!(factor > 0.0)) throw std::invalid_argument("penalty factor must be positive");
  if (!(floor > 0.0)) throw std::invalid_argument("penalty floor must be positive");
}

double penalty_scale(const PointClouds& clouds, const DiffusionSpec& diffusion) {
  const double ni = static_cast<double>(clouds.interior.cols());
  const double nd = static_cast<double>(clouds.dirichlet.cols());
  if (nd == 0.0) return 0.0;
  const double l1 = diffusion.lambda_min(), ld = diffusion.lambda_max();
  return clouds.dirichlet_measure * ni * ld * ld / (clouds.interior_measure * nd * l1);
}

Penalty penalty(const PointClouds& clouds, const Eigen::VectorXd& boundary_grad_norms,
                const Eigen::VectorXd& interior_grad_norms, const Matching& matching, const PenaltyConfig& config,
                const DiffusionSpec& diffusion) {
  config.validate();
  const Index nd = clouds.dirichlet.cols();
  if (boundary_grad_norms.size() != nd || static_cast<Index>(matching.partner.size()) != nd) {
    throw std::invalid_argument("penalty inputs do not cover the Dirichlet cloud");
  }
  if (interior_grad_norms.size() != clouds.interior.cols()) {
    throw std::invalid_argument("need one gradient norm per interior point");
  }
  Penalty p;
  p.matching = matching;
  p.scale = penalty_scale(clouds, diffusion);
  if (config.mode == PenaltyMode::fixed) {
    p.gamma = Eigen::VectorXd::Constant(nd, std::max(config.factor, config.floor));
    return p;
  }
  const double base = config.factor * p.scale;
  const double fallback = config.floor * base;

  Eigen::VectorXd raw(nd);
  bool any_matched = false;
  for (Index n = 0; n < nd; ++n) {
    const Index y = matching.partner[n];
    if (y < 0) {
      raw(n) = fallback;
      p.fallback = true;
      continue;
    }
    const double num = boundary_grad_norms(n) * boundary_grad_norms(n);
    const double den = interior_grad_norms(y) * interior_grad_norms(y);
    raw(n) = base * num / den;
    any_matched = true;
  }
  if (p.fallback) diag::warn("penalty: no admissible interior partner for some Dirichlet points; using the fallback");

  if (config.mode == PenaltyMode::max) {
    double g = any_matched ? -std::numeric_limits<double>::infinity() : fallback;
    for (Index n = 0; n < nd; ++n)
      if (matching.partner[n] >= 0) g = std::max(g, raw(n));
    p.gamma = Eigen::VectorXd::Constant(nd, std::max(g, config.floor));
  } else {
    p.gamma = raw.cwiseMax(config.floor);
  }
  return p;
}

Penalty penalty_for(const Network& v, const PointClouds& clouds, const PenaltyConfig& config,
                    const DiffusionSpec& diffusion) {
  if (config.mode == PenaltyMode::fixed) {
    const Index nd = clouds.dirichlet.cols();
    Matching none;
    none.partner.assign(static_cast<std::size_t>(nd), -1);
    return penalty(clouds, Eigen::VectorXd::Zero(nd), Eigen::VectorXd::Zero(clouds.interior.cols()), none, config,
                   diffusion);
  }
  auto grad_norms = [&](const Eigen::MatrixXd& x) {
    Eigen::VectorXd g(x.cols());
    // Column slices keep the jet intermediates in cache.
    for (Index start = 0; start < x.cols(); start += kDefaultChunk) {
      const Index b = std::min(kDefaultChunk, x.cols() - start);
      const auto jet = evaluate_jet<double>(v, x.middleCols(start, b), 1);
      Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(b);
      for (Index i = 0; i < x.rows(); ++i) sq += jet.tangents.block(0, i * b, 1, b).transpose().array().square();
      g.segment(start, b) = sq.sqrt().matrix();
    }
    return g;
  };
  const Eigen::VectorXd interior = grad_norms(clouds.interior);
  const Eigen::VectorXd boundary = grad_norms(clouds.dirichlet);
  const Matching m = match_nearest_interior(clouds, interior, config.matching);
  return penalty(clouds, boundary, interior, m, config, diffusion);
}

NitscheData sample_nitsche_data(const Problem& problem, double t, const PointClouds& clouds) {
  return NitscheData{sample_field(problem.forcing, t, clouds.interior), sample_field(problem.dirichlet, t, clouds.dirichlet),
                     sample_field(problem.neumann, t, clouds.neumann)};
}

Var interior_energy(const ad::SpatialJet& w, const Eigen::VectorXd& forcing, const DiffusionSpec& diffusion,
                    double weight) {
  Var grad = require_tangents(w);
  ad::Tape& t = *grad.tape;
  if (!diffusion.is_identity()) grad = t.block_mix(grad, diffusion.sqrt_matrix());
  const Var energy = t.sum(t.block_sum_squares(grad, w.directions, 0, w.directions));
  const Var source = t.dot_const(w.value, as_row(forcing));
  return t.scale(t.sub(t.scale(energy, 0.5), source), weight);
}

Var dirichlet_terms(const ad::SpatialJet& w, const Eigen::MatrixXd& normals, const Eigen::VectorXd& g,
                    const Eigen::VectorXd& gamma, const DiffusionSpec& diffusion, double weight) {
  Var grad = require_tangents(w);
  ad::Tape& t = *grad.tape;
  if (!diffusion.is_identity()) grad = t.block_mix(grad, diffusion.matrix());
  const Var flux = t.block_sum(t.hadamard_const(grad, flatten_blocks(normals)), w.directions);
  const Var mismatch = t.add_const(w.value, -as_row(g));
  const Var consistency = t.sum(t.hadamard(flux, mismatch));
  const Var pen = t.dot_const(t.square(mismatch), 0.5 * as_row(gamma));
  return t.scale(t.sub(pen, consistency), weight);
}

Var neumann_term(const ad::SpatialJet& w, const Eigen::VectorXd& g, double weight) {
  ad::Tape& t = *w.value.tape;
  return t.scale(t.dot_const(w.value, as_row(g)), -weight);
}

Var nitsche_functional(ad::Tape& tape, const Network& w, const Eigen::VectorXd& gamma, const PointClouds& clouds,
                       const NitscheData& data, const DiffusionSpec& diffusion) {
  if (gamma.size() != clouds.dirichlet.cols()) throw std::invalid_argument("one penalty value per Dirichlet point");
  Var total = interior_energy(record_jet(tape, w, clouds.interior, 1), data.forcing, diffusion,
                              clouds.weight(Region::interior));
  if (clouds.dirichlet.cols() > 0) {
    total = total + dirichlet_terms(record_jet(tape, w, clouds.dirichlet, 1), clouds.dirichlet_normals, data.dirichlet,
                                    gamma, diffusion, clouds.weight(Region::dirichlet));
  }
  if (clouds.neumann.cols() > 0) {
    total = total + neumann_term(record_jet(tape, w, clouds.neumann, 0), data.neumann, clouds.weight(Region::neumann));
  }
  return total;
}

ValueGradient nitsche_value_gradient(const Network& w, const Eigen::VectorXd& gamma, const PointClouds& clouds,
                                     const NitscheData& data, const DiffusionSpec& diffusion, Index chunk) {
  if (gamma.size() != clouds.dirichlet.cols()) throw std::invalid_argument("one penalty value per Dirichlet point");
  ValueGradient acc;
  const Eigen::VectorXd& theta = w.parameters();
  accumulate_chunks(acc, theta, clouds.interior.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return interior_energy(record_jet(t, w, clouds.interior.middleCols(s, n), 1), data.forcing.segment(s, n),
                           diffusion, clouds.weight(Region::interior));
  });
  accumulate_chunks(acc, theta, clouds.dirichlet.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return dirichlet_terms(record_jet(t, w, clouds.dirichlet.middleCols(s, n), 1),
                           clouds.dirichlet_normals.middleCols(s, n), data.dirichlet.segment(s, n), gamma.segment(s, n),
                           diffusion, clouds.weight(Region::dirichlet));
  });
  accumulate_chunks(acc, theta, clouds.neumann.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return neumann_term(record_jet(t, w, clouds.neumann.middleCols(s, n), 0), data.neumann.segment(s, n),
                        clouds.weight(Region::neumann));
  });
  return acc;
}

NitscheParts nitsche_parts(const Network& w, const Eigen::VectorXd& gamma, const PointClouds& clouds,
                           const NitscheData& data, const DiffusionSpec& diffusion) {
  NitscheParts p;
  const Index d = clouds.interior.rows();
  auto gradients = [&](const JetValues<double>& jet, Index b) {
    Eigen::MatrixXd g(d, b);
    for (Index i = 0; i < d; ++i) g.row(i) = jet.tangents.block(0, i * b, 1, b);
    return g;
  };
  {
    const Index b = clouds.interior.cols();
    const auto jet = evaluate_jet<double>(w, clouds.interior, 1);
    const Eigen::MatrixXd g = diffusion.sqrt_matrix() * gradients(jet, b);
    const double wt = clouds.weight(Region::interior);
    p.energy = wt * 0.5 * g.colwise().squaredNorm().sum();
    p.forcing = wt * jet.value.row(0).dot(data.forcing.transpose());
  }
  if (const Index b = clouds.dirichlet.cols(); b > 0) {
    const auto jet = evaluate_jet<double>(w, clouds.dirichlet, 1);
    const Eigen::MatrixXd flux = diffusion.matrix() * gradients(jet, b);
    const Eigen::RowVectorXd normal_flux = (clouds.dirichlet_normals.array() * flux.array()).colwise().sum();
    const Eigen::RowVectorXd mismatch = jet.value.row(0) - data.dirichlet.transpose();
    const double wt = clouds.weight(Region::dirichlet);
    p.consistency = wt * normal_flux.dot(mismatch);
    p.penalty = wt * 0.5 * (gamma.transpose().array() * mismatch.array().square()).sum();
  }
  if (const Index b = clouds.neumann.cols(); b > 0) {
    const Eigen::VectorXd v = forward(w, clouds.neumann);
    p.neumann = clouds.weight(Region::neumann) * v.dot(data.neumann);
  }
  return p;
}

double coercivity_bound(const Network& w, const PointClouds& clouds, const Eigen::VectorXd& gamma,
                        const NitscheData& data, const DiffusionSpec& diffusion) {
  return nitsche_parts(w, gamma, clouds, data, diffusion).coercivity_bound();
}

}  // namespace gradflow
