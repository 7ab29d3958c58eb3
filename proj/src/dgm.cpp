#include "gradflow/dgm.hpp"

#include "gradflow/diagnostics.hpp"
#include "gradflow/rng.hpp"

#include <chrono>
#include <random>
#include <stdexcept>
#include <string>

namespace gradflow {

namespace {

using Clock = std::chrono::steady_clock;

Eigen::MatrixXd with_times(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& t) {
  Eigen::MatrixXd out(x.rows() + 1, x.cols());
  out.row(0) = t;
  out.bottomRows(x.rows()) = x;
  return out;
}

// Uniform on (0, T].
Eigen::RowVectorXd sample_times(double final_time, Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::RowVectorXd t(n);
  for (Index i = 0; i < n; ++i) t(i) = final_time * (1.0 - u(rng));
  return t;
}

Eigen::VectorXd sample_space_time_field(const Field& f, const Eigen::MatrixXd& tx) {
  Eigen::VectorXd out(tx.cols());
  for (Index i = 0; i < tx.cols(); ++i) out(i) = f(tx(0, i), tx.col(i).tail(tx.rows() - 1));
  return out;
}

Eigen::RowVectorXd as_row(const Eigen::VectorXd& v) { return v.transpose(); }

double weight_of(double measure, Index count) { return count > 0 ? measure / static_cast<double>(count) : 0.0; }

ad::Var squared_residual(ad::Var r, double weight) {
  ad::Tape& t = *r.tape;
  return t.scale(t.sum(t.square(r)), weight);
}

void require_identity(const Problem& problem) {
  if (!problem.diffusion.is_identity()) {
    throw std::invalid_argument("the space-time least-squares loss supports only A = I");
  }
}

}  // namespace

ad::Var heat_residual_term(const ad::SpatialJet& w, const Eigen::VectorXd& forcing, double weight) {
  if (!w.laplacian || w.lap_first != 1) throw std::logic_error("heat residual needs a spatial Laplacian jet");
  ad::Tape& t = *w.value.tape;
  return squared_residual(t.add_const(t.sub(w.derivative(0), *w.laplacian), -as_row(forcing)), weight);
}

ad::Var value_residual_term(const ad::SpatialJet& w, const Eigen::VectorXd& g, double weight) {
  return squared_residual(w.value.tape->add_const(w.value, -as_row(g)), weight);
}

ad::Var flux_residual_term(const ad::SpatialJet& w, const Eigen::MatrixXd& normals, const Eigen::VectorXd& g,
                           double weight) {
  ad::Tape& t = *w.value.tape;
  ad::Var flux = t.hadamard_const(w.derivative(1), normals.row(0));
  for (Index i = 1; i < normals.rows(); ++i) {
    flux = t.add(flux, t.hadamard_const(w.derivative(static_cast<int>(i) + 1), normals.row(i)));
  }
  return squared_residual(t.add_const(flux, -as_row(g)), weight);
}

SpaceTimeCloud sample_space_time(const BoxDomain& domain, double final_time, Index interior, Index per_face,
                                 Index initial, std::uint64_t seed) {
  if (!(final_time > 0.0)) throw std::invalid_argument("final time must be positive");
  if (initial < 1) throw std::invalid_argument("initial sample count must be at least 1");
  const PointClouds c = sample_clouds(domain, interior, per_face, derive_seed(seed, {0}));
  std::mt19937_64 rng(derive_seed(seed, {1}));
  SpaceTimeCloud s;
  s.interior = with_times(c.interior, sample_times(final_time, c.interior.cols(), rng));
  s.dirichlet = with_times(c.dirichlet, sample_times(final_time, c.dirichlet.cols(), rng));
  s.neumann = with_times(c.neumann, sample_times(final_time, c.neumann.cols(), rng));
  s.neumann_normals = c.neumann_normals;
  s.initial = with_times(sample_interior(domain, initial, rng), Eigen::RowVectorXd::Zero(initial));
  s.interior_measure = final_time * c.interior_measure;
  s.dirichlet_measure = final_time * c.dirichlet_measure;
  s.neumann_measure = final_time * c.neumann_measure;
  s.initial_measure = domain.volume();
  return s;
}

DgmData sample_dgm_data(const Problem& problem, const SpaceTimeCloud& cloud) {
  DgmData d;
  d.forcing = sample_space_time_field(problem.forcing, cloud.interior);
  d.dirichlet = cloud.dirichlet.cols() ? sample_space_time_field(problem.dirichlet, cloud.dirichlet) : Eigen::VectorXd();
  d.neumann = Eigen::VectorXd::Zero(cloud.neumann.cols());
  if (problem.neumann && cloud.neumann.cols()) d.neumann = sample_space_time_field(problem.neumann, cloud.neumann);
  d.initial = sample_space_time_field(problem.initial, cloud.initial);
  return d;
}

ad::Var dgm_loss(ad::Tape& tape, const Network& w, const SpaceTimeCloud& cloud, const DgmData& data) {
  ad::Var total = heat_residual_term(record_jet(tape, w, cloud.interior, 2, 1), data.forcing,
                                     weight_of(cloud.interior_measure, cloud.interior.cols())) +
                  value_residual_term(record_jet(tape, w, cloud.initial, 0), data.initial,
                                      weight_of(cloud.initial_measure, cloud.initial.cols()));
  if (cloud.dirichlet.cols() > 0) {
    total = total + value_residual_term(record_jet(tape, w, cloud.dirichlet, 0), data.dirichlet,
                                        weight_of(cloud.dirichlet_measure, cloud.dirichlet.cols()));
  }
  if (cloud.neumann.cols() > 0) {
    total = total + flux_residual_term(record_jet(tape, w, cloud.neumann, 1), cloud.neumann_normals, data.neumann,
                                       weight_of(cloud.neumann_measure, cloud.neumann.cols()));
  }
  return total;
}

ValueGradient dgm_loss_gradient(const Network& w, const SpaceTimeCloud& cloud, const DgmData& data, Index chunk) {
  ValueGradient acc;
  const Eigen::VectorXd& theta = w.parameters();
  const double wi = weight_of(cloud.interior_measure, cloud.interior.cols());
  const double wd = weight_of(cloud.dirichlet_measure, cloud.dirichlet.cols());
  const double wn = weight_of(cloud.neumann_measure, cloud.neumann.cols());
  const double w0 = weight_of(cloud.initial_measure, cloud.initial.cols());
  accumulate_chunks(acc, theta, cloud.interior.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return heat_residual_term(record_jet(t, w, cloud.interior.middleCols(s, n), 2, 1), data.forcing.segment(s, n), wi);
  });
  accumulate_chunks(acc, theta, cloud.dirichlet.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return value_residual_term(record_jet(t, w, cloud.dirichlet.middleCols(s, n), 0), data.dirichlet.segment(s, n), wd);
  });
  accumulate_chunks(acc, theta, cloud.neumann.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return flux_residual_term(record_jet(t, w, cloud.neumann.middleCols(s, n), 1),
                              cloud.neumann_normals.middleCols(s, n), data.neumann.segment(s, n), wn);
  });
  accumulate_chunks(acc, theta, cloud.initial.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return value_residual_term(record_jet(t, w, cloud.initial.middleCols(s, n), 0), data.initial.segment(s, n), w0);
  });
  return acc;
}

void DgmConfig::validate() const {
  if (interior_points < 1) throw std::invalid_argument("interior point count must be positive");
  if (per_face < 0) throw std::invalid_argument("boundary point count must be non-negative");
  if (initial_points < 1) throw std::invalid_argument("initial point count must be positive");
  if (chunk < 1) throw std::invalid_argument("chunk size must be positive");
  train.validate();
}

DgmResult solve_dgm(const Problem& problem, const Architecture& arch, const DgmConfig& config,
                    const DgmProgress& on_progress, int every) {
  config.validate();
  require_identity(problem);
  if (arch.input_width != problem.dimension() + 1) {
    throw std::invalid_argument("space-time network needs input width " + std::to_string(problem.dimension() + 1) +
                                ", got " + std::to_string(arch.input_width));
  }
  if (arch.activation == Activation::relu) {
    diag::warn("dgm: ReLU has a zero Laplacian almost everywhere; the interior residual only sees w_t - F");
  }
  const auto start = Clock::now();
  DgmResult out;
  out.network = init_xavier(arch, config.seed);
  SpaceTimeCloud cloud;
  DgmData data;
  bool sampled = false;
  const Objective objective = [&](int epoch, const Eigen::VectorXd& theta, EpochRecord&) {
    if (!config.frozen_clouds || !sampled) {
      cloud = sample_space_time(problem.domain, problem.final_time, config.interior_points, config.per_face,
                                 config.initial_points, cloud_seed(config.seed, 0, config.frozen_clouds ? 0 : epoch));
      data = sample_dgm_data(problem, cloud);
      sampled = true;
    }
    ValueGradient vg = dgm_loss_gradient(Network(arch, theta), cloud, data, config.chunk);
    if (on_progress && every > 0 && epoch % every == 0) on_progress(epoch, vg.value);
    return vg;
  };
  out.train = train(out.network, config.train, objective, 0, &out.log);
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

Approximation space_time_approximation(const Network& w) {
  return [w](int, double t, const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    return forward(w, with_times(x, Eigen::RowVectorXd::Constant(x.cols(), t)));
  };
}

}  // namespace gradflow
