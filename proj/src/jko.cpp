#include "gradflow/jko.hpp"

#include "gradflow/diagnostics.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace gradflow {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_pure_neumann(const Problem& problem) {
  const BoxDomain& dom = problem.domain;
  for (int f = 0; f < dom.face_count(); ++f) {
    if (dom.face_kind(f) != BoundaryKind::neumann) {
      throw std::invalid_argument("the Wasserstein scheme needs a pure Neumann problem (face " + std::to_string(f) +
                                  " is Dirichlet)");
    }
  }
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd x = sample_interior(dom, 64, rng);
  const Eigen::VectorXd forcing = sample_field(problem.forcing, 0.5 * problem.final_time, x);
  if (forcing.cwiseAbs().maxCoeff() > 0.0) throw std::invalid_argument("the Wasserstein scheme needs zero forcing");
  if (problem.neumann) {
    for (int f = 0; f < dom.face_count(); ++f) {
      const Eigen::MatrixXd y = sample_face(dom, f, 16, rng);
      if (sample_field(problem.neumann, 0.5 * problem.final_time, y).cwiseAbs().maxCoeff() > 0.0) {
        throw std::invalid_argument("the Wasserstein scheme needs homogeneous Neumann data");
      }
    }
  }
  const Eigen::VectorXd u0 = sample_field(problem.initial, 0.0, x);
  if ((u0.array() < 0.0).any()) diag::warn("jko: the initial condition takes negative values; it is clamped");
}

}  // namespace

DiscreteMeasure density_to_measure(const Eigen::VectorXd& values, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("density floor must be positive");
  if (values.size() == 0) throw std::invalid_argument("cannot build a measure on an empty cloud");
  if (!values.allFinite()) throw std::invalid_argument("density values must be finite");
  DiscreteMeasure m;
  m.clamped = (values.array() < floor).count();
  const Eigen::VectorXd v = values.cwiseMax(floor);
  m.total = v.sum();
  m.weights = v / m.total;
  return m;
}

ad::Var entropy_term(ad::Var density, double weight, double floor) {
  ad::Tape& t = *density.tape;
  const ad::Var v = t.clamp_min(density, floor);
  return t.scale(t.sum(t.hadamard(v, t.log(v))), weight);
}

ad::Var entropy_term(ad::Tape& tape, const Network& w, const Eigen::MatrixXd& points, double measure, double floor,
                     Index* clamped) {
  if (points.cols() == 0) throw std::invalid_argument("entropy needs at least one point");
  const ad::Var v = record_jet(tape, w, points, 0).value;
  if (clamped) *clamped = (v.value().array() < floor).count();
  return entropy_term(v, measure / static_cast<double>(points.cols()), floor);
}

void JkoConfig::validate() const {
  if (interior_points < 1) throw std::invalid_argument("interior point count must be positive");
  if (!(density_floor > 0.0)) throw std::invalid_argument("density floor must be positive");
  if (!(mass_weight >= 0.0)) throw std::invalid_argument("mass weight must be nonnegative");
  if (!(sinkhorn.tol > 0.0) || sinkhorn.max_iterations < 1) {
    throw std::invalid_argument("Sinkhorn tolerance and iteration cap must be positive");
  }
  train.validate();
  initial.train.validate();
}

double JkoConfig::resolved_epsilon(const BoxDomain& domain) const {
  return epsilon > 0.0 ? epsilon : 0.01 * domain.diameter_squared();
}

JkoStepData make_jko_step_data(const Network& previous, Eigen::MatrixXd points, double measure, double tau,
                               double floor) {
  JkoStepData s;
  s.cost = squared_distance_cost(points, points);
  s.previous = density_to_measure(forward(previous, points), floor);
  s.previous_mass = measure * s.previous.total / static_cast<double>(points.cols());
  s.points = std::move(points);
  s.measure = measure;
  s.tau = tau;
  return s;
}

JkoLoss jko_step_loss(const Network& w, const JkoStepData& step, double epsilon, const JkoConfig& config,
                      JkoWarmStart* warm) {
  const double floor = config.density_floor;
  const Index n = step.points.cols();
  if (step.previous.weights.size() != n) throw std::invalid_argument("previous measure does not match the cloud");

  ad::Tape t(w.parameters());
  const ad::Var raw = record_jet(t, w, step.points, 0).value;
  JkoLoss out;
  out.clamped = (raw.value().array() < floor).count();
  const ad::Var v = t.clamp_min(raw, floor);
  const DiscreteMeasure b = density_to_measure(v.value().row(0).transpose(), floor);

  SinkhornConfig sc = config.sinkhorn;
  sc.epsilon = epsilon;
  const bool seeded = warm && warm->cross.size() == n;
  const SinkhornState ab = sinkhorn(step.previous.weights, b.weights, step.cost, sc, seeded ? &warm->cross : nullptr);
  if (warm) warm->cross = ab.g;
  out.ot_cost = ab.value;
  out.transport_cost = ab.transport_cost;
  out.sinkhorn_iterations = ab.iterations;
  out.marginal_residual = ab.marginal_residual;
  out.converged = ab.converged;
  Eigen::VectorXd g = ab.g;
  if (config.debiased) {
    double self_a = warm ? warm->previous_self : std::numeric_limits<double>::quiet_NaN();
    if (std::isnan(self_a)) {
      const SinkhornState aa = sinkhorn_symmetric(step.previous.weights, step.cost, sc);
      out.converged = out.converged && aa.converged;
      self_a = aa.value;
      if (warm && aa.converged) warm->previous_self = self_a;
    }
    const bool self_seeded = warm && warm->self.size() == n;
    const SinkhornState bb = sinkhorn_symmetric(b.weights, step.cost, sc, self_seeded ? &warm->self : nullptr);
    if (warm) warm->self = bb.f;
    out.ot_cost -= 0.5 * (self_a + bb.value);
    out.converged = out.converged && bb.converged;
    g -= bb.g;
  }

  // d(OT/2)/dv through b = v / sum(v).
  const Eigen::RowVectorXd coeff = (0.5 / b.total) * (g.array() - g.dot(b.weights)).matrix().transpose();
  const double weight = step.measure / static_cast<double>(n);
  const ad::Var mass = t.scale(t.sum(v), weight);
  const ad::Var p = t.scale_by(v, t.reciprocal(mass));
  const ad::Var ent = entropy_term(p, weight, floor);
  out.entropy = ent.scalar();
  out.mass = mass.scalar();
  const ad::Var gauge = t.scale(t.square(mass + (-step.previous_mass)), config.mass_weight);
  out.value = 0.5 * out.ot_cost + step.tau * out.entropy + gauge.scalar();
  out.gradient = t.gradient(t.dot_const(v, coeff) + step.tau * ent + gauge);
  return out;
}

Trajectory solve_jko(const Problem& problem, const Architecture& arch, const TimeGrid& grid, const JkoConfig& config,
                     const StepCallback& on_step, std::vector<Network> resume) {
  config.validate();
  require_pure_neumann(problem);
  if (arch.input_width != problem.dimension()) {
    throw std::invalid_argument("network input width " + std::to_string(arch.input_width) +
                                " does not match the problem dimension " + std::to_string(problem.dimension()));
  }
  if (static_cast<int>(resume.size()) > grid.steps() + 1) throw std::invalid_argument("more checkpoints than time nodes");
  const double eps = config.resolved_epsilon(problem.domain);
  const double measure = problem.domain.volume();

  Trajectory traj{grid, std::move(resume), {}, {}};
  for (std::size_t k = 0; k < traj.networks.size(); ++k) {
    if (!(traj.networks[k].architecture() == arch)) throw std::invalid_argument("resumed network has another architecture");
    traj.steps.push_back(StepSummary{.step = static_cast<int>(k)});
  }
  if (traj.networks.empty()) {
    const auto start = Clock::now();
    TrainResult r;
    traj.networks.push_back(fit_initial(problem, arch, config.initial, config.seed, &traj.log, &r));
    StepSummary s{.step = 0,
                  .epochs = r.epochs,
                  .initial_loss = r.initial_loss,
                  .final_loss = r.final_loss,
                  .converged = r.converged,
                  .diverged = r.diverged,
                  .seconds = seconds_since(start)};
    traj.steps.push_back(s);
    if (on_step) on_step(0, traj.networks.back(), s);
  }

  for (int k = static_cast<int>(traj.networks.size()); k <= grid.steps(); ++k) {
    const auto start = Clock::now();
    const Network& previous = traj.networks.back();
    Network w = previous;
    const double tau = grid.step(k);
    JkoStepData frozen;
    bool have_frozen = false;
    JkoWarmStart warm;
    int failures = 0;
    const Objective objective = [&](int epoch, const Eigen::VectorXd& theta, EpochRecord& rec) {
      JkoStepData fresh;
      JkoStepData* data = &frozen;
      if (!config.frozen_clouds || !have_frozen) {
        std::mt19937_64 rng(cloud_seed(config.seed, k, config.frozen_clouds ? 0 : epoch));
        fresh = make_jko_step_data(previous, sample_interior(problem.domain, config.interior_points, rng), measure,
                                   tau, config.density_floor);
        if (config.frozen_clouds) {
          frozen = std::move(fresh);
          have_frozen = true;
        } else {
          data = &fresh;
        }
      }
      // Potentials from the previous epoch are a valid start on the same cloud.
      JkoLoss l = jko_step_loss(Network(arch, theta), *data, eps, config, config.frozen_clouds ? &warm : nullptr);
      failures += !l.converged;
      rec.ot_cost = l.ot_cost;
      rec.entropy = l.entropy;
      rec.sinkhorn_iterations = l.sinkhorn_iterations;
      rec.marginal_residual = l.marginal_residual;
      return ValueGradient{l.value, std::move(l.gradient)};
    };
    const TrainResult r = train(w, config.train, objective, k, &traj.log);
    if (failures > 0) {
      diag::warn("jko: Sinkhorn hit its iteration cap in " + std::to_string(failures) + " epochs of step " +
                 std::to_string(k));
    }
    StepSummary s{.step = k,
                  .epochs = r.epochs,
                  .initial_loss = r.initial_loss,
                  .final_loss = r.final_loss,
                  .converged = r.converged,
                  .diverged = r.diverged,
                  .seconds = seconds_since(start),
                  .sinkhorn_failures = failures};
    traj.networks.push_back(std::move(w));
    traj.steps.push_back(s);
    if (on_step) on_step(k, traj.networks.back(), s);
  }
  return traj;
}

}  // namespace gradflow
