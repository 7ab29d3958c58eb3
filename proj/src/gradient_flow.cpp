#include "gradflow/gradient_flow.hpp"

#include "gradflow/rng.hpp"

#include <chrono>
#include <stdexcept>

namespace gradflow {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// weight * sum((v - target)^2)
ad::Var squared_distance(ad::Var v, const Eigen::VectorXd& target, double weight) {
  ad::Tape& t = *v.tape;
  return t.scale(t.sum(t.square(t.add_const(v, -target.transpose()))), weight);
}

}  // namespace

std::uint64_t cloud_seed(std::uint64_t seed, int step, int epoch) {
  return derive_seed(seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(epoch)});
}

Approximation trajectory_approximation(const Trajectory& trajectory) {
  return [&trajectory](int k, double, const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    return forward(trajectory.networks.at(static_cast<std::size_t>(k)), x);
  };
}

Network fit_initial(const Problem& problem, const Architecture& arch, const FitConfig& config, std::uint64_t seed,
                    std::vector<EpochRecord>* log, TrainResult* result) {
  if (config.interior_points < 1) throw std::invalid_argument("initial fit needs interior points");
  Network net = init_xavier(arch, seed);
  PointClouds frozen;
  Eigen::VectorXd frozen_target;
  const double weight = problem.domain.volume() / static_cast<double>(config.interior_points);
  const Objective objective = [&](int epoch, const Eigen::VectorXd& theta, EpochRecord&) {
    std::mt19937_64 rng(cloud_seed(seed, 0, config.frozen_clouds ? 0 : epoch));
    Eigen::MatrixXd x;
    Eigen::VectorXd target;
    if (config.frozen_clouds && frozen.interior.cols() > 0) {
      x = frozen.interior;
      target = frozen_target;
    } else {
      x = sample_interior(problem.domain, config.interior_points, rng);
      target = sample_field(problem.initial, 0.0, x);
      if (config.frozen_clouds) {
        frozen.interior = x;
        frozen_target = target;
      }
    }
    ValueGradient vg;
    accumulate_chunks(vg, theta, x.cols(), kDefaultChunk, [&](ad::Tape& t, Index s, Index n) {
      const ad::SpatialJet w = record_jet(t, net, x.middleCols(s, n), 0);
      return squared_distance(w.value, target.segment(s, n), weight);
    });
    return vg;
  };
  const TrainResult r = train(net, config.train, objective, 0, log);
  if (result) *result = r;
  return net;
}

StepData make_step_data(const Problem& problem, const Network& previous, double t, double tau, PointClouds clouds,
                        Eigen::VectorXd gamma, double l2_weight) {
  StepData s;
  s.data = sample_nitsche_data(problem, t, clouds);
  s.previous = forward(previous, clouds.interior);
  s.clouds = std::move(clouds);
  s.gamma = std::move(gamma);
  s.tau = tau;
  s.l2_weight = l2_weight;
  return s;
}

ad::Var step_loss(ad::Tape& tape, const Network& w, const StepData& step, const DiffusionSpec& diffusion) {
  const PointClouds& c = step.clouds;
  const double wi = c.weight(Region::interior);
  const ad::SpatialJet interior = record_jet(tape, w, c.interior, 1);
  ad::Var total = squared_distance(interior.value, step.previous, step.l2_weight * wi) +
                  step.tau * interior_energy(interior, step.data.forcing, diffusion, wi);
  if (c.dirichlet.cols() > 0) {
    total = total + step.tau * dirichlet_terms(record_jet(tape, w, c.dirichlet, 1), c.dirichlet_normals,
                                               step.data.dirichlet, step.gamma, diffusion, c.weight(Region::dirichlet));
  }
  if (c.neumann.cols() > 0) {
    total = total + step.tau * neumann_term(record_jet(tape, w, c.neumann, 0), step.data.neumann,
                                            c.weight(Region::neumann));
  }
  return total;
}

ValueGradient step_loss_gradient(const Network& w, const StepData& step, const DiffusionSpec& diffusion, Index chunk) {
  const PointClouds& c = step.clouds;
  if (step.gamma.size() != c.dirichlet.cols()) throw std::invalid_argument("one penalty value per Dirichlet point");
  if (step.previous.size() != c.interior.cols()) throw std::invalid_argument("previous values do not match the cloud");
  const double tau = step.tau;
  ValueGradient acc;
  const Eigen::VectorXd& theta = w.parameters();
  accumulate_chunks(acc, theta, c.interior.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    const ad::SpatialJet j = record_jet(t, w, c.interior.middleCols(s, n), 1);
    const double wi = c.weight(Region::interior);
    return squared_distance(j.value, step.previous.segment(s, n), step.l2_weight * wi) +
           tau * interior_energy(j, step.data.forcing.segment(s, n), diffusion, wi);
  });
  accumulate_chunks(acc, theta, c.dirichlet.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return tau * dirichlet_terms(record_jet(t, w, c.dirichlet.middleCols(s, n), 1), c.dirichlet_normals.middleCols(s, n),
                                 step.data.dirichlet.segment(s, n), step.gamma.segment(s, n), diffusion,
                                 c.weight(Region::dirichlet));
  });
  accumulate_chunks(acc, theta, c.neumann.cols(), chunk, [&](ad::Tape& t, Index s, Index n) {
    return tau * neumann_term(record_jet(t, w, c.neumann.middleCols(s, n), 0), step.data.neumann.segment(s, n),
                              c.weight(Region::neumann));
  });
  return acc;
}

void NitscheConfig::validate() const {
  if (interior_points < 1) throw std::invalid_argument("interior point count must be positive");
  if (per_face < 0) throw std::invalid_argument("boundary point count must be non-negative");
  if (!(l2_weight > 0.0)) throw std::invalid_argument("L2 weight must be positive");
  if (chunk < 1) throw std::invalid_argument("chunk size must be positive");
  penalty.validate();
  train.validate();
  initial.train.validate();
}

Trajectory solve(const Problem& problem, const Architecture& arch, const TimeGrid& grid, const NitscheConfig& config,
                 const StepCallback& on_step, std::vector<Network> resume) {
  config.validate();
  if (arch.input_width != problem.dimension()) {
    throw std::invalid_argument("network input width " + std::to_string(arch.input_width) +
                                " does not match the problem dimension " + std::to_string(problem.dimension()));
  }
  if (static_cast<int>(resume.size()) > grid.steps() + 1) throw std::invalid_argument("more checkpoints than time nodes");
  Trajectory traj{grid, std::move(resume), {}, {}};
  for (std::size_t k = 0; k < traj.networks.size(); ++k) {
    if (!(traj.networks[k].architecture() == arch)) throw std::invalid_argument("resumed network has another architecture");
    traj.steps.push_back(StepSummary{.step = static_cast<int>(k)});
  }

  if (traj.networks.empty()) {
    const auto start = Clock::now();
    TrainResult r;
    traj.networks.push_back(fit_initial(problem, arch, config.initial, config.seed, &traj.log, &r));
    StepSummary s{0, r.epochs, r.initial_loss, r.final_loss, std::numeric_limits<double>::quiet_NaN(), r.converged,
                  r.diverged, seconds_since(start)};
    traj.steps.push_back(s);
    if (on_step) on_step(0, traj.networks.back(), s);
  }

  for (int k = static_cast<int>(traj.networks.size()); k <= grid.steps(); ++k) {
    const auto start = Clock::now();
    const Network& previous = traj.networks.back();
    Network w = previous;
    const double t = grid.node(k), tau = grid.step(k);

    StepData frozen;
    bool have_frozen = false;
    Eigen::VectorXd last_theta = w.parameters();
    double last_gamma = std::numeric_limits<double>::quiet_NaN();
    const Objective objective = [&](int epoch, const Eigen::VectorXd& theta, EpochRecord& rec) {
      StepData fresh;
      StepData* data = &frozen;
      if (!config.frozen_clouds || !have_frozen) {
        PointClouds clouds = sample_clouds(problem.domain, config.interior_points, config.per_face,
                                           cloud_seed(config.seed, k, config.frozen_clouds ? 0 : epoch));
        fresh = make_step_data(problem, previous, t, tau, std::move(clouds), {}, config.l2_weight);
        if (config.frozen_clouds) {
          frozen = std::move(fresh);
          have_frozen = true;
        } else {
          data = &fresh;
        }
      }
      // The penalty is frozen at the previous epoch's parameters.
      data->gamma = penalty_for(Network(arch, last_theta), data->clouds, config.penalty, problem.diffusion).gamma;
      last_theta = theta;
      rec.gamma = data->gamma.size() ? data->gamma.maxCoeff() : std::numeric_limits<double>::quiet_NaN();
      last_gamma = rec.gamma;
      return step_loss_gradient(Network(arch, theta), *data, problem.diffusion, config.chunk);
    };
    const TrainResult r = train(w, config.train, objective, k, &traj.log);
    StepSummary s{k, r.epochs, r.initial_loss, r.final_loss, last_gamma, r.converged, r.diverged, seconds_since(start)};
    traj.networks.push_back(std::move(w));
    traj.steps.push_back(s);
    if (on_step) on_step(k, traj.networks.back(), s);
  }
  return traj;
}

}  // namespace gradflow
