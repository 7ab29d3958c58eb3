#include "doctest.h"

#include "gradflow/gradient_flow.hpp"
#include "support/linear_step.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cstring>
#include <random>

using namespace gradflow;

namespace {

bool bit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

NitscheConfig quick_config(int epochs) {
  NitscheConfig cfg;
  cfg.interior_points = 40;
  cfg.per_face = 10;
  cfg.penalty.mode = PenaltyMode::pointwise;
  cfg.penalty.factor = 8.0;
  cfg.train.epochs = epochs;
  cfg.train.schedule = LrSchedule(1e-3);
  cfg.initial.interior_points = 40;
  cfg.initial.train.epochs = epochs;
  cfg.initial.train.schedule = LrSchedule(1e-2);
  cfg.seed = 5;
  return cfg;
}

StepData random_step(const Problem& p, const Network& prev, std::uint64_t seed, double tau) {
  PointClouds c = sample_clouds(p.domain, 9, 3, seed);
  const Eigen::VectorXd g = penalty_for(prev, c, PenaltyConfig{}, p.diffusion).gamma;
  return make_step_data(p, prev, 0.4, tau, std::move(c), g, 0.5);
}

}  // namespace

TEST_CASE("initial fit to a zero target drives the network towards zero") {
  const Problem p = problem_dirichlet_sine(2);
  FitConfig cfg;
  cfg.interior_points = 200;
  cfg.train.epochs = 200;
  cfg.train.schedule = LrSchedule(1e-2);
  cfg.train.optimizer.kind = OptimizerKind::adam;
  TrainResult r;
  const Network net = fit_initial(p, Architecture{2, 1, 1, 8, Activation::tanh}, cfg, 3, nullptr, &r);
  CHECK(r.epochs == 200);
  CHECK(r.final_loss < 1e-2 * r.initial_loss);
  CHECK(forward(net, oracle::uniform_points(2, 100, 4)).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("step loss at the previous network has no L2 part") {
  const Problem p = problem_dirichlet_sine(2);
  const Network prev = oracle::random_network(Architecture{2, 1, 1, 6, Activation::tanh}, 2);
  const StepData s = random_step(p, prev, 8, 0.1);
  const ValueGradient vg = step_loss_gradient(prev, s, p.diffusion);
  const ValueGradient n = nitsche_value_gradient(prev, s.gamma, s.clouds, s.data, p.diffusion);
  CHECK(vg.value == doctest::Approx(0.1 * n.value).epsilon(1e-13));
  CHECK(oracle::relative_error(vg.gradient, 0.1 * n.gradient) < 1e-13);
}

TEST_CASE("with tau = 0 the previous network is a stationary point") {
  const Problem p = problem_dirichlet_sine(3);
  const Network prev = oracle::random_network(Architecture{3, 1, 2, 5, Activation::tanh}, 4);
  const StepData s = random_step(p, prev, 1, 0.0);
  const ValueGradient vg = step_loss_gradient(prev, s, p.diffusion);
  CHECK(vg.value == 0.0);
  CHECK(vg.gradient.isZero(0.0));
}

TEST_CASE("chunked step loss equals the single-tape loss") {
  const Problem p = problem_dirichlet_sine(2);
  const Architecture arch{2, 1, 2, 5, Activation::tanh};
  const Network prev = oracle::random_network(arch, 6);
  const Network w = oracle::random_network(arch, 7);
  const StepData s = random_step(p, prev, 3, 0.05);
  ad::Tape t(w.parameters());
  const ad::Var l = step_loss(t, w, s, p.diffusion);
  const Eigen::VectorXd g = t.gradient(l);
  for (Index chunk : {1, 4, 1000}) {
    const ValueGradient vg = step_loss_gradient(w, s, p.diffusion, chunk);
    CHECK(vg.value == doctest::Approx(l.scalar()).epsilon(1e-13));
    CHECK(oracle::relative_error(vg.gradient, g) < 1e-13);
  }
}

TEST_CASE("step loss gradient matches finite differences") {
  std::mt19937 rng(12);
  std::uniform_int_distribution<int> dim(1, 5), blocks(0, 3), width(2, 6);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = dim(rng);
    const Problem p = problem_dirichlet_sine(d);
    const Architecture arch{d, 1, blocks(rng), width(rng), Activation::tanh};
    const Network prev = oracle::random_network(arch, 20 + trial);
    const Network w = oracle::random_network(arch, 40 + trial);
    const StepData s = random_step(p, prev, 60 + trial, 0.05);
    const Eigen::VectorXd g = step_loss_gradient(w, s, p.diffusion).gradient;
    const Eigen::VectorXd fd = oracle::central_difference(
        [&](const Eigen::VectorXd& th) { return step_loss_gradient(Network(arch, th), s, p.diffusion).value; },
        w.parameters());
    CHECK(oracle::relative_error(g, fd) < 1e-5);
  }
}

TEST_CASE("output-layer minimizer of the step loss solves the backward Euler normal equations") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const oracle::LinearStep s = oracle::make_linear_step(seed);
    const Eigen::VectorXd expected = oracle::linear_step_oracle(s);
    const Eigen::VectorXd got = oracle::linear_step_from_driver(s);
    CHECK(oracle::relative_error(got, expected) < 1e-8);
  }
}

TEST_CASE("first epoch of a step starts from the previous network") {
  const Problem p = problem_dirichlet_sine(2);
  const Architecture arch{2, 1, 1, 4, Activation::tanh};
  const NitscheConfig cfg = quick_config(3);
  const Trajectory traj = solve(p, arch, TimeGrid::uniform(0.2, 0.1), cfg);
  REQUIRE(traj.networks.size() == 3);
  for (int k = 1; k <= 2; ++k) {
    const Network& prev = traj.networks[k - 1];
    PointClouds c = sample_clouds(p.domain, cfg.interior_points, cfg.per_face, cloud_seed(cfg.seed, k, 1));
    const Eigen::VectorXd g = penalty_for(prev, c, cfg.penalty, p.diffusion).gamma;
    const StepData s = make_step_data(p, prev, traj.grid.node(k), 0.1, std::move(c), g, cfg.l2_weight);
    const double expected = step_loss_gradient(prev, s, p.diffusion).value;
    const auto rec = std::find_if(traj.log.begin(), traj.log.end(),
                                  [&](const EpochRecord& r) { return r.step == k && r.epoch == 1; });
    REQUIRE(rec != traj.log.end());
    CHECK(rec->loss == expected);
    CHECK(traj.steps[k].initial_loss == expected);
  }
}

TEST_CASE("trajectory has one network per time node") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> steps(1, 4);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = steps(rng);
    int calls = 0;
    const Trajectory traj = solve(problem_dirichlet_sine(2), Architecture{2, 1, 0, 3, Activation::tanh},
                                  TimeGrid::uniform(0.1 * n, 0.1), quick_config(1),
                                  [&](int k, const Network&, const StepSummary& s) {
                                    CHECK(k == calls);
                                    CHECK(s.step == k);
                                    ++calls;
                                  });
    CHECK(static_cast<int>(traj.networks.size()) == n + 1);
    CHECK(static_cast<int>(traj.steps.size()) == n + 1);
    CHECK(calls == n + 1);
  }
}

TEST_CASE("resuming from saved networks reproduces the uninterrupted run") {
  const Problem p = problem_dirichlet_sine(2);
  const Architecture arch{2, 1, 1, 4, Activation::tanh};
  const TimeGrid grid = TimeGrid::uniform(0.3, 0.1);
  const NitscheConfig cfg = quick_config(4);
  const Trajectory full = solve(p, arch, grid, cfg);
  const Trajectory resumed = solve(p, arch, grid, cfg, {}, {full.networks[0], full.networks[1]});
  REQUIRE(resumed.networks.size() == full.networks.size());
  for (std::size_t k = 0; k < full.networks.size(); ++k) {
    CHECK(bit_equal(resumed.networks[k].parameters(), full.networks[k].parameters()));
  }
}

TEST_CASE("output-layer descent on frozen clouds decreases the step loss monotonically") {
  const oracle::LinearStep s = oracle::make_linear_step(4);
  NitscheConfig cfg;
  cfg.interior_points = 300;
  cfg.per_face = 80;
  cfg.penalty = s.penalty;
  cfg.frozen_clouds = true;
  cfg.train.epochs = 200;
  cfg.train.schedule = LrSchedule(1e-2);
  cfg.train.trainable_first = s.first;
  cfg.train.trainable_count = s.count;
  cfg.initial.train.epochs = 50;
  cfg.initial.interior_points = 100;
  const Trajectory traj = solve(s.problem, s.net.architecture(), TimeGrid::uniform(0.1, 0.05), cfg);
  for (int k = 1; k <= 2; ++k) {
    double last = std::numeric_limits<double>::infinity();
    int increases = 0;
    for (const EpochRecord& r : traj.log) {
      if (r.step != k) continue;
      increases += r.loss > last;
      last = r.loss;
    }
    CHECK(increases == 0);
    CHECK(traj.steps[k].final_loss < traj.steps[k].initial_loss);
  }
  // Only the output layer moved.
  const Eigen::VectorXd& a = traj.networks[0].parameters();
  const Eigen::VectorXd& b = traj.networks[2].parameters();
  CHECK(bit_equal(a.head(s.first), b.head(s.first)));
}

TEST_CASE("solver configuration is validated") {
  NitscheConfig cfg;
  cfg.l2_weight = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = NitscheConfig{};
  cfg.interior_points = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(solve(problem_dirichlet_sine(3), Architecture{2, 1, 0, 3, Activation::tanh},
                        TimeGrid::uniform(0.1, 0.1), NitscheConfig{}),
                  std::invalid_argument);
}
