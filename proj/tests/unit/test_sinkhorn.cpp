#include "doctest.h"

#include "gradflow/sinkhorn.hpp"
#include "support/oracles.hpp"
#include "support/transport_lp.hpp"

#include <cmath>
#include <random>

using namespace gradflow;

namespace {

Eigen::VectorXd random_weights(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = u(rng);
  return w / w.sum();
}

SinkhornConfig config(double eps, double tol = 1e-12) {
  return SinkhornConfig{.epsilon = eps, .tol = tol, .max_iterations = 1000000};
}

}  // namespace

TEST_CASE("a single atom is transported onto itself") {
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const SinkhornState s = sinkhorn(one, one, Eigen::MatrixXd::Zero(1, 1), config(0.1));
  CHECK(s.converged);
  CHECK(s.plan(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.transport_cost == 0.0);
}

TEST_CASE("point masses force the whole transport") {
  Eigen::MatrixXd x(2, 2);
  x << 0.1, 0.7, 0.2, 0.6;  // two points at distance r
  const double r2 = (x.col(0) - x.col(1)).squaredNorm();
  const SinkhornState s = sinkhorn(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0), squared_distance_cost(x, x),
                                   config(0.01));
  CHECK(s.converged);
  CHECK(s.transport_cost == doctest::Approx(r2).epsilon(1e-14));
  CHECK(s.value == doctest::Approx(r2).epsilon(1e-12));
  CHECK(s.plan(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("cost matrix holds squared distances") {
  const Eigen::MatrixXd x = oracle::uniform_points(3, 4, 1), y = oracle::uniform_points(3, 5, 2);
  const Eigen::MatrixXd c = squared_distance_cost(x, y);
  REQUIRE(c.rows() == 4);
  REQUIRE(c.cols() == 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) CHECK(c(i, j) == doctest::Approx((x.col(i) - y.col(j)).squaredNorm()));
}

TEST_CASE("plan marginals match the inputs for random measures") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 200);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = size(rng);
    const Eigen::MatrixXd x = oracle::uniform_points(2, n, 10 + trial);
    const Eigen::VectorXd a = random_weights(n, rng), b = random_weights(n, rng);
    const SinkhornState s = sinkhorn(a, b, squared_distance_cost(x, x), config(0.02, 1e-10));
    REQUIRE(s.converged);
    CHECK(s.marginal_residual < 1e-10);
    CHECK((s.plan.rowwise().sum() - a).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((s.plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.plan.minCoeff() >= 0.0);
  }
}

TEST_CASE("transport cost is symmetric in the two measures") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd x = oracle::uniform_points(2, 30, 40 + trial);
    const Eigen::MatrixXd c = squared_distance_cost(x, x);
    const Eigen::VectorXd a = random_weights(30, rng), b = random_weights(30, rng);
    const SinkhornState ab = sinkhorn(a, b, c, config(0.05));
    const SinkhornState ba = sinkhorn(b, a, c, config(0.05));
    CHECK(std::abs(ab.transport_cost - ba.transport_cost) < 1e-10);
    CHECK(std::abs(ab.value - ba.value) < 1e-10);
  }
}

TEST_CASE("entropic cost approaches the linear program from above") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng), m = size(rng);
    const Eigen::MatrixXd x = oracle::uniform_points(2, n, 100 + trial), y = oracle::uniform_points(2, m, 300 + trial);
    const Eigen::MatrixXd c = squared_distance_cost(x, y);
    const Eigen::VectorXd a = random_weights(n, rng), b = random_weights(m, rng);
    const double lp = oracle::transport_lp(a, b, c);
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {0.1, 0.01, 0.001}) {
      const SinkhornState s = sinkhorn(a, b, c, config(eps));
      REQUIRE(s.converged);
      CHECK(s.transport_cost >= lp - 1e-12);
      CHECK(s.transport_cost <= lp + 0.5 * eps * std::log(std::max(n, m)) + 1e-12);
      CHECK(s.transport_cost <= previous + 1e-12);
      previous = s.transport_cost;
    }
  }
}

TEST_CASE("dual value equals the regularized primal objective") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = oracle::uniform_points(2, 12, 9);
  const Eigen::MatrixXd c = squared_distance_cost(x, x);
  const Eigen::VectorXd a = random_weights(12, rng), b = random_weights(12, rng);
  const double eps = 0.03;
  const SinkhornState s = sinkhorn(a, b, c, config(eps));
  double kl = 0.0;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      const double p = s.plan(i, j), q = a(i) * b(j);
      kl += p * std::log(p / q) - p + q;
    }
  CHECK(s.value == doctest::Approx(s.transport_cost + eps * kl).epsilon(1e-10));
}

TEST_CASE("warm start reaches the same potentials in fewer sweeps") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd x = oracle::uniform_points(2, 50, 7);
  const Eigen::MatrixXd c = squared_distance_cost(x, x);
  const Eigen::VectorXd a = random_weights(50, rng), b = random_weights(50, rng);
  const SinkhornState cold = sinkhorn(a, b, c, config(0.01, 1e-11));
  const SinkhornState warm = sinkhorn(a, b, c, config(0.01, 1e-11), &cold.g);
  CHECK(warm.iterations < cold.iterations);
  CHECK(std::abs(warm.value - cold.value) < 1e-10);
}

TEST_CASE("iteration cap is reported, bad inputs are rejected") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = oracle::uniform_points(2, 20, 1);
  const Eigen::MatrixXd c = squared_distance_cost(x, x);
  const Eigen::VectorXd a = random_weights(20, rng), b = random_weights(20, rng);
  const SinkhornState s = sinkhorn(a, b, c, SinkhornConfig{.epsilon = 1e-3, .tol = 1e-12, .max_iterations = 2});
  CHECK_FALSE(s.converged);
  CHECK(s.iterations == 2);
  CHECK_THROWS_AS(sinkhorn(2.0 * a, b, c, config(0.1)), std::invalid_argument);
  CHECK_THROWS_AS(sinkhorn(a, b, c, config(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(sinkhorn(a, b, c.leftCols(3), config(0.1)), std::invalid_argument);
}

TEST_CASE("symmetric solver agrees with alternating sweeps and handles clusters") {
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd x = oracle::uniform_points(2, 25, 4);
  const Eigen::MatrixXd c = squared_distance_cost(x, x);
  const Eigen::VectorXd a = random_weights(25, rng);
  const SinkhornState alt = sinkhorn(a, a, c, config(0.1));
  const SinkhornState sym = sinkhorn_symmetric(a, c, config(0.1));
  REQUIRE(sym.converged);
  CHECK(std::abs(alt.value - sym.value) < 1e-10);
  CHECK(std::abs(alt.transport_cost - sym.transport_cost) < 1e-10);
  CHECK((sym.plan - sym.plan.transpose()).cwiseAbs().maxCoeff() < 1e-15);

  // Three far-apart clusters: the averaged iteration still converges quickly.
  Eigen::MatrixXd y(2, 5);
  y << 0.0, 0.02, 0.9, 0.93, 0.6, 0.0, 0.01, 0.9, 0.88, 0.1;
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 0.2);
  const SinkhornState s = sinkhorn_symmetric(w, squared_distance_cost(y, y), config(0.02, 1e-12));
  CHECK(s.converged);
  CHECK(s.iterations < 200);
  CHECK((s.plan.rowwise().sum() - w).cwiseAbs().maxCoeff() < 1e-11);
}
