#include "doctest.h"

#include "gradflow/diagnostics.hpp"
#include "gradflow/nitsche.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace gradflow;
using ad::Tape;
using ad::Var;

namespace {

NitscheData zero_data(const PointClouds& c) {
  return {Eigen::VectorXd::Zero(c.interior.cols()), Eigen::VectorXd::Zero(c.dirichlet.cols()),
          Eigen::VectorXd::Zero(c.neumann.cols())};
}

Network scaled(const Network& net, double c) {
  Network out = net;
  const ParameterLayout lay(net.architecture());
  out.parameters().segment(lay.output_weight(), net.architecture().width) *= c;
  out.parameters()(lay.output_bias()) *= c;
  return out;
}

PointClouds mixed_box_clouds(int d, Index ni, Index per_face, std::uint64_t seed) {
  std::vector<BoundaryKind> kinds(static_cast<std::size_t>(2 * d), BoundaryKind::dirichlet);
  kinds[1] = BoundaryKind::neumann;
  const BoxDomain box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d), kinds);
  return sample_clouds(box, ni, per_face, seed);
}

}  // namespace

TEST_CASE("constant gradient ratio gives the bare penalty scale") {
  const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 100, 10, 1);
  const Eigen::VectorXd ones_i = Eigen::VectorXd::Constant(100, 0.7), ones_d = Eigen::VectorXd::Constant(40, 0.7);
  const auto m = match_nearest_interior(c, ones_i);
  const PenaltyConfig cfg{PenaltyMode::pointwise, 8.0, 1e-12, MatchPolicy::strict};
  const Penalty p = penalty(c, ones_d, ones_i, m, cfg, DiffusionSpec::identity(2));
  CHECK(p.scale == doctest::Approx(4.0 * 100 / (1.0 * 40)));
  CHECK((p.gamma.array() == 8.0 * p.scale).all());
  CHECK_FALSE(p.fallback);
}

TEST_CASE("max-mode penalty on the unit square with 1200 interior and 2400 boundary points") {
  PointClouds c;
  c.interior = Eigen::MatrixXd::Constant(2, 1200, 0.5);
  c.dirichlet = Eigen::MatrixXd::Zero(2, 2400);
  c.dirichlet_normals = Eigen::MatrixXd::Zero(2, 2400);
  c.interior_measure = 1.0;
  c.dirichlet_measure = 4.0;
  Matching m;
  m.partner.assign(2400, 0);
  const Penalty p = penalty(c, Eigen::VectorXd::Ones(2400), Eigen::VectorXd::Ones(1200), m, PenaltyConfig{},
                            DiffusionSpec::identity(2));
  CHECK(p.gamma.size() == 2400);
  CHECK((p.gamma.array() == 1000.0).all());
}

TEST_CASE("penalty is invariant under scaling of the network") {
  const Architecture arch{2, 1, 2, 6, Activation::tanh};
  const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 200, 20, 3);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Network net = oracle::random_network(arch, seed);
    for (PenaltyMode mode : {PenaltyMode::pointwise, PenaltyMode::max}) {
      const PenaltyConfig cfg{mode, mode == PenaltyMode::max ? 500.0 : 8.0, 1e-9, MatchPolicy::strict};
      const Eigen::VectorXd base = penalty_for(net, c, cfg, DiffusionSpec::identity(2)).gamma;
      for (double k : {2.0, -0.5, 8.0}) CHECK(penalty_for(scaled(net, k), c, cfg, DiffusionSpec::identity(2)).gamma == base);
      const Eigen::VectorXd odd = penalty_for(scaled(net, -3.0), c, cfg, DiffusionSpec::identity(2)).gamma;
      CHECK(oracle::relative_error(odd, base) < 1e-14);
    }
  }
}

TEST_CASE("penalty falls back when no interior point has a nonzero gradient") {
  const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 50, 5, 2);
  const Network zero(Architecture{2, 1, 1, 4, Activation::tanh});
  std::size_t warnings = 0;
  auto prev = diag::set_sink([&](const std::string&) { ++warnings; });
  const Penalty p = penalty_for(zero, c, PenaltyConfig{}, DiffusionSpec::identity(2));
  diag::set_sink(prev);
  CHECK(p.fallback);
  CHECK(warnings == 1);
  CHECK((p.gamma.array() == 500.0 * p.scale).all());
}

TEST_CASE("zero network with zero data has zero energy") {
  const Network zero(Architecture{3, 1, 2, 5, Activation::tanh});
  const auto c = mixed_box_clouds(3, 40, 6, 4);
  Tape t(zero.parameters());
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(c.dirichlet.cols(), 10.0);
  CHECK(nitsche_functional(t, zero, gamma, c, zero_data(c), DiffusionSpec::identity(3)).scalar() == 0.0);
  CHECK(coercivity_bound(zero, c, gamma, zero_data(c), DiffusionSpec::identity(3)) == 0.0);
}

TEST_CASE("boundary sums vanish when w interpolates the Dirichlet data") {
  const Architecture arch{2, 1, 1, 5, Activation::sigmoid};
  const Network net = oracle::random_network(arch, 5);
  const auto c = mixed_box_clouds(2, 60, 10, 6);
  NitscheData data = zero_data(c);
  data.forcing = Eigen::VectorXd::LinSpaced(c.interior.cols(), -1.0, 1.0);
  data.neumann = Eigen::VectorXd::Constant(c.neumann.cols(), 0.3);
  data.dirichlet = forward(net, c.dirichlet);
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(c.dirichlet.cols(), 100.0);
  const NitscheParts parts = nitsche_parts(net, gamma, c, data, DiffusionSpec::identity(2));
  CHECK(parts.consistency == 0.0);
  CHECK(parts.penalty == 0.0);
  Tape t(net.parameters());
  const double v = nitsche_functional(t, net, gamma, c, data, DiffusionSpec::identity(2)).scalar();
  CHECK(v == doctest::Approx(parts.energy - parts.forcing - parts.neumann).epsilon(1e-13));
}

TEST_CASE("quadratic function on a three-point cloud matches hand summation") {
  // w(x) = c1 x1^2 + c2 x2^2 + a1 x1 + a2 x2 + b with parameters (c1, c2, a1, a2, b).
  Eigen::VectorXd theta(5);
  theta << 0.7, -1.3, 0.4, 2.0, -0.25;
  Eigen::Matrix2d a;
  a << 2.0, 1.0, 1.0, 2.0;
  const DiffusionSpec diff(a);

  PointClouds c;
  c.interior = (Eigen::MatrixXd(2, 1) << 0.3, 0.6).finished();
  c.dirichlet = (Eigen::MatrixXd(2, 1) << 0.0, 0.45).finished();
  c.dirichlet_normals = (Eigen::MatrixXd(2, 1) << -1.0, 0.0).finished();
  c.neumann = (Eigen::MatrixXd(2, 1) << 0.8, 1.0).finished();
  c.neumann_normals = (Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished();
  c.interior_measure = 1.0;
  c.dirichlet_measure = 3.0;
  c.neumann_measure = 1.0;
  const double f = 1.7, g = 0.2, gn = -0.6, gamma = 12.0;

  auto record = [&](Tape& t, const Eigen::MatrixXd& x) {
    const ad::SpatialJet in = ad::input_jet(t, x, 1);
    const ad::SpatialJet sq = ad::hadamard(in, in);
    return ad::add_bias(ad::add(ad::linear(t.parameter(0, 1, 2), sq), ad::linear(t.parameter(2, 1, 2), in)),
                        t.parameter(4, 1, 1));
  };
  auto loss = [&](Tape& t) {
    return interior_energy(record(t, c.interior), Eigen::VectorXd::Constant(1, f), diff, 1.0) +
           dirichlet_terms(record(t, c.dirichlet), c.dirichlet_normals, Eigen::VectorXd::Constant(1, g),
                           Eigen::VectorXd::Constant(1, gamma), diff, 3.0) +
           neumann_term(record(t, c.neumann), Eigen::VectorXd::Constant(1, gn), 1.0);
  };
  auto hand = [&](const Eigen::VectorXd& p) {
    auto w = [&](const Eigen::Vector2d& x) { return p(0) * x(0) * x(0) + p(1) * x(1) * x(1) + p(2) * x(0) + p(3) * x(1) + p(4); };
    auto grad = [&](const Eigen::Vector2d& x) { return Eigen::Vector2d(2 * p(0) * x(0) + p(2), 2 * p(1) * x(1) + p(3)); };
    const Eigen::Vector2d xi = c.interior.col(0), xd = c.dirichlet.col(0), xn = c.neumann.col(0);
    const double interior = 0.5 * grad(xi).dot(a * grad(xi)) - f * w(xi);
    const double flux = c.dirichlet_normals.col(0).dot(a * grad(xd));
    const double boundary = 3.0 * (-flux * (w(xd) - g) + 0.5 * gamma * (w(xd) - g) * (w(xd) - g));
    return interior + boundary - gn * w(xn);
  };
  Tape t(theta);
  const Var l = loss(t);
  CHECK(std::abs(l.scalar() - hand(theta)) < 1e-12);
  const Eigen::VectorXd fd = oracle::central_difference(hand, theta);
  CHECK(oracle::relative_error(t.gradient(l), fd) < 1e-8);
}

TEST_CASE("chunked assembly equals the single-tape functional") {
  const Architecture arch{3, 1, 2, 6, Activation::tanh};
  const Network net = oracle::random_network(arch, 8);
  const auto c = mixed_box_clouds(3, 90, 13, 9);
  const Problem p = problem_dirichlet_sine(3);
  const NitscheData data = sample_nitsche_data(p, 0.4, c);
  const Eigen::VectorXd gamma = penalty_for(net, c, PenaltyConfig{}, p.diffusion).gamma;
  Tape t(net.parameters());
  const Var l = nitsche_functional(t, net, gamma, c, data, p.diffusion);
  const Eigen::VectorXd g = t.gradient(l);
  for (Index chunk : {7, 32, 1000}) {
    const ValueGradient vg = nitsche_value_gradient(net, gamma, c, data, p.diffusion, chunk);
    CHECK(vg.value == doctest::Approx(l.scalar()).epsilon(1e-12));
    CHECK(oracle::relative_error(vg.gradient, g) < 1e-12);
  }
  CHECK(nitsche_parts(net, gamma, c, data, p.diffusion).value() == doctest::Approx(l.scalar()).epsilon(1e-12));
}

TEST_CASE("parameter gradient of the functional matches finite differences") {
  Eigen::Matrix3d a;
  a << 1.5, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.8;
  const DiffusionSpec diff(a);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Architecture arch{3, 1, 2, 4, Activation::tanh};
    const Network net = oracle::random_network(arch, seed);
    const auto c = mixed_box_clouds(3, 6, 1, seed + 10);
    const NitscheData data = sample_nitsche_data(problem_dirichlet_sine(3), 0.3, c);
    const Eigen::VectorXd gamma = Eigen::VectorXd::LinSpaced(c.dirichlet.cols(), 5.0, 50.0);
    Tape t(net.parameters());
    const Eigen::VectorXd g = t.gradient(nitsche_functional(t, net, gamma, c, data, diff));
    const Eigen::VectorXd fd = oracle::central_difference(
        [&](const Eigen::VectorXd& th) { return nitsche_parts(Network(arch, th), gamma, c, data, diff).value(); },
        net.parameters());
    CHECK(oracle::relative_error(g, fd) < 1e-5);
  }
}

TEST_CASE("discrete coercivity with the pointwise penalty") {
  int violations = 0, trials = 0;
  for (int d : {2, 3}) {
    const Problem p = problem_dirichlet_sine(d);
    for (std::uint64_t net_seed = 0; net_seed < 20; ++net_seed) {
      const Network net = oracle::random_network(Architecture{d, 1, 2, 8, Activation::tanh}, 100 + net_seed);
      for (std::uint64_t cloud_seed = 0; cloud_seed < 5; ++cloud_seed) {
        const auto c = sample_clouds(p.domain, 200 * d, 30, 1000 * net_seed + cloud_seed);
        const NitscheData data = sample_nitsche_data(p, 0.5, c);
        const PenaltyConfig cfg{PenaltyMode::pointwise, 8.0, 1e-12, MatchPolicy::strict};
        const Penalty pen = penalty_for(net, c, cfg, p.diffusion);
        for (double boost : {1.0, 2.0}) {
          const Eigen::VectorXd gamma = boost * pen.gamma;
          const NitscheParts parts = nitsche_parts(net, gamma, c, data, p.diffusion);
          ++trials;
          if (parts.value() < parts.coercivity_bound()) ++violations;
        }
      }
    }
  }
  CHECK(trials == 400);
  CHECK(violations == 0);
}
