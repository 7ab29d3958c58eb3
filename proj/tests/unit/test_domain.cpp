#include "doctest.h"

#include "gradflow/domain.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace gradflow;

TEST_CASE("box geometry") {
  const BoxDomain box(Eigen::Vector3d(0, -1, 2), Eigen::Vector3d(2, 1, 3),
                      {BoundaryKind::dirichlet, BoundaryKind::neumann, BoundaryKind::dirichlet, BoundaryKind::dirichlet,
                       BoundaryKind::neumann, BoundaryKind::neumann});
  CHECK(box.volume() == 4.0);
  CHECK(box.face_measure(0) == 2.0);  // x1 faces: 2 * 1
  CHECK(box.face_measure(2) == 2.0);  // x2 faces: 2 * 1
  CHECK(box.face_measure(4) == 4.0);  // x3 faces: 2 * 2
  CHECK(box.boundary_measure(BoundaryKind::dirichlet) == 6.0);
  CHECK(box.boundary_measure(BoundaryKind::neumann) == 10.0);
  CHECK(box.face_normal(3) == Eigen::Vector3d(0, 1, 0));
  CHECK(box.face_normal(4) == Eigen::Vector3d(0, 0, -1));
}

TEST_CASE("box validation") {
  CHECK_THROWS_AS(BoxDomain(Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1),
                            std::vector<BoundaryKind>(4, BoundaryKind::dirichlet)),
                  std::invalid_argument);
  CHECK_THROWS_AS(BoxDomain(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1),
                            std::vector<BoundaryKind>(3, BoundaryKind::dirichlet)),
                  std::invalid_argument);
}

TEST_CASE("600 points per edge of the unit square give 2400 boundary points") {
  const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 1200, 600, 1);
  CHECK(c.dirichlet.cols() + c.neumann.cols() == 2400);
  CHECK(c.dirichlet_measure == 4.0);
  CHECK(c.weight(Region::dirichlet) == 4.0 / 2400.0);
}

TEST_CASE("all-Neumann box has an empty Dirichlet cloud") {
  const auto c = sample_clouds(BoxDomain::unit_cube(3, BoundaryKind::neumann), 100, 10, 2);
  CHECK(c.dirichlet.cols() == 0);
  CHECK(c.neumann.cols() == 60);
  CHECK(c.weight(Region::dirichlet) == 0.0);
  CHECK(mc_integral(c, Region::dirichlet, Eigen::VectorXd()) == 0.0);
}

TEST_CASE("sampled points respect the geometry") {
  const BoxDomain box(Eigen::Vector3d(-1, 0, 0), Eigen::Vector3d(1, 2, 0.5),
                      std::vector<BoundaryKind>(6, BoundaryKind::dirichlet));
  const auto c = sample_clouds(box, 500, 50, 3);
  for (Index j = 0; j < c.interior.cols(); ++j) CHECK(box.contains_strictly(c.interior.col(j)));
  for (Index j = 0; j < c.dirichlet.cols(); ++j) {
    const Eigen::VectorXd n = c.dirichlet_normals.col(j);
    CHECK(n.norm() == 1.0);
    Index axis;
    n.cwiseAbs().maxCoeff(&axis);
    const double face = n(axis) > 0 ? box.upper()(axis) : box.lower()(axis);
    CHECK(c.dirichlet(axis, j) == face);
    CHECK((c.dirichlet.col(j).array() >= box.lower().array()).all());
    CHECK((c.dirichlet.col(j).array() <= box.upper().array()).all());
  }
}

TEST_CASE("sampling is deterministic under the seed") {
  const BoxDomain box = BoxDomain::unit_cube(2, BoundaryKind::dirichlet);
  CHECK(sample_clouds(box, 20, 5, 9).interior == sample_clouds(box, 20, 5, 9).interior);
  CHECK(sample_clouds(box, 20, 5, 9).dirichlet == sample_clouds(box, 20, 5, 9).dirichlet);
  CHECK(sample_clouds(box, 20, 5, 9).interior != sample_clouds(box, 20, 5, 10).interior);
}

TEST_CASE("interior mean is the box center within three standard errors") {
  const Index n = 20000;
  const auto c = sample_clouds(BoxDomain::unit_cube(4, BoundaryKind::dirichlet), n, 1, 4);
  const double se = std::sqrt(1.0 / 12.0 / static_cast<double>(n));
  const Eigen::VectorXd mean = c.interior.rowwise().mean();
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(mean(i) - 0.5) < 3.0 * se);
}

TEST_CASE("Monte Carlo integrals") {
  const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 4000, 100, 5);
  const Index n = c.interior.cols();
  CHECK(mc_integral(c, Region::interior, Eigen::VectorXd::Ones(n)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(mc_integral(c, Region::interior, c.interior.row(0).transpose()) - 0.5) < 3.0 / std::sqrt(4000.0));
  CHECK(mc_integral(c, Region::dirichlet, Eigen::VectorXd::Ones(c.dirichlet.cols())) == 4.0);
  CHECK_THROWS_AS(mc_integral(c, Region::interior, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("constant integrands integrate exactly over every region") {
  const BoxDomain box(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 3, 0.5),
                      {BoundaryKind::dirichlet, BoundaryKind::neumann, BoundaryKind::dirichlet, BoundaryKind::neumann,
                       BoundaryKind::dirichlet, BoundaryKind::neumann});
  const auto c = sample_clouds(box, 37, 11, 6);
  for (Region r : {Region::interior, Region::dirichlet, Region::neumann}) {
    const double v = mc_integral(c, r, Eigen::VectorXd::Constant(c.count(r), 2.5));
    CHECK(v == doctest::Approx(2.5 * c.measure(r)).epsilon(1e-15));
  }
}

TEST_CASE("Monte Carlo error decays like N^-1/2") {
  const int d = 3;
  const BoxDomain box = BoxDomain::unit_cube(d, BoundaryKind::dirichlet);
  const double exact = std::pow(0.5, d);
  std::vector<double> logn, logrmse;
  for (Index n : {64, 256, 1024, 4096}) {
    double mse = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed * 7919 + static_cast<std::uint64_t>(n));
      const Eigen::MatrixXd x = sample_interior(box, n, rng);
      PointClouds c;
      c.interior = x;
      c.interior_measure = 1.0;
      const Eigen::VectorXd f = x.colwise().prod().transpose();
      mse += std::pow(mc_integral(c, Region::interior, f) - exact, 2);
    }
    logn.push_back(std::log(static_cast<double>(n)));
    logrmse.push_back(0.5 * std::log(mse / 100.0));
  }
  const Eigen::Map<Eigen::VectorXd> xs(logn.data(), 4), ys(logrmse.data(), 4);
  const double slope = ((xs.array() - xs.mean()) * (ys.array() - ys.mean())).sum() / (xs.array() - xs.mean()).square().sum();
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
}

namespace {

PointClouds line_clouds(std::vector<double> interior, std::vector<double> boundary) {
  PointClouds c;
  c.interior = Eigen::Map<Eigen::RowVectorXd>(interior.data(), static_cast<Index>(interior.size()));
  c.dirichlet = Eigen::Map<Eigen::RowVectorXd>(boundary.data(), static_cast<Index>(boundary.size()));
  c.dirichlet_normals = Eigen::RowVectorXd::Ones(c.dirichlet.cols());
  c.interior_measure = 1.0;
  c.dirichlet_measure = 1.0;
  return c;
}

}  // namespace

TEST_CASE("nearest interior matching") {
  SUBCASE("picks the nearest point") {
    const auto c = line_clouds({0.3, 0.1, 0.5}, {0.0});
    CHECK(match_nearest_interior(c, Eigen::Vector3d::Ones()).partner == std::vector<Index>{1});
  }
  SUBCASE("second boundary point takes the next-nearest unused point") {
    const auto c = line_clouds({0.3, 0.1, 0.5}, {0.0, 0.05});
    CHECK(match_nearest_interior(c, Eigen::Vector3d::Ones()).partner == std::vector<Index>{1, 0});
  }
  SUBCASE("zero-gradient points are skipped") {
    const auto c = line_clouds({0.3, 0.1, 0.5}, {0.0});
    CHECK(match_nearest_interior(c, Eigen::Vector3d(1, 0, 1)).partner == std::vector<Index>{0});
  }
  SUBCASE("ties go to the lowest index") {
    const auto c = line_clouds({0.4, 0.2, 0.0}, {0.2 + 0.1, 0.1});
    // 0.3 is equidistant from 0.4 and 0.2; 0.1 is equidistant from 0.2 and 0.0.
    const auto m = match_nearest_interior(c, Eigen::Vector3d::Ones());
    CHECK(m.partner[0] == 0);
    CHECK(m.partner[1] == 1);
  }
  SUBCASE("too few admissible points") {
    const auto c = line_clouds({0.3, 0.1}, {0.0, 0.05, 0.5});
    const auto strict = match_nearest_interior(c, Eigen::Vector2d::Ones());
    CHECK(strict.exhausted);
    CHECK(strict.partner == std::vector<Index>{1, 0, -1});
    const auto recycled = match_nearest_interior(c, Eigen::Vector2d::Ones(), MatchPolicy::recycle);
    CHECK(recycled.exhausted);
    CHECK(recycled.rounds == 2);
    CHECK(recycled.partner == std::vector<Index>{1, 0, 0});
    const auto none = match_nearest_interior(c, Eigen::Vector2d::Zero(), MatchPolicy::recycle);
    CHECK(none.partner == std::vector<Index>{-1, -1, -1});
  }
}

TEST_CASE("matching is injective and total when enough points are admissible") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 400, 25, seed);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(0.6);
    Eigen::VectorXd norms(400);
    for (Index j = 0; j < 400; ++j) norms(j) = keep(rng) ? 1.0 + static_cast<double>(j) : 0.0;
    const auto m = match_nearest_interior(c, norms);
    CHECK_FALSE(m.exhausted);
    std::set<Index> seen;
    for (Index p : m.partner) {
      REQUIRE(p >= 0);
      CHECK(norms(p) != 0.0);
      CHECK(seen.insert(p).second);
    }
    CHECK(seen.size() == 100);
  }
}

TEST_CASE("cloud CSV dump") {
  const auto c = sample_clouds(BoxDomain::unit_cube(2, BoundaryKind::dirichlet), 3, 1, 1);
  std::ostringstream out;
  write_clouds_csv(c, out);
  const std::string s = out.str();
  CHECK(s.rfind("region,x1,x2,n1,n2\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 3 + 4);
}
