#include "gradflow/domain.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace gradflow {

BoxDomain::BoxDomain(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<BoundaryKind> faces)
    : lower_(std::move(lower)), upper_(std::move(upper)), faces_(std::move(faces)) {
  if (lower_.size() < 1) throw std::invalid_argument("domain dimension must be positive");
  if (upper_.size() != lower_.size()) throw std::invalid_argument("domain bounds have different dimensions");
  if (static_cast<Index>(faces_.size()) != 2 * lower_.size()) {
    throw std::invalid_argument("boundary labels must cover all " + std::to_string(2 * lower_.size()) + " faces");
  }
  for (Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_(i) < upper_(i))) {
      throw std::invalid_argument("domain interval " + std::to_string(i) + " is empty (need a_i < b_i)");
    }
  }
}

BoxDomain BoxDomain::unit_cube(int dim, BoundaryKind kind) {
  return BoxDomain(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim),
                   std::vector<BoundaryKind>(static_cast<std::size_t>(2 * dim), kind));
}

Eigen::VectorXd BoxDomain::face_normal(int face) const {
  Eigen::VectorXd n = Eigen::VectorXd::Zero(dimension());
  n(face_axis(face)) = face_is_upper(face) ? 1.0 : -1.0;
  return n;
}

double BoxDomain::volume() const { return (upper_ - lower_).prod(); }

double BoxDomain::face_measure(int face) const {
  const int axis = face_axis(face);
  double m = 1.0;
  for (int i = 0; i < dimension(); ++i)
    if (i != axis) m *= upper_(i) - lower_(i);
  return m;
}

double BoxDomain::boundary_measure(BoundaryKind kind) const {
  double m = 0.0;
  for (int f = 0; f < face_count(); ++f)
    if (faces_[f] == kind) m += face_measure(f);
  return m;
}

bool BoxDomain::contains_strictly(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return x.size() == lower_.size() && (x.array() > lower_.array()).all() && (x.array() < upper_.array()).all();
}

const Eigen::MatrixXd& PointClouds::points(Region r) const {
  switch (r) {
    case Region::interior: return interior;
    case Region::dirichlet: return dirichlet;
    case Region::neumann: return neumann;
  }
  throw std::logic_error("bad region");
}

double PointClouds::measure(Region r) const {
  switch (r) {
    case Region::interior: return interior_measure;
    case Region::dirichlet: return dirichlet_measure;
    case Region::neumann: return neumann_measure;
  }
  throw std::logic_error("bad region");
}

double PointClouds::weight(Region r) const {
  const Index n = count(r);
  return n == 0 ? 0.0 : measure(r) / static_cast<double>(n);
}

Eigen::MatrixXd sample_interior(const BoxDomain& domain, Index count, std::mt19937_64& rng) {
  const int d = domain.dimension();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd x(d, count);
  for (Index j = 0; j < count; ++j) {
    for (int i = 0; i < d; ++i) {
      const double a = domain.lower()(i), b = domain.upper()(i);
      double v;
      do {
        v = a + (b - a) * unit(rng);
      } while (!(v > a && v < b));
      x(i, j) = v;
    }
  }
  return x;
}

Eigen::MatrixXd sample_face(const BoxDomain& domain, int face, Index count, std::mt19937_64& rng) {
  const int d = domain.dimension();
  const int axis = BoxDomain::face_axis(face);
  const double fixed = BoxDomain::face_is_upper(face) ? domain.upper()(axis) : domain.lower()(axis);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd x(d, count);
  for (Index j = 0; j < count; ++j) {
    for (int i = 0; i < d; ++i) {
      x(i, j) = i == axis ? fixed : domain.lower()(i) + (domain.upper()(i) - domain.lower()(i)) * unit(rng);
    }
  }
  return x;
}

PointClouds sample_clouds(const BoxDomain& domain, Index interior, Index per_face, std::uint64_t seed) {
  return sample_clouds(domain, interior, std::vector<Index>(static_cast<std::size_t>(domain.face_count()), per_face),
                       seed);
}

PointClouds sample_clouds(const BoxDomain& domain, Index interior, const std::vector<Index>& per_face,
                          std::uint64_t seed) {
  const int d = domain.dimension();
  if (interior < 1) throw std::invalid_argument("interior sample count must be at least 1");
  if (static_cast<int>(per_face.size()) != domain.face_count()) {
    throw std::invalid_argument("need one boundary sample count per face");
  }
  std::mt19937_64 rng(seed);
  PointClouds c;
  c.interior_measure = domain.volume();
  c.interior = sample_interior(domain, interior, rng);

  Index nd = 0, nn = 0;
  for (int f = 0; f < domain.face_count(); ++f) {
    if (per_face[f] < 0) throw std::invalid_argument("boundary sample counts must be non-negative");
    (domain.face_kind(f) == BoundaryKind::dirichlet ? nd : nn) += per_face[f];
  }
  c.dirichlet.resize(d, nd);
  c.dirichlet_normals.resize(d, nd);
  c.neumann.resize(d, nn);
  c.neumann_normals.resize(d, nn);
  Index id = 0, in = 0;
  for (int f = 0; f < domain.face_count(); ++f) {
    const Index n = per_face[f];
    if (n == 0) continue;
    const Eigen::MatrixXd pts = sample_face(domain, f, n, rng);
    const Eigen::VectorXd normal = domain.face_normal(f);
    if (domain.face_kind(f) == BoundaryKind::dirichlet) {
      c.dirichlet.middleCols(id, n) = pts;
      c.dirichlet_normals.middleCols(id, n) = normal.replicate(1, n);
      c.dirichlet_measure += domain.face_measure(f);
      id += n;
    } else {
      c.neumann.middleCols(in, n) = pts;
      c.neumann_normals.middleCols(in, n) = normal.replicate(1, n);
      c.neumann_measure += domain.face_measure(f);
      in += n;
    }
  }
  return c;
}

double mc_integral(const PointClouds& clouds, Region region, const Eigen::Ref<const Eigen::VectorXd>& values) {
  const Index n = clouds.count(region);
  if (values.size() != n) {
    throw std::invalid_argument("integrand has " + std::to_string(values.size()) + " values for " +
                                std::to_string(n) + " sample points");
  }
  if (n == 0) {
    if (clouds.measure(region) > 0.0) {
      throw std::invalid_argument("cannot integrate over a region of positive measure without samples");
    }
    return 0.0;
  }
  return clouds.measure(region) / static_cast<double>(n) * values.sum();
}

Matching match_nearest_interior(const PointClouds& clouds, const Eigen::Ref<const Eigen::VectorXd>& interior_grad_norms,
                                MatchPolicy policy) {
  const Index ni = clouds.interior.cols();
  const Index nd = clouds.dirichlet.cols();
  if (interior_grad_norms.size() != ni) {
    throw std::invalid_argument("need one gradient norm per interior point");
  }
  std::vector<char> admissible(static_cast<std::size_t>(ni));
  Index valid = 0;
  for (Index j = 0; j < ni; ++j) {
    const double g = interior_grad_norms(j);
    admissible[j] = std::isfinite(g) && g != 0.0;
    valid += admissible[j];
  }

  Matching m;
  m.partner.assign(static_cast<std::size_t>(nd), -1);
  std::vector<char> used(static_cast<std::size_t>(ni), 0);
  Index available = valid;
  for (Index n = 0; n < nd; ++n) {
    if (available == 0) {
      m.exhausted = true;
      if (policy == MatchPolicy::recycle && valid > 0) {
        std::fill(used.begin(), used.end(), 0);
        available = valid;
        ++m.rounds;
      } else {
        continue;
      }
    }
    const Eigen::RowVectorXd dist = (clouds.interior.colwise() - clouds.dirichlet.col(n)).colwise().squaredNorm();
    Index best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < ni; ++j) {
      if (admissible[j] && !used[j] && dist(j) < best_dist) {
        best = j;
        best_dist = dist(j);
      }
    }
    m.partner[n] = best;
    used[best] = 1;
    --available;
  }
  return m;
}

void write_clouds_csv(const PointClouds& clouds, std::ostream& out) {
  const int d = static_cast<int>(clouds.interior.rows());
  out << "region";
  for (int i = 1; i <= d; ++i) out << ",x" << i;
  for (int i = 1; i <= d; ++i) out << ",n" << i;
  out << '\n';
  auto dump = [&](const char* name, const Eigen::MatrixXd& pts, const Eigen::MatrixXd* normals) {
    for (Index j = 0; j < pts.cols(); ++j) {
      out << name;
      for (int i = 0; i < d; ++i) out << ',' << pts(i, j);
      for (int i = 0; i < d; ++i) out << ',' << (normals ? (*normals)(i, j) : 0.0);
      out << '\n';
    }
  };
  dump("interior", clouds.interior, nullptr);
  dump("dirichlet", clouds.dirichlet, &clouds.dirichlet_normals);
  dump("neumann", clouds.neumann, &clouds.neumann_normals);
}

}  // namespace gradflow
