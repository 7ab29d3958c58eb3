#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace gradflow {

using Eigen::Index;

enum class BoundaryKind { dirichlet, neumann };

/// Axis-aligned box. Faces are numbered 2*i (x_i = lower_i) and 2*i + 1
/// (x_i = upper_i).
class BoxDomain {
 public:
  BoxDomain(Eigen::VectorXd lower, Eigen::VectorXd upper, std::vector<BoundaryKind> faces);
  static BoxDomain unit_cube(int dim, BoundaryKind kind);

  int dimension() const { return static_cast<int>(lower_.size()); }
  int face_count() const { return 2 * dimension(); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  BoundaryKind face_kind(int face) const { return faces_.at(face); }
  static int face_axis(int face) { return face / 2; }
  static bool face_is_upper(int face) { return face % 2 == 1; }
  Eigen::VectorXd face_normal(int face) const;

  double volume() const;
  /// (d-1)-volume of a face; 1 for the point faces of an interval.
  double face_measure(int face) const;
  double boundary_measure(BoundaryKind kind) const;
  double diameter_squared() const { return (upper_ - lower_).squaredNorm(); }
  bool contains_strictly(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd lower_, upper_;
  std::vector<BoundaryKind> faces_;
};

enum class Region { interior, dirichlet, neumann };

/// Uniform samples of the interior and of the two boundary parts, with the
/// measures used for Monte Carlo weights. Points are stored as columns.
struct PointClouds {
  Eigen::MatrixXd interior;
  Eigen::MatrixXd dirichlet;
  Eigen::MatrixXd dirichlet_normals;
  Eigen::MatrixXd neumann;
  Eigen::MatrixXd neumann_normals;
  double interior_measure = 0.0;
  double dirichlet_measure = 0.0;
  double neumann_measure = 0.0;

  const Eigen::MatrixXd& points(Region r) const;
  Index count(Region r) const { return points(r).cols(); }
  double measure(Region r) const;
  /// measure / count, or 0 for an empty region.
  double weight(Region r) const;
};

/// `per_face` samples on each of the 2d faces (a face's samples go to the
/// cloud of its boundary kind) and `interior` samples strictly inside.
PointClouds sample_clouds(const BoxDomain& domain, Index interior, Index per_face, std::uint64_t seed);
PointClouds sample_clouds(const BoxDomain& domain, Index interior, const std::vector<Index>& per_face,
                          std::uint64_t seed);

Eigen::MatrixXd sample_interior(const BoxDomain& domain, Index count, std::mt19937_64& rng);
/// Uniform samples on one face.
Eigen::MatrixXd sample_face(const BoxDomain& domain, int face, Index count, std::mt19937_64& rng);

/// (region measure / count) * sum(values).
double mc_integral(const PointClouds& clouds, Region region, const Eigen::Ref<const Eigen::VectorXd>& values);

enum class MatchPolicy {
  strict,   // each interior point is used at most once; leftovers stay unmatched
  recycle,  // once every admissible interior point is used, start a new round
};

struct Matching {
  std::vector<Index> partner;  // per Dirichlet point, -1 if unmatched
  bool exhausted = false;      // ran out of admissible interior points
  int rounds = 1;
};

/// For each Dirichlet point in sample order, the Euclidean-nearest interior
/// point with nonzero gradient norm not chosen before (ties: lowest index).
Matching match_nearest_interior(const PointClouds& clouds, const Eigen::Ref<const Eigen::VectorXd>& interior_grad_norms,
                                MatchPolicy policy = MatchPolicy::strict);

/// CSV dump: region,x1..xd,n1..nd
void write_clouds_csv(const PointClouds& clouds, std::ostream& out);

}  // namespace gradflow
