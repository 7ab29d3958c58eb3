#include "gradflow/problem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gradflow {

Eigen::VectorXd sample_field(const Field& f, double t, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::VectorXd v(x.cols());
  if (!f) {
    v.setZero();
    return v;
  }
  for (Index j = 0; j < x.cols(); ++j) v(j) = f(t, x.col(j));
  return v;
}

Problem problem_dirichlet_sine(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be at least 1");
  const double d = dim;
  auto u = [](double t, const Eigen::Ref<const Eigen::VectorXd>& x) { return std::sin(t) * std::sin(x.sum()); };
  return Problem{
      .name = "dirichlet-sine",
      .flavor = ProblemFlavor::dirichlet_heat,
      .domain = BoxDomain::unit_cube(dim, BoundaryKind::dirichlet),
      .diffusion = DiffusionSpec::identity(dim),
      .final_time = 1.0,
      .forcing = [d](double t, const Eigen::Ref<const Eigen::VectorXd>& x) {
        const double s = std::sin(x.sum());
        return std::cos(t) * s + d * std::sin(t) * s;
      },
      .dirichlet = u,
      .neumann = {},
      .initial = [](double, const Eigen::Ref<const Eigen::VectorXd>&) { return 0.0; },
      .exact = u,
  };
}

Problem problem_neumann_product(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be at least 1");
  static constexpr double pi = std::numbers::pi;
  const double rate = dim * pi * pi;
  auto u = [rate](double t, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return 0.5 * (std::exp(-rate * t) * (pi * x.array()).cos().prod() + 2.0);
  };
  auto zero = [](double, const Eigen::Ref<const Eigen::VectorXd>&) { return 0.0; };
  return Problem{
      .name = "neumann-product",
      .flavor = ProblemFlavor::neumann_heat,
      .domain = BoxDomain::unit_cube(dim, BoundaryKind::neumann),
      .diffusion = DiffusionSpec::identity(dim),
      .final_time = 1.0,
      .forcing = zero,
      .dirichlet = {},
      .neumann = zero,
      .initial = [u](double, const Eigen::Ref<const Eigen::VectorXd>& x) { return u(0.0, x); },
      .exact = u,
  };
}

std::string to_string(ProblemFlavor f) {
  switch (f) {
    case ProblemFlavor::dirichlet_heat: return "dirichlet-heat";
    case ProblemFlavor::neumann_heat: return "neumann-heat";
    case ProblemFlavor::custom: return "custom";
  }
  return "?";
}

ProblemFlavor parse_problem_flavor(const std::string& s) {
  if (s == "dirichlet-heat" || s == "dirichlet-sine") return ProblemFlavor::dirichlet_heat;
  if (s == "neumann-heat" || s == "neumann-product") return ProblemFlavor::neumann_heat;
  throw std::invalid_argument("unknown problem '" + s + "' (expected dirichlet-heat or neumann-heat)");
}

Problem make_problem(ProblemFlavor flavor, int dim) {
  switch (flavor) {
    case ProblemFlavor::dirichlet_heat: return problem_dirichlet_sine(dim);
    case ProblemFlavor::neumann_heat: return problem_neumann_product(dim);
    case ProblemFlavor::custom: break;
  }
  throw std::invalid_argument("custom problems cannot be constructed by name");
}

}  // namespace gradflow
