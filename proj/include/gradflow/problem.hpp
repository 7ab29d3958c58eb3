#pragma once

#include "gradflow/diffusion.hpp"
#include "gradflow/domain.hpp"

#include <functional>
#include <string>

namespace gradflow {

/// Scalar field of (t, x).
using Field = std::function<double(double, const Eigen::Ref<const Eigen::VectorXd>&)>;

enum class ProblemFlavor { dirichlet_heat, neumann_heat, custom };

/// u_t - div(A grad u) = F on (0, T] x Omega, u = g_D on the Dirichlet faces,
/// n . A grad u = g_N on the Neumann faces, u(0, .) = u_0.
struct Problem {
  std::string name;
  ProblemFlavor flavor = ProblemFlavor::custom;
  BoxDomain domain;
  DiffusionSpec diffusion;
  double final_time = 1.0;
  Field forcing;
  Field dirichlet;
  Field neumann;
  Field initial;  // t is ignored
  Field exact;    // empty when unknown

  int dimension() const { return domain.dimension(); }
  bool has_exact() const { return static_cast<bool>(exact); }
};

/// Field values at the columns of x.
Eigen::VectorXd sample_field(const Field& f, double t, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// u = sin(t) sin(x_1 + ... + x_d) on [0,1]^d with Dirichlet data on every face.
Problem problem_dirichlet_sine(int dim);

/// u = (exp(-d pi^2 t) prod cos(pi x_i) + 2) / 2 on [0,1]^d, homogeneous Neumann.
Problem problem_neumann_product(int dim);

std::string to_string(ProblemFlavor f);
ProblemFlavor parse_problem_flavor(const std::string& s);
Problem make_problem(ProblemFlavor flavor, int dim);

}  // namespace gradflow
