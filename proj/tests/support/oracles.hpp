#pragma once

// Test-only reference computations. Nothing here goes through the tape.

#include "gradflow/network.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace oracle {

/// Central differences of f at theta with step h in every coordinate.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& theta, double h = 1e-5) {
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe(i) = theta(i) + h;
    const double up = f(probe);
    probe(i) = theta(i) - h;
    const double down = f(probe);
    probe(i) = theta(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& ref) {
  const double denom = std::max(ref.norm(), 1e-300);
  return (a - ref).norm() / denom;
}

/// Random network with small random biases so that no parameter group is
/// trivially zero.
inline gradflow::Network random_network(const gradflow::Architecture& arch, std::uint64_t seed,
                                        double bias_scale = 0.3) {
  gradflow::Network net = gradflow::init_xavier(arch, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-bias_scale, bias_scale);
  const gradflow::ParameterLayout lay(arch);
  const Eigen::Index m = arch.width;
  auto jitter = [&](Eigen::Index off, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) net.parameters()(off + i) += u(rng);
  };
  jitter(lay.input_bias(), m);
  for (int l = 0; l < arch.blocks; ++l) {
    for (auto g : {gradflow::Gate::z, gradflow::Gate::g, gradflow::Gate::r, gradflow::Gate::h}) jitter(lay.gate_b(l, g), m);
  }
  jitter(lay.output_bias(), arch.output_width);
  return net;
}

inline Eigen::MatrixXd uniform_points(int dim, Eigen::Index count, std::uint64_t seed, double lo = 0.0,
                                      double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd x(dim, count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (int i = 0; i < dim; ++i) x(i, j) = u(rng);
  return x;
}

/// Network evaluated in extended precision through the tape-free route.
inline gradflow::JetValues<long double> jet_ld(const gradflow::Network& net, const Eigen::MatrixXd& x, int order,
                                               int lap_first = 0) {
  return gradflow::evaluate_jet<long double>(net, x, order, lap_first);
}

}  // namespace oracle
