#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace gradflow {

enum class Activation { relu, tanh, sigmoid };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

/// True when the second derivative of the activation vanishes identically
/// (away from a measure-zero kink), which makes Laplacians of the network
/// zero almost everywhere.
inline bool has_trivial_curvature(Activation act) { return act == Activation::relu; }

/// Elementwise sigma(z). In double precision tanh goes through the
/// vectorized exponential.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
activation_value(Activation act, const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar one(1), two(2);
  switch (act) {
    case Activation::relu: return z.max(Scalar(0));
    case Activation::tanh:
      if constexpr (std::is_same_v<Scalar, double>) {
        return one - two / ((two * z).exp() + one);
      } else {
        return z.tanh();
      }
    case Activation::sigmoid: return one / (one + (-z).exp());
  }
  throw std::invalid_argument("unknown activation");
}

/// Elementwise `order`-th derivative, order in [0, 3], written in terms of
/// s = sigma(z). ReLU'(0) is taken as 0.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
activation_derivative_from_value(Activation act, int order, const Eigen::ArrayBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Scalar one(1);
  if (order >= 0 && order <= 3) {
    if (order == 0) return s;
    switch (act) {
      case Activation::relu:
        if (order == 1) return (s > Scalar(0)).template cast<Scalar>();
        return Array::Zero(s.rows(), s.cols());
      case Activation::tanh:
        switch (order) {
          case 1: return one - s.square();
          case 2: return Scalar(-2) * s * (one - s.square());
          default: return Scalar(-2) * (one - s.square()) * (one - Scalar(3) * s.square());
        }
      case Activation::sigmoid:
        switch (order) {
          case 1: return s * (one - s);
          case 2: return s * (one - s) * (one - Scalar(2) * s);
          default: return s * (one - s) * (one - Scalar(6) * s + Scalar(6) * s.square());
        }
    }
  }
  throw std::invalid_argument("activation derivative order must be in [0, 3], got " +
                              std::to_string(order));
}

/// Elementwise `order`-th derivative of the activation, order in [0, 3].
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
activation_derivative(Activation act, int order, const Eigen::ArrayBase<Derived>& z) {
  if (order < 0 || order > 3) {
    throw std::invalid_argument("activation derivative order must be in [0, 3], got " + std::to_string(order));
  }
  return activation_derivative_from_value(act, order, activation_value(act, z));
}

}  // namespace gradflow
