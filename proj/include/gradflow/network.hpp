#pragma once

// Gated residual ("DGM") network:
//
//   S1      = act(W1 x + b1)
//   Z, G, R = act(U_* x + W_* S + b_*)             per block
//   H       = act(U_h x + W_h (S .* R) + b_h)
//   S'      = (1 - G) .* H + Z .* S
//   f       = W S_{L+1} + b
//
// with a uniform width M for every block.

#include "gradflow/activation.hpp"
#include "gradflow/autodiff.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace gradflow {

using Eigen::Index;

struct Architecture {
  int input_width = 1;
  int output_width = 1;
  int blocks = 0;
  int width = 1;
  Activation activation = Activation::tanh;

  /// M*d_in + M + L*4*(M*d_in + M*M + M) + d_out*M + d_out
  Index parameter_count() const;
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

enum class Gate : int { z = 0, g = 1, r = 2, h = 3 };

/// Offsets of each parameter group inside the flat vector. Matrices are
/// stored column-major. Order: W1, b1, then per block and per gate (z, g, r, h)
/// U, W, b, then the output W, b.
struct ParameterLayout {
  explicit ParameterLayout(const Architecture& arch);

  Index input_weight() const { return 0; }
  Index input_bias() const { return m_ * din_; }
  Index gate_u(int block, Gate gate) const { return gate_base(block, gate); }
  Index gate_w(int block, Gate gate) const { return gate_base(block, gate) + m_ * din_; }
  Index gate_b(int block, Gate gate) const { return gate_base(block, gate) + m_ * din_ + m_ * m_; }
  Index output_weight() const { return output_; }
  Index output_bias() const { return output_ + dout_ * m_; }
  Index size() const { return output_ + dout_ * m_ + dout_; }

 private:
  Index gate_base(int block, Gate gate) const {
    return m_ * din_ + m_ + (static_cast<Index>(block) * 4 + static_cast<int>(gate)) * gate_size_;
  }

  Index din_, dout_, m_, gate_size_, output_;
};

class Network {
 public:
  Network() = default;
  explicit Network(const Architecture& arch);  // zero parameters
  Network(const Architecture& arch, Eigen::VectorXd parameters);

  const Architecture& architecture() const { return arch_; }
  const Eigen::VectorXd& parameters() const { return theta_; }
  Eigen::VectorXd& parameters() { return theta_; }
  void set_parameters(const Eigen::VectorXd& theta);

  ParameterLayout layout() const { return ParameterLayout(arch_); }

  Eigen::Map<const Eigen::MatrixXd> matrix(Index offset, Index rows, Index cols) const {
    return {theta_.data() + offset, rows, cols};
  }

 private:
  Architecture arch_;
  Eigen::VectorXd theta_;
};

/// Xavier-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
Network init_xavier(const Architecture& arch, std::uint64_t seed);

/// Network values and spatial derivatives at a batch of points, evaluated
/// directly (no tape).
template <typename Scalar>
struct JetValues {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat value;        // d_out x B
  Mat tangents;     // d_out x (d_in * B), block i = d/dx_i; empty for order 0
  Mat laplacian;    // d_out x B; empty unless order 2

  /// Gradient of output row 0 at column `col`.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient_at(Index col) const;
};

namespace detail {

template <typename Scalar>
struct PlainJet {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Array v, t, lap;
};

template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> tile(
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, int k) {
  return a.replicate(1, k);
}

template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> block_reduce(
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, int k, int first, Index batch) {
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(a.rows(), batch);
  for (int i = first; i < k; ++i) out += a.middleCols(i * batch, batch);
  return out;
}

}  // namespace detail

/// Evaluates the network and, for order >= 1, its input gradient; for order 2
/// also the Laplacian over input directions [lap_first, d_in). Scalar may be
/// any floating type; parameters are converted to it.
template <typename Scalar, typename Derived>
JetValues<Scalar> evaluate_jet(const Network& net, const Eigen::MatrixBase<Derived>& x, int order,
                               int lap_first = 0) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Jet = detail::PlainJet<Scalar>;
  const Architecture& arch = net.architecture();
  if (x.rows() != arch.input_width) {
    throw std::invalid_argument("network input has dimension " + std::to_string(x.rows()) +
                                ", expected " + std::to_string(arch.input_width));
  }
  if (order < 0 || order > 2) throw std::invalid_argument("jet order must be 0, 1 or 2");
  const ParameterLayout lay(arch);
  const int k = arch.input_width;
  const Index batch = x.cols();
  const Index m = arch.width;
  const Mat xs = x.template cast<Scalar>();
  auto param = [&](Index off, Index r, Index c) -> Mat { return net.matrix(off, r, c).template cast<Scalar>(); };

  // Affine map of the input: derivative block i is column i of U.
  auto input_affine = [&](const Mat& u) {
    Jet j;
    j.v = (u * xs).array();
    if (order >= 1) {
      j.t.resize(u.rows(), k * batch);
      for (int i = 0; i < k; ++i) j.t.middleCols(i * batch, batch) = u.col(i).array().replicate(1, batch);
    }
    if (order == 2) j.lap = Arr::Zero(u.rows(), batch);
    return j;
  };
  auto linear = [&](const Mat& w, const Jet& s) {
    Jet j;
    j.v = (w * s.v.matrix()).array();
    if (order >= 1) j.t = (w * s.t.matrix()).array();
    if (order == 2) j.lap = (w * s.lap.matrix()).array();
    return j;
  };
  auto add = [&](Jet a, const Jet& b) {
    a.v += b.v;
    if (order >= 1) a.t += b.t;
    if (order == 2) a.lap += b.lap;
    return a;
  };
  auto bias = [&](Jet a, const Mat& b) {
    a.v.colwise() += b.col(0).array();
    return a;
  };
  auto act = [&](const Jet& z) {
    Jet j;
    j.v = activation_value(arch.activation, z.v);
    if (order >= 1) {
      const Arr d1 = activation_derivative_from_value(arch.activation, 1, j.v);
      j.t = detail::tile<Scalar>(d1, k) * z.t;
      if (order == 2) {
        const Arr d2 = activation_derivative_from_value(arch.activation, 2, j.v);
        j.lap = d1 * z.lap + d2 * detail::block_reduce<Scalar>(z.t.square(), k, lap_first, batch);
      }
    }
    return j;
  };
  auto mul = [&](const Jet& a, const Jet& b) {
    Jet j;
    j.v = a.v * b.v;
    if (order >= 1) {
      j.t = a.t * detail::tile<Scalar>(b.v, k) + detail::tile<Scalar>(a.v, k) * b.t;
      if (order == 2) {
        j.lap = a.v * b.lap + b.v * a.lap + Scalar(2) * detail::block_reduce<Scalar>(a.t * b.t, k, lap_first, batch);
      }
    }
    return j;
  };
  auto one_minus = [&](Jet a) {
    a.v = Scalar(1) - a.v;
    if (order >= 1) a.t = -a.t;
    if (order == 2) a.lap = -a.lap;
    return a;
  };

  Jet s = act(bias(input_affine(param(lay.input_weight(), m, k)), param(lay.input_bias(), m, 1)));
  for (int l = 0; l < arch.blocks; ++l) {
    auto gate = [&](Gate g, const Jet& state) {
      return act(bias(add(input_affine(param(lay.gate_u(l, g), m, k)), linear(param(lay.gate_w(l, g), m, m), state)),
                      param(lay.gate_b(l, g), m, 1)));
    };
    const Jet z = gate(Gate::z, s);
    const Jet g = gate(Gate::g, s);
    const Jet r = gate(Gate::r, s);
    const Jet h = gate(Gate::h, mul(s, r));
    s = add(mul(one_minus(g), h), mul(z, s));
  }
  const Jet out = bias(linear(param(lay.output_weight(), arch.output_width, m), s),
                       param(lay.output_bias(), arch.output_width, 1));

  JetValues<Scalar> res;
  res.value = out.v.matrix();
  if (order >= 1) res.tangents = out.t.matrix();
  if (order == 2) res.laplacian = out.lap.matrix();
  return res;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> JetValues<Scalar>::gradient_at(Index col) const {
  const Index batch = value.cols();
  const Index k = batch == 0 ? 0 : tangents.cols() / batch;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(k);
  for (Index i = 0; i < k; ++i) g(i) = tangents(0, i * batch + col);
  return g;
}

/// Network values at a batch of points (x is d_in x B), first output row.
Eigen::VectorXd forward(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& x);
/// Network value at a single point.
double forward_point(const Network& net, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Records the network over a batch of points onto `tape`, whose parameter
/// vector must be this network's parameters. Order 2 with ReLU yields a zero
/// Laplacian almost everywhere; callers that rely on it warn once per run.
ad::SpatialJet record_jet(ad::Tape& tape, const Network& net, const Eigen::MatrixXd& x, int order,
                          int lap_first = 0);

// Checkpoints: text header followed by the flat parameters as little-endian
// IEEE-754 doubles. See docs/formats.md.

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

void checkpoint_save(const Network& net, const std::filesystem::path& path);
Network checkpoint_load(const std::filesystem::path& path);

}  // namespace gradflow
