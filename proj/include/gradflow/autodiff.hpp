#pragma once

// Reverse-mode differentiation over batched matrix operations.
//
// Every tape node holds a dense matrix whose columns are sample points, so a
// whole point cloud flows through one node. Spatial derivatives of a network
// are propagated forward as ordinary tape nodes (SpatialJet), and one reverse
// sweep then yields the parameter gradient of any loss built from values,
// gradients and Laplacians (forward-over-reverse).

#include "gradflow/activation.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradflow::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when a loss value or an adjoint becomes NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int node)
      : std::runtime_error(what + " (tape node " + std::to_string(node) + ")"), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

class Tape;

/// Handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
};

enum class Op {
  constant,
  parameter,
  matmul,
  add_bias,
  add,
  sub,
  hadamard,
  scale,
  shift,
  activation,
  square,
  log,
  clamp_min,
  tile,
  col_block,
  block_sum,
  block_sum_squares,
  block_dot,
  block_mix,
  hadamard_const,
  add_const,
  dot_const,
  sum,
  reciprocal,
  scale_by,
};

/// Single-writer tape bound to one flat parameter vector.
class Tape {
 public:
  explicit Tape(Vector parameters);

  const Vector& parameters() const { return params_; }
  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(Var v) const { return nodes_.at(check(v)).value; }

  Var constant(Matrix value);
  Var constant(double value);
  /// Leaf viewing parameters [offset, offset + rows*cols) as a column-major matrix.
  Var parameter(Index offset, Index rows, Index cols);

  Var matmul(Var a, Var b);
  /// a + bias, bias a column vector broadcast over columns.
  Var add_bias(Var a, Var bias);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double s);
  /// a * s for a 1x1 node s.
  Var scale_by(Var a, Var s);
  Var shift(Var a, double s);
  /// order-th derivative of the activation, applied elementwise.
  Var activation(Var a, Activation act, int order);
  Var square(Var a);
  Var log(Var a);
  /// Elementwise 1 / a.
  Var reciprocal(Var a);
  /// max(a, floor); the derivative is zero wherever the floor is active.
  Var clamp_min(Var a, double floor);

  // Block operations: a matrix with k*B columns is read as k consecutive
  // blocks of B columns (one block per spatial direction).
  Var tile(Var a, int copies);
  Var col_block(Var a, Index start, Index count);
  Var block_sum(Var a, int blocks);
  /// Sum over blocks [first, last) of the elementwise squares.
  Var block_sum_squares(Var a, int blocks, int first, int last);
  /// Sum over blocks [first, last) of a_i .* b_i.
  Var block_dot(Var a, Var b, int blocks, int first, int last);
  /// out_i = sum_j mix(i, j) * a_j.
  Var block_mix(Var a, const Matrix& mix);

  Var hadamard_const(Var a, Matrix c);
  Var add_const(Var a, Matrix c);
  /// sum(a .* weights) as a 1x1 node.
  Var dot_const(Var a, Matrix weights);
  Var sum(Var a);

  /// Reverse sweep from a 1x1 node; returns d(loss)/d(parameters).
  Vector gradient(Var loss) const;

 private:
  struct Node {
    Op op = Op::constant;
    int a = -1;
    int b = -1;
    double s = 0.0;
    int i0 = 0;
    int i1 = 0;
    int i2 = 0;
    Index offset = 0;
    Activation act = Activation::tanh;
    bool active = false;  // depends on a parameter leaf
    Matrix value;
    Matrix aux;
    std::shared_ptr<const Matrix> base;  // activation nodes: sigma of the input
  };

  int check(Var v) const;
  Var push(Node node);

  Vector params_;
  std::vector<Node> nodes_;
  // sigma(input) of the most recent activation node, shared by the
  // derivative orders recorded on the same input.
  int base_input_ = -1;
  Activation base_act_ = Activation::tanh;
  std::shared_ptr<const Matrix> base_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw std::logic_error("Var::scalar on a non-scalar node");
  return v(0, 0);
}

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator-(Var a) { return a.tape->scale(a, -1.0); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }
inline Var operator+(Var a, double s) { return a.tape->shift(a, s); }
inline Var hadamard(Var a, Var b) { return a.tape->hadamard(a, b); }

/// Value, first spatial derivatives and (optionally) the Laplacian trace of a
/// batch of function values, each a tape node.
///
/// `tangents` stacks one block of `batch` columns per input direction; the
/// Laplacian sums second derivatives over directions [lap_first, directions).
///
/// When order == 2 an empty `laplacian` means the trace is identically zero
/// (e.g. an affine function of the inputs); when order < 2 it is not tracked.
struct SpatialJet {
  Var value;
  std::optional<Var> tangents;
  std::optional<Var> laplacian;
  int order = 0;
  int directions = 0;
  int lap_first = 0;
  Index batch = 0;

  /// d/dx_i as a node with `batch` columns.
  Var derivative(int i) const;
};

/// Jet of the input coordinates themselves (identity map); x is dim x batch.
SpatialJet input_jet(Tape& tape, const Matrix& x, int order, int lap_first = 0);

/// W * jet for a parameter or constant node W.
SpatialJet linear(Var weight, const SpatialJet& x);
SpatialJet add(const SpatialJet& a, const SpatialJet& b);
SpatialJet add_bias(const SpatialJet& a, Var bias);
SpatialJet hadamard(const SpatialJet& a, const SpatialJet& b);
/// 1 - a
SpatialJet one_minus(const SpatialJet& a);
SpatialJet activation(const SpatialJet& z, Activation act);

}  // namespace gradflow::ad
