#include "gradflow/autodiff.hpp"

#include <cmath>
#include <utility>

namespace gradflow::ad {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Tape::Tape(Vector parameters) : params_(std::move(parameters)) { nodes_.reserve(256); }

int Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this tape");
  }
  return v.id;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(Index offset, Index rows, Index cols) {
  require(offset >= 0 && rows >= 0 && cols >= 0 && offset + rows * cols <= params_.size(),
          "parameter slice out of range");
  Node n;
  n.op = Op::parameter;
  n.offset = offset;
  n.active = true;
  n.value = Eigen::Map<const Matrix>(params_.data() + offset, rows, cols);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = nodes_[check(a)];
  const Node& nb = nodes_[check(b)];
  if (na.value.cols() != nb.value.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Node n;
  n.op = Op::matmul;
  n.a = a.id;
  n.b = b.id;
  n.active = na.active || nb.active;
  n.value.noalias() = na.value * nb.value;
  return push(std::move(n));
}

Var Tape::add_bias(Var a, Var bias) {
  const Node& na = nodes_[check(a)];
  const Node& nb = nodes_[check(bias)];
  require(nb.value.cols() == 1 && nb.value.rows() == na.value.rows(), "add_bias: bias shape mismatch");
  Node n;
  n.op = Op::add_bias;
  n.a = a.id;
  n.b = bias.id;
  n.active = na.active || nb.active;
  n.value = na.value.colwise() + nb.value.col(0);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Node& na = nodes_[check(a)];
  const Node& nb = nodes_[check(b)];
  require_same_shape(na.value, nb.value, "add");
  Node n;
  n.op = Op::add;
  n.a = a.id;
  n.b = b.id;
  n.active = na.active || nb.active;
  n.value = na.value + nb.value;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Node& na = nodes_[check(a)];
  const Node& nb = nodes_[check(b)];
  require_same_shape(na.value, nb.value, "sub");
  Node n;
  n.op = Op::sub;
  n.a = a.id;
  n.b = b.id;
  n.active = na.active || nb.active;
  n.value = na.value - nb.value;
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  const Node& na = nodes_[check(a)];
  const Node& nb = nodes_[check(b)];
  require_same_shape(na.value, nb.value, "hadamard");
  Node n;
  n.op = Op::hadamard;
  n.a = a.id;
  n.b = b.id;
  n.active = na.active || nb.active;
  n.value = na.value.cwiseProduct(nb.value);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::scale;
  n.a = a.id;
  n.s = s;
  n.active = na.active;
  n.value = s * na.value;
  return push(std::move(n));
}

Var Tape::scale_by(Var a, Var s) {
  const Node& na = nodes_[check(a)];
  const Node& ns = nodes_[check(s)];
  require(ns.value.rows() == 1 && ns.value.cols() == 1, "scale_by: the factor must be 1x1");
  Node n;
  n.op = Op::scale_by;
  n.a = a.id;
  n.b = s.id;
  n.active = na.active || ns.active;
  n.value = ns.value(0, 0) * na.value;
  return push(std::move(n));
}

Var Tape::shift(Var a, double s) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::shift;
  n.a = a.id;
  n.s = s;
  n.active = na.active;
  n.value = na.value.array() + s;
  return push(std::move(n));
}

Var Tape::activation(Var a, Activation act, int order) {
  const Node& na = nodes_[check(a)];
  require(order >= 0 && order <= 2, "activation: recorded order must be 0, 1 or 2");
  Node n;
  n.op = Op::activation;
  n.a = a.id;
  n.act = act;
  n.i0 = order;
  n.active = na.active;
  if (!base_ || base_input_ != a.id || base_act_ != act) {
    base_ = std::make_shared<const Matrix>(activation_value(act, na.value.array()).matrix());
    base_input_ = a.id;
    base_act_ = act;
  }
  n.base = base_;
  n.value = order == 0 ? *base_ : activation_derivative_from_value(act, order, base_->array()).matrix();
  return push(std::move(n));
}

Var Tape::square(Var a) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::square;
  n.a = a.id;
  n.active = na.active;
  n.value = na.value.array().square().matrix();
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::log;
  n.a = a.id;
  n.active = na.active;
  n.value = na.value.array().log().matrix();
  return push(std::move(n));
}

Var Tape::reciprocal(Var a) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::reciprocal;
  n.a = a.id;
  n.active = na.active;
  n.value = na.value.cwiseInverse();
  return push(std::move(n));
}

Var Tape::clamp_min(Var a, double floor) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::clamp_min;
  n.a = a.id;
  n.s = floor;
  n.active = na.active;
  n.value = na.value.array().max(floor).matrix();
  return push(std::move(n));
}

Var Tape::tile(Var a, int copies) {
  const Node& na = nodes_[check(a)];
  require(copies >= 1, "tile: copies must be positive");
  Node n;
  n.op = Op::tile;
  n.a = a.id;
  n.i0 = copies;
  n.active = na.active;
  n.value = na.value.replicate(1, copies);
  return push(std::move(n));
}

Var Tape::col_block(Var a, Index start, Index count) {
  const Node& na = nodes_[check(a)];
  require(start >= 0 && count >= 0 && start + count <= na.value.cols(), "col_block: out of range");
  Node n;
  n.op = Op::col_block;
  n.a = a.id;
  n.offset = start;
  n.i0 = static_cast<int>(count);
  n.active = na.active;
  n.value = na.value.middleCols(start, count);
  return push(std::move(n));
}

Var Tape::block_sum(Var a, int blocks) {
  const Node& na = nodes_[check(a)];
  require(blocks >= 1 && na.value.cols() % blocks == 0, "block_sum: columns not divisible by blocks");
  const Index width = na.value.cols() / blocks;
  Node n;
  n.op = Op::block_sum;
  n.a = a.id;
  n.i0 = blocks;
  n.active = na.active;
  n.value = na.value.leftCols(width);
  for (int i = 1; i < blocks; ++i) n.value += na.value.middleCols(i * width, width);
  return push(std::move(n));
}

Var Tape::block_sum_squares(Var a, int blocks, int first, int last) {
  const Node& na = nodes_[check(a)];
  require(blocks >= 1 && na.value.cols() % blocks == 0, "block_sum_squares: columns not divisible by blocks");
  require(0 <= first && first < last && last <= blocks, "block_sum_squares: bad block range");
  const Index width = na.value.cols() / blocks;
  Node n;
  n.op = Op::block_sum_squares;
  n.a = a.id;
  n.i0 = blocks;
  n.i1 = first;
  n.i2 = last;
  n.active = na.active;
  n.value = na.value.middleCols(first * width, width).array().square().matrix();
  for (int i = first + 1; i < last; ++i) {
    n.value.array() += na.value.middleCols(i * width, width).array().square();
  }
  return push(std::move(n));
}

Var Tape::block_dot(Var a, Var b, int blocks, int first, int last) {
  const Node& na = nodes_[check(a)];
  const Node& nb = nodes_[check(b)];
  require_same_shape(na.value, nb.value, "block_dot");
  require(blocks >= 1 && na.value.cols() % blocks == 0, "block_dot: columns not divisible by blocks");
  require(0 <= first && first < last && last <= blocks, "block_dot: bad block range");
  const Index width = na.value.cols() / blocks;
  Node n;
  n.op = Op::block_dot;
  n.a = a.id;
  n.b = b.id;
  n.i0 = blocks;
  n.i1 = first;
  n.i2 = last;
  n.active = na.active || nb.active;
  n.value = na.value.middleCols(first * width, width).cwiseProduct(nb.value.middleCols(first * width, width));
  for (int i = first + 1; i < last; ++i) {
    n.value += na.value.middleCols(i * width, width).cwiseProduct(nb.value.middleCols(i * width, width));
  }
  return push(std::move(n));
}

Var Tape::block_mix(Var a, const Matrix& mix) {
  const Node& na = nodes_[check(a)];
  const Index blocks = mix.cols();
  require(mix.rows() == blocks && blocks >= 1 && na.value.cols() % blocks == 0,
          "block_mix: mixing matrix does not match the block layout");
  const Index width = na.value.cols() / blocks;
  Node n;
  n.op = Op::block_mix;
  n.a = a.id;
  n.active = na.active;
  n.aux = mix;
  n.value = Matrix::Zero(na.value.rows(), na.value.cols());
  for (Index i = 0; i < blocks; ++i) {
    for (Index j = 0; j < blocks; ++j) {
      if (mix(i, j) != 0.0) n.value.middleCols(i * width, width) += mix(i, j) * na.value.middleCols(j * width, width);
    }
  }
  return push(std::move(n));
}

Var Tape::hadamard_const(Var a, Matrix c) {
  const Node& na = nodes_[check(a)];
  require_same_shape(na.value, c, "hadamard_const");
  Node n;
  n.op = Op::hadamard_const;
  n.a = a.id;
  n.active = na.active;
  n.value = na.value.cwiseProduct(c);
  n.aux = std::move(c);
  return push(std::move(n));
}

Var Tape::add_const(Var a, Matrix c) {
  const Node& na = nodes_[check(a)];
  require_same_shape(na.value, c, "add_const");
  Node n;
  n.op = Op::add_const;
  n.a = a.id;
  n.active = na.active;
  n.value = na.value + c;
  return push(std::move(n));
}

Var Tape::dot_const(Var a, Matrix weights) {
  const Node& na = nodes_[check(a)];
  require_same_shape(na.value, weights, "dot_const");
  Node n;
  n.op = Op::dot_const;
  n.a = a.id;
  n.active = na.active;
  n.value = Matrix::Constant(1, 1, na.value.cwiseProduct(weights).sum());
  n.aux = std::move(weights);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Node& na = nodes_[check(a)];
  Node n;
  n.op = Op::sum;
  n.a = a.id;
  n.active = na.active;
  n.value = Matrix::Constant(1, 1, na.value.sum());
  return push(std::move(n));
}

Vector Tape::gradient(Var loss) const {
  const int root = check(loss);
  const Matrix& lv = nodes_[root].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("gradient: loss must be a 1x1 node");
  if (!std::isfinite(lv(0, 0))) throw NonFiniteError("non-finite loss value", root);

  Vector grad = Vector::Zero(params_.size());
  std::vector<Matrix> adj(static_cast<std::size_t>(root) + 1);
  std::vector<char> seen(static_cast<std::size_t>(root) + 1, 0);
  adj[root] = Matrix::Ones(1, 1);
  seen[root] = 1;

  auto accumulate = [&](int id, const auto& contribution) {
    if (!nodes_[id].active) return;
    if (seen[id]) {
      adj[id] += contribution;
    } else {
      adj[id] = contribution;
      seen[id] = 1;
    }
  };

  for (int id = root; id >= 0; --id) {
    if (!seen[id]) continue;
    const Node& n = nodes_[id];
    const Matrix& g = adj[id];
    // The sum is finite whenever every entry is; only confirm on a miss.
    if (!std::isfinite(g.sum()) && !g.allFinite()) throw NonFiniteError("non-finite adjoint", id);

    switch (n.op) {
      case Op::constant:
        break;
      case Op::parameter:
        grad.segment(n.offset, g.size()) += Eigen::Map<const Vector>(g.data(), g.size());
        break;
      case Op::matmul:
        if (nodes_[n.a].active) accumulate(n.a, g * nodes_[n.b].value.transpose());
        if (nodes_[n.b].active) accumulate(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case Op::add_bias:
        accumulate(n.a, g);
        accumulate(n.b, g.rowwise().sum());
        break;
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        accumulate(n.b, -g);
        break;
      case Op::hadamard:
        accumulate(n.a, g.cwiseProduct(nodes_[n.b].value));
        accumulate(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::scale:
        accumulate(n.a, n.s * g);
        break;
      case Op::shift:
      case Op::add_const:
        accumulate(n.a, g);
        break;
      case Op::activation:
        if (n.i0 + 1 > 3) throw std::logic_error("activation derivative beyond third order");
        accumulate(n.a, (g.array() * activation_derivative_from_value(n.act, n.i0 + 1, n.base->array())).matrix());
        break;
      case Op::square:
        accumulate(n.a, 2.0 * g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::log:
        accumulate(n.a, g.cwiseQuotient(nodes_[n.a].value));
        break;
      case Op::clamp_min:
        accumulate(n.a, (nodes_[n.a].value.array() > n.s).select(g.array(), 0.0).matrix());
        break;
      case Op::tile: {
        const Index width = g.cols() / n.i0;
        Matrix acc = g.leftCols(width);
        for (int i = 1; i < n.i0; ++i) acc += g.middleCols(i * width, width);
        accumulate(n.a, acc);
        break;
      }
      case Op::col_block: {
        if (!nodes_[n.a].active) break;
        Matrix full = Matrix::Zero(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
        full.middleCols(n.offset, n.i0) = g;
        accumulate(n.a, full);
        break;
      }
      case Op::block_sum:
        accumulate(n.a, g.replicate(1, n.i0));
        break;
      case Op::block_sum_squares: {
        if (!nodes_[n.a].active) break;
        const Matrix& a = nodes_[n.a].value;
        const Index width = a.cols() / n.i0;
        Matrix da = Matrix::Zero(a.rows(), a.cols());
        for (int i = n.i1; i < n.i2; ++i) {
          da.middleCols(i * width, width) = 2.0 * g.cwiseProduct(a.middleCols(i * width, width));
        }
        accumulate(n.a, da);
        break;
      }
      case Op::block_dot: {
        const Matrix& a = nodes_[n.a].value;
        const Matrix& b = nodes_[n.b].value;
        const Index width = a.cols() / n.i0;
        if (nodes_[n.a].active) {
          Matrix da = Matrix::Zero(a.rows(), a.cols());
          for (int i = n.i1; i < n.i2; ++i) da.middleCols(i * width, width) = g.cwiseProduct(b.middleCols(i * width, width));
          accumulate(n.a, da);
        }
        if (nodes_[n.b].active) {
          Matrix db = Matrix::Zero(b.rows(), b.cols());
          for (int i = n.i1; i < n.i2; ++i) db.middleCols(i * width, width) = g.cwiseProduct(a.middleCols(i * width, width));
          accumulate(n.b, db);
        }
        break;
      }
      case Op::block_mix: {
        if (!nodes_[n.a].active) break;
        const Index blocks = n.aux.cols();
        const Index width = g.cols() / blocks;
        Matrix da = Matrix::Zero(g.rows(), g.cols());
        for (Index i = 0; i < blocks; ++i) {
          for (Index j = 0; j < blocks; ++j) {
            if (n.aux(i, j) != 0.0) da.middleCols(j * width, width) += n.aux(i, j) * g.middleCols(i * width, width);
          }
        }
        accumulate(n.a, da);
        break;
      }
      case Op::hadamard_const:
        accumulate(n.a, g.cwiseProduct(n.aux));
        break;
      case Op::dot_const:
        accumulate(n.a, g(0, 0) * n.aux);
        break;
      case Op::sum:
        accumulate(n.a, Matrix::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(), g(0, 0)));
        break;
      case Op::reciprocal:
        accumulate(n.a, -g.cwiseProduct(n.value.cwiseAbs2()));
        break;
      case Op::scale_by:
        accumulate(n.a, nodes_[n.b].value(0, 0) * g);
        accumulate(n.b, Matrix::Constant(1, 1, g.cwiseProduct(nodes_[n.a].value).sum()));
        break;
    }
    adj[id].resize(0, 0);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Spatial jets

namespace {

std::optional<Var> add_opt(const std::optional<Var>& a, const std::optional<Var>& b) {
  if (a && b) return *a + *b;
  if (a) return a;
  return b;
}

void require_compatible(const SpatialJet& a, const SpatialJet& b) {
  if (a.order != b.order || a.directions != b.directions || a.batch != b.batch || a.lap_first != b.lap_first) {
    throw std::invalid_argument("spatial jets have incompatible layouts");
  }
}

SpatialJet like(const SpatialJet& proto, Var value) {
  SpatialJet out;
  out.value = value;
  out.order = proto.order;
  out.directions = proto.directions;
  out.lap_first = proto.lap_first;
  out.batch = proto.batch;
  return out;
}

}  // namespace

Var SpatialJet::derivative(int i) const {
  if (!tangents) throw std::logic_error("spatial jet does not track first derivatives");
  if (i < 0 || i >= directions) throw std::out_of_range("derivative direction out of range");
  return tangents->tape->col_block(*tangents, static_cast<Index>(i) * batch, batch);
}

SpatialJet input_jet(Tape& tape, const Matrix& x, int order, int lap_first) {
  require(order >= 0 && order <= 2, "jet order must be 0, 1 or 2");
  const auto dim = static_cast<int>(x.rows());
  require(lap_first >= 0 && lap_first <= dim, "Laplacian direction range out of bounds");
  SpatialJet jet;
  jet.value = tape.constant(x);
  jet.order = order;
  jet.directions = dim;
  jet.lap_first = lap_first;
  jet.batch = x.cols();
  if (order >= 1) {
    Matrix seed = Matrix::Zero(dim, dim * x.cols());
    for (int i = 0; i < dim; ++i) seed.row(i).segment(i * x.cols(), x.cols()).setOnes();
    jet.tangents = tape.constant(std::move(seed));
  }
  return jet;
}

SpatialJet linear(Var weight, const SpatialJet& x) {
  Tape& t = *weight.tape;
  SpatialJet out = like(x, t.matmul(weight, x.value));
  if (x.tangents) out.tangents = t.matmul(weight, *x.tangents);
  if (x.laplacian) out.laplacian = t.matmul(weight, *x.laplacian);
  return out;
}

SpatialJet add(const SpatialJet& a, const SpatialJet& b) {
  require_compatible(a, b);
  SpatialJet out = like(a, a.value + b.value);
  out.tangents = add_opt(a.tangents, b.tangents);
  out.laplacian = add_opt(a.laplacian, b.laplacian);
  return out;
}

SpatialJet add_bias(const SpatialJet& a, Var bias) {
  SpatialJet out = a;
  out.value = a.value.tape->add_bias(a.value, bias);
  return out;
}

SpatialJet hadamard(const SpatialJet& a, const SpatialJet& b) {
  require_compatible(a, b);
  Tape& t = *a.value.tape;
  SpatialJet out = like(a, t.hadamard(a.value, b.value));
  if (a.order >= 1) {
    const int k = a.directions;
    out.tangents = t.hadamard(*a.tangents, t.tile(b.value, k)) + t.hadamard(t.tile(a.value, k), *b.tangents);
    if (a.order == 2) {
      std::optional<Var> lap;
      if (b.laplacian) lap = t.hadamard(a.value, *b.laplacian);
      if (a.laplacian) lap = add_opt(lap, t.hadamard(b.value, *a.laplacian));
      if (a.lap_first < k) {
        lap = add_opt(lap, t.scale(t.block_dot(*a.tangents, *b.tangents, k, a.lap_first, k), 2.0));
      }
      out.laplacian = lap;
    }
  }
  return out;
}

SpatialJet one_minus(const SpatialJet& a) {
  Tape& t = *a.value.tape;
  SpatialJet out = like(a, t.shift(t.scale(a.value, -1.0), 1.0));
  if (a.tangents) out.tangents = t.scale(*a.tangents, -1.0);
  if (a.laplacian) out.laplacian = t.scale(*a.laplacian, -1.0);
  return out;
}

SpatialJet activation(const SpatialJet& z, Activation act) {
  Tape& t = *z.value.tape;
  SpatialJet out = like(z, t.activation(z.value, act, 0));
  if (z.order >= 1) {
    const int k = z.directions;
    const Var d1 = t.activation(z.value, act, 1);
    out.tangents = t.hadamard(t.tile(d1, k), *z.tangents);
    if (z.order == 2) {
      std::optional<Var> lap;
      if (z.laplacian) lap = t.hadamard(d1, *z.laplacian);
      if (!has_trivial_curvature(act) && z.lap_first < k) {
        const Var d2 = t.activation(z.value, act, 2);
        lap = add_opt(lap, t.hadamard(d2, t.block_sum_squares(*z.tangents, k, z.lap_first, k)));
      }
      out.laplacian = lap;
    }
  }
  return out;
}

}  // namespace gradflow::ad
