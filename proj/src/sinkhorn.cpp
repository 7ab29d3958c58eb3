#include "gradflow/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gradflow {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd log_weights(const Eigen::VectorXd& w, const char* name) {
  if (w.size() == 0) throw std::invalid_argument(std::string(name) + ": empty measure");
  if (!w.allFinite() || (w.array() < 0.0).any()) {
    throw std::invalid_argument(std::string(name) + ": weights must be finite and nonnegative");
  }
  if (std::abs(w.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(name) + ": weights sum to " + std::to_string(w.sum()) + ", not 1");
  }
  Eigen::VectorXd l(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) l(i) = w(i) > 0.0 ? std::log(w(i)) : kNegInf;
  return l;
}

// -eps * log sum_j exp(shift_j + k_ij), one entry per row of k.
Eigen::VectorXd row_softmin(const Eigen::MatrixXd& k, const Eigen::VectorXd& shift, double eps) {
  const Eigen::MatrixXd m = k.rowwise() + shift.transpose();
  const Eigen::VectorXd top = m.rowwise().maxCoeff();
  const Eigen::VectorXd s = (m.colwise() - top).array().exp().rowwise().sum();
  return -eps * (top.array() + s.array().log()).matrix();
}

// The same over the rows of each column.
Eigen::VectorXd col_softmin(const Eigen::MatrixXd& k, const Eigen::VectorXd& shift, double eps) {
  const Eigen::MatrixXd m = k.colwise() + shift;
  const Eigen::RowVectorXd top = m.colwise().maxCoeff();
  const Eigen::RowVectorXd s = (m.rowwise() - top).array().exp().colwise().sum();
  return (-eps * (top.array() + s.array().log())).matrix().transpose();
}

}  // namespace

Eigen::MatrixXd squared_distance_cost(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("cost: point sets have different dimensions");
  Eigen::MatrixXd c(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) c.col(j) = (x.colwise() - y.col(j)).colwise().squaredNorm().transpose();
  return c;
}

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("Sinkhorn regularization must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("Sinkhorn tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("Sinkhorn iteration cap must be positive");
}

SinkhornState sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost,
                       const SinkhornConfig& config, const Eigen::VectorXd* warm_g) {
  config.validate();
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw std::invalid_argument("cost matrix does not match the measures");
  }
  const Eigen::VectorXd log_a = log_weights(a, "sinkhorn source");
  const Eigen::VectorXd log_b = log_weights(b, "sinkhorn target");
  const double eps = config.epsilon;
  const Eigen::MatrixXd k = -cost / eps;

  SinkhornState s;
  s.epsilon = eps;
  s.g = warm_g ? *warm_g : Eigen::VectorXd::Zero(b.size());
  if (s.g.size() != b.size()) throw std::invalid_argument("warm start potential has the wrong size");
  s.f = row_softmin(k, log_b + s.g / eps, eps);

  // Scaling iterations on a kernel that absorbs the potentials (f, g): the
  // plan is diag(a u) K diag(b v) with K_ij = exp((f_i + g_j - C_ij) / eps).
  // Scalings that leave [1/kAbsorb, kAbsorb] are folded back into f and g.
  constexpr double kAbsorb = 1e30;
  Eigen::MatrixXd kernel;
  Eigen::ArrayXd u, v;
  auto rebuild = [&] {
    kernel = ((k.colwise() + s.f / eps).rowwise() + (s.g / eps).transpose()).array().exp().matrix();
    u = Eigen::ArrayXd::Ones(a.size());
    v = Eigen::ArrayXd::Ones(b.size());
  };
  auto absorb = [&] {
    s.f += eps * u.log().matrix();
    s.g += eps * v.log().matrix();
  };
  rebuild();
  for (int it = 1; it <= config.max_iterations; ++it) {
    v = (kernel.transpose() * (a.array() * u).matrix()).array().inverse();
    const Eigen::ArrayXd rows = (kernel * (b.array() * v).matrix()).array();
    const bool degenerate = !(rows > 0.0).all() || !rows.isFinite().all() || !v.isFinite().all();
    if (degenerate) {
      // Fall back to one exact log-domain sweep and start over from there.
      s.g = col_softmin(k, log_a + s.f / eps, eps);
      s.f = row_softmin(k, log_b + s.g / eps, eps);
      rebuild();
      continue;
    }
    // Row sums of the current plan are a_i u_i rows_i.
    s.marginal_residual = (a.array() * (u * rows - 1.0)).abs().maxCoeff();
    s.iterations = it;
    if (s.marginal_residual < config.tol) {
      s.converged = true;
      break;
    }
    u = rows.inverse();
    if (u.maxCoeff() > kAbsorb || u.minCoeff() < 1.0 / kAbsorb || v.maxCoeff() > kAbsorb ||
        v.minCoeff() < 1.0 / kAbsorb) {
      absorb();
      rebuild();
    }
  }
  absorb();
  if (!s.converged) s.g = col_softmin(k, log_a + s.f / eps, eps);

  s.plan = ((k.colwise() + (log_a + s.f / eps)).rowwise() + (log_b + s.g / eps).transpose()).array().exp().matrix();
  s.transport_cost = s.plan.cwiseProduct(cost).sum();
  s.value = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) > 0.0) s.value += a(i) * s.f(i);
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b(j) > 0.0) s.value += b(j) * s.g(j);
  return s;
}

SinkhornState sinkhorn_symmetric(const Eigen::VectorXd& a, const Eigen::MatrixXd& cost, const SinkhornConfig& config,
                                 const Eigen::VectorXd* warm_f) {
  config.validate();
  if (cost.rows() != a.size() || cost.cols() != a.size()) {
    throw std::invalid_argument("cost matrix does not match the measure");
  }
  const Eigen::VectorXd log_a = log_weights(a, "sinkhorn measure");
  const double eps = config.epsilon;
  const Eigen::MatrixXd k = -cost / eps;

  SinkhornState s;
  s.epsilon = eps;
  s.f = warm_f ? *warm_f : Eigen::VectorXd::Zero(a.size());
  if (s.f.size() != a.size()) throw std::invalid_argument("warm start potential has the wrong size");
  for (int it = 1; it <= config.max_iterations; ++it) {
    const Eigen::VectorXd t = row_softmin(k, log_a + s.f / eps, eps);
    s.marginal_residual = (a.array() * (((s.f - t) / eps).array().exp() - 1.0)).abs().maxCoeff();
    s.iterations = it;
    if (s.marginal_residual < config.tol) {
      s.converged = true;
      break;
    }
    s.f = 0.5 * (s.f + t);
  }
  s.g = s.f;
  const Eigen::VectorXd shift = log_a + s.f / eps;
  s.plan = ((k.colwise() + shift).rowwise() + shift.transpose()).array().exp().matrix();
  s.transport_cost = s.plan.cwiseProduct(cost).sum();
  s.value = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) > 0.0) s.value += 2.0 * a(i) * s.f(i);
  return s;
}

}  // namespace gradflow
