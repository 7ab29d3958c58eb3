#pragma once

// Exact discrete optimal transport for tiny measures by enumerating the
// basic feasible solutions of the transportation polytope.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <vector>

namespace oracle {

inline double transport_lp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
  const int vars = n * m, rank = n + m - 1;
  // Row and column sum constraints; the last column constraint is implied.
  Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(rank, vars);
  Eigen::VectorXd rhs(rank);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) eq(i, i * m + j) = 1.0;
    rhs(i) = a(i);
  }
  for (int j = 0; j + 1 < m; ++j) {
    for (int i = 0; i < n; ++i) eq(n + j, i * m + j) = 1.0;
    rhs(n + j) = b(j);
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(rank));
  // Iterate over all rank-sized subsets of the variables.
  std::vector<bool> mask(static_cast<std::size_t>(vars), false);
  std::fill(mask.begin(), mask.begin() + rank, true);
  do {
    int c = 0;
    for (int v = 0; v < vars; ++v)
      if (mask[v]) pick[c++] = v;
    Eigen::MatrixXd basis(rank, rank);
    for (int k = 0; k < rank; ++k) basis.col(k) = eq.col(pick[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
    if (lu.rank() < rank) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    if ((x.array() < -1e-12).any()) continue;
    double value = 0.0;
    for (int k = 0; k < rank; ++k) value += x(k) * cost(pick[k] / m, pick[k] % m);
    best = std::min(best, value);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace oracle
