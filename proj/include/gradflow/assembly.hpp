#pragma once

#include "gradflow/autodiff.hpp"

#include <functional>

namespace gradflow {

struct ValueGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Loss term over the point columns [start, start + count), recorded on `tape`.
using ChunkTerm = std::function<ad::Var(ad::Tape&, Eigen::Index start, Eigen::Index count)>;

// Small slices keep the per-tape intermediates in cache.
inline constexpr Eigen::Index kDefaultChunk = 64;

/// Adds sum_c term(c) and its parameter gradient to `acc`, one fresh tape per
/// chunk of at most `chunk` columns, reduced in chunk order. Valid for losses
/// that are sums over points, which keeps tape memory bounded.
void accumulate_chunks(ValueGradient& acc, const Eigen::VectorXd& theta, Eigen::Index columns, Eigen::Index chunk,
                       const ChunkTerm& term);

}  // namespace gradflow
