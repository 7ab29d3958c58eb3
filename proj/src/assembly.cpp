#include "gradflow/assembly.hpp"

#include <algorithm>
#include <stdexcept>

namespace gradflow {

void accumulate_chunks(ValueGradient& acc, const Eigen::VectorXd& theta, Eigen::Index columns, Eigen::Index chunk,
                       const ChunkTerm& term) {
  if (chunk < 1) throw std::invalid_argument("chunk size must be positive");
  if (acc.gradient.size() == 0) acc.gradient = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index start = 0; start < columns; start += chunk) {
    const Eigen::Index count = std::min(chunk, columns - start);
    ad::Tape tape(theta);
    const ad::Var loss = term(tape, start, count);
    acc.value += loss.scalar();
    acc.gradient += tape.gradient(loss);
  }
}

}  // namespace gradflow
