#pragma once

#include <vector>

#include "armor/core.hpp"

namespace armor {

/// Row/column normalized weights. Reconstruction: W_ij = r2[i] * w_bar_ij * r1[j].
struct NormalizedWeights {
  DenseMatrix w_bar;
  std::vector<double> r1;  // column L2 norms of W, length d_in
  std::vector<double> r2;  // row L2 norms after column scaling, length d_out
};

/// Column-then-row L2 normalization. Throws DegenerateWeight when a column of
/// W, or a row after column scaling, has norm below 1e-300.
NormalizedWeights normalize(const DenseMatrix& w);

/// Folds the scalings back into the wrappers: A <- diag(r2) A, B <- B diag(r1).
/// Block-diagonal structure is preserved (diagonal scalings never couple blocks).
FactorizationState denormalize(const FactorizationState& state,
                               const NormalizedWeights& norm);

}  // namespace armor
