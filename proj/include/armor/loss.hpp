#pragma once

#include <vector>

#include "armor/core.hpp"

namespace armor {

/// Per-input-dimension activation energy d_j = ||X_j||_2^2.
struct CalibStats {
  std::vector<double> d;
  bool all_zero_warning = false;

  CalibStats() = default;
  explicit CalibStats(std::vector<double> values);
};

struct GradientBundle {
  BlockDiagonalMatrix grad_a;
  BlockDiagonalMatrix grad_b;
  DenseMatrix grad_w;  // zero outside the mask
};

/// Data-weighted squared reconstruction error of the factorization against w_bar.
double proxy_loss(const FactorizationState& state, const DenseMatrix& w_bar,
                  const CalibStats& d);

/// Per-block losses; entries sum to proxy_loss. Shape
/// (d_out/d_block) x (d_in/d_block).
DenseMatrix block_losses(const FactorizationState& state,
                         const DenseMatrix& w_bar, const CalibStats& d);

/// Analytic gradients with respect to A blocks, B blocks, and the masked core.
GradientBundle gradients(const FactorizationState& state,
                         const DenseMatrix& w_bar, const CalibStats& d);

/// Per-group norms of the block-loss gradient taken with respect to the full
/// (unmasked) core entries. Shape d_block x (d_block/4). `l2` selects the L2
/// variant, default is L1.
DenseMatrix group_grad_norms(const FactorizationState& state,
                             const DenseMatrix& w_bar, const CalibStats& d,
                             std::size_t block_i, std::size_t block_j,
                             bool l2 = false);

inline DenseMatrix group_grad_l1(const FactorizationState& state,
                                 const DenseMatrix& w_bar, const CalibStats& d,
                                 std::size_t block_i, std::size_t block_j) {
  return group_grad_norms(state, w_bar, d, block_i, block_j, false);
}

inline DenseMatrix group_grad_l2(const FactorizationState& state,
                                 const DenseMatrix& w_bar, const CalibStats& d,
                                 std::size_t block_i, std::size_t block_j) {
  return group_grad_norms(state, w_bar, d, block_i, block_j, true);
}

namespace detail {

// Raw (unmasked) gradient of the block (i,j) loss with respect to the core
// entries: 2 A^T (A C B - Wbar) D B^T, with C the masked core block.
DenseMatrix block_core_gradient_unmasked(const FactorizationState& state,
                                         const DenseMatrix& w_bar,
                                         const CalibStats& d,
                                         std::size_t block_i,
                                         std::size_t block_j);

// m * diag(w) (scales column j of m by w[j])
DenseMatrix scale_cols(const DenseMatrix& m, const double* w, std::size_t n);

}  // namespace detail

}  // namespace armor
