#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "armor/errors.hpp"

namespace armor {

/// Row-major dense matrix of 64-bit floats. Entries are validated finite on
/// construction; a vector is a rows x 1 matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // Copy of the block_size x block_size submatrix with top-left corner at
  // (bi*block_size, bj*block_size).
  DenseMatrix block(std::size_t bi, std::size_t bj, std::size_t block_size) const;
  void set_block(std::size_t bi, std::size_t bj, const DenseMatrix& blk);

  bool same_shape(const DenseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

/// Square block-diagonal matrix stored as its diagonal blocks only.
class BlockDiagonalMatrix {
 public:
  BlockDiagonalMatrix() = default;
  BlockDiagonalMatrix(std::size_t dim, std::size_t block_size,
                      std::vector<DenseMatrix> blocks);

  static BlockDiagonalMatrix identity(std::size_t dim, std::size_t block_size);

  std::size_t dim() const { return dim_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t num_blocks() const { return blocks_.size(); }

  const DenseMatrix& block(std::size_t i) const { return blocks_[i]; }
  DenseMatrix& block(std::size_t i) { return blocks_[i]; }

  // Test-support densification; production paths stay block-local.
  DenseMatrix to_dense() const;

 private:
  std::size_t dim_ = 0;
  std::size_t block_size_ = 0;
  std::vector<DenseMatrix> blocks_;
};

/// Dense value matrix plus a binary mask obeying the 2-in-4 pattern: every
/// aligned group of four consecutive columns in a row has exactly two set bits.
class SparseCore24 {
 public:
  SparseCore24() = default;
  SparseCore24(DenseMatrix values, std::vector<std::uint8_t> mask);

  std::size_t rows() const { return values_.rows(); }
  std::size_t cols() const { return values_.cols(); }

  const DenseMatrix& values() const { return values_; }
  DenseMatrix& values() { return values_; }

  bool mask_at(std::size_t i, std::size_t j) const {
    return mask_[i * values_.cols() + j] != 0;
  }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  // Overwrites one group (row i, columns 4k..4k+3). kept must hold exactly
  // two ascending indices in [0,4); non-kept entries of the group are zeroed.
  void set_group(std::size_t i, std::size_t k, int kept0, int kept1,
                 double v0, double v1);

  // values with the mask applied (W' with off-mask entries zeroed)
  DenseMatrix masked_values() const;

  static void validate_mask(std::size_t rows, std::size_t cols,
                            const std::vector<std::uint8_t>& mask);

 private:
  DenseMatrix values_;
  std::vector<std::uint8_t> mask_;
};

/// The factorization being optimized: block-diagonal wrappers around a 2:4
/// sparse core.
struct FactorizationState {
  BlockDiagonalMatrix a;  // d_out x d_out
  BlockDiagonalMatrix b;  // d_in x d_in
  SparseCore24 core;      // d_out x d_in
  std::size_t block_size = 0;

  FactorizationState() = default;
  FactorizationState(BlockDiagonalMatrix a_, BlockDiagonalMatrix b_,
                     SparseCore24 core_, std::size_t block_size_);

  std::size_t d_out() const { return a.dim(); }
  std::size_t d_in() const { return b.dim(); }
};

/// Sum over entries of residual_{ij}^2 * d_j. `d` must have one weight per
/// column. Accumulation is row-major and single-threaded for reproducibility.
double weighted_frobenius_sq(const DenseMatrix& residual,
                             const std::vector<double>& d);

/// A (W' o M) B, computed block by block without densifying the wrappers.
DenseMatrix reconstruct(const FactorizationState& state);

/// A ((W' o M) (B x)) for a batch x of shape d_in x n (columns are inputs).
DenseMatrix apply(const FactorizationState& state, const DenseMatrix& x);

struct OverheadResult {
  double ratio = 0.0;
  bool exceeds_dense = false;  // wrappers hold more parameters than the layer
};

/// ((d_out + d_in) * d_block) / (d_out * d_in)
OverheadResult overhead_ratio(std::size_t d_out, std::size_t d_in,
                              std::size_t d_block);

/// Aggregate over layer shapes: sum of wrapper parameter counts over the sum
/// of dense parameter counts.
OverheadResult overhead_ratio_aggregate(
    const std::vector<std::pair<std::size_t, std::size_t>>& layers,
    std::size_t d_block);

}  // namespace armor
