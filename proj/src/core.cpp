#include "armor/core.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace armor {

namespace {

void check_finite(const std::vector<double>& data) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw ContractViolation("DenseMatrix entry is not finite");
    }
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) {
    throw ContractViolation("DenseMatrix dimensions must be positive");
  }
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ContractViolation("DenseMatrix dimensions must be positive");
  }
  if (data_.size() != rows * cols) {
    throw ContractViolation("DenseMatrix data length does not match shape");
  }
  check_finite(data_);
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::block(std::size_t bi, std::size_t bj,
                               std::size_t block_size) const {
  if ((bi + 1) * block_size > rows_ || (bj + 1) * block_size > cols_) {
    throw ContractViolation("block index out of range");
  }
  DenseMatrix out(block_size, block_size);
  for (std::size_t r = 0; r < block_size; ++r) {
    for (std::size_t c = 0; c < block_size; ++c) {
      out.at(r, c) = at(bi * block_size + r, bj * block_size + c);
    }
  }
  return out;
}

void DenseMatrix::set_block(std::size_t bi, std::size_t bj,
                            const DenseMatrix& blk) {
  const std::size_t bs = blk.rows();
  if (blk.cols() != bs || (bi + 1) * bs > rows_ || (bj + 1) * bs > cols_) {
    throw ContractViolation("set_block shape or index mismatch");
  }
  for (std::size_t r = 0; r < bs; ++r) {
    for (std::size_t c = 0; c < bs; ++c) {
      at(bi * bs + r, bj * bs + c) = blk.at(r, c);
    }
  }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul inner dimension mismatch");
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out.at(j, i) = a.at(i, j);
    }
  }
  return out;
}

BlockDiagonalMatrix::BlockDiagonalMatrix(std::size_t dim, std::size_t block_size,
                                         std::vector<DenseMatrix> blocks)
    : dim_(dim), block_size_(block_size), blocks_(std::move(blocks)) {
  if (dim == 0 || block_size == 0 || dim % block_size != 0) {
    throw ContractViolation("block_size must divide dim");
  }
  if (blocks_.size() != dim / block_size) {
    throw ContractViolation("wrong number of diagonal blocks");
  }
  for (const auto& b : blocks_) {
    if (b.rows() != block_size || b.cols() != block_size) {
      throw ContractViolation("diagonal block has wrong shape");
    }
  }
}

BlockDiagonalMatrix BlockDiagonalMatrix::identity(std::size_t dim,
                                                  std::size_t block_size) {
  std::vector<DenseMatrix> blocks(dim / block_size,
                                  DenseMatrix::identity(block_size));
  return BlockDiagonalMatrix(dim, block_size, std::move(blocks));
}

DenseMatrix BlockDiagonalMatrix::to_dense() const {
  DenseMatrix out(dim_, dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    out.set_block(i, i, blocks_[i]);
  }
  return out;
}

void SparseCore24::validate_mask(std::size_t rows, std::size_t cols,
                                 const std::vector<std::uint8_t>& mask) {
  if (cols % 4 != 0) {
    throw ContractViolation("sparse core column count must be divisible by 4");
  }
  if (mask.size() != rows * cols) {
    throw ContractViolation("mask shape does not match values");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < cols / 4; ++k) {
      int set = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        set += mask[i * cols + 4 * k + j] ? 1 : 0;
      }
      if (set != 2) {
        throw ContractViolation("mask group (" + std::to_string(i) + "," +
                                std::to_string(k) +
                                ") violates the 2-in-4 pattern");
      }
    }
  }
}

SparseCore24::SparseCore24(DenseMatrix values, std::vector<std::uint8_t> mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  validate_mask(values_.rows(), values_.cols(), mask_);
}

void SparseCore24::set_group(std::size_t i, std::size_t k, int kept0, int kept1,
                             double v0, double v1) {
  if (kept0 < 0 || kept1 > 3 || kept0 >= kept1) {
    throw ContractViolation("set_group kept indices must be ascending in [0,4)");
  }
  const std::size_t base = i * values_.cols() + 4 * k;
  for (int j = 0; j < 4; ++j) {
    mask_[base + j] = 0;
    values_.data()[base + j] = 0.0;
  }
  mask_[base + kept0] = 1;
  mask_[base + kept1] = 1;
  values_.data()[base + kept0] = v0;
  values_.data()[base + kept1] = v1;
}

DenseMatrix SparseCore24::masked_values() const {
  DenseMatrix out = values_;
  for (std::size_t idx = 0; idx < mask_.size(); ++idx) {
    if (!mask_[idx]) out.data()[idx] = 0.0;
  }
  return out;
}

FactorizationState::FactorizationState(BlockDiagonalMatrix a_,
                                       BlockDiagonalMatrix b_,
                                       SparseCore24 core_,
                                       std::size_t block_size_)
    : a(std::move(a_)), b(std::move(b_)), core(std::move(core_)),
      block_size(block_size_) {
  if (a.block_size() != block_size || b.block_size() != block_size) {
    throw ContractViolation("wrapper block sizes disagree with the state");
  }
  if (core.rows() != a.dim() || core.cols() != b.dim()) {
    throw ContractViolation("core shape disagrees with the wrappers");
  }
}

double weighted_frobenius_sq(const DenseMatrix& residual,
                             const std::vector<double>& d) {
  if (residual.cols() != d.size()) {
    throw ContractViolation("weight vector length must match column count");
  }
  for (double w : d) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ContractViolation("column weights must be finite and nonnegative");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < residual.rows(); ++i) {
    for (std::size_t j = 0; j < residual.cols(); ++j) {
      const double r = residual.at(i, j);
      total += r * r * d[j];
    }
  }
  return total;
}

DenseMatrix reconstruct(const FactorizationState& state) {
  const std::size_t bs = state.block_size;
  const DenseMatrix core = state.core.masked_values();
  DenseMatrix out(state.d_out(), state.d_in());
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
      const DenseMatrix cb = matmul(core.block(bi, bj, bs), state.b.block(bj));
      out.set_block(bi, bj, matmul(state.a.block(bi), cb));
    }
  }
  return out;
}

DenseMatrix apply(const FactorizationState& state, const DenseMatrix& x) {
  if (x.rows() != state.d_in()) {
    throw ContractViolation("apply input length must equal d_in");
  }
  const std::size_t bs = state.block_size;
  const std::size_t n = x.cols();

  // y1 = B x, block by block
  DenseMatrix y1(state.d_in(), n);
  for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
    const DenseMatrix& blk = state.b.block(bj);
    for (std::size_t r = 0; r < bs; ++r) {
      for (std::size_t c = 0; c < bs; ++c) {
        const double v = blk.at(r, c);
        if (v == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t) {
          y1.at(bj * bs + r, t) += v * x.at(bj * bs + c, t);
        }
      }
    }
  }

  // y2 = (W' o M) y1, skipping masked-out entries
  DenseMatrix y2(state.d_out(), n);
  for (std::size_t i = 0; i < state.d_out(); ++i) {
    for (std::size_t j = 0; j < state.d_in(); ++j) {
      if (!state.core.mask_at(i, j)) continue;
      const double v = state.core.values().at(i, j);
      for (std::size_t t = 0; t < n; ++t) {
        y2.at(i, t) += v * y1.at(j, t);
      }
    }
  }

  // y = A y2
  DenseMatrix y(state.d_out(), n);
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    const DenseMatrix& blk = state.a.block(bi);
    for (std::size_t r = 0; r < bs; ++r) {
      for (std::size_t c = 0; c < bs; ++c) {
        const double v = blk.at(r, c);
        if (v == 0.0) continue;
        for (std::size_t t = 0; t < n; ++t) {
          y.at(bi * bs + r, t) += v * y2.at(bi * bs + c, t);
        }
      }
    }
  }
  return y;
}

OverheadResult overhead_ratio(std::size_t d_out, std::size_t d_in,
                              std::size_t d_block) {
  if (d_block == 0 || d_out % d_block != 0 || d_in % d_block != 0) {
    throw ContractViolation("d_block must divide both dimensions");
  }
  OverheadResult res;
  res.ratio = static_cast<double>((d_out + d_in) * d_block) /
              (static_cast<double>(d_out) * static_cast<double>(d_in));
  res.exceeds_dense = res.ratio > 1.0;
  return res;
}

OverheadResult overhead_ratio_aggregate(
    const std::vector<std::pair<std::size_t, std::size_t>>& layers,
    std::size_t d_block) {
  if (layers.empty()) {
    throw ContractViolation("aggregate overhead needs at least one layer");
  }
  double wrapper = 0.0;
  double dense = 0.0;
  for (const auto& [d_out, d_in] : layers) {
    if (d_block == 0 || d_out % d_block != 0 || d_in % d_block != 0) {
      throw ContractViolation("d_block must divide every layer shape");
    }
    wrapper += static_cast<double>((d_out + d_in) * d_block);
    dense += static_cast<double>(d_out) * static_cast<double>(d_in);
  }
  OverheadResult res;
  res.ratio = wrapper / dense;
  res.exceeds_dense = res.ratio > 1.0;
  return res;
}

}  // namespace armor
