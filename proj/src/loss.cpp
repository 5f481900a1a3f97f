#include "armor/loss.hpp"

#include <cmath>
#include <utility>

namespace armor {

CalibStats::CalibStats(std::vector<double> values) : d(std::move(values)) {
  if (d.empty()) {
    throw ContractViolation("calibration statistics must be non-empty");
  }
  bool any_nonzero = false;
  for (double v : d) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractViolation("calibration statistics must be finite and >= 0");
    }
    any_nonzero |= v != 0.0;
  }
  all_zero_warning = !any_nonzero;
}

namespace {

void check_shapes(const FactorizationState& state, const DenseMatrix& w_bar,
                  const CalibStats& d) {
  if (w_bar.rows() != state.d_out() || w_bar.cols() != state.d_in() ||
      d.d.size() != state.d_in()) {
    throw ContractViolation("state, target, and calibration shapes disagree");
  }
}

}  // namespace

namespace detail {

DenseMatrix scale_cols(const DenseMatrix& m, const double* w, std::size_t n) {
  if (m.cols() != n) throw ContractViolation("scale_cols length mismatch");
  DenseMatrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) *= w[j];
  }
  return out;
}

DenseMatrix block_core_gradient_unmasked(const FactorizationState& state,
                                         const DenseMatrix& w_bar,
                                         const CalibStats& d,
                                         std::size_t block_i,
                                         std::size_t block_j) {
  const std::size_t bs = state.block_size;
  if (block_i >= state.a.num_blocks() || block_j >= state.b.num_blocks()) {
    throw ContractViolation("block index out of range");
  }
  const DenseMatrix& ab = state.a.block(block_i);
  const DenseMatrix& bb = state.b.block(block_j);
  const DenseMatrix c = state.core.masked_values().block(block_i, block_j, bs);
  const DenseMatrix wb = w_bar.block(block_i, block_j, bs);
  const double* dw = d.d.data() + block_j * bs;

  // R = A C B - Wbar, then G = 2 A^T (R diag(D)) B^T
  DenseMatrix r = matmul(ab, matmul(c, bb));
  for (std::size_t i = 0; i < bs; ++i) {
    for (std::size_t j = 0; j < bs; ++j) r.at(i, j) -= wb.at(i, j);
  }
  DenseMatrix g = matmul(transpose(ab),
                         matmul(scale_cols(r, dw, bs), transpose(bb)));
  for (double& v : g.data()) v *= 2.0;
  return g;
}

}  // namespace detail

double proxy_loss(const FactorizationState& state, const DenseMatrix& w_bar,
                  const CalibStats& d) {
  // Accumulated blockwise in row-major order so traces are bit-reproducible.
  const DenseMatrix per_block = block_losses(state, w_bar, d);
  double total = 0.0;
  for (double v : per_block.data()) total += v;
  return total;
}

DenseMatrix block_losses(const FactorizationState& state,
                         const DenseMatrix& w_bar, const CalibStats& d) {
  check_shapes(state, w_bar, d);
  const std::size_t bs = state.block_size;
  const std::size_t nbi = state.a.num_blocks();
  const std::size_t nbj = state.b.num_blocks();
  const DenseMatrix core = state.core.masked_values();

  DenseMatrix out(nbi, nbj);
  for (std::size_t bi = 0; bi < nbi; ++bi) {
    for (std::size_t bj = 0; bj < nbj; ++bj) {
      const DenseMatrix rec =
          matmul(state.a.block(bi), matmul(core.block(bi, bj, bs),
                                           state.b.block(bj)));
      double l = 0.0;
      for (std::size_t r = 0; r < bs; ++r) {
        for (std::size_t c = 0; c < bs; ++c) {
          const double diff = w_bar.at(bi * bs + r, bj * bs + c) - rec.at(r, c);
          l += diff * diff * d.d[bj * bs + c];
        }
      }
      out.at(bi, bj) = l;
    }
  }
  return out;
}

GradientBundle gradients(const FactorizationState& state,
                         const DenseMatrix& w_bar, const CalibStats& d) {
  check_shapes(state, w_bar, d);
  const std::size_t bs = state.block_size;
  const std::size_t nbi = state.a.num_blocks();
  const std::size_t nbj = state.b.num_blocks();
  const DenseMatrix core = state.core.masked_values();

  std::vector<DenseMatrix> ga(nbi, DenseMatrix(bs, bs));
  std::vector<DenseMatrix> gb(nbj, DenseMatrix(bs, bs));
  DenseMatrix gw(state.d_out(), state.d_in());

  for (std::size_t bi = 0; bi < nbi; ++bi) {
    const DenseMatrix& ab = state.a.block(bi);
    const DenseMatrix at = transpose(ab);
    for (std::size_t bj = 0; bj < nbj; ++bj) {
      const DenseMatrix& bb = state.b.block(bj);
      const double* dw = d.d.data() + bj * bs;
      const DenseMatrix c = core.block(bi, bj, bs);
      const DenseMatrix wb = w_bar.block(bi, bj, bs);

      const DenseMatrix s = matmul(c, bb);        // S  = C B
      const DenseMatrix sp = matmul(ab, c);       // S' = A C
      const DenseMatrix sd = detail::scale_cols(s, dw, bs);  // S diag(D)
      const DenseMatrix st = transpose(s);

      // dA += 2 A (S D S^T) - 2 Wbar D S^T
      DenseMatrix da = matmul(ab, matmul(sd, st));
      const DenseMatrix wds = matmul(detail::scale_cols(wb, dw, bs), st);
      for (std::size_t i = 0; i < bs * bs; ++i) {
        ga[bi].data()[i] += 2.0 * (da.data()[i] - wds.data()[i]);
      }

      // dB += 2 S'^T S' B D - 2 S'^T Wbar D
      const DenseMatrix spt = transpose(sp);
      DenseMatrix db = detail::scale_cols(matmul(matmul(spt, sp), bb), dw, bs);
      const DenseMatrix spw = detail::scale_cols(matmul(spt, wb), dw, bs);
      for (std::size_t i = 0; i < bs * bs; ++i) {
        gb[bj].data()[i] += 2.0 * (db.data()[i] - spw.data()[i]);
      }

      // dW' block = (2 A^T (A C B - Wbar) D B^T) o M
      DenseMatrix r = matmul(ab, s);
      for (std::size_t i = 0; i < bs * bs; ++i) r.data()[i] -= wb.data()[i];
      const DenseMatrix g =
          matmul(at, matmul(detail::scale_cols(r, dw, bs), transpose(bb)));
      for (std::size_t r2 = 0; r2 < bs; ++r2) {
        for (std::size_t c2 = 0; c2 < bs; ++c2) {
          const std::size_t gi = bi * bs + r2;
          const std::size_t gj = bj * bs + c2;
          gw.at(gi, gj) = state.core.mask_at(gi, gj) ? 2.0 * g.at(r2, c2) : 0.0;
        }
      }
    }
  }

  return GradientBundle{
      BlockDiagonalMatrix(state.d_out(), bs, std::move(ga)),
      BlockDiagonalMatrix(state.d_in(), bs, std::move(gb)), std::move(gw)};
}

DenseMatrix group_grad_norms(const FactorizationState& state,
                             const DenseMatrix& w_bar, const CalibStats& d,
                             std::size_t block_i, std::size_t block_j,
                             bool l2) {
  check_shapes(state, w_bar, d);
  const std::size_t bs = state.block_size;
  if (bs % 4 != 0) {
    throw ContractViolation("block size must be divisible by 4");
  }
  const DenseMatrix g =
      detail::block_core_gradient_unmasked(state, w_bar, d, block_i, block_j);

  DenseMatrix out(bs, bs / 4);
  for (std::size_t i = 0; i < bs; ++i) {
    for (std::size_t k = 0; k < bs / 4; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        const double v = g.at(i, 4 * k + j);
        acc += l2 ? v * v : std::abs(v);
      }
      out.at(i, k) = l2 ? std::sqrt(acc) : acc;
    }
  }
  return out;
}

}  // namespace armor
