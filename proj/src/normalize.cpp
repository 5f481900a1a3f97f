#include "armor/normalize.hpp"

#include <cmath>
#include <string>

namespace armor {

namespace {
constexpr double kNormFloor = 1e-300;
}

NormalizedWeights normalize(const DenseMatrix& w) {
  const std::size_t d_out = w.rows();
  const std::size_t d_in = w.cols();

  NormalizedWeights out;
  out.r1.resize(d_in);
  out.r2.resize(d_out);

  for (std::size_t j = 0; j < d_in; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d_out; ++i) s += w.at(i, j) * w.at(i, j);
    const double norm = std::sqrt(s);
    if (!(norm > kNormFloor)) {
      throw DegenerateWeight("column " + std::to_string(j) + " has zero norm",
                             static_cast<long>(j));
    }
    out.r1[j] = norm;
  }

  DenseMatrix v(d_out, d_in);
  for (std::size_t i = 0; i < d_out; ++i) {
    for (std::size_t j = 0; j < d_in; ++j) {
      v.at(i, j) = w.at(i, j) / out.r1[j];
    }
  }

  for (std::size_t i = 0; i < d_out; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d_in; ++j) s += v.at(i, j) * v.at(i, j);
    const double norm = std::sqrt(s);
    if (!(norm > kNormFloor)) {
      throw DegenerateWeight(
          "row " + std::to_string(i) + " has zero norm after column scaling",
          static_cast<long>(i));
    }
    out.r2[i] = norm;
  }

  out.w_bar = DenseMatrix(d_out, d_in);
  for (std::size_t i = 0; i < d_out; ++i) {
    for (std::size_t j = 0; j < d_in; ++j) {
      out.w_bar.at(i, j) = v.at(i, j) / out.r2[i];
    }
  }
  return out;
}

FactorizationState denormalize(const FactorizationState& state,
                               const NormalizedWeights& norm) {
  if (norm.r2.size() != state.d_out() || norm.r1.size() != state.d_in()) {
    throw ContractViolation("scaling vector lengths disagree with the state");
  }
  const std::size_t bs = state.block_size;

  std::vector<DenseMatrix> a_blocks;
  a_blocks.reserve(state.a.num_blocks());
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    DenseMatrix blk = state.a.block(bi);
    for (std::size_t r = 0; r < bs; ++r) {
      const double s = norm.r2[bi * bs + r];
      for (std::size_t c = 0; c < bs; ++c) blk.at(r, c) *= s;
    }
    a_blocks.push_back(std::move(blk));
  }

  std::vector<DenseMatrix> b_blocks;
  b_blocks.reserve(state.b.num_blocks());
  for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
    DenseMatrix blk = state.b.block(bj);
    for (std::size_t c = 0; c < bs; ++c) {
      const double s = norm.r1[bj * bs + c];
      for (std::size_t r = 0; r < bs; ++r) blk.at(r, c) *= s;
    }
    b_blocks.push_back(std::move(blk));
  }

  return FactorizationState(
      BlockDiagonalMatrix(state.d_out(), bs, std::move(a_blocks)),
      BlockDiagonalMatrix(state.d_in(), bs, std::move(b_blocks)),
      state.core, bs);
}

}  // namespace armor
