#include "armor/sparse_update.hpp"

#include <cmath>
#include <thread>
#include <utility>

#include "armor/rng.hpp"

namespace armor {

int mask_index(int i1, int i2) {
  for (int m = 0; m < 6; ++m) {
    if (kMaskPairs[m].first == i1 && kMaskPairs[m].second == i2) return m;
  }
  throw ContractViolation("invalid kept-index pair");
}

DenseMatrix selection_probs(const DenseMatrix& grad_norms,
                            SelectionHeuristic heuristic) {
  double total = 0.0;
  for (double v : grad_norms.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractViolation("gradient norms must be finite and nonnegative");
    }
    total += v;
  }

  DenseMatrix probs(grad_norms.rows(), grad_norms.cols());
  const std::size_t n = probs.data().size();

  if (heuristic == SelectionHeuristic::L1Greedy) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (grad_norms.data()[i] > grad_norms.data()[best]) best = i;
    }
    probs.data()[best] = 1.0;
    return probs;
  }

  if (heuristic == SelectionHeuristic::UniformRandom || total == 0.0) {
    for (double& v : probs.data()) v = 1.0 / static_cast<double>(n);
    return probs;
  }
  for (std::size_t i = 0; i < n; ++i) {
    probs.data()[i] = grad_norms.data()[i] / total;
  }
  return probs;
}

std::size_t select_group(const DenseMatrix& grad_norms,
                         SelectionHeuristic heuristic, double u) {
  const DenseMatrix probs = selection_probs(grad_norms, heuristic);
  const std::size_t n = probs.data().size();
  if (heuristic == SelectionHeuristic::L1Greedy) {
    for (std::size_t i = 0; i < n; ++i) {
      if (probs.data()[i] == 1.0) return i;
    }
  }
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += probs.data()[i];
    if (u < cum) return i;
  }
  return n - 1;  // guard against accumulated rounding
}

namespace {

// Moore-Penrose pseudo-inverse of a symmetric PSD 2x2 via a Jacobi rotation.
// Singular values below 1e-12 of the largest are treated as zero.
std::array<double, 4> pinv_sym2(double h00, double h01, double h11) {
  const double theta = 0.5 * std::atan2(2.0 * h01, h00 - h11);
  const double c = std::cos(theta), s = std::sin(theta);
  const double l1 = c * c * h00 + 2.0 * c * s * h01 + s * s * h11;
  const double l2 = s * s * h00 - 2.0 * c * s * h01 + c * c * h11;
  const double lmax = std::max(std::abs(l1), std::abs(l2));
  const double cutoff = 1e-12 * lmax;
  const double i1 = (std::abs(l1) > cutoff && lmax > 0.0) ? 1.0 / l1 : 0.0;
  const double i2 = (std::abs(l2) > cutoff && lmax > 0.0) ? 1.0 / l2 : 0.0;
  // R diag(i) R^T with R = [[c,-s],[s,c]]
  return {c * c * i1 + s * s * i2, c * s * (i1 - i2),
          c * s * (i1 - i2), s * s * i1 + c * c * i2};
}

}  // namespace

std::optional<MaskCandidate> sweep_group(const GroupSolveProblem& problem) {
  const std::size_t bs = problem.delta_w.rows();
  if (problem.delta_w.cols() != bs || problem.a.size() != bs ||
      problem.b_group_rows.rows() != 4 || problem.b_group_rows.cols() != bs ||
      problem.d.size() != bs) {
    throw ContractViolation("group solve problem shapes disagree");
  }

  double a_sq = 0.0;
  for (double v : problem.a) a_sq += v * v;
  if (a_sq == 0.0) return std::nullopt;

  // u_p = sum_n delta_w[n,p] * a[n]
  std::vector<double> u(bs, 0.0);
  for (std::size_t n = 0; n < bs; ++n) {
    const double an = problem.a[n];
    if (an == 0.0) continue;
    for (std::size_t p = 0; p < bs; ++p) {
      u[p] += problem.delta_w.at(n, p) * an;
    }
  }

  // Per group-row r in [0,4): gr[r] = sum_p B[r,p] d[p] u[p],
  // and the 4x4 Gram entries Hrs = sum_p B[r,p] d[p] B[s,p].
  std::array<double, 4> gr{};
  std::array<std::array<double, 4>, 4> gram{};
  for (int r = 0; r < 4; ++r) {
    for (std::size_t p = 0; p < bs; ++p) {
      gr[r] += problem.b_group_rows.at(r, p) * problem.d[p] * u[p];
    }
    for (int s = r; s < 4; ++s) {
      double h = 0.0;
      for (std::size_t p = 0; p < bs; ++p) {
        h += problem.b_group_rows.at(r, p) * problem.d[p] *
             problem.b_group_rows.at(s, p);
      }
      gram[r][s] = gram[s][r] = h;
    }
  }

  std::optional<MaskCandidate> best;
  for (int m = 0; m < 6; ++m) {
    const auto [i1, i2] = kMaskPairs[m];
    const double g0 = gr[i1], g1 = gr[i2];
    const auto hi = pinv_sym2(gram[i1][i1], gram[i1][i2], gram[i2][i2]);

    MaskCandidate cand;
    cand.mask = m;
    cand.kept0 = i1;
    cand.kept1 = i2;
    cand.w0 = (hi[0] * g0 + hi[1] * g1) / a_sq;
    cand.w1 = (hi[2] * g0 + hi[3] * g1) / a_sq;
    cand.reduction = (g0 * (hi[0] * g0 + hi[1] * g1) +
                      g1 * (hi[2] * g0 + hi[3] * g1)) / a_sq;

    if (!best || cand.reduction > best->reduction ||
        (cand.reduction == best->reduction && m == problem.incumbent_mask)) {
      best = cand;
    }
  }
  return best;
}

namespace {

void update_block(const FactorizationState& state, const DenseMatrix& w_bar,
                  const CalibStats& d, const SelectionConfig& cfg,
                  std::size_t iteration, std::size_t bi, std::size_t bj,
                  SparseCore24& out_core) {
  const std::size_t bs = state.block_size;
  const bool l2 = cfg.heuristic == SelectionHeuristic::L2Random;

  for (std::size_t g = 0; g < cfg.groups_per_block; ++g) {
    // Selection norms are taken at the pre-iteration core snapshot.
    DenseMatrix norms(bs, bs / 4);
    if (cfg.heuristic != SelectionHeuristic::UniformRandom) {
      norms = group_grad_norms(state, w_bar, d, bi, bj, l2);
    }
    const double u =
        CounterRng::uniform(cfg.rng_seed, iteration, bi, bj, g);
    const std::size_t flat = select_group(norms, cfg.heuristic, u);
    const std::size_t gi = flat / (bs / 4);  // row within block
    const std::size_t gk = flat % (bs / 4);  // group within row

    const std::size_t row = bi * bs + gi;
    const std::size_t col0 = bj * bs + 4 * gk;

    // Freeze everything but the selected group (W'' of the block).
    DenseMatrix frozen(bs, bs);
    for (std::size_t r = 0; r < bs; ++r) {
      for (std::size_t c = 0; c < bs; ++c) {
        const std::size_t fr = bi * bs + r;
        const std::size_t fc = bj * bs + c;
        const bool in_group = (fr == row && fc >= col0 && fc < col0 + 4);
        frozen.at(r, c) = (!in_group && out_core.mask_at(fr, fc))
                              ? out_core.values().at(fr, fc)
                              : 0.0;
      }
    }

    GroupSolveProblem prob;
    const DenseMatrix rec =
        matmul(state.a.block(bi), matmul(frozen, state.b.block(bj)));
    prob.delta_w = DenseMatrix(bs, bs);
    for (std::size_t r = 0; r < bs; ++r) {
      for (std::size_t c = 0; c < bs; ++c) {
        prob.delta_w.at(r, c) = w_bar.at(bi * bs + r, bj * bs + c) - rec.at(r, c);
      }
    }
    prob.a.resize(bs);
    for (std::size_t r = 0; r < bs; ++r) prob.a[r] = state.a.block(bi).at(r, gi);
    prob.b_group_rows = DenseMatrix(4, bs);
    for (int r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < bs; ++c) {
        prob.b_group_rows.at(r, c) = state.b.block(bj).at(4 * gk + r, c);
      }
    }
    prob.d.assign(d.d.begin() + bj * bs, d.d.begin() + (bj + 1) * bs);

    int inc0 = -1, inc1 = -1;
    for (int j = 0; j < 4; ++j) {
      if (out_core.mask_at(row, col0 + j)) (inc0 < 0 ? inc0 : inc1) = j;
    }
    prob.incumbent_mask = mask_index(inc0, inc1);

    const auto cand = sweep_group(prob);
    if (!cand) {
      // ||a|| = 0: the group's contribution is invariant; zero the kept weights
      out_core.set_group(row, col0 / 4, inc0, inc1, 0.0, 0.0);
      continue;
    }
    out_core.set_group(row, col0 / 4, cand->kept0, cand->kept1, cand->w0,
                       cand->w1);
  }
}

}  // namespace

FactorizationState sparse_core_update(const FactorizationState& state,
                                      const DenseMatrix& w_bar,
                                      const CalibStats& d,
                                      const SelectionConfig& cfg,
                                      std::size_t iteration,
                                      std::size_t threads) {
  if (w_bar.rows() != state.d_out() || w_bar.cols() != state.d_in() ||
      d.d.size() != state.d_in()) {
    throw ContractViolation("state, target, and calibration shapes disagree");
  }
  if (state.block_size % 4 != 0) {
    throw ContractViolation("block size must be divisible by 4");
  }

  SparseCore24 core = state.core;
  const std::size_t nbi = state.a.num_blocks();
  const std::size_t nbj = state.b.num_blocks();
  const std::size_t nblocks = nbi * nbj;

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      update_block(state, w_bar, d, cfg, iteration, idx / nbj, idx % nbj, core);
    }
  };

  if (threads <= 1 || nblocks < 2) {
    work(0, nblocks);
  } else {
    const std::size_t nt = std::min(threads, nblocks);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const std::size_t begin = nblocks * t / nt;
      const std::size_t end = nblocks * (t + 1) / nt;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  return FactorizationState(state.a, state.b, std::move(core),
                            state.block_size);
}

}  // namespace armor
