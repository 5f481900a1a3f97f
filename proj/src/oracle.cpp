#include "armor/oracle.hpp"

#include <cmath>
#include <utility>

namespace armor {
namespace oracle {

OracleReport compare(const std::string& name, double reference,
                     double fast_path, double rel_tolerance) {
  OracleReport r;
  r.name = name;
  r.reference = reference;
  r.fast_path = fast_path;
  r.abs_discrepancy = std::abs(reference - fast_path);
  r.rel_discrepancy = r.abs_discrepancy / (1.0 + std::abs(reference));
  r.tolerance = rel_tolerance;
  r.pass = r.rel_discrepancy <= rel_tolerance;
  return r;
}

namespace {

// Minimum-norm solution of the symmetric PSD 2x2 system N w = rhs, solved by
// explicit eigendecomposition from the characteristic polynomial.
std::pair<double, double> solve_sym2_min_norm(double n00, double n01,
                                              double n11, double r0,
                                              double r1) {
  const double tr = n00 + n11;
  const double disc = std::sqrt(std::max(0.0, (n00 - n11) * (n00 - n11) +
                                                  4.0 * n01 * n01));
  const double l1 = 0.5 * (tr + disc);
  const double l2 = 0.5 * (tr - disc);
  const double cutoff = 1e-12 * std::max(std::abs(l1), std::abs(l2));

  auto eigvec = [&](double lambda) -> std::pair<double, double> {
    // (N - lambda I) v = 0; pick the better-conditioned row
    const double a = n00 - lambda, b = n01, c = n11 - lambda;
    double vx, vy;
    if (std::abs(a) + std::abs(b) >= std::abs(b) + std::abs(c)) {
      vx = -b;
      vy = a;
    } else {
      vx = -c;
      vy = b;
    }
    double norm = std::hypot(vx, vy);
    if (norm == 0.0) return {1.0, 0.0};
    return {vx / norm, vy / norm};
  };

  double wx = 0.0, wy = 0.0;
  for (double lambda : {l1, l2}) {
    if (!(std::abs(lambda) > cutoff)) continue;
    auto [vx, vy] = eigvec(lambda);
    const double proj = (vx * r0 + vy * r1) / lambda;
    wx += proj * vx;
    wy += proj * vy;
  }
  return {wx, wy};
}

}  // namespace

std::array<GroupSolveSolution, 6> oracle_group_solve(
    const GroupSolveProblem& problem) {
  const std::size_t bs = problem.delta_w.rows();
  std::array<GroupSolveSolution, 6> out;

  for (int m = 0; m < 6; ++m) {
    const auto [i1, i2] = kMaskPairs[m];

    // Normal equations assembled entry by entry from the definition:
    // minimize sum_{n,p} d_p (dw[n,p] - a_n (w0 B'[0,p] + w1 B'[1,p]))^2
    double n00 = 0.0, n01 = 0.0, n11 = 0.0, r0 = 0.0, r1 = 0.0;
    for (std::size_t n = 0; n < bs; ++n) {
      for (std::size_t p = 0; p < bs; ++p) {
        const double b0 = problem.b_group_rows.at(i1, p);
        const double b1 = problem.b_group_rows.at(i2, p);
        const double an = problem.a[n];
        const double dp = problem.d[p];
        n00 += dp * an * an * b0 * b0;
        n01 += dp * an * an * b0 * b1;
        n11 += dp * an * an * b1 * b1;
        r0 += dp * problem.delta_w.at(n, p) * an * b0;
        r1 += dp * problem.delta_w.at(n, p) * an * b1;
      }
    }
    auto [w0, w1] = solve_sym2_min_norm(n00, n01, n11, r0, r1);

    double loss = 0.0;
    for (std::size_t n = 0; n < bs; ++n) {
      for (std::size_t p = 0; p < bs; ++p) {
        const double model =
            problem.a[n] * (w0 * problem.b_group_rows.at(i1, p) +
                            w1 * problem.b_group_rows.at(i2, p));
        const double diff = problem.delta_w.at(n, p) - model;
        loss += problem.d[p] * diff * diff;
      }
    }
    out[m] = GroupSolveSolution{w0, w1, loss};
  }
  return out;
}

ExhaustiveResult oracle_exhaustive_mask(const DenseMatrix& w_bar,
                                        const CalibStats& d,
                                        std::size_t max_groups) {
  if (w_bar.cols() % 4 != 0 || w_bar.cols() != d.d.size()) {
    throw ContractViolation("bad shapes for exhaustive mask search");
  }
  const std::size_t groups = w_bar.rows() * w_bar.cols() / 4;
  if (groups > max_groups || max_groups > 12) {
    throw ContractViolation("instance too large for exhaustive search");
  }

  // With identity wrappers the kept-weight optimum keeps w_bar exactly, so a
  // combination's loss is the data-weighted energy of the pruned entries.
  std::size_t total = 1;
  for (std::size_t g = 0; g < groups; ++g) total *= 6;

  double best_loss = 0.0;
  std::vector<int> best_choice(groups, 0);
  bool have_best = false;

  std::vector<int> choice(groups, 0);
  for (std::size_t combo = 0; combo < total; ++combo) {
    std::size_t c = combo;
    for (std::size_t g = 0; g < groups; ++g) {
      choice[g] = static_cast<int>(c % 6);
      c /= 6;
    }
    double loss = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t row = g / (w_bar.cols() / 4);
      const std::size_t col0 = 4 * (g % (w_bar.cols() / 4));
      const auto [i1, i2] = kMaskPairs[choice[g]];
      for (int j = 0; j < 4; ++j) {
        if (j == i1 || j == i2) continue;
        const double v = w_bar.at(row, col0 + j);
        loss += v * v * d.d[col0 + j];
      }
    }
    if (!have_best || loss < best_loss) {
      best_loss = loss;
      best_choice = choice;
      have_best = true;
    }
  }

  std::vector<std::uint8_t> mask(w_bar.rows() * w_bar.cols(), 0);
  DenseMatrix values(w_bar.rows(), w_bar.cols());
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t row = g / (w_bar.cols() / 4);
    const std::size_t col0 = 4 * (g % (w_bar.cols() / 4));
    const auto [i1, i2] = kMaskPairs[best_choice[g]];
    mask[row * w_bar.cols() + col0 + i1] = 1;
    mask[row * w_bar.cols() + col0 + i2] = 1;
    values.at(row, col0 + i1) = w_bar.at(row, col0 + i1);
    values.at(row, col0 + i2) = w_bar.at(row, col0 + i2);
  }
  return ExhaustiveResult{SparseCore24(std::move(values), std::move(mask)),
                          best_loss};
}

GradientBundle oracle_fd_gradient(const FactorizationState& state,
                                  const DenseMatrix& w_bar,
                                  const CalibStats& d, double step) {
  if (!(step > 0.0)) {
    throw ContractViolation("finite-difference step must be positive");
  }
  FactorizationState probe = state;
  auto eval = [&]() {
    const DenseMatrix rec = reconstruct(probe);
    double total = 0.0;
    for (std::size_t i = 0; i < rec.rows(); ++i) {
      for (std::size_t j = 0; j < rec.cols(); ++j) {
        const double diff = w_bar.at(i, j) - rec.at(i, j);
        total += diff * diff * d.d[j];
      }
    }
    return total;
  };
  auto central = [&](double& x) {
    const double orig = x;
    x = orig + step;
    const double fp = eval();
    x = orig - step;
    const double fm = eval();
    x = orig;
    return (fp - fm) / (2.0 * step);
  };

  const std::size_t bs = state.block_size;
  std::vector<DenseMatrix> ga, gb;
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    DenseMatrix g(bs, bs);
    for (std::size_t i = 0; i < bs * bs; ++i) {
      g.data()[i] = central(probe.a.block(bi).data()[i]);
    }
    ga.push_back(std::move(g));
  }
  for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
    DenseMatrix g(bs, bs);
    for (std::size_t i = 0; i < bs * bs; ++i) {
      g.data()[i] = central(probe.b.block(bj).data()[i]);
    }
    gb.push_back(std::move(g));
  }
  DenseMatrix gw(state.d_out(), state.d_in());
  for (std::size_t i = 0; i < state.d_out(); ++i) {
    for (std::size_t j = 0; j < state.d_in(); ++j) {
      if (!state.core.mask_at(i, j)) continue;
      gw.at(i, j) = central(probe.core.values().at(i, j));
    }
  }
  return GradientBundle{BlockDiagonalMatrix(state.d_out(), bs, std::move(ga)),
                        BlockDiagonalMatrix(state.d_in(), bs, std::move(gb)),
                        std::move(gw)};
}

}  // namespace oracle
}  // namespace armor
