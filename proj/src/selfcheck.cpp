#include "armor/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "armor/driver.hpp"
#include "armor/oracle.hpp"

namespace armor {

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows,
                          std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

CalibStats random_calib(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(0.05, 2.0);
  std::vector<double> d(n);
  for (double& v : d) v = dist(rng);
  return CalibStats(std::move(d));
}

// A generic optimization state: normalized target, perturbed wrappers, and a
// core a few sequential steps away from the initializer.
struct Instance {
  DenseMatrix w_bar;
  CalibStats d;
  FactorizationState state;
};

Instance random_instance(std::mt19937_64& rng, std::size_t d_out,
                         std::size_t d_in, std::size_t bs) {
  const NormalizedWeights norm = normalize(random_matrix(rng, d_out, d_in));
  CalibStats d = random_calib(rng, d_in);
  OptimizerConfig cfg;
  cfg.d_block = bs;
  FactorizationState state = init_state(norm.w_bar, d, cfg);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    for (double& v : state.a.block(bi).data()) v += jitter(rng);
  }
  for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
    for (double& v : state.b.block(bj).data()) v += jitter(rng);
  }
  return Instance{norm.w_bar, std::move(d), std::move(state)};
}

GroupSolveProblem random_problem(std::mt19937_64& rng, std::size_t bs) {
  GroupSolveProblem p;
  p.delta_w = random_matrix(rng, bs, bs);
  p.a.resize(bs);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : p.a) v = dist(rng);
  p.b_group_rows = random_matrix(rng, 4, bs);
  p.d = random_calib(rng, bs).d;
  p.incumbent_mask = static_cast<int>(rng() % 6);
  return p;
}

bool check(std::ostream& os, const std::string& name, bool ok,
           const std::string& detail = "") {
  os << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!detail.empty()) os << "  (" << detail << ")";
  os << "\n";
  return ok;
}

}  // namespace

bool run_selfcheck(std::ostream& os) {
  bool all = true;
  std::mt19937_64 rng(20240817);

  // Mask sweep vs. brute-force least squares.
  {
    double worst = 0.0;
    bool argmin_ok = true;
    int count = 0;
    for (std::size_t bs : {4, 8, 16}) {
      for (int rep = 0; rep < 70; ++rep) {
        const GroupSolveProblem p = random_problem(rng, bs);
        const auto fast = sweep_group(p);
        const auto ref = oracle::oracle_group_solve(p);
        double empty_loss = 0.0;
        for (std::size_t n = 0; n < bs; ++n) {
          for (std::size_t c = 0; c < bs; ++c) {
            empty_loss += p.d[c] * p.delta_w.at(n, c) * p.delta_w.at(n, c);
          }
        }
        int ref_best = 0;
        for (int m = 1; m < 6; ++m) {
          if (ref[m].full_loss < ref[ref_best].full_loss) ref_best = m;
        }
        const double fast_red = fast->reduction;
        const double ref_red_best = empty_loss - ref[ref_best].full_loss;
        worst = std::max(worst, std::abs(fast_red - ref_red_best) /
                                    (1.0 + std::abs(ref_red_best)));
        // Accept argmin ties: equal reference losses within roundoff.
        if (fast->mask != ref_best &&
            std::abs(ref[fast->mask].full_loss - ref[ref_best].full_loss) >
                1e-8 * (1.0 + std::abs(ref[ref_best].full_loss))) {
          argmin_ok = false;
        }
        ++count;
      }
    }
    all &= check(os, "mask sweep matches brute-force least squares",
                 argmin_ok && worst <= 1e-8,
                 "instances=" + std::to_string(count) +
                     " worst rel=" + std::to_string(worst));
  }

  // Analytic gradients vs. central finite differences.
  {
    bool ok = true;
    for (int rep = 0; rep < 12 && ok; ++rep) {
      const Instance inst = random_instance(rng, 16, 16, 4);
      const GradientBundle an = gradients(inst.state, inst.w_bar, inst.d);
      const GradientBundle fd =
          oracle::oracle_fd_gradient(inst.state, inst.w_bar, inst.d, 1e-6);
      const double loss = proxy_loss(inst.state, inst.w_bar, inst.d);
      const double floor = 1e-8 * (1.0 + loss);
      auto cmp = [&](double a, double f) {
        return std::abs(a - f) <= 1e-5 * std::max(std::abs(a), std::abs(f)) + floor;
      };
      for (std::size_t bi = 0; bi < an.grad_a.num_blocks() && ok; ++bi) {
        for (std::size_t i = 0; i < an.grad_a.block(bi).data().size(); ++i) {
          ok &= cmp(an.grad_a.block(bi).data()[i], fd.grad_a.block(bi).data()[i]);
        }
      }
      for (std::size_t bj = 0; bj < an.grad_b.num_blocks() && ok; ++bj) {
        for (std::size_t i = 0; i < an.grad_b.block(bj).data().size(); ++i) {
          ok &= cmp(an.grad_b.block(bj).data()[i], fd.grad_b.block(bj).data()[i]);
        }
      }
      for (std::size_t i = 0; i < an.grad_w.data().size() && ok; ++i) {
        ok &= cmp(an.grad_w.data()[i], fd.grad_w.data()[i]);
      }
    }
    all &= check(os, "analytic gradients match finite differences", ok);
  }

  // Greedy sparse-only optimization vs. exhaustive search on tiny instances.
  {
    bool ok = true;
    for (int rep = 0; rep < 10 && ok; ++rep) {
      const NormalizedWeights norm = normalize(random_matrix(rng, 4, 4));
      const CalibStats d = random_calib(rng, 4);
      const auto best = oracle::oracle_exhaustive_mask(norm.w_bar, d);
      OptimizerConfig cfg;
      cfg.d_block = 4;
      FactorizationState state = init_state(norm.w_bar, d, cfg);
      SelectionConfig sel;
      sel.heuristic = SelectionHeuristic::L1Random;
      sel.rng_seed = static_cast<std::uint64_t>(rep);
      for (std::size_t t = 1; t <= 50; ++t) {
        state = sparse_core_update(state, norm.w_bar, d, sel, t);
      }
      const double greedy = proxy_loss(state, norm.w_bar, d);
      ok &= greedy >= best.loss - 1e-9;
    }
    all &= check(os, "greedy sparse updates never beat the exhaustive optimum", ok);
  }

  // Single GD steps at eta = 1/beta never increase the loss.
  {
    bool ok = true;
    for (int rep = 0; rep < 30 && ok; ++rep) {
      const Instance inst = random_instance(rng, 16, 16, 4);
      const double before = proxy_loss(inst.state, inst.w_bar, inst.d);
      const auto [after_state, rep_used] =
          step_sequential(inst.state, inst.w_bar, inst.d);
      const double after = proxy_loss(after_state, inst.w_bar, inst.d);
      ok &= after <= before + 1e-9 * (1.0 + std::abs(before));
    }
    all &= check(os, "sequential descent steps never increase the loss", ok);
  }

  // Data-weighted init equals the per-group exhaustive optimum.
  {
    bool ok = true;
    for (int rep = 0; rep < 10 && ok; ++rep) {
      const NormalizedWeights norm = normalize(random_matrix(rng, 4, 4));
      const CalibStats d = random_calib(rng, 4);
      OptimizerConfig cfg;
      cfg.d_block = 4;
      const FactorizationState state = init_state(norm.w_bar, d, cfg);
      const auto best = oracle::oracle_exhaustive_mask(norm.w_bar, d);
      const double init_loss = proxy_loss(state, norm.w_bar, d);
      ok &= std::abs(init_loss - best.loss) <= 1e-9 * (1.0 + best.loss);
    }
    all &= check(os, "data-weighted init achieves the exhaustive per-group optimum", ok);
  }

  // Non-gating report: heuristic comparison (median final loss, 10 seeds x 5
  // instances each).
  {
    os << "--- selection heuristic report (non-gating) ---\n";
    const SelectionHeuristic hs[] = {
        SelectionHeuristic::UniformRandom, SelectionHeuristic::L1Greedy,
        SelectionHeuristic::L2Random, SelectionHeuristic::L1Random};
    const char* names[] = {"uniform-random", "l1-greedy", "l2-random",
                           "l1-random"};
    std::mt19937_64 inst_rng(7);
    std::vector<Instance> instances;
    for (int i = 0; i < 5; ++i) instances.push_back(random_instance(inst_rng, 16, 16, 4));
    for (int h = 0; h < 4; ++h) {
      std::vector<double> finals;
      for (const auto& inst : instances) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
          FactorizationState state = inst.state;
          SelectionConfig sel;
          sel.heuristic = hs[h];
          sel.rng_seed = seed;
          for (std::size_t t = 1; t <= 40; ++t) {
            state = step_sequential(state, inst.w_bar, inst.d).first;
            state = sparse_core_update(state, inst.w_bar, inst.d, sel, t);
          }
          finals.push_back(proxy_loss(state, inst.w_bar, inst.d));
        }
      }
      std::sort(finals.begin(), finals.end());
      const double median = finals[finals.size() / 2];
      os << std::setw(16) << names[h] << "  median final loss = "
         << std::setprecision(10) << median << "\n";
    }
  }

  os << (all ? "selfcheck: all gating checks passed\n"
             : "selfcheck: FAILURES detected\n");
  return all;
}

}  // namespace armor
