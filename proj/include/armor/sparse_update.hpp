#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "armor/loss.hpp"

namespace armor {

/// The fixed enumeration of the C(4,2) = 6 masks of a group. Tie-breaking and
/// the on-disk index byte both follow this order.
inline constexpr std::array<std::pair<int, int>, 6> kMaskPairs = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Index into kMaskPairs for ascending kept indices (i1 < i2).
int mask_index(int i1, int i2);

enum class SelectionHeuristic { UniformRandom, L1Greedy, L2Random, L1Random };

struct SelectionConfig {
  SelectionHeuristic heuristic = SelectionHeuristic::L1Random;
  std::uint64_t rng_seed = 0;
  std::size_t groups_per_block = 1;  // >1 updates groups sequentially in-block
};

struct MaskCandidate {
  int mask = 0;          // index into kMaskPairs
  int kept0 = 0, kept1 = 1;
  double w0 = 0.0, w1 = 0.0;
  double reduction = 0.0;  // data-weighted loss decrease vs. an empty group
};

/// One group subproblem: all other core entries are frozen into delta_w.
struct GroupSolveProblem {
  DenseMatrix delta_w;          // d_block x d_block: Wbar block - A W'' B
  std::vector<double> a;        // column i' of the A block
  DenseMatrix b_group_rows;     // 4 x d_block: rows 4k..4k+3 of the B block
  std::vector<double> d;        // diagonal calibration weights of the block
  int incumbent_mask = 0;       // index into kMaskPairs
};

/// Selection probabilities proportional to the given norms (uniform when all
/// zero). For L1Greedy the result is a one-hot at the argmax, ties to the
/// lowest row-major index.
DenseMatrix selection_probs(const DenseMatrix& grad_norms,
                            SelectionHeuristic heuristic);

/// Picks a group (row-major flat index into grad_norms) given a uniform draw.
std::size_t select_group(const DenseMatrix& grad_norms,
                         SelectionHeuristic heuristic, double u);

/// Closed-form weighted least squares over all 6 masks; returns the candidate
/// with the largest loss reduction. Exact ties go to the incumbent mask, then
/// to the lowest index in kMaskPairs. Returns nullopt when ||a|| = 0 (the
/// group cannot influence the reconstruction).
std::optional<MaskCandidate> sweep_group(const GroupSolveProblem& problem);

/// One greedy sparse-core iteration: per block, select a group per the
/// heuristic, solve the 6-way sweep, and write the winner into the mask and
/// values. Block updates touch disjoint entries and may run on `threads`
/// workers; results are independent of the worker count.
FactorizationState sparse_core_update(const FactorizationState& state,
                                      const DenseMatrix& w_bar,
                                      const CalibStats& d,
                                      const SelectionConfig& cfg,
                                      std::size_t iteration,
                                      std::size_t threads = 1);

}  // namespace armor
