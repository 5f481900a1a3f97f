#pragma once

#include <array>
#include <string>
#include <vector>

#include "armor/sparse_update.hpp"

namespace armor {
namespace oracle {

/// One reference-vs-fast-path comparison under a stated tolerance.
struct OracleReport {
  std::string name;
  double reference = 0.0;
  double fast_path = 0.0;
  double abs_discrepancy = 0.0;
  double rel_discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

OracleReport compare(const std::string& name, double reference,
                     double fast_path, double rel_tolerance);

struct GroupSolveSolution {
  double w0 = 0.0, w1 = 0.0;
  double full_loss = 0.0;  // the complete data-weighted block loss, not a reduction
};

/// Brute-force weighted least squares for all 6 masks of a group: assembles
/// the 2x2 normal system from the definition and evaluates the full loss by
/// direct summation. Shares no arithmetic with sweep_group.
std::array<GroupSolveSolution, 6> oracle_group_solve(
    const GroupSolveProblem& problem);

struct ExhaustiveResult {
  SparseCore24 core;
  double loss = 0.0;
};

/// Global optimum over all 6^groups mask combinations with identity wrappers.
/// Refuses instances with more than max_groups groups.
ExhaustiveResult oracle_exhaustive_mask(const DenseMatrix& w_bar,
                                        const CalibStats& d,
                                        std::size_t max_groups = 6);

/// Central finite differences of the proxy loss, coordinate by coordinate,
/// over A blocks, B blocks, and masked core entries.
GradientBundle oracle_fd_gradient(const FactorizationState& state,
                                  const DenseMatrix& w_bar,
                                  const CalibStats& d, double step);

}  // namespace oracle
}  // namespace armor
