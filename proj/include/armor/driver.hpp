#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "armor/continuous.hpp"
#include "armor/normalize.hpp"
#include "armor/sparse_update.hpp"

namespace armor {

enum class ContinuousMode { SequentialBeta, Adam };
enum class InitScoring { DataWeighted, LiteralEq3 };

struct OptimizerConfig {
  std::size_t d_block = 128;
  std::size_t n_iters = 500;
  ContinuousMode continuous_mode = ContinuousMode::Adam;
  AdamParams adam;
  SelectionConfig selection;
  InitScoring init_scoring = InitScoring::DataWeighted;
  std::size_t threads = 1;
};

enum class TracePhase { Init, PostContinuous, PostSparse };

struct TracePoint {
  std::size_t iteration;
  TracePhase phase;
  double loss;
};

using LossTrace = std::vector<TracePoint>;

const char* trace_phase_name(TracePhase phase);
TracePhase trace_phase_from_name(const std::string& name);

/// Identity wrappers, W' = Wbar, and the per-group top-2 mask. Scores are
/// |Wbar_ij| * sqrt(d_j) in data-weighted mode (the exact per-group minimizer
/// of the proxy loss for the naive sparse core) or |Wbar_ij| in literal mode.
/// Ties keep the lower column index.
FactorizationState init_state(const DenseMatrix& w_bar, const CalibStats& d,
                              const OptimizerConfig& cfg);

struct OptimizeResult {
  FactorizationState state;  // denormalized
  NormalizedWeights norm;
  LossTrace trace;           // losses in the normalized problem
};

/// The full pipeline: normalize, init, alternate continuous and sparse-core
/// updates for n_iters, then denormalize. Deterministic given (w, d, cfg)
/// including the seed, independent of the thread count.
OptimizeResult optimize(const DenseMatrix& w, const CalibStats& d,
                        const OptimizerConfig& cfg);

enum class BaselineMethod { NoWagP, Magnitude, Wanda };

struct BaselineResult {
  FactorizationState state;  // denormalized for nowag-p, identity wrappers else
  double loss;               // proxy loss of the normalized problem (nowag-p)
                             // or the raw data-weighted error (others)
};

BaselineResult baseline_prune(const DenseMatrix& w, const CalibStats& d,
                              BaselineMethod method,
                              std::size_t d_block = 128);

/// d_j = sum over samples of the squared j-th activation. `samples` has one
/// sample per row. accumulate_calib_stats supports streaming over chunks.
CalibStats compute_calib_stats(const DenseMatrix& samples);
void accumulate_calib_stats(std::vector<double>& acc, const DenseMatrix& chunk);

}  // namespace armor
