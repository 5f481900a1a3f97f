#include "armor/driver.hpp"

#include <cmath>
#include <utility>

namespace armor {

const char* trace_phase_name(TracePhase phase) {
  switch (phase) {
    case TracePhase::Init: return "init";
    case TracePhase::PostContinuous: return "post-continuous";
    case TracePhase::PostSparse: return "post-sparse";
  }
  throw ContractViolation("unknown trace phase");
}

TracePhase trace_phase_from_name(const std::string& name) {
  if (name == "init") return TracePhase::Init;
  if (name == "post-continuous") return TracePhase::PostContinuous;
  if (name == "post-sparse") return TracePhase::PostSparse;
  // names come from files on disk, so a bad one is a format problem
  throw FormatError("unknown trace phase name: " + name);
}

namespace {

// Kept indices of the top-2 scores in a 4-entry group, ties to the lower
// column index. Returned ascending.
std::pair<int, int> top2(const double* scores) {
  int first = 0;
  for (int j = 1; j < 4; ++j) {
    if (scores[j] > scores[first]) first = j;
  }
  int second = -1;
  for (int j = 0; j < 4; ++j) {
    if (j == first) continue;
    if (second < 0 || scores[j] > scores[second]) second = j;
  }
  return {std::min(first, second), std::max(first, second)};
}

SparseCore24 top2_core(const DenseMatrix& values, const DenseMatrix& scores) {
  std::vector<std::uint8_t> mask(values.rows() * values.cols(), 0);
  for (std::size_t i = 0; i < values.rows(); ++i) {
    for (std::size_t k = 0; k < values.cols() / 4; ++k) {
      double s[4];
      for (int j = 0; j < 4; ++j) s[j] = scores.at(i, 4 * k + j);
      const auto [k0, k1] = top2(s);
      mask[i * values.cols() + 4 * k + k0] = 1;
      mask[i * values.cols() + 4 * k + k1] = 1;
    }
  }
  return SparseCore24(values, std::move(mask));
}

}  // namespace

FactorizationState init_state(const DenseMatrix& w_bar, const CalibStats& d,
                              const OptimizerConfig& cfg) {
  if (w_bar.cols() != d.d.size()) {
    throw ContractViolation("target and calibration shapes disagree");
  }
  if (cfg.d_block == 0 || w_bar.rows() % cfg.d_block != 0 ||
      w_bar.cols() % cfg.d_block != 0) {
    throw ContractViolation("d_block must divide both target dimensions");
  }

  DenseMatrix scores(w_bar.rows(), w_bar.cols());
  for (std::size_t i = 0; i < w_bar.rows(); ++i) {
    for (std::size_t j = 0; j < w_bar.cols(); ++j) {
      const double mag = std::abs(w_bar.at(i, j));
      scores.at(i, j) = cfg.init_scoring == InitScoring::DataWeighted
                            ? mag * std::sqrt(d.d[j])
                            : mag;
    }
  }

  return FactorizationState(
      BlockDiagonalMatrix::identity(w_bar.rows(), cfg.d_block),
      BlockDiagonalMatrix::identity(w_bar.cols(), cfg.d_block),
      top2_core(w_bar, scores), cfg.d_block);
}

OptimizeResult optimize(const DenseMatrix& w, const CalibStats& d,
                        const OptimizerConfig& cfg) {
  OptimizeResult res;
  res.norm = normalize(w);

  FactorizationState state = init_state(res.norm.w_bar, d, cfg);
  res.trace.push_back({0, TracePhase::Init, proxy_loss(state, res.norm.w_bar, d)});

  AdamState adam;
  if (cfg.continuous_mode == ContinuousMode::Adam) {
    adam = AdamState::create(state, cfg.adam);
  }

  for (std::size_t t = 1; t <= cfg.n_iters; ++t) {
    if (cfg.continuous_mode == ContinuousMode::SequentialBeta) {
      state = step_sequential(state, res.norm.w_bar, d).first;
    } else {
      auto [next, next_adam] = step_adam(state, std::move(adam), res.norm.w_bar, d);
      state = std::move(next);
      adam = std::move(next_adam);
    }
    res.trace.push_back(
        {t, TracePhase::PostContinuous, proxy_loss(state, res.norm.w_bar, d)});

    state = sparse_core_update(state, res.norm.w_bar, d, cfg.selection, t,
                               cfg.threads);
    res.trace.push_back(
        {t, TracePhase::PostSparse, proxy_loss(state, res.norm.w_bar, d)});
  }

  res.state = denormalize(state, res.norm);
  return res;
}

BaselineResult baseline_prune(const DenseMatrix& w, const CalibStats& d,
                              BaselineMethod method, std::size_t d_block) {
  if (w.cols() % 4 != 0) {
    throw ContractViolation("column count must be divisible by 4");
  }
  if (w.cols() != d.d.size()) {
    throw ContractViolation("weights and calibration shapes disagree");
  }

  if (method == BaselineMethod::NoWagP) {
    OptimizerConfig cfg;
    cfg.d_block = d_block;
    cfg.init_scoring = InitScoring::DataWeighted;
    const NormalizedWeights norm = normalize(w);
    FactorizationState state = init_state(norm.w_bar, d, cfg);
    BaselineResult res{denormalize(state, norm),
                       proxy_loss(state, norm.w_bar, d)};
    return res;
  }

  DenseMatrix scores(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double mag = std::abs(w.at(i, j));
      scores.at(i, j) = method == BaselineMethod::Wanda
                            ? mag * std::sqrt(d.d[j])
                            : mag;
    }
  }
  FactorizationState state(BlockDiagonalMatrix::identity(w.rows(), d_block),
                           BlockDiagonalMatrix::identity(w.cols(), d_block),
                           top2_core(w, scores), d_block);

  DenseMatrix residual(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      residual.at(i, j) = state.core.mask_at(i, j) ? 0.0 : w.at(i, j);
    }
  }
  return BaselineResult{std::move(state), weighted_frobenius_sq(residual, d.d)};
}

CalibStats compute_calib_stats(const DenseMatrix& samples) {
  std::vector<double> acc;
  accumulate_calib_stats(acc, samples);
  return CalibStats(std::move(acc));
}

void accumulate_calib_stats(std::vector<double>& acc, const DenseMatrix& chunk) {
  if (acc.empty()) {
    acc.assign(chunk.cols(), 0.0);
  } else if (acc.size() != chunk.cols()) {
    throw ContractViolation("calibration chunk width changed mid-stream");
  }
  for (std::size_t t = 0; t < chunk.rows(); ++t) {
    for (std::size_t j = 0; j < chunk.cols(); ++j) {
      acc[j] += chunk.at(t, j) * chunk.at(t, j);
    }
  }
}

}  // namespace armor
