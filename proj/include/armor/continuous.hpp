#pragma once

#include <limits>
#include <vector>

#include "armor/loss.hpp"

namespace armor {

/// Local smoothness constants and the descent-guaranteeing step sizes
/// eta = 1/beta. A zero beta means that parameter's gradient is identically
/// zero; its eta is reported as the unbounded sentinel (infinity) and the
/// corresponding sub-step is a no-op.
struct SmoothnessReport {
  double beta_a = 0.0;
  double beta_b = 0.0;
  double beta_w = 0.0;
  double eta_a = std::numeric_limits<double>::infinity();
  double eta_b = std::numeric_limits<double>::infinity();
  double eta_w = std::numeric_limits<double>::infinity();

  static bool unbounded(double eta) {
    return eta == std::numeric_limits<double>::infinity();
  }
};

SmoothnessReport smoothness(const FactorizationState& state,
                            const DenseMatrix& w_bar, const CalibStats& d);

/// One sweep of sequential gradient descent: A, then B, then the masked core,
/// each with eta = 1/beta recomputed at the point it steps from. Never
/// increases the proxy loss.
std::pair<FactorizationState, SmoothnessReport> step_sequential(
    const FactorizationState& state, const DenseMatrix& w_bar,
    const CalibStats& d);

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for the joint update of all three parameter groups.
struct AdamState {
  AdamParams params;
  std::vector<DenseMatrix> m_a, v_a;  // per A block
  std::vector<DenseMatrix> m_b, v_b;  // per B block
  DenseMatrix m_w, v_w;               // full core shape, off-mask stays zero
  std::size_t step = 0;

  static AdamState create(const FactorizationState& state,
                          const AdamParams& params = {});
};

/// One joint bias-corrected adaptive-moment update of A, B, and the masked
/// core. No descent guarantee.
std::pair<FactorizationState, AdamState> step_adam(
    const FactorizationState& state, AdamState adam, const DenseMatrix& w_bar,
    const CalibStats& d);

}  // namespace armor
