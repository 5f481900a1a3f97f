#include "armor/continuous.hpp"

#include <cmath>
#include <utility>

namespace armor {

namespace {

double frob(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SmoothnessReport smoothness(const FactorizationState& state,
                            const DenseMatrix& w_bar, const CalibStats& d) {
  if (w_bar.rows() != state.d_out() || w_bar.cols() != state.d_in() ||
      d.d.size() != state.d_in()) {
    throw ContractViolation("state, target, and calibration shapes disagree");
  }
  const std::size_t bs = state.block_size;
  const DenseMatrix core = state.core.masked_values();

  SmoothnessReport rep;

  // beta_A = 2 sum_ij ||S D S^T||_F with S = C B
  // beta_B = 2 sum_ij ||S'^T S'||_F ||D||_F with S' = A C
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
      const DenseMatrix c = core.block(bi, bj, bs);
      const DenseMatrix s = matmul(c, state.b.block(bj));
      const DenseMatrix sp = matmul(state.a.block(bi), c);
      const double* dw = d.d.data() + bj * bs;

      const DenseMatrix sds =
          matmul(detail::scale_cols(s, dw, bs), transpose(s));
      rep.beta_a += 2.0 * frob(sds);

      double dnorm = 0.0;
      for (std::size_t t = 0; t < bs; ++t) dnorm += dw[t] * dw[t];
      dnorm = std::sqrt(dnorm);
      rep.beta_b += 2.0 * frob(matmul(transpose(sp), sp)) * dnorm;
    }
  }

  // beta_W' = 2 ||A^T A||_F ||B diag(d) B^T||_F, both block diagonal
  double ata = 0.0;
  for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
    const double f = frob(matmul(transpose(state.a.block(bi)), state.a.block(bi)));
    ata += f * f;
  }
  double bdb = 0.0;
  for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
    const DenseMatrix& bb = state.b.block(bj);
    const double* dw = d.d.data() + bj * bs;
    const double f = frob(matmul(detail::scale_cols(bb, dw, bs), transpose(bb)));
    bdb += f * f;
  }
  rep.beta_w = 2.0 * std::sqrt(ata) * std::sqrt(bdb);

  if (rep.beta_a > 0.0) rep.eta_a = 1.0 / rep.beta_a;
  if (rep.beta_b > 0.0) rep.eta_b = 1.0 / rep.beta_b;
  if (rep.beta_w > 0.0) rep.eta_w = 1.0 / rep.beta_w;
  return rep;
}

std::pair<FactorizationState, SmoothnessReport> step_sequential(
    const FactorizationState& state, const DenseMatrix& w_bar,
    const CalibStats& d) {
  FactorizationState cur = state;
  SmoothnessReport used;

  // A step at the pre-step point
  {
    const SmoothnessReport rep = smoothness(cur, w_bar, d);
    used.beta_a = rep.beta_a;
    used.eta_a = rep.eta_a;
    if (!SmoothnessReport::unbounded(rep.eta_a)) {
      const GradientBundle g = gradients(cur, w_bar, d);
      for (std::size_t bi = 0; bi < cur.a.num_blocks(); ++bi) {
        auto& blk = cur.a.block(bi);
        const auto& gblk = g.grad_a.block(bi);
        for (std::size_t i = 0; i < blk.data().size(); ++i) {
          blk.data()[i] -= rep.eta_a * gblk.data()[i];
        }
      }
    }
  }

  // B step after A moved
  {
    const SmoothnessReport rep = smoothness(cur, w_bar, d);
    used.beta_b = rep.beta_b;
    used.eta_b = rep.eta_b;
    if (!SmoothnessReport::unbounded(rep.eta_b)) {
      const GradientBundle g = gradients(cur, w_bar, d);
      for (std::size_t bj = 0; bj < cur.b.num_blocks(); ++bj) {
        auto& blk = cur.b.block(bj);
        const auto& gblk = g.grad_b.block(bj);
        for (std::size_t i = 0; i < blk.data().size(); ++i) {
          blk.data()[i] -= rep.eta_b * gblk.data()[i];
        }
      }
    }
  }

  // W' step after A and B moved; masked entries only
  {
    const SmoothnessReport rep = smoothness(cur, w_bar, d);
    used.beta_w = rep.beta_w;
    used.eta_w = rep.eta_w;
    if (!SmoothnessReport::unbounded(rep.eta_w)) {
      const GradientBundle g = gradients(cur, w_bar, d);
      for (std::size_t i = 0; i < cur.d_out(); ++i) {
        for (std::size_t j = 0; j < cur.d_in(); ++j) {
          if (!cur.core.mask_at(i, j)) continue;
          cur.core.values().at(i, j) -= rep.eta_w * g.grad_w.at(i, j);
        }
      }
    }
  }

  return {std::move(cur), used};
}

AdamState AdamState::create(const FactorizationState& state,
                            const AdamParams& params) {
  AdamState s;
  s.params = params;
  const std::size_t bs = state.block_size;
  s.m_a.assign(state.a.num_blocks(), DenseMatrix(bs, bs));
  s.v_a.assign(state.a.num_blocks(), DenseMatrix(bs, bs));
  s.m_b.assign(state.b.num_blocks(), DenseMatrix(bs, bs));
  s.v_b.assign(state.b.num_blocks(), DenseMatrix(bs, bs));
  s.m_w = DenseMatrix(state.d_out(), state.d_in());
  s.v_w = DenseMatrix(state.d_out(), state.d_in());
  return s;
}

std::pair<FactorizationState, AdamState> step_adam(
    const FactorizationState& state, AdamState adam, const DenseMatrix& w_bar,
    const CalibStats& d) {
  const GradientBundle g = gradients(state, w_bar, d);
  FactorizationState cur = state;

  adam.step += 1;
  const AdamParams& p = adam.params;
  const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(adam.step));

  auto update = [&](double& x, double& m, double& v, double grad) {
    m = p.beta1 * m + (1.0 - p.beta1) * grad;
    v = p.beta2 * v + (1.0 - p.beta2) * grad * grad;
    x -= p.lr * (m / bc1) / (std::sqrt(v / bc2) + p.epsilon);
  };

  for (std::size_t bi = 0; bi < cur.a.num_blocks(); ++bi) {
    auto& blk = cur.a.block(bi);
    const auto& gblk = g.grad_a.block(bi);
    for (std::size_t i = 0; i < blk.data().size(); ++i) {
      update(blk.data()[i], adam.m_a[bi].data()[i], adam.v_a[bi].data()[i],
             gblk.data()[i]);
    }
  }
  for (std::size_t bj = 0; bj < cur.b.num_blocks(); ++bj) {
    auto& blk = cur.b.block(bj);
    const auto& gblk = g.grad_b.block(bj);
    for (std::size_t i = 0; i < blk.data().size(); ++i) {
      update(blk.data()[i], adam.m_b[bj].data()[i], adam.v_b[bj].data()[i],
             gblk.data()[i]);
    }
  }
  for (std::size_t i = 0; i < cur.d_out(); ++i) {
    for (std::size_t j = 0; j < cur.d_in(); ++j) {
      double& m = adam.m_w.at(i, j);
      double& v = adam.v_w.at(i, j);
      if (!cur.core.mask_at(i, j)) {
        // moments for off-mask entries still decay
        m *= p.beta1;
        v *= p.beta2;
        continue;
      }
      update(cur.core.values().at(i, j), m, v, g.grad_w.at(i, j));
    }
  }

  return {std::move(cur), std::move(adam)};
}

}  // namespace armor
