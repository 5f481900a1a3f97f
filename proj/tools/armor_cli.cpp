#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "armor/io.hpp"
#include "armor/oracle.hpp"
#include "armor/selfcheck.hpp"

#include <json.hpp>

namespace {

using namespace armor;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitShape = 3;
constexpr int kExitIo = 4;

CalibStats load_calib(const std::string& calib_path,
                      const std::string& acts_path, std::size_t d_in) {
  if (!calib_path.empty()) {
    const DenseMatrix v = io::read_matrix_auto(calib_path);
    if (v.cols() != 1 && v.rows() != 1) {
      throw ContractViolation("--calib must be a vector");
    }
    CalibStats d(v.data());
    if (d.d.size() != d_in) {
      throw ContractViolation("calibration length does not match d_in");
    }
    return d;
  }
  const DenseMatrix acts = io::read_matrix_auto(acts_path);
  if (acts.cols() != d_in) {
    throw ContractViolation("activation width does not match d_in");
  }
  CalibStats d = compute_calib_stats(acts);
  if (d.all_zero_warning) {
    std::cerr << "warning: all calibration statistics are zero; the loss "
                 "ignores every column\n";
  }
  return d;
}

SelectionHeuristic parse_heuristic(const std::string& s) {
  if (s == "uniform") return SelectionHeuristic::UniformRandom;
  if (s == "l1-greedy") return SelectionHeuristic::L1Greedy;
  if (s == "l2-random") return SelectionHeuristic::L2Random;
  if (s == "l1-random") return SelectionHeuristic::L1Random;
  throw CLI::ValidationError("--heuristic", "unknown heuristic: " + s);
}

FactorizationState renormalized_state(const io::Container& c) {
  // Peel the folded-in scalings back off the wrappers to evaluate the
  // normalized proxy loss.
  if (!c.has_scalings()) return c.state;
  FactorizationState s = c.state;
  const std::size_t bs = s.block_size;
  for (std::size_t bi = 0; bi < s.a.num_blocks(); ++bi) {
    for (std::size_t r = 0; r < bs; ++r) {
      const double inv = 1.0 / c.r2[bi * bs + r];
      for (std::size_t cc = 0; cc < bs; ++cc) s.a.block(bi).at(r, cc) *= inv;
    }
  }
  for (std::size_t bj = 0; bj < s.b.num_blocks(); ++bj) {
    for (std::size_t cc = 0; cc < bs; ++cc) {
      const double inv = 1.0 / c.r1[bj * bs + cc];
      for (std::size_t r = 0; r < bs; ++r) s.b.block(bj).at(r, cc) *= inv;
    }
  }
  return s;
}

int run(int argc, char** argv) {
  CLI::App app{"ARMOR pruning-by-factorization toolkit"};
  app.require_subcommand(1);

  // --- prune ---
  auto* prune = app.add_subcommand("prune", "optimize a factorization");
  std::string weights_path, calib_path, acts_path, out_path, trace_path;
  std::size_t block_size = 128, iters = 500, seed = 0, threads = 1;
  std::string optimizer = "adam", heuristic = "l1-random", init_mode = "data-weighted";
  double lr = 1e-4;
  prune->add_option("--weights", weights_path)->required();
  prune->add_option("--calib", calib_path);
  prune->add_option("--acts", acts_path);
  prune->add_option("--block-size", block_size);
  prune->add_option("--iters", iters);
  prune->add_option("--optimizer", optimizer)->check(CLI::IsMember({"seq", "adam"}));
  prune->add_option("--lr", lr);
  prune->add_option("--heuristic", heuristic)
      ->check(CLI::IsMember({"uniform", "l1-greedy", "l2-random", "l1-random"}));
  prune->add_option("--seed", seed);
  prune->add_option("--init", init_mode)
      ->check(CLI::IsMember({"data-weighted", "literal-eq3"}));
  prune->add_option("--threads", threads);
  prune->add_option("--out", out_path)->required();
  prune->add_option("--trace", trace_path);

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "evaluate a container against weights");
  std::string e_container, e_weights, e_calib, e_acts, e_apply, e_apply_out;
  eval->add_option("--container", e_container)->required();
  eval->add_option("--weights", e_weights)->required();
  eval->add_option("--calib", e_calib);
  eval->add_option("--acts", e_acts);
  eval->add_option("--apply", e_apply);
  eval->add_option("--apply-out", e_apply_out);

  // --- baseline ---
  auto* baseline = app.add_subcommand("baseline", "weight-update-free pruning");
  std::string b_method = "nowag-p", b_weights, b_calib, b_acts, b_out;
  std::size_t b_block = 128;
  baseline->add_option("--method", b_method)
      ->check(CLI::IsMember({"nowag-p", "magnitude", "wanda"}));
  baseline->add_option("--weights", b_weights)->required();
  baseline->add_option("--calib", b_calib);
  baseline->add_option("--acts", b_acts);
  baseline->add_option("--block-size", b_block);
  baseline->add_option("--out", b_out)->required();

  // --- overhead ---
  auto* overhead = app.add_subcommand("overhead", "wrapper parameter overhead");
  std::size_t o_dout = 0, o_din = 0, o_dblock = 0;
  std::string o_layers;
  overhead->add_option("--dout", o_dout);
  overhead->add_option("--din", o_din);
  overhead->add_option("--dblock", o_dblock)->required();
  overhead->add_option("--layers", o_layers);

  // --- trace-plot ---
  auto* plot = app.add_subcommand("trace-plot", "render a loss trace to SVG");
  std::string p_trace, p_out;
  bool p_log = false;
  plot->add_option("--trace", p_trace)->required();
  plot->add_option("--out", p_out)->required();
  plot->add_flag("--log", p_log);

  // --- selfcheck ---
  auto* selfcheck = app.add_subcommand("selfcheck", "run the oracle battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n" << e.what() << "\n";
    return kExitUsage;
  }

  if (prune->parsed()) {
    if (calib_path.empty() == acts_path.empty()) {
      std::cerr << "exactly one of --calib or --acts is required\n";
      return kExitUsage;
    }
    const DenseMatrix w = io::read_matrix_auto(weights_path);
    const CalibStats d = load_calib(calib_path, acts_path, w.cols());

    OptimizerConfig cfg;
    cfg.d_block = block_size;
    cfg.n_iters = iters;
    cfg.continuous_mode = optimizer == "seq" ? ContinuousMode::SequentialBeta
                                             : ContinuousMode::Adam;
    cfg.adam.lr = lr;
    cfg.selection.heuristic = parse_heuristic(heuristic);
    cfg.selection.rng_seed = seed;
    cfg.init_scoring = init_mode == "literal-eq3" ? InitScoring::LiteralEq3
                                                  : InitScoring::DataWeighted;
    cfg.threads = threads;

    const OptimizeResult res = optimize(w, d, cfg);
    io::write_container(out_path, res.state, res.norm.r1, res.norm.r2);
    if (!trace_path.empty()) io::write_trace_csv(trace_path, res.trace);

    const OverheadResult oh = overhead_ratio(w.rows(), w.cols(), block_size);
    std::printf("init loss:  %.17g\n", res.trace.front().loss);
    std::printf("final loss: %.17g\n", res.trace.back().loss);
    std::printf("overhead:   %.4f%s\n", oh.ratio,
                oh.exceeds_dense ? " (wrappers exceed layer size)" : "");
    return kExitOk;
  }

  if (eval->parsed()) {
    if (e_calib.empty() == e_acts.empty()) {
      std::cerr << "exactly one of --calib or --acts is required\n";
      return kExitUsage;
    }
    const io::Container c = io::read_container(e_container);
    const DenseMatrix w = io::read_matrix_auto(e_weights);
    if (w.rows() != c.state.d_out() || w.cols() != c.state.d_in()) {
      throw ContractViolation("weights shape does not match the container");
    }
    const CalibStats d = load_calib(e_calib, e_acts, w.cols());

    const NormalizedWeights norm = normalize(w);
    const double norm_loss =
        proxy_loss(renormalized_state(c), norm.w_bar, d);

    const DenseMatrix rec = reconstruct(c.state);
    DenseMatrix residual(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        residual.at(i, j) = w.at(i, j) - rec.at(i, j);
      }
    }
    const double raw = weighted_frobenius_sq(residual, d.d);
    std::printf("normalized proxy loss: %.17g\n", norm_loss);
    std::printf("raw reconstruction error: %.17g\n", raw);

    if (!e_apply.empty()) {
      if (e_apply_out.empty()) {
        std::cerr << "--apply requires --apply-out\n";
        return kExitUsage;
      }
      const DenseMatrix x = io::read_matrix_auto(e_apply);
      io::write_amf(e_apply_out, apply(c.state, x));
    }
    return kExitOk;
  }

  if (baseline->parsed()) {
    if (b_calib.empty() == b_acts.empty()) {
      std::cerr << "exactly one of --calib or --acts is required\n";
      return kExitUsage;
    }
    const DenseMatrix w = io::read_matrix_auto(b_weights);
    const CalibStats d = load_calib(b_calib, b_acts, w.cols());
    BaselineMethod method = BaselineMethod::NoWagP;
    if (b_method == "magnitude") method = BaselineMethod::Magnitude;
    if (b_method == "wanda") method = BaselineMethod::Wanda;

    const BaselineResult res = baseline_prune(w, d, method, b_block);
    if (method == BaselineMethod::NoWagP) {
      const NormalizedWeights norm = normalize(w);
      io::write_container(b_out, res.state, norm.r1, norm.r2);
    } else {
      io::write_container(b_out, res.state);
    }
    std::printf("loss: %.17g\n", res.loss);
    return kExitOk;
  }

  if (overhead->parsed()) {
    std::vector<std::pair<std::size_t, std::size_t>> layers;
    if (!o_layers.empty()) {
      const auto parsed = nlohmann::json::parse(o_layers);
      for (const auto& pair : parsed) {
        layers.emplace_back(pair.at(0).get<std::size_t>(),
                            pair.at(1).get<std::size_t>());
      }
    } else {
      if (o_dout == 0 || o_din == 0) {
        std::cerr << "either --layers or both --dout and --din are required\n";
        return kExitUsage;
      }
      layers.emplace_back(o_dout, o_din);
    }
    for (const auto& [d_out, d_in] : layers) {
      const OverheadResult r = overhead_ratio(d_out, d_in, o_dblock);
      std::printf("layer %zux%zu: %.4f%s\n", d_out, d_in, r.ratio,
                  r.exceeds_dense ? " (wrappers exceed layer size)" : "");
    }
    const OverheadResult agg = overhead_ratio_aggregate(layers, o_dblock);
    std::printf("aggregate: %.4f\n", agg.ratio);
    return kExitOk;
  }

  if (plot->parsed()) {
    const LossTrace trace = io::read_trace_csv(p_trace);
    io::write_trace_svg(p_out, trace, p_log);
    return kExitOk;
  }

  if (selfcheck->parsed()) {
    return run_selfcheck(std::cout) ? kExitOk : 1;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const armor::DegenerateWeight& e) {
    std::cerr << "degenerate weights: " << e.what() << " (index " << e.index
              << ")\n";
    return kExitShape;
  } catch (const armor::EmptyCalibration& e) {
    std::cerr << e.what() << "\n";
    return kExitShape;
  } catch (const armor::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitShape;
  } catch (const armor::FormatError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bad --layers JSON: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
