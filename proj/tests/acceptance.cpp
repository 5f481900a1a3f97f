// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] must be the path to the command-line binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "armor/io.hpp"
#include "armor/oracle.hpp"
#include "test_util.hpp"

using namespace armor;
using testutil::random_calib;
using testutil::random_instance;
using testutil::random_matrix;

namespace {

std::string g_cli;
std::filesystem::path g_tmp;
int g_failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail = "") {
  std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion,
              name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
  if (!pass) ++g_failures;
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  CmdResult r;
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Parses "aggregate: 0.0494" from the overhead command's output.
double parse_aggregate(const std::string& out) {
  const auto pos = out.find("aggregate:");
  if (pos == std::string::npos) return std::nan("");
  return std::stod(out.substr(pos + 10));
}

// ---- criterion 1 ----

void criterion_overhead() {
  struct Model {
    const char* name;
    const char* layers;
    double target;
  };
  const Model models[] = {
      {"7B",
       "[[4096,4096],[4096,4096],[4096,4096],[4096,4096],"
       "[11008,4096],[11008,4096],[4096,11008]]",
       0.0494},
      {"13B",
       "[[5120,5120],[5120,5120],[5120,5120],[5120,5120],"
       "[13824,5120],[13824,5120],[5120,13824]]",
       0.0395},
      {"70B",
       "[[8192,8192],[8192,8192],[1024,8192],[1024,8192],"
       "[28672,8192],[28672,8192],[8192,28672]]",
       0.0242},
  };
  bool pass = true;
  std::ostringstream detail;
  for (const Model& m : models) {
    const CmdResult r =
        run_cmd(std::string("overhead --dblock 128 --layers '") + m.layers + "'");
    const double got = parse_aggregate(r.out);
    const bool ok = r.exit_code == 0 && std::abs(got - m.target) <= 1e-4;
    pass &= ok;
    detail << m.name << "=" << got << " ";
  }
  report(1, "wrapper overhead matches the published ratios", pass, detail.str());
}

// ---- criteria 2 and 3 share the same 20 optimization runs ----

void criteria_monotonicity_and_dominance() {
  struct Shape {
    std::size_t rows, cols, bs;
  };
  const Shape shapes[] = {
      {32, 32, 4},   {32, 32, 8},   {32, 64, 8},  {64, 32, 16}, {64, 64, 16},
      {64, 64, 8},   {32, 128, 16}, {96, 32, 16}, {64, 96, 16}, {128, 64, 16},
      {48, 48, 4},   {32, 32, 16},  {64, 128, 16}, {96, 96, 16}, {128, 128, 16},
      {32, 96, 8},   {80, 80, 16},  {128, 96, 16}, {96, 128, 16}, {128, 256, 16},
  };
  std::mt19937_64 rng(4242);
  bool monotone = true;
  bool dominance = true;
  std::vector<double> improvements;
  for (const Shape& s : shapes) {
    const DenseMatrix w = random_matrix(rng, s.rows, s.cols);
    const CalibStats d = random_calib(rng, s.cols);
    OptimizerConfig cfg;
    cfg.d_block = s.bs;
    cfg.n_iters = 300;
    cfg.continuous_mode = ContinuousMode::SequentialBeta;
    const OptimizeResult res = optimize(w, d, cfg);
    for (std::size_t k = 1; k < res.trace.size(); ++k) {
      monotone &= res.trace[k].loss <=
                  res.trace[k - 1].loss +
                      1e-9 * (1.0 + std::abs(res.trace[k - 1].loss));
    }
    const double init = res.trace.front().loss;
    const double final_loss = res.trace.back().loss;
    monotone &= final_loss <= init;
    dominance &= final_loss <= init;
    improvements.push_back((init - final_loss) / init);
  }
  std::sort(improvements.begin(), improvements.end());
  const double median = improvements[improvements.size() / 2];
  dominance &= median > 0.0;
  report(2, "sequential optimization traces are monotone non-increasing",
         monotone);
  std::ostringstream detail;
  detail << "median relative improvement = " << median;
  report(3, "final loss never exceeds the weight-update-free init", dominance,
         detail.str());
}

// ---- criterion 4 ----

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

void criterion_mask_sweep_oracle() {
  std::mt19937_64 rng(99);
  bool pass = true;
  double worst = 0.0;
  const std::size_t sizes[] = {4, 8, 16};
  for (int rep = 0; rep < 200; ++rep) {
    const GroupSolveProblem p = random_problem(rng, sizes[rep % 3]);
    const auto fast = sweep_group(p);
    if (!fast) {
      pass = false;
      continue;
    }
    const auto ref = oracle::oracle_group_solve(p);
    int ref_best = 0;
    for (int m = 1; m < 6; ++m)
      if (ref[m].full_loss < ref[ref_best].full_loss) ref_best = m;
    double empty = 0.0;
    for (std::size_t i = 0; i < p.delta_w.rows(); ++i)
      for (std::size_t j = 0; j < p.delta_w.cols(); ++j)
        empty += p.d[j] * p.delta_w.at(i, j) * p.delta_w.at(i, j);
    const double ref_red = empty - ref[ref_best].full_loss;
    const double rel =
        std::abs(fast->reduction - ref_red) / (1.0 + std::abs(ref_red));
    worst = std::max(worst, rel);
    pass &= rel <= 1e-8;
    if (fast->mask != ref_best) {
      // documented tie: accept only when the reference losses coincide
      pass &= std::abs(ref[fast->mask].full_loss - ref[ref_best].full_loss) <=
              1e-8 * (1.0 + std::abs(ref[ref_best].full_loss));
    }
  }
  std::ostringstream detail;
  detail << "200 problems, worst relative discrepancy = " << worst;
  report(4, "mask sweep agrees with the brute-force group solve", pass,
         detail.str());
}

// ---- criterion 5 ----

void criterion_exhaustive_oracle() {
  std::mt19937_64 rng(55);
  bool pass = true;
  for (int rep = 0; rep < 20; ++rep) {
    const NormalizedWeights norm = normalize(random_matrix(rng, 4, 4));
    const CalibStats d = random_calib(rng, 4);
    const auto best = oracle::oracle_exhaustive_mask(norm.w_bar, d);

    OptimizerConfig cfg;
    cfg.d_block = 4;
    FactorizationState state = init_state(norm.w_bar, d, cfg);
    pass &= state.core.mask() == best.core.mask();  // init = per-group optimum

    SelectionConfig sel;
    sel.rng_seed = static_cast<std::uint64_t>(rep);
    for (std::size_t t = 1; t <= 50; ++t)
      state = sparse_core_update(state, norm.w_bar, d, sel, t);
    const double greedy = proxy_loss(state, norm.w_bar, d);
    // reaches the optimum (here greedy is exact per group) and never beats it
    pass &= std::abs(greedy - best.loss) <= 1e-9;
    pass &= greedy >= best.loss - 1e-9;
  }
  report(5, "greedy sparse updates and the init match the exhaustive optimum",
         pass);
}

// ---- criterion 6 ----

void criterion_gradients() {
  std::mt19937_64 rng(66);
  bool pass = true;
  const std::size_t shapes[][3] = {{8, 8, 4}, {16, 16, 4}, {32, 32, 8},
                                   {16, 32, 8}, {32, 16, 8}};
  for (int rep = 0; rep < 50 && pass; ++rep) {
    const auto& s = shapes[rep % 5];
    const auto inst = random_instance(rng, s[0], s[1], s[2]);
    const GradientBundle an = gradients(inst.state, inst.w_bar, inst.d);
    const GradientBundle fd =
        oracle::oracle_fd_gradient(inst.state, inst.w_bar, inst.d, 1e-6);
    // Central differences carry roundoff of order eps*loss/step, so entries
    // are compared at 1e-5 relative with an absolute floor at that noise.
    const double floor =
        1e-8 * (1.0 + proxy_loss(inst.state, inst.w_bar, inst.d));
    auto close = [&](double a, double f) {
      return std::abs(a - f) <=
             1e-5 * std::max(std::abs(a), std::abs(f)) + floor;
    };
    for (std::size_t b = 0; b < an.grad_a.num_blocks(); ++b)
      for (std::size_t k = 0; k < an.grad_a.block(b).data().size(); ++k)
        pass &= close(an.grad_a.block(b).data()[k], fd.grad_a.block(b).data()[k]);
    for (std::size_t b = 0; b < an.grad_b.num_blocks(); ++b)
      for (std::size_t k = 0; k < an.grad_b.block(b).data().size(); ++k)
        pass &= close(an.grad_b.block(b).data()[k], fd.grad_b.block(b).data()[k]);
    for (std::size_t k = 0; k < an.grad_w.data().size(); ++k)
      pass &= close(an.grad_w.data()[k], fd.grad_w.data()[k]);
  }
  report(6, "analytic gradients match finite differences on 50 instances", pass);
}

// ---- criterion 7 ----

void criterion_descent_steps() {
  std::mt19937_64 rng(77);
  bool pass = true;
  for (int rep = 0; rep < 100; ++rep) {
    const auto inst = random_instance(rng, 16, 16, 4);
    const double before = proxy_loss(inst.state, inst.w_bar, inst.d);
    const SmoothnessReport sm = smoothness(inst.state, inst.w_bar, inst.d);
    const GradientBundle g = gradients(inst.state, inst.w_bar, inst.d);
    const double bound = before + 1e-9 * (1.0 + std::abs(before));

    if (!SmoothnessReport::unbounded(sm.eta_a)) {
      FactorizationState st = inst.state;
      for (std::size_t b = 0; b < st.a.num_blocks(); ++b)
        for (std::size_t k = 0; k < st.a.block(b).data().size(); ++k)
          st.a.block(b).data()[k] -= sm.eta_a * g.grad_a.block(b).data()[k];
      pass &= proxy_loss(st, inst.w_bar, inst.d) <= bound;
    }
    if (!SmoothnessReport::unbounded(sm.eta_b)) {
      FactorizationState st = inst.state;
      for (std::size_t b = 0; b < st.b.num_blocks(); ++b)
        for (std::size_t k = 0; k < st.b.block(b).data().size(); ++k)
          st.b.block(b).data()[k] -= sm.eta_b * g.grad_b.block(b).data()[k];
      pass &= proxy_loss(st, inst.w_bar, inst.d) <= bound;
    }
    if (!SmoothnessReport::unbounded(sm.eta_w)) {
      FactorizationState st = inst.state;
      for (std::size_t k = 0; k < st.core.values().data().size(); ++k)
        st.core.values().data()[k] -= sm.eta_w * g.grad_w.data()[k];
      pass &= proxy_loss(st, inst.w_bar, inst.d) <= bound;
    }
  }
  report(7, "single steps at eta = 1/beta never increase the loss", pass);
}

// ---- criterion 8 ----

void criterion_structural() {
  std::mt19937_64 rng(88);
  bool pass = true;

  // mask validity through full optimization iterations
  {
    auto inst = random_instance(rng, 16, 16, 4);
    AdamState adam = AdamState::create(inst.state);
    for (std::size_t t = 1; t <= 30; ++t) {
      auto [next, next_adam] =
          step_adam(inst.state, std::move(adam), inst.w_bar, inst.d);
      inst.state = sparse_core_update(next, inst.w_bar, inst.d,
                                      SelectionConfig{}, t);
      adam = std::move(next_adam);
      try {
        SparseCore24::validate_mask(16, 16, inst.state.core.mask());
      } catch (const ContractViolation&) {
        pass = false;
      }
    }
  }

  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = random_instance(rng, 16, 32, 8);

    // block losses sum to the proxy loss
    const double total = proxy_loss(inst.state, inst.w_bar, inst.d);
    double sum = 0.0;
    const DenseMatrix bl = block_losses(inst.state, inst.w_bar, inst.d);
    for (double v : bl.data()) sum += v;
    pass &= std::abs(sum - total) <= 1e-12 * (1.0 + std::abs(total));

    // apply == reconstruct * x
    const DenseMatrix x = random_matrix(rng, 32, 5);
    const DenseMatrix lhs = apply(inst.state, x);
    const DenseMatrix rhs = matmul(reconstruct(inst.state), x);
    for (std::size_t k = 0; k < lhs.data().size(); ++k)
      pass &= std::abs(lhs.data()[k] - rhs.data()[k]) <=
              1e-10 * (1.0 + std::abs(rhs.data()[k]));

    // denormalize scaling relation
    NormalizedWeights n;
    std::uniform_real_distribution<double> dist(0.5, 2.0);
    for (int j = 0; j < 32; ++j) n.r1.push_back(dist(rng));
    for (int i = 0; i < 16; ++i) n.r2.push_back(dist(rng));
    const DenseMatrix before = reconstruct(inst.state);
    const DenseMatrix after = reconstruct(denormalize(inst.state, n));
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 32; ++j) {
        const double want = n.r2[i] * before.at(i, j) * n.r1[j];
        pass &= std::abs(after.at(i, j) - want) <= 1e-12 * (1.0 + std::abs(want));
      }
  }

  // byte round-trips
  {
    const auto inst = random_instance(rng, 8, 8, 4);
    const auto amf1 = g_tmp / "rt1.amf", amf2 = g_tmp / "rt2.amf";
    io::write_amf(amf1.string(), inst.w_bar);
    io::write_amf(amf2.string(), io::read_amf(amf1.string()));
    pass &= slurp(amf1) == slurp(amf2);

    const auto c1 = g_tmp / "rt1.armc", c2 = g_tmp / "rt2.armc";
    std::vector<double> r1(8, 1.5), r2(8, 0.5);
    io::write_container(c1.string(), inst.state, r1, r2);
    const io::Container c = io::read_container(c1.string());
    io::write_container(c2.string(), c.state, c.r1, c.r2);
    pass &= slurp(c1) == slurp(c2);
  }

  report(8, "structural invariants hold (mask, losses, apply, scalings, files)",
         pass);
}

// ---- criterion 9 ----

void criterion_determinism() {
  std::mt19937_64 rng(999);
  bool pass = true;
  for (int inst = 0; inst < 2; ++inst) {
    const auto w_path = g_tmp / ("det_w" + std::to_string(inst) + ".amf");
    const auto a_path = g_tmp / ("det_a" + std::to_string(inst) + ".amf");
    io::write_amf(w_path.string(), random_matrix(rng, 32, 32));
    io::write_amf(a_path.string(), random_matrix(rng, 48, 32));

    std::vector<std::vector<char>> containers, traces;
    for (const char* threads : {"1", "1", "4"}) {
      const auto out = g_tmp / "det_out.armc";
      const auto tr = g_tmp / "det_trace.csv";
      const CmdResult r = run_cmd(
          "prune --weights " + w_path.string() + " --acts " + a_path.string() +
          " --block-size 8 --iters 40 --optimizer adam --seed 7 --threads " +
          threads + " --out " + out.string() + " --trace " + tr.string());
      pass &= r.exit_code == 0;
      containers.push_back(slurp(out));
      traces.push_back(slurp(tr));
    }
    pass &= containers[0] == containers[1];  // repeated run
    pass &= containers[0] == containers[2];  // different worker count
    pass &= traces[0] == traces[1] && traces[0] == traces[2];
  }
  report(9, "identical flags give byte-identical outputs at any worker count",
         pass);
}

// ---- criterion 10 ----

void criterion_declared() {
  const CmdResult r = run_cmd("selfcheck");
  const bool pass =
      r.exit_code == 0 && r.out.find("selection heuristic report") != std::string::npos;
  report(10,
         "model-scale quality/speed results are declared out of desk scope; "
         "the selection-heuristic comparison runs as a non-gating report",
         pass, "selfcheck battery exit=" + std::to_string(r.exit_code));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path to cli binary>\n";
    return 2;
  }
  g_cli = argv[1];
  g_tmp = std::filesystem::temp_directory_path() / "armor_acceptance";
  std::filesystem::create_directories(g_tmp);

  criterion_overhead();
  criteria_monotonicity_and_dominance();
  criterion_mask_sweep_oracle();
  criterion_exhaustive_oracle();
  criterion_gradients();
  criterion_descent_steps();
  criterion_structural();
  criterion_determinism();
  criterion_declared();

  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return 1;
}
