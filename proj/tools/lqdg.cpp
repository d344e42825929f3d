// lqdg: solve N-player LQ games and replay the convergence experiments.
//
//   lqdg solve --instance paper --algo pi --k0 zero --reference vi
//   lqdg exp-a --out out/exp_a
//   lqdg exp-b --out out/exp_b
//   lqdg random-bench --count 200 --players 2 --out out/bench
//
// Exit codes: 0 success, 2 non-convergence or unmet expectations, 1 error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lqdg/lqdg.hpp"

namespace {

using namespace lqdg;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct CommonOptions {
  std::vector<std::string> algos;
  std::vector<double> etas;
  std::optional<double> epsilon;
  std::optional<std::size_t> max_iters;
  std::uint64_t seed = 0;
  std::string out;
  std::string emit = "csv,json,svg";
};

bench::Emit parse_emit(const std::string& text) {
  bench::Emit emit{false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "csv") {
      emit.csv = true;
    } else if (item == "json") {
      emit.json = true;
    } else if (item == "svg") {
      emit.svg = true;
    } else if (!item.empty()) {
      throw ArgumentError("unknown --emit format '" + item + "'");
    }
  }
  return emit;
}

// LQDG_SEED wins over --seed.
std::uint64_t effective_seed(std::uint64_t cli_seed) {
  if (const char* env = std::getenv("LQDG_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ArgumentError(std::string("LQDG_SEED is not an integer: ") + env);
    }
  }
  return cli_seed;
}

bench::SolverOverrides overrides_from(const CommonOptions& o) {
  bench::SolverOverrides out;
  out.epsilon = o.epsilon;
  out.max_iterations = o.max_iters;
  return out;
}

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& default_out) {
  o.out = default_out;
  cmd->add_option("--epsilon", o.epsilon, "Stopping threshold on sum_i ||dK^i||_F");
  cmd->add_option("--max-iters", o.max_iters, "Iteration cap");
  cmd->add_option("--seed", o.seed, "Random seed (LQDG_SEED overrides)");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--emit", o.emit, "Artifacts to write: csv,json,svg")
      ->capture_default_str();
}

std::string format_policy(const PolicySet& pol) {
  std::ostringstream os;
  os << std::setprecision(6);
  const Eigen::IOFormat fmt(6, 0, ", ", "; ", "", "", "[", "]");
  for (std::size_t i = 0; i < pol.size(); ++i) {
    os << "  K" << (i + 1) << " = " << pol[i].format(fmt) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

struct SolveOptions {
  std::string instance = "paper";
  std::string k0;
  std::string reference;
};

GameInstance load_instance_arg(const std::string& arg) {
  if (arg == "paper") return paper_instance();
  return io::load_instance(arg);
}

int cmd_solve(const CommonOptions& common, const SolveOptions& opt) {
  const GameInstance inst = load_instance_arg(opt.instance);
  const Algorithm algo =
      parse_algorithm(common.algos.empty() ? "pi" : common.algos.front());
  SolverConfig cfg = SolverConfig::defaults(algo);
  if (!common.etas.empty()) cfg.eta = common.etas;
  if (common.epsilon) cfg.epsilon = *common.epsilon;
  if (common.max_iters) cfg.max_iterations = *common.max_iters;
  const std::uint64_t seed = effective_seed(common.seed);

  std::optional<PolicySet> reference;
  auto vi_reference = [&]() {
    const SolveResult vi = bench::reference_equilibrium(inst);
    if (!vi.converged()) {
      throw NumericalError("value iteration did not converge; no reference");
    }
    return vi.final_policies;
  };
  if (opt.reference == "vi") {
    reference = vi_reference();
  } else if (!opt.reference.empty()) {
    reference = io::load_policy(opt.reference);
  }

  std::optional<PolicySet> K0;
  if (algo != Algorithm::VI) {
    const std::string k0 = opt.k0.empty() ? "zero" : opt.k0;
    if (k0 == "zero") {
      K0 = zero_policy(inst);
    } else if (k0.rfind("ball:", 0) == 0) {
      BallSpec ball;
      ball.radius = std::stod(k0.substr(5));
      ball.seed = seed;
      ball.reference = reference ? *reference : vi_reference();
      K0 = sample_policy_in_ball(inst, ball);
    } else {
      K0 = io::load_policy(k0);
    }
  }

  const SolveResult result = run_solver(inst, K0, cfg, reference);

  std::cout << "algorithm: " << to_string(algo) << "\n"
            << "status: " << to_string(result.status) << "\n"
            << "iterations: " << result.iterations << "\n"
            << "gains:\n"
            << format_policy(result.final_policies);
  if (reference) {
    std::cout << "e_norm: " << normalized_error(result.final_policies, *reference)
              << "\n";
  }
  if (result.final_values) {
    std::cout << "are_residual: "
              << are_residual(inst, result.final_policies, *result.final_values)
              << "\n";
  }
  if (!result.message.empty()) std::cout << "note: " << result.message << "\n";

  const bench::Emit emit = parse_emit(common.emit);
  const fs::path dir = common.out;
  if (emit.csv) io::write_text_file(dir / "trace.csv", io::trace_to_csv(result.trace));
  if (emit.json) {
    io::write_text_file(dir / "result.json", io::result_to_json(result).dump(2) + "\n");
  }
  if (emit.svg) {
    svg::Series s{std::string(to_string(algo)), {}};
    for (const auto& rec : result.trace) {
      s.points.emplace_back(static_cast<double>(rec.k),
                            reference ? rec.e_norm.value_or(0) : rec.policy_delta);
    }
    io::write_text_file(
        dir / "trace.svg",
        svg::line_chart({s}, {"Convergence", "iteration",
                              reference ? "e_norm" : "policy delta", true}));
  }
  return result.converged() ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------

void print_run(const bench::AlgorithmRun& run) {
  std::cout << "  " << std::left << std::setw(16) << run.spec.label()
            << std::setw(18) << to_string(run.result.status) << " iterations "
            << std::setw(7) << run.result.iterations << " e_norm "
            << std::setw(12) << run.final_e_norm
            << (run.reached_reference ? " reached" : " not reached") << "\n";
}

int cmd_exp_a(const CommonOptions& common) {
  const auto runs = common.etas.empty() ? bench::exp_a_runs()
                                        : bench::exp_a_runs(common.etas);
  const auto report = bench::run_exp_a(overrides_from(common), runs);
  std::cout << "exp-a: fixed system, r = 0.1 initial policy\n";
  for (const auto& run : report.runs) print_run(run);
  bench::write_exp_a(report, common.out, parse_emit(common.emit));
  const bool ok = report.expectations_hold();
  std::cout << "PI fewest iterations and PI/GNPG/NPG(0.1) reach reference: "
            << (ok ? "yes" : "no") << "\n";
  return ok ? kExitOk : kExitNotConverged;
}

int cmd_exp_b(const CommonOptions& common) {
  const auto report = bench::run_exp_b(overrides_from(common));
  for (const auto& c : report.cases) {
    std::cout << "exp-b: case " << c.name << "\n";
    for (const auto& run : c.runs) print_run(run);
  }
  bench::write_exp_b(report, common.out, parse_emit(common.emit));
  const bool ok = report.expectations_hold();
  std::cout << "near start all reach, far start NPG(0.1) alone fails: "
            << (ok ? "yes" : "no") << "\n";
  return ok ? kExitOk : kExitNotConverged;
}

struct BenchCliOptions {
  std::size_t count = 200;
  std::size_t n = 4;
  std::size_t m = 2;
  std::size_t players = 2;
  std::size_t threads = 0;
};

int cmd_random_bench(const CommonOptions& common, const BenchCliOptions& b) {
  bench::RandomBenchOptions opt;
  opt.count = b.count;
  opt.n = b.n;
  opt.m = b.m;
  opt.num_players = b.players;
  opt.threads = b.threads;
  opt.seed = effective_seed(common.seed);
  opt.overrides = overrides_from(common);
  if (!common.algos.empty()) {
    opt.runs.clear();
    for (std::size_t i = 0; i < common.algos.size(); ++i) {
      const Algorithm a = parse_algorithm(common.algos[i]);
      if (a == Algorithm::VI) continue;  // VI supplies the reference
      double eta = SolverConfig::defaults(a).eta.empty()
                       ? 0.0
                       : SolverConfig::defaults(a).eta.front();
      if (i < common.etas.size()) eta = common.etas[i];
      opt.runs.push_back({a, eta});
    }
  } else if (!common.etas.empty()) {
    for (std::size_t i = 0; i < opt.runs.size() && i < common.etas.size(); ++i) {
      opt.runs[i].eta = common.etas[i];
    }
  }

  const auto report = bench::run_random_bench(opt);
  bench::write_random_bench(report, common.out, parse_emit(common.emit));
  std::cout << "random-bench: n=" << opt.n << " m=" << opt.m
            << " N=" << opt.num_players << " count=" << opt.count
            << " seed=" << opt.seed << " skipped=" << report.summary.skipped_instances
            << "\n";
  for (const auto& s : report.summary.algorithms) {
    std::cout << "  " << std::left << std::setw(16) << s.label << " convergent "
              << s.convergent_cases << "/" << s.total_cases << "  avg iterations ";
    if (s.average_iterations_over_convergent) {
      std::cout << *s.average_iterations_over_convergent;
    } else {
      std::cout << "n/a";
    }
    std::cout << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nash equilibria of N-player linear-quadratic dynamic games"};
  app.require_subcommand(1);

  CommonOptions common;
  SolveOptions solve_opt;
  BenchCliOptions bench_opt;

  auto* solve = app.add_subcommand("solve", "Run one solver on one instance");
  add_common(solve, common, "lqdg_out/solve");
  solve->add_option("--instance", solve_opt.instance, "Instance JSON path or 'paper'")
      ->capture_default_str();
  solve->add_option("--algo", common.algos, "vi|pi|vpg|npg|gnpg")->expected(1);
  solve->add_option("--eta", common.etas, "Step size (one, or one per player)");
  solve->add_option("--k0", solve_opt.k0, "zero | <policy.json> | ball:<r>");
  solve->add_option("--reference", solve_opt.reference,
                    "vi | <policy.json>: equilibrium for e_norm");

  auto* exp_a = app.add_subcommand("exp-a", "Convergence speed from the r = 0.1 start");
  add_common(exp_a, common, "lqdg_out/exp_a");
  exp_a->add_option("--eta", common.etas, "NPG step sizes to sweep");

  auto* exp_b = app.add_subcommand("exp-b", "Sensitivity to the initial policy");
  add_common(exp_b, common, "lqdg_out/exp_b");

  auto* rb = app.add_subcommand("random-bench", "Benchmark over random instances");
  add_common(rb, common, "lqdg_out/random_bench");
  rb->add_option("--algo", common.algos, "Algorithms (default pi npg gnpg)");
  rb->add_option("--eta", common.etas, "Step size per --algo, in order");
  rb->add_option("--count", bench_opt.count, "Number of instances")->capture_default_str();
  rb->add_option("--n", bench_opt.n, "State dimension")->capture_default_str();
  rb->add_option("--m", bench_opt.m, "Control dimension per player")->capture_default_str();
  rb->add_option("--players", bench_opt.players, "Number of players")->capture_default_str();
  rb->add_option("--threads", bench_opt.threads, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve) return cmd_solve(common, solve_opt);
    if (*exp_a) return cmd_exp_a(common);
    if (*exp_b) return cmd_exp_b(common);
    if (*rb) return cmd_random_bench(common, bench_opt);
  } catch (const std::exception& e) {
    std::cerr << "lqdg: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
