#pragma once

// Experiment runners behind the lqdg command line: the two convergence
// studies on the fixed two-player system and the random-instance benchmark,
// plus their CSV / JSON / SVG artifacts.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lqdg/game_model.hpp"
#include "lqdg/instance_gen.hpp"
#include "lqdg/io.hpp"
#include "lqdg/metrics.hpp"
#include "lqdg/solvers.hpp"
#include "lqdg/svg_plot.hpp"

namespace lqdg::bench {

using io::json;

struct Emit {
  bool csv = true;
  bool json = true;
  bool svg = true;
};

/// One algorithm / step-size combination within an experiment.
struct RunSpec {
  Algorithm algorithm;
  double eta = 0.0;  // ignored by VI and PI

  std::string label() const {
    std::string out(to_string(algorithm));
    if (uses_step_size(algorithm)) out += "_eta" + io::format_double(eta);
    return out;
  }
};

/// Overrides applied on top of SolverConfig::defaults.
struct SolverOverrides {
  std::optional<double> epsilon;
  std::optional<std::size_t> max_iterations;
  double equilibrium_tolerance = 1e-3;
};

inline SolverConfig make_config(const RunSpec& spec,
                                const SolverOverrides& overrides,
                                bool record_gains = false) {
  SolverConfig cfg = SolverConfig::defaults(spec.algorithm);
  if (uses_step_size(spec.algorithm)) cfg.eta = {spec.eta};
  if (overrides.epsilon) cfg.epsilon = *overrides.epsilon;
  if (overrides.max_iterations) cfg.max_iterations = *overrides.max_iterations;
  cfg.equilibrium_tolerance = overrides.equilibrium_tolerance;
  cfg.record_gains = record_gains;
  return cfg;
}

struct AlgorithmRun {
  RunSpec spec;
  PolicySet initial;
  SolveResult result;
  double initial_e_norm = 0.0;
  double final_e_norm = 0.0;
  bool reached_reference = false;
};

inline AlgorithmRun run_against_reference(const GameInstance& inst,
                                          const PolicySet& K0,
                                          const RunSpec& spec,
                                          const SolverOverrides& overrides,
                                          const PolicySet& reference,
                                          bool record_gains = false) {
  AlgorithmRun run;
  run.spec = spec;
  run.initial = K0;
  run.result = run_solver(inst, K0, make_config(spec, overrides, record_gains),
                          reference);
  run.initial_e_norm = normalized_error(K0, reference);
  run.final_e_norm = normalized_error(run.result.final_policies, reference);
  run.reached_reference = run.final_e_norm <= overrides.equilibrium_tolerance;
  return run;
}

/// Trace with a k = 0 row for the initial policy (zero delta, zero time).
inline std::vector<IterationRecord> trace_with_origin(const GameInstance& inst,
                                                      const AlgorithmRun& run) {
  IterationRecord origin;
  origin.k = 0;
  origin.policy_delta = 0.0;
  origin.e_norm = run.initial_e_norm;
  origin.closed_loop_radius =
      spectral_radius(closed_loop_matrix(inst, run.initial));
  origin.elapsed_ns = 0;
  std::vector<IterationRecord> out{origin};
  out.insert(out.end(), run.result.trace.begin(), run.result.trace.end());
  return out;
}

/// Header and rows for per-iteration gain entries: k, then every K^i entry
/// in row-major order.
inline std::string gains_to_csv(const std::vector<PolicySet>& history) {
  std::string out = "k";
  if (!history.empty()) {
    const PolicySet& first = history.front();
    for (std::size_t i = 0; i < first.size(); ++i) {
      for (Eigen::Index r = 0; r < first[i].rows(); ++r) {
        for (Eigen::Index c = 0; c < first[i].cols(); ++c) {
          out += ",K" + std::to_string(i + 1) + "_" + std::to_string(r) + "_" +
                 std::to_string(c);
        }
      }
    }
  }
  out += "\n";
  for (std::size_t k = 0; k < history.size(); ++k) {
    out += std::to_string(k);
    for (const auto& K : history[k].K) {
      for (Eigen::Index r = 0; r < K.rows(); ++r) {
        for (Eigen::Index c = 0; c < K.cols(); ++c) {
          out += "," + io::format_double(K(r, c));
        }
      }
    }
    out += "\n";
  }
  return out;
}

inline json run_summary_json(const AlgorithmRun& run) {
  return json{{"label", run.spec.label()},
              {"algorithm", std::string(to_string(run.spec.algorithm))},
              {"eta", uses_step_size(run.spec.algorithm) ? json(run.spec.eta)
                                                         : json(nullptr)},
              {"status", std::string(to_string(run.result.status))},
              {"iterations", run.result.iterations},
              {"initial_e_norm", run.initial_e_norm},
              {"final_e_norm", run.final_e_norm},
              {"reached_reference", run.reached_reference},
              {"K", io::matrices_to_json(run.result.final_policies.K)}};
}

/// Reference equilibrium by value iteration with default settings.
inline SolveResult reference_equilibrium(const GameInstance& inst) {
  return value_iteration(inst, SolverConfig::defaults(Algorithm::VI));
}

// ---------------------------------------------------------------------------
// Convergence speed on the fixed system from the r = 0.1 initial policy
// ---------------------------------------------------------------------------

struct ExpAReport {
  SolveResult reference_run;
  PolicySet reference;
  std::vector<AlgorithmRun> runs;

  const AlgorithmRun* find(Algorithm a, double eta = 0.0) const {
    for (const auto& r : runs) {
      if (r.spec.algorithm == a && (!uses_step_size(a) || r.spec.eta == eta)) {
        return &r;
      }
    }
    return nullptr;
  }

  /// PI, GNPG(0.5) and NPG(0.1) all reach the reference, and PI needs the
  /// fewest iterations.
  bool expectations_hold() const {
    const auto* pi = find(Algorithm::PI);
    const auto* gn = find(Algorithm::GNPG, 0.5);
    const auto* npg = find(Algorithm::NPG, 0.1);
    if (!pi || !gn || !npg) return false;
    return pi->reached_reference && gn->reached_reference &&
           npg->reached_reference &&
           pi->result.iterations < gn->result.iterations &&
           pi->result.iterations < npg->result.iterations;
  }
};

inline std::vector<RunSpec> exp_a_runs(const std::vector<double>& npg_etas = {
                                           1e-3, 1e-2, 1e-1}) {
  std::vector<RunSpec> out{{Algorithm::PI, 0.0}, {Algorithm::GNPG, 0.5}};
  for (double eta : npg_etas) out.push_back({Algorithm::NPG, eta});
  return out;
}

inline ExpAReport run_exp_a(const SolverOverrides& overrides = {},
                            const std::vector<RunSpec>& runs = exp_a_runs()) {
  const GameInstance inst = paper_instance();
  ExpAReport report;
  report.reference_run = reference_equilibrium(inst);
  if (!report.reference_run.converged()) {
    throw NumericalError("value iteration did not converge on the fixed system");
  }
  report.reference = report.reference_run.final_policies;
  const PolicySet K0 = paper_initial_policy_near();
  for (const auto& spec : runs) {
    report.runs.push_back(
        run_against_reference(inst, K0, spec, overrides, report.reference));
  }
  return report;
}

inline void write_exp_a(const ExpAReport& report,
                        const std::filesystem::path& dir, const Emit& emit) {
  const GameInstance inst = paper_instance();
  std::vector<svg::Series> by_iter, by_time;
  json runs = json::array();
  for (const auto& run : report.runs) {
    const auto trace = trace_with_origin(inst, run);
    if (emit.csv) {
      io::write_text_file(dir / (run.spec.label() + ".csv"),
                          io::trace_to_csv(trace));
    }
    svg::Series it{run.spec.label(), {}}, tm{run.spec.label(), {}};
    for (const auto& rec : trace) {
      it.points.emplace_back(static_cast<double>(rec.k), rec.e_norm.value_or(0));
      tm.points.emplace_back(static_cast<double>(rec.elapsed_ns) * 1e-6,
                             rec.e_norm.value_or(0));
    }
    by_iter.push_back(std::move(it));
    by_time.push_back(std::move(tm));
    runs.push_back(run_summary_json(run));
  }
  if (emit.svg) {
    io::write_text_file(
        dir / "exp_a_iterations.svg",
        svg::line_chart(by_iter, {"Normalized error vs iterations (r = 0.1)",
                                  "iteration", "e_norm", true}));
    io::write_text_file(
        dir / "exp_a_time.svg",
        svg::line_chart(by_time, {"Normalized error vs wall-clock time (r = 0.1)",
                                  "elapsed [ms]", "e_norm", true}));
  }
  if (emit.json) {
    const auto* pi = report.find(Algorithm::PI);
    const auto* gn = report.find(Algorithm::GNPG, 0.5);
    json summary{{"experiment", "exp-a"},
                 {"reference_K", io::matrices_to_json(report.reference.K)},
                 {"runs", std::move(runs)},
                 {"pi_fewer_iterations_than_gnpg",
                  pi && gn && pi->result.iterations < gn->result.iterations},
                 {"expectations_hold", report.expectations_hold()}};
    io::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// Sensitivity to the initial policy: r = 0.1 and r = 0.5 starts
// ---------------------------------------------------------------------------

struct ExpBCase {
  std::string name;
  double radius = 0.0;
  PolicySet initial;
  std::vector<AlgorithmRun> runs;

  const AlgorithmRun* find(Algorithm a) const {
    for (const auto& r : runs) {
      if (r.spec.algorithm == a) return &r;
    }
    return nullptr;
  }
};

struct ExpBReport {
  SolveResult reference_run;
  PolicySet reference;
  std::vector<ExpBCase> cases;

  /// Near start: all three reach the reference. Far start: PI and GNPG do,
  /// NPG does not.
  bool expectations_hold() const {
    if (cases.size() != 2) return false;
    const auto& near = cases[0];
    const auto& far = cases[1];
    for (const auto& run : near.runs) {
      if (!run.reached_reference) return false;
    }
    const auto* pi = far.find(Algorithm::PI);
    const auto* gn = far.find(Algorithm::GNPG);
    const auto* npg = far.find(Algorithm::NPG);
    return pi && gn && npg && pi->reached_reference && gn->reached_reference &&
           !npg->reached_reference;
  }
};

inline std::vector<RunSpec> exp_b_runs() {
  return {{Algorithm::PI, 0.0}, {Algorithm::GNPG, 0.5}, {Algorithm::NPG, 0.1}};
}

inline ExpBReport run_exp_b(const SolverOverrides& overrides = {},
                            const std::vector<RunSpec>& runs = exp_b_runs()) {
  const GameInstance inst = paper_instance();
  ExpBReport report;
  report.reference_run = reference_equilibrium(inst);
  if (!report.reference_run.converged()) {
    throw NumericalError("value iteration did not converge on the fixed system");
  }
  report.reference = report.reference_run.final_policies;
  report.cases.push_back({"r0.1", 0.1, paper_initial_policy_near(), {}});
  report.cases.push_back({"r0.5", 0.5, paper_initial_policy_far(), {}});
  for (auto& c : report.cases) {
    for (const auto& spec : runs) {
      c.runs.push_back(run_against_reference(inst, c.initial, spec, overrides,
                                             report.reference,
                                             /*record_gains=*/true));
    }
  }
  return report;
}

inline void write_exp_b(const ExpBReport& report,
                        const std::filesystem::path& dir, const Emit& emit) {
  const GameInstance inst = paper_instance();
  json cases = json::array();
  for (const auto& c : report.cases) {
    std::vector<svg::Series> errors, gains;
    json runs = json::array();
    for (const auto& run : c.runs) {
      const std::string stem = c.name + "_" + run.spec.label();
      const auto trace = trace_with_origin(inst, run);
      if (emit.csv) {
        io::write_text_file(dir / (stem + "_trace.csv"), io::trace_to_csv(trace));
        io::write_text_file(dir / (stem + "_gains.csv"),
                            gains_to_csv(run.result.gain_history));
      }
      svg::Series err{run.spec.label(), {}};
      for (const auto& rec : trace) {
        err.points.emplace_back(static_cast<double>(rec.k), rec.e_norm.value_or(0));
      }
      errors.push_back(std::move(err));
      // Player 1 and player 2 gain entries against the iteration index.
      const auto& hist = run.result.gain_history;
      if (!hist.empty()) {
        for (std::size_t i = 0; i < hist.front().size(); ++i) {
          for (Eigen::Index e = 0; e < hist.front()[i].size(); ++e) {
            svg::Series s{run.spec.label() + " K" + std::to_string(i + 1) + "[" +
                              std::to_string(e) + "]",
                          {}};
            for (std::size_t k = 0; k < hist.size(); ++k) {
              s.points.emplace_back(static_cast<double>(k),
                                    hist[k][i].reshaped<Eigen::RowMajor>()(e));
            }
            gains.push_back(std::move(s));
          }
        }
      }
      runs.push_back(run_summary_json(run));
    }
    if (emit.svg) {
      io::write_text_file(
          dir / (c.name + "_enorm.svg"),
          svg::line_chart(errors, {"Normalized error, " + c.name, "iteration",
                                   "e_norm", true}));
      svg::PlotOptions opt{"Gain trajectories, " + c.name, "iteration", "gain entry",
                           false};
      opt.width = 900;
      opt.height = 560;
      io::write_text_file(dir / (c.name + "_gains.svg"),
                          svg::line_chart(gains, opt));
    }
    cases.push_back(json{{"case", c.name},
                         {"radius", c.radius},
                         {"K0", io::matrices_to_json(c.initial.K)},
                         {"runs", std::move(runs)}});
  }
  if (emit.json) {
    json summary{{"experiment", "exp-b"},
                 {"reference_K", io::matrices_to_json(report.reference.K)},
                 {"cases", std::move(cases)},
                 {"expectations_hold", report.expectations_hold()}};
    io::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// Random-instance benchmark
// ---------------------------------------------------------------------------

struct RandomBenchOptions {
  std::size_t count = 200;
  std::size_t n = 4;
  std::size_t num_players = 2;
  std::size_t m = 2;
  std::uint64_t seed = 0;
  double target_radius = 0.8;
  double cost_shift = 1.0;
  std::vector<RunSpec> runs{{Algorithm::PI, 0.0},
                            {Algorithm::NPG, 0.1},
                            {Algorithm::GNPG, 0.5}};
  SolverOverrides overrides;
  std::size_t threads = 0;  // 0: hardware concurrency

  GenSpec gen_spec(std::size_t index) const {
    GenSpec spec;
    spec.n = n;
    spec.num_players = num_players;
    spec.m.assign(num_players, m);
    spec.seed = seed + index;
    spec.target_radius = target_radius;
    spec.cost_shift = cost_shift;
    return spec;
  }
};

struct InstanceRun {
  std::string status;
  std::size_t iterations = 0;
  std::optional<double> final_e_norm;
  bool convergent = false;
  std::int64_t elapsed_ns = 0;
};

struct InstanceOutcome {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  InstanceRun reference;  // value iteration
  bool skipped = false;
  std::vector<InstanceRun> runs;  // parallel to RandomBenchOptions::runs
};

struct AlgorithmSummary {
  std::string label;
  std::size_t convergent_cases = 0;
  std::size_t total_cases = 0;
  std::optional<double> average_iterations_over_convergent;
  std::optional<double> average_elapsed_ns_over_convergent;
};

struct BenchSummary {
  std::size_t instances = 0;
  std::size_t skipped_instances = 0;
  std::vector<AlgorithmSummary> algorithms;

  const AlgorithmSummary* find(const std::string& label) const {
    for (const auto& a : algorithms) {
      if (a.label == label) return &a;
    }
    return nullptr;
  }
};

struct RandomBenchReport {
  RandomBenchOptions options;
  std::vector<InstanceOutcome> outcomes;
  BenchSummary summary;
};

namespace detail {

inline std::int64_t last_elapsed(const SolveResult& r) {
  return r.trace.empty() ? 0 : r.trace.back().elapsed_ns;
}

inline InstanceOutcome run_instance(const RandomBenchOptions& opt,
                                    std::size_t index) {
  InstanceOutcome out;
  out.index = index;
  const GenSpec spec = opt.gen_spec(index);
  out.seed = spec.seed;
  out.runs.resize(opt.runs.size());

  PolicySet reference;
  std::optional<GameInstance> inst;
  try {
    inst = random_instance(spec);
    SolverConfig vi_cfg = SolverConfig::defaults(Algorithm::VI);
    vi_cfg.equilibrium_tolerance = opt.overrides.equilibrium_tolerance;
    const SolveResult vi = value_iteration(*inst, vi_cfg);
    out.reference.status = std::string(to_string(vi.status));
    out.reference.iterations = vi.iterations;
    out.reference.elapsed_ns = last_elapsed(vi);
    out.reference.convergent = vi.converged();
    reference = vi.final_policies;
    // e_norm is undefined against a zero reference gain.
    for (const auto& K : reference.K) {
      if (!(K.norm() > 0.0)) out.reference.convergent = false;
    }
  } catch (const std::exception&) {
    out.reference.status = "Error";
    out.reference.convergent = false;
  }
  if (!out.reference.convergent) {
    out.skipped = true;
    return out;
  }

  const PolicySet K0 = zero_policy(*inst);
  for (std::size_t a = 0; a < opt.runs.size(); ++a) {
    InstanceRun& run = out.runs[a];
    try {
      const SolveResult r =
          run_solver(*inst, K0, make_config(opt.runs[a], opt.overrides), reference);
      run.status = std::string(to_string(r.status));
      run.iterations = r.iterations;
      run.elapsed_ns = last_elapsed(r);
      run.final_e_norm = normalized_error(r.final_policies, reference);
      run.convergent = *run.final_e_norm <= opt.overrides.equilibrium_tolerance;
    } catch (const std::exception&) {
      run.status = "Error";
    }
  }
  return out;
}

}  // namespace detail

inline BenchSummary summarize(const RandomBenchOptions& opt,
                              const std::vector<InstanceOutcome>& outcomes) {
  BenchSummary summary;
  summary.instances = outcomes.size();
  for (const auto& o : outcomes) summary.skipped_instances += o.skipped ? 1 : 0;
  for (std::size_t a = 0; a < opt.runs.size(); ++a) {
    AlgorithmSummary s;
    s.label = opt.runs[a].label();
    double iterations = 0.0, elapsed = 0.0;
    for (const auto& o : outcomes) {
      if (o.skipped) continue;
      ++s.total_cases;
      if (o.runs[a].convergent) {
        ++s.convergent_cases;
        iterations += static_cast<double>(o.runs[a].iterations);
        elapsed += static_cast<double>(o.runs[a].elapsed_ns);
      }
    }
    if (s.convergent_cases > 0) {
      const auto c = static_cast<double>(s.convergent_cases);
      s.average_iterations_over_convergent = iterations / c;
      s.average_elapsed_ns_over_convergent = elapsed / c;
    }
    summary.algorithms.push_back(std::move(s));
  }
  return summary;
}

/// Instances run on a worker pool; results are stored by index, so the
/// report does not depend on scheduling.
inline RandomBenchReport run_random_bench(const RandomBenchOptions& opt) {
  if (opt.count < 1) throw ArgumentError("count must be at least 1");
  RandomBenchReport report;
  report.options = opt;
  report.outcomes.resize(opt.count);

  std::size_t workers = opt.threads;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, opt.count);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < opt.count; i = next++) {
      report.outcomes[i] = detail::run_instance(opt, i);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  report.summary = summarize(opt, report.outcomes);
  return report;
}

inline constexpr const char* kInstanceCsvHeader =
    "index,seed,algorithm,status,iterations,final_e_norm,convergent,elapsed_ns";

inline std::string instances_to_csv(const RandomBenchReport& report) {
  std::string out = std::string(kInstanceCsvHeader) + "\n";
  auto row = [&](const InstanceOutcome& o, const std::string& label,
                 const InstanceRun& r) {
    out += std::to_string(o.index) + "," + std::to_string(o.seed) + "," + label +
           "," + r.status + "," + std::to_string(r.iterations) + "," +
           (r.final_e_norm ? io::format_double(*r.final_e_norm) : "") + "," +
           (r.convergent ? "1" : "0") + "," + std::to_string(r.elapsed_ns) + "\n";
  };
  for (const auto& o : report.outcomes) {
    row(o, "vi", o.reference);
    if (o.skipped) continue;
    for (std::size_t a = 0; a < o.runs.size(); ++a) {
      row(o, report.options.runs[a].label(), o.runs[a]);
    }
  }
  return out;
}

/// Table-shaped summary. Wall-clock averages are left out unless
/// include_timing is set, so the default document is reproducible.
inline json summary_to_json(const RandomBenchReport& report,
                            bool include_timing = false) {
  const auto& opt = report.options;
  json algorithms = json::object();
  for (const auto& s : report.summary.algorithms) {
    json a{{"convergent_cases", s.convergent_cases},
           {"total_cases", s.total_cases},
           {"average_iterations_over_convergent", nullptr}};
    if (s.average_iterations_over_convergent) {
      a["average_iterations_over_convergent"] = *s.average_iterations_over_convergent;
    }
    if (include_timing) {
      a["average_elapsed_ns_over_convergent"] =
          s.average_elapsed_ns_over_convergent
              ? json(*s.average_elapsed_ns_over_convergent)
              : json(nullptr);
    }
    algorithms[s.label] = std::move(a);
  }
  return json{{"experiment", "random-bench"},
              {"n", opt.n},
              {"N", opt.num_players},
              {"m", opt.m},
              {"count", opt.count},
              {"seed", opt.seed},
              {"target_radius", opt.target_radius},
              {"cost_shift", opt.cost_shift},
              {"equilibrium_tolerance", opt.overrides.equilibrium_tolerance},
              {"generator", kGeneratorFamily},
              {"instances", report.summary.instances},
              {"skipped_instances", report.summary.skipped_instances},
              {"algorithms", std::move(algorithms)}};
}

inline void write_random_bench(const RandomBenchReport& report,
                               const std::filesystem::path& dir,
                               const Emit& emit) {
  if (emit.csv) io::write_text_file(dir / "instances.csv", instances_to_csv(report));
  if (emit.json) {
    io::write_text_file(dir / "summary.json", summary_to_json(report).dump(2) + "\n");
    io::write_text_file(dir / "timing.json",
                        summary_to_json(report, true).dump(2) + "\n");
  }
  if (emit.svg) {
    // Iterations of each convergent run, by instance index.
    std::vector<svg::Series> series;
    for (std::size_t a = 0; a < report.options.runs.size(); ++a) {
      svg::Series s{report.options.runs[a].label(), {}};
      for (const auto& o : report.outcomes) {
        if (!o.skipped && o.runs[a].convergent) {
          s.points.emplace_back(static_cast<double>(o.index),
                                static_cast<double>(o.runs[a].iterations));
        }
      }
      series.push_back(std::move(s));
    }
    io::write_text_file(dir / "iterations.svg",
                        svg::line_chart(series, {"Iterations of convergent runs",
                                                 "instance", "iterations", true}));
  }
}

}  // namespace lqdg::bench
