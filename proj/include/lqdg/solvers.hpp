#pragma once

// Equilibrium-seeking algorithms for N-player LQ games: value iteration,
// policy iteration with the joint (simultaneous) policy update, and the
// vanilla, natural and Gauss-Newton policy gradient methods. All five share
// the same stopping rule, sum_i ||K^i_{k+1} - K^i_k||_F <= epsilon confirmed
// by a coupled Riccati residual of at most 10 epsilon, and report a
// per-iteration trace.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lqdg/errors.hpp"
#include "lqdg/game_model.hpp"
#include "lqdg/metrics.hpp"

namespace lqdg {

enum class Algorithm { VI, PI, VPG, NPG, GNPG };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::VI: return "vi";
    case Algorithm::PI: return "pi";
    case Algorithm::VPG: return "vpg";
    case Algorithm::NPG: return "npg";
    case Algorithm::GNPG: return "gnpg";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (auto a : {Algorithm::VI, Algorithm::PI, Algorithm::VPG, Algorithm::NPG,
                 Algorithm::GNPG}) {
    if (to_string(a) == s) return a;
  }
  throw ArgumentError("unknown algorithm '" + std::string(s) + "'");
}

inline bool uses_step_size(Algorithm a) {
  return a == Algorithm::VPG || a == Algorithm::NPG || a == Algorithm::GNPG;
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::PI;
  // Per-player step sizes; a single entry applies to every player.
  std::vector<double> eta;
  double epsilon = 1e-8;
  std::size_t max_iterations = 500;
  double divergence_norm_cap = 1e6;
  double equilibrium_tolerance = 1e-3;
  // Keep every iterate (K_0 first) in SolveResult::gain_history.
  bool record_gains = false;

  static SolverConfig defaults(Algorithm algorithm) {
    SolverConfig cfg;
    cfg.algorithm = algorithm;
    switch (algorithm) {
      case Algorithm::VI:
      case Algorithm::PI:
        cfg.epsilon = 1e-8;
        cfg.max_iterations = 500;
        break;
      case Algorithm::VPG:
        cfg.eta = {0.01};
        cfg.epsilon = 1e-8;
        cfg.max_iterations = 100000;
        break;
      case Algorithm::NPG:
        cfg.eta = {0.1};
        cfg.epsilon = 1e-8;
        cfg.max_iterations = 100000;
        break;
      case Algorithm::GNPG:
        cfg.eta = {0.5};
        cfg.epsilon = 1e-8;
        cfg.max_iterations = 100000;
        break;
    }
    return cfg;
  }

  double eta_for(std::size_t player) const {
    if (eta.size() == 1) return eta.front();
    return eta.at(player);
  }

  void validate(std::size_t num_players) const {
    if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
    if (!(divergence_norm_cap > 0.0)) {
      throw ArgumentError("divergence_norm_cap must be positive");
    }
    if (!uses_step_size(algorithm)) return;
    if (eta.size() != 1 && eta.size() != num_players) {
      throw ArgumentError("eta needs 1 or " + std::to_string(num_players) +
                          " entries");
    }
    for (double e : eta) {
      if (!(e > 0.0)) throw ArgumentError("step sizes must be positive");
    }
  }
};

enum class SolveStatus { Converged, MaxIterations, DivergedUnstable, NumericalFailure };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::DivergedUnstable: return "DivergedUnstable";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

struct IterationRecord {
  std::size_t k = 0;
  double policy_delta = 0.0;
  std::optional<double> e_norm;
  double closed_loop_radius = 0.0;
  std::int64_t elapsed_ns = 0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  std::size_t iterations = 0;
  PolicySet final_policies;
  std::optional<ValueSet> final_values;
  std::vector<IterationRecord> trace;
  SolverConfig config;
  std::string message;
  std::vector<PolicySet> gain_history;

  bool converged() const { return status == SolveStatus::Converged; }
};

// ---------------------------------------------------------------------------
// Policy update
// ---------------------------------------------------------------------------

/// Block system M [K^1; ...; K^N] = G of the joint policy update:
///   M_ii = R^i + B^i' P^i B^i,  M_ij = B^i' P^i B^j,  G_i = -B^i' P^i A.
inline std::pair<Matrix, Matrix> assemble_policy_update_system(
    const GameInstance& inst, const ValueSet& val) {
  check_values(inst, val);
  const std::size_t N = inst.num_players();
  const auto n = static_cast<Eigen::Index>(inst.n());
  const auto total = static_cast<Eigen::Index>(inst.total_controls());
  Matrix M(total, total);
  Matrix G(total, n);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto mi = static_cast<Eigen::Index>(inst.m(i));
    const Matrix BtP = inst.B(i).transpose() * val[i];
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < N; ++j) {
      const auto mj = static_cast<Eigen::Index>(inst.m(j));
      M.block(row, col, mi, mj) = BtP * inst.B(j);
      if (i == j) M.block(row, col, mi, mj) += inst.R(i);
      col += mj;
    }
    G.middleRows(row, mi) = -BtP * inst.A();
    row += mi;
  }
  return {std::move(M), std::move(G)};
}

/// Solves the block system and splits the stacked solution into gains.
inline PolicySet solve_policy_update(const GameInstance& inst, const Matrix& M,
                                     const Matrix& G) {
  Eigen::PartialPivLU<Matrix> lu(M);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw NumericalError("joint policy update system is singular (condition ~" +
                         std::to_string(rcond > 0 ? 1.0 / rcond : INFINITY) +
                         ")");
  }
  const Matrix stacked = lu.solve(G);
  if (!stacked.allFinite()) {
    throw NumericalError("joint policy update produced non-finite gains");
  }
  PolicySet out;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < inst.num_players(); ++i) {
    const auto mi = static_cast<Eigen::Index>(inst.m(i));
    out.K.push_back(stacked.middleRows(row, mi));
    row += mi;
  }
  return out;
}

/// Simultaneous best response of every player to fixed values.
inline PolicySet joint_policy_update(const GameInstance& inst,
                                     const ValueSet& val) {
  const auto [M, G] = assemble_policy_update_system(inst, val);
  return solve_policy_update(inst, M, G);
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

namespace detail {

// (R^i + B^i' P^i B^i) K^i + B^i' P^i Abar^i
inline Matrix gradient_bracket(const GameInstance& inst, const PolicySet& pol,
                               const ValueSet& val, std::size_t i) {
  const Matrix BtP = inst.B(i).transpose() * val[i];
  const Matrix H = inst.R(i) + BtP * inst.B(i);
  return H * pol[i] + BtP * effective_dynamics(inst, pol, i);
}

}  // namespace detail

/// d J^i / d K^i = 2 [(R^i + B^i' P^i B^i) K^i + B^i' P^i Abar^i] Sigma_K.
inline Matrix gradient(const GameInstance& inst, const PolicySet& pol,
                       std::size_t i) {
  if (i >= inst.num_players()) throw ArgumentError("player index out of range");
  const ValueSet values = evaluate_policies(inst, pol);
  const Matrix sigma = state_covariance(inst, pol);
  return 2.0 * detail::gradient_bracket(inst, pol, values, i) * sigma;
}

// ---------------------------------------------------------------------------
// Iteration driver
// ---------------------------------------------------------------------------

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::optional<double> maybe_e_norm(const PolicySet& pol,
                                          const std::optional<PolicySet>& ref) {
  if (!ref) return std::nullopt;
  return normalized_error(pol, *ref);
}

using PolicyStep = std::function<PolicySet(const PolicySet&)>;

// Shared loop for every method that iterates on stabilizing gains: step,
// record, then stop on instability, gain blow-up, or a small enough step.
inline SolveResult iterate_policies(const GameInstance& inst, const PolicySet& K0,
                                    const SolverConfig& cfg,
                                    const std::optional<PolicySet>& reference,
                                    const PolicyStep& step) {
  cfg.validate(inst.num_players());
  check_policy(inst, K0);
  const double rho0 = spectral_radius(closed_loop_matrix(inst, K0));
  if (!(rho0 < 1.0)) {
    throw UnstableError("initial policy is not stabilizing (spectral radius " +
                        std::to_string(rho0) + ")");
  }

  SolveResult result;
  result.config = cfg;
  result.final_policies = K0;
  if (cfg.record_gains) result.gain_history.push_back(K0);

  const Stopwatch clock;
  PolicySet current = K0;
  bool stopped = false;
  for (std::size_t k = 1; k <= cfg.max_iterations; ++k) {
    PolicySet next;
    double rho = 0.0;
    try {
      next = step(current);
      if (!next.all_finite()) throw NumericalError("non-finite gains");
      rho = spectral_radius(closed_loop_matrix(inst, next));
    } catch (const NumericalError& e) {
      result.status = SolveStatus::NumericalFailure;
      result.message = e.what();
      stopped = true;
      break;
    }
    IterationRecord rec;
    rec.k = k;
    rec.policy_delta = policy_distance(next, current);
    rec.e_norm = maybe_e_norm(next, reference);
    rec.closed_loop_radius = rho;
    rec.elapsed_ns = clock.elapsed_ns();
    result.trace.push_back(rec);
    result.iterations = k;
    current = std::move(next);
    if (cfg.record_gains) result.gain_history.push_back(current);

    if (!(rho < 1.0) || current.max_norm() > cfg.divergence_norm_cap) {
      result.status = SolveStatus::DivergedUnstable;
      result.message = !(rho < 1.0) ? "iterate left the stabilizing set"
                                    : "gain norm exceeded cap";
      stopped = true;
      break;
    }
    if (rec.policy_delta <= cfg.epsilon) {
      // Small steps alone are not enough: slow contractions crawl. Require
      // the coupled Riccati residual to confirm the fixed point.
      try {
        ValueSet values = evaluate_policies(inst, current);
        if (are_residual(inst, current, values) <= 10.0 * cfg.epsilon) {
          result.status = SolveStatus::Converged;
          result.final_values = std::move(values);
          stopped = true;
          break;
        }
      } catch (const NumericalError& e) {
        result.status = SolveStatus::NumericalFailure;
        result.message = e.what();
        stopped = true;
        break;
      }
    }
  }
  if (!stopped) result.status = SolveStatus::MaxIterations;
  result.final_policies = current;
  if (result.status == SolveStatus::MaxIterations) {
    try {
      result.final_values = evaluate_policies(inst, current);
    } catch (const NumericalError& e) {
      result.status = SolveStatus::NumericalFailure;
      result.message = e.what();
    }
  }
  return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

/// Coupled Riccati recursion from P_0^i = Q^i. Each sweep computes all gains
/// jointly from the current values, then advances every P^i one step.
inline SolveResult value_iteration(
    const GameInstance& inst, const SolverConfig& cfg,
    const std::optional<PolicySet>& reference = std::nullopt) {
  cfg.validate(inst.num_players());
  SolveResult result;
  result.config = cfg;

  const std::size_t N = inst.num_players();
  ValueSet values{inst.Q()};
  PolicySet gains;
  try {
    gains = joint_policy_update(inst, values);
  } catch (const NumericalError& e) {
    result.status = SolveStatus::NumericalFailure;
    result.message = e.what();
    return result;
  }
  if (cfg.record_gains) result.gain_history.push_back(gains);

  const detail::Stopwatch clock;
  bool stopped = false;
  for (std::size_t k = 1; k <= cfg.max_iterations; ++k) {
    PolicySet next_gains;
    ValueSet next_values;
    double rho = 0.0;
    try {
      const Matrix closed = closed_loop_matrix(inst, gains);
      for (std::size_t i = 0; i < N; ++i) {
        next_values.P.push_back(symmetrize(
            inst.Q(i) + gains[i].transpose() * inst.R(i) * gains[i] +
            closed.transpose() * values[i] * closed));
        if (!next_values.P.back().allFinite()) {
          throw NumericalError("value recursion produced non-finite entries");
        }
      }
      next_gains = joint_policy_update(inst, next_values);
      rho = spectral_radius(closed_loop_matrix(inst, next_gains));
    } catch (const NumericalError& e) {
      result.status = SolveStatus::NumericalFailure;
      result.message = e.what();
      stopped = true;
      break;
    }
    IterationRecord rec;
    rec.k = k;
    rec.policy_delta = policy_distance(next_gains, gains);
    rec.e_norm = detail::maybe_e_norm(next_gains, reference);
    rec.closed_loop_radius = rho;
    rec.elapsed_ns = clock.elapsed_ns();
    result.trace.push_back(rec);
    result.iterations = k;
    gains = std::move(next_gains);
    values = std::move(next_values);
    if (cfg.record_gains) result.gain_history.push_back(gains);

    if (gains.max_norm() > cfg.divergence_norm_cap) {
      result.status = SolveStatus::DivergedUnstable;
      result.message = "gain norm exceeded cap";
      stopped = true;
      break;
    }
    if (rec.policy_delta <= cfg.epsilon) {
      if (!(rho < 1.0)) {
        result.status = SolveStatus::DivergedUnstable;
        result.message = "fixed point is not stabilizing";
        stopped = true;
        break;
      }
      if (are_residual(inst, gains, values) <= 10.0 * cfg.epsilon) {
        result.status = SolveStatus::Converged;
        stopped = true;
        break;
      }
    }
  }
  if (!stopped) result.status = SolveStatus::MaxIterations;
  result.final_policies = gains;
  if (result.status != SolveStatus::NumericalFailure) {
    result.final_values = values;
  }
  return result;
}

/// Policy evaluation (one Lyapunov equation per player) followed by the joint
/// policy update, until the gains stop moving.
inline SolveResult policy_iteration(
    const GameInstance& inst, const PolicySet& K0, const SolverConfig& cfg,
    const std::optional<PolicySet>& reference = std::nullopt) {
  return detail::iterate_policies(
      inst, K0, cfg, reference, [&inst](const PolicySet& K) {
        return joint_policy_update(inst, evaluate_policies(inst, K));
      });
}

/// K^i <- K^i - eta^i grad_i J^i, all players at once.
inline SolveResult vanilla_pg(
    const GameInstance& inst, const PolicySet& K0, const SolverConfig& cfg,
    const std::optional<PolicySet>& reference = std::nullopt) {
  return detail::iterate_policies(
      inst, K0, cfg, reference, [&inst, &cfg](const PolicySet& K) {
        const ValueSet values = evaluate_policies(inst, K);
        const Matrix sigma = state_covariance(inst, K);
        PolicySet next = K;
        for (std::size_t i = 0; i < K.size(); ++i) {
          next[i] -= cfg.eta_for(i) * 2.0 *
                     detail::gradient_bracket(inst, K, values, i) * sigma;
        }
        return next;
      });
}

/// K^i <- K^i - eta^i grad_i J^i Sigma_K^{-1}, all players at once.
inline SolveResult natural_pg(
    const GameInstance& inst, const PolicySet& K0, const SolverConfig& cfg,
    const std::optional<PolicySet>& reference = std::nullopt) {
  return detail::iterate_policies(
      inst, K0, cfg, reference, [&inst, &cfg](const PolicySet& K) {
        const ValueSet values = evaluate_policies(inst, K);
        const Matrix sigma = state_covariance(inst, K);
        Eigen::LLT<Matrix> chol(sigma);
        if (chol.info() != Eigen::Success) {
          throw NumericalError("state covariance is singular");
        }
        PolicySet next = K;
        for (std::size_t i = 0; i < K.size(); ++i) {
          const Matrix grad =
              2.0 * detail::gradient_bracket(inst, K, values, i) * sigma;
          // grad * Sigma^{-1} = (Sigma^{-1} grad')' since Sigma is symmetric.
          next[i] -= cfg.eta_for(i) * chol.solve(grad.transpose()).transpose();
        }
        return next;
      });
}

/// K^i <- (1 - 2 eta^i) K^i - 2 eta^i (R^i + B^i' P^i B^i)^{-1} B^i' P^i Abar^i,
/// with every Abar^i built from the previous iterate.
inline SolveResult gauss_newton_pg(
    const GameInstance& inst, const PolicySet& K0, const SolverConfig& cfg,
    const std::optional<PolicySet>& reference = std::nullopt) {
  return detail::iterate_policies(
      inst, K0, cfg, reference, [&inst, &cfg](const PolicySet& K) {
        const ValueSet values = evaluate_policies(inst, K);
        PolicySet next = K;
        for (std::size_t i = 0; i < K.size(); ++i) {
          const Matrix BtP = inst.B(i).transpose() * values[i];
          Eigen::PartialPivLU<Matrix> lu(inst.R(i) + BtP * inst.B(i));
          if (!(lu.rcond() > 1e-14)) {
            throw NumericalError("R + B'PB is singular for player " +
                                 std::to_string(i));
          }
          const double eta = cfg.eta_for(i);
          next[i] = (1.0 - 2.0 * eta) * K[i] -
                    2.0 * eta * lu.solve(BtP * effective_dynamics(inst, K, i));
        }
        return next;
      });
}

/// Uniform entry point. K0 is required for every algorithm except VI; when a
/// reference equilibrium is given every trace record carries e_norm.
inline SolveResult run_solver(const GameInstance& inst,
                              const std::optional<PolicySet>& K0,
                              const SolverConfig& cfg,
                              const std::optional<PolicySet>& reference =
                                  std::nullopt) {
  if (reference) check_policy(inst, *reference);
  if (cfg.algorithm == Algorithm::VI) {
    return value_iteration(inst, cfg, reference);
  }
  if (!K0) {
    throw ArgumentError(std::string(to_string(cfg.algorithm)) +
                        " needs an initial policy");
  }
  switch (cfg.algorithm) {
    case Algorithm::PI: return policy_iteration(inst, *K0, cfg, reference);
    case Algorithm::VPG: return vanilla_pg(inst, *K0, cfg, reference);
    case Algorithm::NPG: return natural_pg(inst, *K0, cfg, reference);
    case Algorithm::GNPG: return gauss_newton_pg(inst, *K0, cfg, reference);
    case Algorithm::VI: break;
  }
  throw ArgumentError("unhandled algorithm");
}

/// e_norm of the final iterate, or of K0 when no step was taken.
inline double final_e_norm(const SolveResult& result,
                           const PolicySet& reference) {
  return normalized_error(result.final_policies, reference);
}

}  // namespace lqdg
