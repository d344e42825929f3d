#pragma once

// Benchmark instances: the fixed two-player system used in the convergence
// experiments, seeded random open-loop-stable games, and initial policies
// sampled from a Frobenius ball around a reference equilibrium.

#include <cstdint>
#include <string>
#include <vector>

#include "lqdg/errors.hpp"
#include "lqdg/game_model.hpp"
#include "lqdg/rng.hpp"

namespace lqdg {

struct GenSpec {
  std::size_t n = 4;
  std::size_t num_players = 2;
  std::vector<std::size_t> m{2, 2};
  std::uint64_t seed = 0;
  double target_radius = 0.8;
  double cost_shift = 1.0;

  void validate() const {
    if (n < 1) throw ArgumentError("n must be positive");
    if (num_players < 1) throw ArgumentError("N must be positive");
    if (m.size() != num_players) {
      throw ArgumentError("m must list one control dimension per player");
    }
    for (auto mi : m) {
      if (mi < 1) throw ArgumentError("control dimensions must be positive");
    }
    if (!(target_radius > 0.0 && target_radius < 1.0)) {
      throw ArgumentError("target_radius must lie in (0, 1)");
    }
    if (!(cost_shift > 0.0)) throw ArgumentError("cost_shift must be positive");
  }
};

struct BallSpec {
  PolicySet reference;
  double radius = 0.1;
  std::uint64_t seed = 0;
  std::size_t max_rejections = 10000;
};

/// The two-state, two-player system of the convergence experiments, X0 = I.
inline GameInstance paper_instance() {
  Matrix A(2, 2);
  A << 0.588, 0.028,
       0.570, 0.056;
  Matrix B1(2, 1);
  B1 << 1.0, 1.0;
  Matrix B2(2, 1);
  B2 << 0.0, 1.0;
  Matrix Q1 = Matrix::Zero(2, 2);
  Q1.diagonal() << 0.01, 1.0;
  Matrix Q2 = Matrix::Zero(2, 2);
  Q2.diagonal() << 1.0, 0.147;
  const Matrix R = Matrix::Constant(1, 1, 0.01);
  return GameInstance(A, {B1, B2}, {Q1, Q2}, {R, R});
}

namespace detail {
inline PolicySet two_row_gains(double a0, double a1, double b0, double b1) {
  Matrix K1(1, 2);
  K1 << a0, a1;
  Matrix K2(1, 2);
  K2 << b0, b1;
  return PolicySet{{K1, K2}};
}
}  // namespace detail

/// Published Nash gains of paper_instance(), rounded to four decimals.
inline PolicySet paper_equilibrium() {
  return detail::two_row_gains(-0.5134, -0.0439, -0.0525, -0.0114);
}

/// Published initial gains inside the r = 0.1 ball.
inline PolicySet paper_initial_policy_near() {
  return detail::two_row_gains(-0.4266, -0.0938, 0.0342, -0.0612);
}

/// Published initial gains inside the r = 0.5 ball.
inline PolicySet paper_initial_policy_far() {
  return detail::two_row_gains(-0.0543, 0.1541, 0.4066, 0.1867);
}

inline PolicySet zero_policy(const GameInstance& inst) {
  PolicySet out;
  for (std::size_t i = 0; i < inst.num_players(); ++i) {
    out.K.push_back(Matrix::Zero(static_cast<Eigen::Index>(inst.m(i)),
                                 static_cast<Eigen::Index>(inst.n())));
  }
  return out;
}

/// A, B^i with iid N(0,1) entries, A rescaled to the target spectral radius;
/// Q^i = G G' + shift I and R^i = H H' + shift I with Gaussian G, H; X0 = I.
/// Each matrix draws from its own child stream of spec.seed.
inline GameInstance random_instance(const GenSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  const std::uint64_t N = spec.num_players;
  const std::uint64_t per_attempt = 3 * N + 1;

  constexpr int kMaxRedraws = 16;
  Matrix A;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxRedraws) {
      throw NumericalError("could not draw A with nonzero spectral radius");
    }
    auto stream = RandomStream::child(
        spec.seed, static_cast<std::uint64_t>(attempt) * per_attempt);
    A = stream.normal_matrix(n, n);
    const double rho = spectral_radius(A);
    if (rho > 1e-12 && std::isfinite(rho)) {
      A *= spec.target_radius / rho;
      break;
    }
  }

  std::vector<Matrix> B, Q, R;
  const Matrix In = Matrix::Identity(n, n);
  for (std::uint64_t i = 0; i < N; ++i) {
    const auto mi = static_cast<Eigen::Index>(spec.m[i]);
    B.push_back(RandomStream::child(spec.seed, 1 + i).normal_matrix(n, mi));
  }
  for (std::uint64_t i = 0; i < N; ++i) {
    const Matrix G =
        RandomStream::child(spec.seed, 1 + N + i).normal_matrix(n, n);
    Q.push_back(symmetrize(G * G.transpose()) + spec.cost_shift * In);
  }
  for (std::uint64_t i = 0; i < N; ++i) {
    const auto mi = static_cast<Eigen::Index>(spec.m[i]);
    const Matrix H =
        RandomStream::child(spec.seed, 1 + 2 * N + i).normal_matrix(mi, mi);
    R.push_back(symmetrize(H * H.transpose()) +
                spec.cost_shift * Matrix::Identity(mi, mi));
  }
  return GameInstance(std::move(A), std::move(B), std::move(Q), std::move(R),
                      In);
}

/// Rejection sampler for K0 with ||K0^i - K^i_ref||_F <= radius for every i
/// and a stabilizing closed loop. Perturbations have a Gaussian direction and
/// a norm uniform on [0, radius].
inline PolicySet sample_policy_in_ball(const GameInstance& inst,
                                       const BallSpec& spec) {
  check_policy(inst, spec.reference);
  if (!(spec.radius > 0.0)) throw ArgumentError("ball radius must be positive");

  for (std::size_t attempt = 0; attempt < spec.max_rejections; ++attempt) {
    auto stream = RandomStream::child(spec.seed, attempt);
    PolicySet candidate = spec.reference;
    bool ok = true;
    for (std::size_t i = 0; i < candidate.size() && ok; ++i) {
      const Matrix direction =
          stream.normal_matrix(candidate[i].rows(), candidate[i].cols());
      const double norm = direction.norm();
      if (!(norm > 0.0)) {
        ok = false;
        break;
      }
      candidate[i] += direction * (stream.uniform() * spec.radius / norm);
      ok = (candidate[i] - spec.reference[i]).norm() <= spec.radius;
    }
    if (ok && spectral_radius(closed_loop_matrix(inst, candidate)) < 1.0) {
      return candidate;
    }
  }
  throw SamplingError("no stabilizing policy found within radius " +
                      std::to_string(spec.radius) + " after " +
                      std::to_string(spec.max_rejections) + " draws");
}

}  // namespace lqdg
