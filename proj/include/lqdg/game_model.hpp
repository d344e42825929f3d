#pragma once

// Core types for N-player linear-quadratic dynamic games and the matrix
// equation primitives shared by every solver: closed loops, discrete Lyapunov
// solves, policy evaluation, costs, coupled Riccati residuals and the PBH
// stabilizability / detectability tests.
//
// Dynamics x_{t+1} = A x_t + sum_i B^i u^i_t with u^i_t = K^i x_t. Player i
// pays sum_t x_t' Q^i x_t + u^i_t' R^i u^i_t, averaged over x_0 with second
// moment X0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lqdg/errors.hpp"

namespace lqdg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kPbhRankTolerance = 1e-8;

namespace detail {

inline std::string shape(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

inline void require_shape(const Matrix& M, Eigen::Index rows, Eigen::Index cols,
                          const std::string& name) {
  if (M.rows() != rows || M.cols() != cols) {
    throw ArgumentError(name + " has shape " + shape(M) + ", expected " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
}

inline bool is_symmetric(const Matrix& M, double tol = kSymmetryTolerance) {
  return M.rows() == M.cols() &&
         (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline double min_symmetric_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("symmetric eigen-solver failed");
  }
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Returns (M + M') / 2.
inline Matrix symmetrize(const Matrix& M) {
  return 0.5 * (M + M.transpose());
}

/// The tuple (A, B^i, Q^i, R^i, X0). Validated on construction and immutable
/// afterwards.
class GameInstance {
 public:
  GameInstance(Matrix A, std::vector<Matrix> B, std::vector<Matrix> Q,
               std::vector<Matrix> R, Matrix X0)
      : A_(std::move(A)),
        B_(std::move(B)),
        Q_(std::move(Q)),
        R_(std::move(R)),
        X0_(std::move(X0)) {
    validate();
  }

  /// X0 defaults to the identity.
  GameInstance(Matrix A, std::vector<Matrix> B, std::vector<Matrix> Q,
               std::vector<Matrix> R)
      : GameInstance(A, std::move(B), std::move(Q), std::move(R),
                     Matrix::Identity(A.rows(), A.rows())) {}

  std::size_t n() const { return static_cast<std::size_t>(A_.rows()); }
  std::size_t num_players() const { return B_.size(); }
  std::size_t m(std::size_t i) const {
    return static_cast<std::size_t>(B_.at(i).cols());
  }
  std::size_t total_controls() const {
    std::size_t total = 0;
    for (const auto& b : B_) total += static_cast<std::size_t>(b.cols());
    return total;
  }
  std::vector<std::size_t> control_dims() const {
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < num_players(); ++i) dims.push_back(m(i));
    return dims;
  }

  const Matrix& A() const { return A_; }
  const Matrix& B(std::size_t i) const { return B_.at(i); }
  const Matrix& Q(std::size_t i) const { return Q_.at(i); }
  const Matrix& R(std::size_t i) const { return R_.at(i); }
  const Matrix& X0() const { return X0_; }

  const std::vector<Matrix>& B() const { return B_; }
  const std::vector<Matrix>& Q() const { return Q_; }
  const std::vector<Matrix>& R() const { return R_; }

  /// Copy with a different initial-state second moment.
  GameInstance with_X0(Matrix X0) const {
    return GameInstance(A_, B_, Q_, R_, std::move(X0));
  }

 private:
  void validate() const {
    const auto n = A_.rows();
    if (n < 1 || A_.cols() != n) {
      throw ArgumentError("A must be square and nonempty, got " +
                          detail::shape(A_));
    }
    if (B_.empty()) throw ArgumentError("at least one player is required");
    if (Q_.size() != B_.size() || R_.size() != B_.size()) {
      throw ArgumentError("B, Q and R must have one entry per player");
    }
    if (!A_.allFinite() || !X0_.allFinite()) {
      throw ArgumentError("A and X0 must be finite");
    }
    for (std::size_t i = 0; i < B_.size(); ++i) {
      const std::string p = "[" + std::to_string(i) + "]";
      if (B_[i].rows() != n || B_[i].cols() < 1) {
        throw ArgumentError("B" + p + " has shape " + detail::shape(B_[i]));
      }
      const auto mi = B_[i].cols();
      detail::require_shape(Q_[i], n, n, "Q" + p);
      detail::require_shape(R_[i], mi, mi, "R" + p);
      if (!B_[i].allFinite() || !Q_[i].allFinite() || !R_[i].allFinite()) {
        throw ArgumentError("player " + p + " matrices must be finite");
      }
      if (!detail::is_symmetric(Q_[i])) {
        throw ArgumentError("Q" + p + " is not symmetric");
      }
      if (detail::min_symmetric_eigenvalue(Q_[i]) < -kPsdTolerance) {
        throw ArgumentError("Q" + p + " is not positive semidefinite");
      }
      if (!detail::is_symmetric(R_[i])) {
        throw ArgumentError("R" + p + " is not symmetric");
      }
      Eigen::LLT<Matrix> llt(symmetrize(R_[i]));
      if (llt.info() != Eigen::Success ||
          detail::min_symmetric_eigenvalue(R_[i]) <= 0.0) {
        throw ArgumentError("R" + p + " is not positive definite");
      }
    }
    detail::require_shape(X0_, n, n, "X0");
    if (!detail::is_symmetric(X0_)) {
      throw ArgumentError("X0 is not symmetric");
    }
    if (detail::min_symmetric_eigenvalue(X0_) < -kPsdTolerance) {
      throw ArgumentError("X0 is not positive semidefinite");
    }
  }

  Matrix A_;
  std::vector<Matrix> B_;
  std::vector<Matrix> Q_;
  std::vector<Matrix> R_;
  Matrix X0_;
};

/// One feedback gain K^i (m_i x n) per player.
struct PolicySet {
  std::vector<Matrix> K;

  std::size_t size() const { return K.size(); }
  const Matrix& operator[](std::size_t i) const { return K[i]; }
  Matrix& operator[](std::size_t i) { return K[i]; }

  bool all_finite() const {
    return std::all_of(K.begin(), K.end(),
                       [](const Matrix& k) { return k.allFinite(); });
  }

  /// Largest per-player Frobenius norm.
  double max_norm() const {
    double out = 0.0;
    for (const auto& k : K) out = std::max(out, k.norm());
    return out;
  }
};

/// One symmetric value matrix P^i per player.
struct ValueSet {
  std::vector<Matrix> P;

  std::size_t size() const { return P.size(); }
  const Matrix& operator[](std::size_t i) const { return P[i]; }
};

struct StabilityReport {
  double closed_loop_spectral_radius = 0.0;
  bool is_stable = false;
  std::vector<bool> per_player_stabilizable;
  std::vector<bool> per_player_detectable;
};

/// Throws ArgumentError unless every K^i is finite and m_i x n.
inline void check_policy(const GameInstance& inst, const PolicySet& pol) {
  if (pol.size() != inst.num_players()) {
    throw ArgumentError("policy has " + std::to_string(pol.size()) +
                        " gains for " + std::to_string(inst.num_players()) +
                        " players");
  }
  const auto n = static_cast<Eigen::Index>(inst.n());
  for (std::size_t i = 0; i < pol.size(); ++i) {
    detail::require_shape(pol[i], static_cast<Eigen::Index>(inst.m(i)), n,
                          "K[" + std::to_string(i) + "]");
  }
  if (!pol.all_finite()) throw ArgumentError("policy gains must be finite");
}

inline void check_values(const GameInstance& inst, const ValueSet& val) {
  if (val.size() != inst.num_players()) {
    throw ArgumentError("value set size does not match player count");
  }
  const auto n = static_cast<Eigen::Index>(inst.n());
  for (std::size_t i = 0; i < val.size(); ++i) {
    detail::require_shape(val[i], n, n, "P[" + std::to_string(i) + "]");
  }
}

/// A + sum_j B^j K^j.
inline Matrix closed_loop_matrix(const GameInstance& inst,
                                 const PolicySet& pol) {
  check_policy(inst, pol);
  Matrix out = inst.A();
  for (std::size_t j = 0; j < inst.num_players(); ++j) {
    out.noalias() += inst.B(j) * pol[j];
  }
  return out;
}

/// A + sum_{j != i} B^j K^j, the dynamics player i faces. Dimensions are not
/// rechecked.
inline Matrix effective_dynamics(const GameInstance& inst, const PolicySet& pol,
                                 std::size_t i) {
  Matrix out = inst.A();
  for (std::size_t j = 0; j < inst.num_players(); ++j) {
    if (j != i) out.noalias() += inst.B(j) * pol[j];
  }
  return out;
}

/// Largest eigenvalue modulus of a square matrix.
inline double spectral_radius(const Matrix& M) {
  if (M.rows() != M.cols()) {
    throw ArgumentError("spectral_radius needs a square matrix, got " +
                        detail::shape(M));
  }
  if (M.size() == 0) return 0.0;
  if (!M.allFinite()) throw NumericalError("non-finite matrix entries");
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigen-solver did not converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Solver for P = W + F' P F, factoring (I - F' (x) F') once so that several
/// right-hand sides W can share it.
class DiscreteLyapunovSolver {
 public:
  explicit DiscreteLyapunovSolver(const Matrix& F) : n_(F.rows()) {
    if (F.rows() != F.cols()) {
      throw ArgumentError("Lyapunov matrix must be square, got " +
                          detail::shape(F));
    }
    const double rho = spectral_radius(F);
    if (!(rho < 1.0)) {
      throw UnstableError("Lyapunov solve needs spectral radius < 1, got " +
                          std::to_string(rho));
    }
    // Column-major vec: vec(F' P F) = (F' (x) F') vec(P).
    const Matrix Ft = F.transpose();
    Matrix system = Matrix::Identity(n_ * n_, n_ * n_);
    for (Eigen::Index c = 0; c < n_; ++c) {
      for (Eigen::Index r = 0; r < n_; ++r) {
        system.block(c * n_, r * n_, n_, n_) -= Ft(c, r) * Ft;
      }
    }
    lu_.compute(system);
    const double rcond = lu_.rcond();
    if (!(rcond > 1e-14)) {
      throw NumericalError("vectorized Lyapunov system is singular (rcond " +
                           std::to_string(rcond) + ")");
    }
    system_ = std::move(system);
  }

  Matrix solve(const Matrix& W) const {
    detail::require_shape(W, n_, n_, "W");
    const Eigen::Map<const Vector> w(W.data(), n_ * n_);
    Vector p = lu_.solve(w);
    // One step of iterative refinement.
    const Vector r = w - system_ * p;
    p += lu_.solve(r);
    if (!p.allFinite()) throw NumericalError("Lyapunov solve produced NaN");
    return symmetrize(Eigen::Map<const Matrix>(p.data(), n_, n_));
  }

 private:
  Eigen::Index n_;
  Matrix system_;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// Unique symmetric P with P = W + F' P F. Requires spectral_radius(F) < 1.
inline Matrix solve_discrete_lyapunov(const Matrix& F, const Matrix& W) {
  if (!detail::is_symmetric(W, 1e-8 * std::max(1.0, W.norm()))) {
    throw ArgumentError("Lyapunov right-hand side must be symmetric");
  }
  return DiscreteLyapunovSolver(F).solve(W);
}

/// Per-player values of a stabilizing joint policy:
/// P^i = Q^i + K^i' R^i K^i + A_cl' P^i A_cl.
inline ValueSet evaluate_policies(const GameInstance& inst,
                                  const PolicySet& pol) {
  const Matrix closed = closed_loop_matrix(inst, pol);
  const DiscreteLyapunovSolver solver(closed);
  ValueSet out;
  out.P.reserve(inst.num_players());
  for (std::size_t i = 0; i < inst.num_players(); ++i) {
    const Matrix W =
        symmetrize(inst.Q(i) + pol[i].transpose() * inst.R(i) * pol[i]);
    out.P.push_back(solver.solve(W));
  }
  return out;
}

/// J^i = trace(P^i X0).
inline std::vector<double> cost(const GameInstance& inst,
                                const PolicySet& pol) {
  const ValueSet values = evaluate_policies(inst, pol);
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& P : values.P) out.push_back((P * inst.X0()).trace());
  return out;
}

/// Aggregate state second moment, Sigma = X0 + A_cl Sigma A_cl'.
inline Matrix state_covariance(const GameInstance& inst, const PolicySet& pol) {
  const Matrix closed = closed_loop_matrix(inst, pol);
  return DiscreteLyapunovSolver(closed.transpose()).solve(inst.X0());
}

/// Max over players of the Frobenius norms of the value defect
///   P^i - Q^i - K^i' R^i K^i - (Abar^i + B^i K^i)' P^i (Abar^i + B^i K^i)
/// and the gain defect
///   K^i + (R^i + B^i' P^i B^i)^{-1} B^i' P^i Abar^i.
inline double are_residual(const GameInstance& inst, const PolicySet& pol,
                           const ValueSet& val) {
  check_policy(inst, pol);
  check_values(inst, val);
  double worst = 0.0;
  for (std::size_t i = 0; i < inst.num_players(); ++i) {
    const Matrix& B = inst.B(i);
    const Matrix& P = val[i];
    const Matrix& K = pol[i];
    const Matrix Abar = effective_dynamics(inst, pol, i);
    const Matrix closed = Abar + B * K;
    const Matrix value_defect = P - inst.Q(i) - K.transpose() * inst.R(i) * K -
                                closed.transpose() * P * closed;
    const Matrix H = inst.R(i) + B.transpose() * P * B;
    Eigen::PartialPivLU<Matrix> lu(H);
    if (!(lu.rcond() > 1e-14)) {
      throw NumericalError("R + B'PB is singular for player " +
                           std::to_string(i));
    }
    const Matrix gain_defect = K + lu.solve(B.transpose() * P * Abar);
    worst = std::max({worst, value_defect.norm(), gain_defect.norm()});
  }
  return worst;
}

namespace detail {

// Numerical rank of a complex matrix, relative to its largest singular value.
inline Eigen::Index numerical_rank(const Eigen::MatrixXcd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const Vector s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = kPbhRankTolerance * s(0);
  return (s.array() > cutoff).count();
}

// Symmetric square root C with C' C = M for symmetric PSD M.
inline Matrix symmetric_factor(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
  if (es.info() != Eigen::Success) {
    throw NumericalError("symmetric eigen-solver failed");
  }
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Eigenvalues on or outside the unit circle. The small slack keeps modes that
// sit on the circle up to rounding.
inline std::vector<std::complex<double>> marginal_eigenvalues(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigen-solver did not converge");
  }
  std::vector<std::complex<double>> out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    if (std::abs(es.eigenvalues()(k)) >= 1.0 - 1e-10) {
      out.push_back(es.eigenvalues()(k));
    }
  }
  return out;
}

}  // namespace detail

/// Closed-loop stability plus the per-player PBH tests: (Abar^i, B^i)
/// stabilizable and (Abar^i, C^i) detectable with C^i' C^i = Q^i + K^i' R^i K^i.
inline StabilityReport check_equilibrium_conditions(const GameInstance& inst,
                                                    const PolicySet& pol) {
  StabilityReport report;
  report.closed_loop_spectral_radius =
      spectral_radius(closed_loop_matrix(inst, pol));
  report.is_stable = report.closed_loop_spectral_radius < 1.0;

  const auto n = static_cast<Eigen::Index>(inst.n());
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  for (std::size_t i = 0; i < inst.num_players(); ++i) {
    const Matrix Abar = effective_dynamics(inst, pol, i);
    const Matrix C = detail::symmetric_factor(
        inst.Q(i) + pol[i].transpose() * inst.R(i) * pol[i]);
    const Eigen::MatrixXcd Ac = Abar.cast<std::complex<double>>();
    const Eigen::MatrixXcd Bc = inst.B(i).cast<std::complex<double>>();
    const Eigen::MatrixXcd Cc = C.cast<std::complex<double>>();

    bool stabilizable = true;
    bool detectable = true;
    for (const auto& lambda : detail::marginal_eigenvalues(Abar)) {
      const Eigen::MatrixXcd shifted = lambda * I - Ac;
      Eigen::MatrixXcd wide(n, n + Bc.cols());
      wide << shifted, Bc;
      Eigen::MatrixXcd tall(n + Cc.rows(), n);
      tall << shifted, Cc;
      stabilizable = stabilizable && detail::numerical_rank(wide) == n;
      detectable = detectable && detail::numerical_rank(tall) == n;
    }
    report.per_player_stabilizable.push_back(stabilizable);
    report.per_player_detectable.push_back(detectable);
  }
  return report;
}

}  // namespace lqdg
