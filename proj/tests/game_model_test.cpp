#include <gtest/gtest.h>

#include <cmath>

#include "lqdg/game_model.hpp"
#include "lqdg/instance_gen.hpp"
#include "lqdg/solvers.hpp"
#include "oracles.hpp"

namespace lqdg {
namespace {

using testing::kGolden;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

PolicySet vi_equilibrium(const GameInstance& inst) {
  const auto vi = value_iteration(inst, SolverConfig::defaults(Algorithm::VI));
  EXPECT_TRUE(vi.converged());
  return vi.final_policies;
}

// --- GameInstance validation ------------------------------------------------

TEST(GameInstanceTest, DefaultsX0ToIdentity) {
  const auto inst = paper_instance();
  EXPECT_TRUE(inst.X0().isApprox(Matrix::Identity(2, 2)));
  EXPECT_EQ(inst.n(), 2u);
  EXPECT_EQ(inst.num_players(), 2u);
  EXPECT_EQ(inst.total_controls(), 2u);
}

TEST(GameInstanceTest, RejectsInconsistentDimensions) {
  const Matrix A = Matrix::Identity(2, 2);
  EXPECT_THROW(GameInstance(A, {Matrix::Ones(3, 1)}, {Matrix::Identity(2, 2)},
                            {scalar(1)}),
               ArgumentError);
  EXPECT_THROW(GameInstance(A, {Matrix::Ones(2, 1)}, {Matrix::Identity(3, 3)},
                            {scalar(1)}),
               ArgumentError);
  EXPECT_THROW(GameInstance(A, {Matrix::Ones(2, 1)}, {Matrix::Identity(2, 2)},
                            {Matrix::Identity(2, 2)}),
               ArgumentError);
  EXPECT_THROW(GameInstance(A, {Matrix::Ones(2, 1), Matrix::Ones(2, 1)},
                            {Matrix::Identity(2, 2)}, {scalar(1)}),
               ArgumentError);
}

TEST(GameInstanceTest, RejectsBadCostMatrices) {
  const Matrix A = Matrix::Identity(2, 2);
  const Matrix B = Matrix::Ones(2, 1);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(GameInstance(A, {B}, {asym}, {scalar(1)}), ArgumentError);
  EXPECT_THROW(GameInstance(A, {B}, {-Matrix::Identity(2, 2)}, {scalar(1)}),
               ArgumentError);
  EXPECT_THROW(GameInstance(A, {B}, {Matrix::Identity(2, 2)}, {scalar(0)}),
               ArgumentError);
  EXPECT_THROW(GameInstance(A, {B}, {Matrix::Identity(2, 2)}, {scalar(1)},
                            -Matrix::Identity(2, 2)),
               ArgumentError);
  // PSD but singular Q is fine.
  EXPECT_NO_THROW(GameInstance(A, {B}, {Matrix::Zero(2, 2)}, {scalar(1)}));
}

// --- closed_loop_matrix ------------------------------------------------------

TEST(ClosedLoopTest, ZeroGainsLeaveDynamics) {
  const auto inst = paper_instance();
  EXPECT_EQ(closed_loop_matrix(inst, zero_policy(inst)), inst.A());
}

TEST(ClosedLoopTest, ScalarArithmetic) {
  const auto inst = testing::scalar_single_player(1, 1, 1, 1);
  EXPECT_DOUBLE_EQ(closed_loop_matrix(inst, testing::scalar_policy({-0.5}))(0, 0),
                   0.5);
}

TEST(ClosedLoopTest, PublishedEquilibriumIsStabilizing) {
  const auto inst = paper_instance();
  const Matrix closed = closed_loop_matrix(inst, paper_equilibrium());
  Matrix expected(2, 2);
  expected << 0.0746, -0.0159, 0.0041, 0.0007;
  EXPECT_LT((closed - expected).cwiseAbs().maxCoeff(), 1e-14);
  // Frozen from the 2x2 closed form of the matrix above.
  const double tr = expected.trace(), det = expected.determinant();
  const double disc = tr * tr - 4 * det;
  ASSERT_GT(disc, 0);
  const double rho = std::max(std::abs((tr + std::sqrt(disc)) / 2),
                              std::abs((tr - std::sqrt(disc)) / 2));
  EXPECT_NEAR(spectral_radius(closed), rho, 1e-12);
  EXPECT_NEAR(rho, 0.0737071, 1e-7);
  EXPECT_LT(spectral_radius(closed), 1.0);
}

TEST(ClosedLoopTest, DimensionMismatchThrows) {
  const auto inst = paper_instance();
  PolicySet bad{{Matrix::Zero(1, 3), Matrix::Zero(1, 2)}};
  EXPECT_THROW(closed_loop_matrix(inst, bad), ArgumentError);
  EXPECT_THROW(closed_loop_matrix(inst, PolicySet{{Matrix::Zero(1, 2)}}),
               ArgumentError);
}

// --- spectral_radius ---------------------------------------------------------

TEST(SpectralRadiusTest, Basics) {
  EXPECT_NEAR(spectral_radius(Matrix::Identity(3, 3)), 1.0, 1e-15);
  Matrix nilpotent(2, 2);
  nilpotent << 0, 1, 0, 0;
  EXPECT_EQ(spectral_radius(nilpotent), 0.0);
  Matrix rotation(2, 2);
  rotation << 0, -2, 2, 0;  // eigenvalues +-2i
  EXPECT_NEAR(spectral_radius(rotation), 2.0, 1e-14);
  EXPECT_THROW(spectral_radius(Matrix::Zero(2, 3)), ArgumentError);
}

TEST(SpectralRadiusTest, PaperDynamicsClosedForm) {
  const Matrix A = paper_instance().A();
  const double tr = A.trace(), det = A.determinant();
  const double lambda = (tr + std::sqrt(tr * tr - 4 * det)) / 2;
  EXPECT_NEAR(spectral_radius(A), lambda, 1e-12);
  EXPECT_NEAR(lambda, 0.6164758, 1e-7);
}

// --- solve_discrete_lyapunov -------------------------------------------------

TEST(LyapunovTest, ZeroDynamics) {
  const Matrix P = solve_discrete_lyapunov(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
  EXPECT_LT((P - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(LyapunovTest, ScalarGeometricSeries) {
  EXPECT_NEAR(solve_discrete_lyapunov(scalar(0.5), scalar(1))(0, 0), 4.0 / 3.0,
              1e-15);
}

TEST(LyapunovTest, UnstableArgumentThrows) {
  EXPECT_THROW(solve_discrete_lyapunov(scalar(1.0), scalar(1)), UnstableError);
  EXPECT_THROW(solve_discrete_lyapunov(2.0 * Matrix::Identity(2, 2),
                                       Matrix::Identity(2, 2)),
               UnstableError);
}

TEST(LyapunovTest, PaperEquilibriumValueMatchesTruncatedSeries) {
  const auto inst = paper_instance();
  const PolicySet K = paper_equilibrium();
  const Matrix F = closed_loop_matrix(inst, K);
  const Matrix W = inst.Q(0) + K[0].transpose() * inst.R(0) * K[0];
  const Matrix P = solve_discrete_lyapunov(F, W);
  EXPECT_LT((P - testing::truncated_lyapunov_sum(F, W)).norm(), 1e-8);
  EXPECT_LE((P - W - F.transpose() * P * F).norm(), 1e-10 * std::max(1.0, P.norm()));
  EXPECT_EQ(P, P.transpose());
}

TEST(LyapunovTest, RandomCasesMatchTruncatedSeries) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto c = testing::random_stabilizing_case(seed, 1 + seed % 4, {1 + seed % 2});
    const Matrix F = closed_loop_matrix(c.inst, c.pol);
    ASSERT_LE(spectral_radius(F), 0.95);
    const Matrix W = c.inst.Q(0);
    const Matrix P = solve_discrete_lyapunov(F, W);
    EXPECT_LT((P - testing::truncated_lyapunov_sum(F, W)).norm(), 1e-8) << seed;
    EXPECT_LE((P - W - F.transpose() * P * F).norm(),
              1e-10 * std::max(1.0, P.norm()))
        << seed;
  }
}

// --- evaluate_policies -------------------------------------------------------

TEST(EvaluatePoliciesTest, ZeroDynamicsGivesStageCost) {
  const Matrix A = Matrix::Zero(2, 2);
  Matrix Q2(2, 2);
  Q2 << 2, 1, 1, 3;
  const GameInstance inst(A, {Matrix::Ones(2, 1), Matrix::Ones(2, 1)},
                          {Matrix::Identity(2, 2), Q2}, {scalar(1), scalar(2)});
  const auto values = evaluate_policies(inst, zero_policy(inst));
  EXPECT_LT((values[0] - inst.Q(0)).norm(), 1e-15);
  EXPECT_LT((values[1] - inst.Q(1)).norm(), 1e-15);
}

TEST(EvaluatePoliciesTest, GoldenRatioScalar) {
  const auto inst = testing::scalar_single_player(1, 1, 1, 1);
  const auto values = evaluate_policies(inst, testing::scalar_policy({-1.0 / kGolden}));
  EXPECT_NEAR(values[0](0, 0), kGolden, 1e-12);
  EXPECT_NEAR(values[0](0, 0), 1.6180339887, 1e-10);
}

TEST(EvaluatePoliciesTest, PaperEquilibriumHasSmallRiccatiResidual) {
  const auto inst = paper_instance();
  const PolicySet K = vi_equilibrium(inst);
  EXPECT_LE(are_residual(inst, K, evaluate_policies(inst, K)), 1e-8);
}

TEST(EvaluatePoliciesTest, NonStabilizingThrows) {
  const auto inst = testing::scalar_single_player(1, 1, 1, 1);
  EXPECT_THROW(evaluate_policies(inst, testing::scalar_policy({0.5})), UnstableError);
}

TEST(EvaluatePoliciesTest, PermutationEquivariant) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = testing::random_stabilizing_case(100 + seed, 3, {1, 2, 1});
    const auto& I = c.inst;
    const std::vector<std::size_t> perm{2, 0, 1};
    std::vector<Matrix> B, Q, R;
    PolicySet pol;
    for (auto p : perm) {
      B.push_back(I.B(p));
      Q.push_back(I.Q(p));
      R.push_back(I.R(p));
      pol.K.push_back(c.pol[p]);
    }
    const GameInstance permuted(I.A(), B, Q, R, I.X0());
    const auto original = evaluate_policies(I, c.pol);
    const auto relabeled = evaluate_policies(permuted, pol);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      EXPECT_LT((relabeled[k] - original[perm[k]]).norm(),
                1e-12 * std::max(1.0, original[perm[k]].norm()));
    }
  }
}

// --- cost --------------------------------------------------------------------

TEST(CostTest, ZeroInitialMomentGivesZeroCost) {
  const auto inst = paper_instance().with_X0(Matrix::Zero(2, 2));
  for (double j : cost(inst, paper_equilibrium())) EXPECT_EQ(j, 0.0);
}

TEST(CostTest, ZeroDynamicsCostIsTraceQ) {
  Matrix Q(2, 2);
  Q << 2, 1, 1, 3;
  const GameInstance inst(Matrix::Zero(2, 2), {Matrix::Ones(2, 1)}, {Q}, {scalar(1)});
  EXPECT_NEAR(cost(inst, zero_policy(inst))[0], 5.0, 1e-14);
}

TEST(CostTest, PaperEquilibriumMatchesTrajectoryOracle) {
  const auto inst = paper_instance();
  const PolicySet K = paper_equilibrium();
  const auto J = cost(inst, K);
  const auto oracle = testing::trajectory_cost(inst, K);
  const auto values = evaluate_policies(inst, K);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(J[i], values[i].trace(), 1e-14);
    EXPECT_NEAR(J[i], oracle[i], 1e-6 * oracle[i]);
  }
}

TEST(CostTest, RandomCasesMatchTrajectoryOracleAndAreNonnegative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = testing::random_stabilizing_case(200 + seed, 3, {1, 2});
    const auto J = cost(c.inst, c.pol);
    const auto oracle = testing::trajectory_cost(c.inst, c.pol);
    for (std::size_t i = 0; i < J.size(); ++i) {
      EXPECT_GE(J[i], 0.0);
      EXPECT_NEAR(J[i], oracle[i], 1e-6 * std::max(1.0, oracle[i])) << seed;
    }
  }
}

// --- state_covariance --------------------------------------------------------

TEST(StateCovarianceTest, ZeroClosedLoop) {
  Matrix X0(2, 2);
  X0 << 2, 0.5, 0.5, 1;
  const GameInstance inst(Matrix::Zero(2, 2), {Matrix::Ones(2, 1)},
                          {Matrix::Identity(2, 2)}, {scalar(1)}, X0);
  EXPECT_LT((state_covariance(inst, zero_policy(inst)) - X0).norm(), 1e-15);
}

TEST(StateCovarianceTest, ScalarGeometricSeries) {
  const auto inst = testing::scalar_single_player(1, 1, 1, 1);
  EXPECT_NEAR(state_covariance(inst, testing::scalar_policy({-0.5}))(0, 0), 4.0 / 3.0,
              1e-15);
}

TEST(StateCovarianceTest, PaperEquilibriumMatchesTruncatedSeries) {
  const auto inst = paper_instance();
  const Matrix F = closed_loop_matrix(inst, paper_equilibrium());
  // sum_t F^t X0 (F^t)' is the transposed series.
  const Matrix oracle = testing::truncated_lyapunov_sum(F.transpose(), inst.X0());
  EXPECT_LT((state_covariance(inst, paper_equilibrium()) - oracle).norm(), 1e-8);
}

TEST(StateCovarianceTest, SymmetricPsdAndDominatesX0) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto c = testing::random_stabilizing_case(300 + seed, 3, {2});
    const Matrix S = state_covariance(c.inst, c.pol);
    EXPECT_EQ(S, S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    EXPECT_GE(S.trace(), c.inst.X0().trace());
  }
}

// --- are_residual ------------------------------------------------------------

TEST(AreResidualTest, GoldenRatioFixedPoint) {
  const auto inst = testing::scalar_single_player(1, 1, 1, 1);
  const ValueSet P{{scalar(kGolden)}};
  EXPECT_LE(are_residual(inst, testing::scalar_policy({-1.0 / kGolden}), P), 1e-12);
}

TEST(AreResidualTest, PositiveOffEquilibrium) {
  const auto inst = paper_instance();
  const PolicySet K = paper_initial_policy_near();
  EXPECT_GT(are_residual(inst, K, evaluate_policies(inst, K)), 1e-3);
}

TEST(AreResidualTest, ValueIterationFixedPoint) {
  const auto inst = paper_instance();
  const auto vi = value_iteration(inst, SolverConfig::defaults(Algorithm::VI));
  ASSERT_TRUE(vi.converged());
  EXPECT_LE(are_residual(inst, vi.final_policies, *vi.final_values), 1e-8);
}

// --- check_equilibrium_conditions --------------------------------------------

TEST(EquilibriumConditionsTest, StableEffectiveDynamicsPassVacuously) {
  const auto inst = paper_instance();  // rho(A) < 1 and zero gains
  const auto report = check_equilibrium_conditions(inst, zero_policy(inst));
  EXPECT_TRUE(report.is_stable);
  EXPECT_EQ(report.per_player_stabilizable, std::vector<bool>({true, true}));
  EXPECT_EQ(report.per_player_detectable, std::vector<bool>({true, true}));
}

TEST(EquilibriumConditionsTest, UnreachableUnitModeIsNotStabilizable) {
  Matrix B(2, 1);
  B << 1, 0;
  const GameInstance inst(Matrix::Identity(2, 2), {B}, {Matrix::Identity(2, 2)},
                          {scalar(1)});
  const auto report = check_equilibrium_conditions(inst, zero_policy(inst));
  EXPECT_FALSE(report.per_player_stabilizable[0]);
  EXPECT_TRUE(report.per_player_detectable[0]);
  EXPECT_FALSE(report.is_stable);
  EXPECT_DOUBLE_EQ(report.closed_loop_spectral_radius, 1.0);
}

TEST(EquilibriumConditionsTest, UnobservedUnstableModeIsNotDetectable) {
  Matrix A(2, 2);
  A << 1.5, 0, 0, 0.5;
  Matrix Q = Matrix::Zero(2, 2);
  Q(1, 1) = 1;
  const GameInstance inst(A, {Matrix::Identity(2, 2)}, {Q}, {Matrix::Identity(2, 2)});
  const auto report = check_equilibrium_conditions(inst, zero_policy(inst));
  EXPECT_TRUE(report.per_player_stabilizable[0]);
  EXPECT_FALSE(report.per_player_detectable[0]);
}

TEST(EquilibriumConditionsTest, PaperEquilibriumSatisfiesAllPredicates) {
  const auto inst = paper_instance();
  const auto report = check_equilibrium_conditions(inst, vi_equilibrium(inst));
  EXPECT_TRUE(report.is_stable);
  for (bool b : report.per_player_stabilizable) EXPECT_TRUE(b);
  for (bool b : report.per_player_detectable) EXPECT_TRUE(b);
}

}  // namespace
}  // namespace lqdg
