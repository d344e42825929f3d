#include <gtest/gtest.h>

#include <set>

#include "lqdg/instance_gen.hpp"
#include "lqdg/rng.hpp"
#include "lqdg/solvers.hpp"

namespace lqdg {
namespace {

TEST(PaperInstanceTest, Values) {
  const auto inst = paper_instance();
  Matrix A(2, 2);
  A << 0.588, 0.028, 0.570, 0.056;
  EXPECT_EQ(inst.A(), A);
  EXPECT_EQ(inst.B(0), (Matrix(2, 1) << 1, 1).finished());
  EXPECT_EQ(inst.B(1), (Matrix(2, 1) << 0, 1).finished());
  EXPECT_EQ(inst.Q(0), (Matrix(2, 2) << 0.01, 0, 0, 1).finished());
  EXPECT_EQ(inst.Q(1), (Matrix(2, 2) << 1, 0, 0, 0.147).finished());
  EXPECT_EQ(inst.R(0)(0, 0), 0.01);
  EXPECT_EQ(inst.R(1)(0, 0), 0.01);
  EXPECT_EQ(inst.X0(), Matrix::Identity(2, 2));
}

TEST(PaperInstanceTest, PublishedPoliciesSitInTheirBalls) {
  const auto inst = paper_instance();
  const auto vi = value_iteration(inst, SolverConfig::defaults(Algorithm::VI));
  ASSERT_TRUE(vi.converged());
  const auto& ref = vi.final_policies;
  // Published gains carry four decimals, so allow a rounding margin.
  const double slack = 2e-4;
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE((paper_initial_policy_near()[i] - ref[i]).norm(), 0.1 + slack);
    EXPECT_LE((paper_initial_policy_far()[i] - ref[i]).norm(), 0.5 + slack);
  }
  EXPECT_LT(spectral_radius(closed_loop_matrix(inst, paper_initial_policy_near())), 1);
  EXPECT_LT(spectral_radius(closed_loop_matrix(inst, paper_initial_policy_far())), 1);
}

TEST(RandomStreamTest, ChildStreamsAreReproducibleAndDistinct) {
  auto a = RandomStream::child(7, 3);
  auto b = RandomStream::child(7, 3);
  auto c = RandomStream::child(7, 4);
  auto d = RandomStream::child(8, 3);
  const double xa = a.normal(), xb = b.normal(), xc = c.normal(), xd = d.normal();
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
  EXPECT_NE(xa, xd);
}

TEST(RandomStreamTest, UniformRangeAndNormalMoments) {
  auto s = RandomStream::child(1, 0);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = s.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(RandomInstanceTest, SameSeedSameInstance) {
  GenSpec spec;
  spec.seed = 42;
  const auto a = random_instance(spec);
  const auto b = random_instance(spec);
  EXPECT_EQ(a.A(), b.A());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.B(i), b.B(i));
    EXPECT_EQ(a.Q(i), b.Q(i));
    EXPECT_EQ(a.R(i), b.R(i));
  }
  spec.seed = 43;
  EXPECT_NE(random_instance(spec).A(), a.A());
}

TEST(RandomInstanceTest, SpectralRadiusAndCostShift) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GenSpec spec;
    spec.seed = seed;
    spec.n = 3 + seed % 3;
    spec.num_players = 1 + seed % 4;
    spec.m.assign(spec.num_players, 1 + seed % 2);
    spec.target_radius = 0.8;
    spec.cost_shift = 0.5;
    const auto inst = random_instance(spec);
    EXPECT_NEAR(spectral_radius(inst.A()), 0.8, 1e-9);
    EXPECT_EQ(inst.X0(), Matrix::Identity(spec.n, spec.n));
    for (std::size_t i = 0; i < spec.num_players; ++i) {
      EXPECT_EQ(static_cast<std::size_t>(inst.B(i).cols()), spec.m[i]);
      Eigen::SelfAdjointEigenSolver<Matrix> q(inst.Q(i)), r(inst.R(i));
      EXPECT_GE(q.eigenvalues().minCoeff(), 0.5 - 1e-9);
      EXPECT_GE(r.eigenvalues().minCoeff(), 0.5 - 1e-9);
    }
  }
}

TEST(RandomInstanceTest, TypicalSizeHasEquilibrium) {
  GenSpec spec;
  spec.seed = 1;
  const auto inst = random_instance(spec);
  EXPECT_EQ(inst.n(), 4u);
  EXPECT_EQ(inst.num_players(), 2u);
  const auto vi = value_iteration(inst, SolverConfig::defaults(Algorithm::VI));
  EXPECT_TRUE(vi.converged()) << vi.message;
}

TEST(RandomInstanceTest, RejectsBadSpecs) {
  GenSpec spec;
  spec.m = {2};
  EXPECT_THROW(random_instance(spec), ArgumentError);
  spec = GenSpec{};
  spec.target_radius = 1.0;
  EXPECT_THROW(random_instance(spec), ArgumentError);
  spec = GenSpec{};
  spec.cost_shift = 0.0;
  EXPECT_THROW(random_instance(spec), ArgumentError);
  spec = GenSpec{};
  spec.n = 0;
  EXPECT_THROW(random_instance(spec), ArgumentError);
}

class BallSamplerTest : public ::testing::Test {
 protected:
  GameInstance inst = paper_instance();
  PolicySet ref =
      value_iteration(inst, SolverConfig::defaults(Algorithm::VI)).final_policies;
};

TEST_F(BallSamplerTest, TinyRadiusStaysAtReference) {
  BallSpec spec{ref, 1e-12, 5, 100};
  const auto K = sample_policy_in_ball(inst, spec);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE((K[i] - ref[i]).norm(), 1e-12);
}

TEST_F(BallSamplerTest, SamplesAreInsideBallAndStabilizing) {
  std::set<double> firsts;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    BallSpec spec{ref, 0.1, seed, 10000};
    const auto K = sample_policy_in_ball(inst, spec);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LE((K[i] - ref[i]).norm(), 0.1);
    EXPECT_LT(spectral_radius(closed_loop_matrix(inst, K)), 1.0);
    firsts.insert(K[0](0, 0));
    const auto again = sample_policy_in_ball(inst, spec);
    EXPECT_EQ(again[0], K[0]);
  }
  EXPECT_GT(firsts.size(), 90u);
}

TEST_F(BallSamplerTest, LargerRadius) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto K = sample_policy_in_ball(inst, BallSpec{ref, 0.5, seed, 10000});
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LE((K[i] - ref[i]).norm(), 0.5);
    EXPECT_LT(spectral_radius(closed_loop_matrix(inst, K)), 1.0);
  }
}

TEST(BallSamplerErrorsTest, ExhaustedBudgetThrows) {
  // A = 2, b = 1: every gain within 0.1 of 0 is destabilizing.
  const GameInstance inst(Matrix::Constant(1, 1, 2.0), {Matrix::Ones(1, 1)},
                          {Matrix::Ones(1, 1)}, {Matrix::Ones(1, 1)});
  BallSpec spec{PolicySet{{Matrix::Zero(1, 1)}}, 0.1, 0, 50};
  EXPECT_THROW(sample_policy_in_ball(inst, spec), SamplingError);
  spec.radius = 0.0;
  EXPECT_THROW(sample_policy_in_ball(inst, spec), ArgumentError);
}

TEST(ZeroPolicyTest, Shapes) {
  GenSpec spec;
  spec.num_players = 3;
  spec.m = {1, 2, 3};
  const auto inst = random_instance(spec);
  const auto K = zero_policy(inst);
  ASSERT_EQ(K.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(K[i].rows(), static_cast<Eigen::Index>(i + 1));
    EXPECT_EQ(K[i].cols(), 4);
    EXPECT_EQ(K[i].norm(), 0.0);
  }
}

}  // namespace
}  // namespace lqdg
