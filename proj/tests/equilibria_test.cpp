#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "riphs/equilibria.hpp"
#include "riphs/systems.hpp"

namespace riphs {
namespace {

using systems::GasPistonParams;
using systems::HeatExchangerParams;

TEST(EquilibriumSetTest, Dimensions) {
  const DimensionReport heat = manifold_dimension(systems::heat_exchanger());
  EXPECT_EQ(heat.rank, 1);
  EXPECT_EQ(heat.dimension, 1);
  EXPECT_TRUE(heat.regular());
  const DimensionReport net = manifold_dimension(systems::heat_network());
  EXPECT_EQ(net.rank, 4);
  EXPECT_EQ(net.dimension, 1);
  const DimensionReport gas = manifold_dimension(systems::gas_piston());
  EXPECT_EQ(gas.rank, 1);
  EXPECT_EQ(gas.dimension, 2);
}

TEST(EquilibriumSetTest, CouplingVectorsMatchHandComputation) {
  const EquilibriumSet heat = equilibrium_set(systems::heat_exchanger());
  ASSERT_EQ(heat.codim_vectors.cols(), 1);
  const Vector v = heat.codim_vectors.col(0);
  // J_1 e = +-(-1, 1); sign depends on the orientation of J_1.
  EXPECT_NEAR(std::abs(v[0]), 1.0, 1e-15);
  EXPECT_NEAR(v[0] + v[1], 0.0, 1e-15);
  const EquilibriumSet gas = equilibrium_set(systems::gas_piston());
  EXPECT_NEAR(gas.codim_vectors.col(0).head(2).norm(), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(gas.codim_vectors(2, 0)), 1.0, 1e-15);
}

TEST(EquilibriumSetTest, NetworkEquilibriaAreUniformStates) {
  const RIPHSModel model = systems::heat_network();
  const EquilibriumSet set = equilibrium_set(model);
  ASSERT_TRUE(set.affine.has_value());
  ASSERT_EQ(set.affine->dim(), 1);
  const Vector direction = set.affine->basis.col(0);
  EXPECT_NEAR((direction.cwiseAbs() - Vector::Constant(5, 1.0 / std::sqrt(5.0))).norm(), 0.0,
              1e-12);
  EXPECT_NEAR(distance_to_equilibria(set, model, Vector::Constant(5, 3.1)).distance, 0.0, 1e-12);
}

TEST(DistanceTest, HeatExchangerProjection) {
  const RIPHSModel model = systems::heat_exchanger();
  const EquilibriumSet set = equilibrium_set(model);
  const DistanceResult d = distance_to_equilibria(set, model, Vector{{1.0, 0.0}});
  EXPECT_NEAR(d.distance, 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_FALSE(d.surrogate);
  EXPECT_NEAR(distance_to_equilibria(set, model, Vector{{0.4, 0.4}}).distance, 0.0, 1e-15);
}

TEST(DistanceTest, ImplicitProjectionAgreesWithClosedForm) {
  HeatExchangerParams p;
  p.c1 = 2.0;
  p.c2 = 0.7;
  const RIPHSModel model = systems::heat_exchanger(p);
  const EquilibriumSet exact = equilibrium_set(model);
  const EquilibriumSet implicit = equilibrium_set(model, /*force_implicit=*/true);
  EXPECT_EQ(implicit.kind, EquilibriumSet::Kind::Implicit);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 10; ++i) {
    const Vector x{{normal(rng), normal(rng)}};
    const DistanceResult a = distance_to_equilibria(exact, model, x);
    const DistanceResult b = distance_to_equilibria(implicit, model, x);
    ASSERT_TRUE(b.converged);
    // Gauss-Newton finds a point on T, not necessarily the nearest one.
    EXPECT_LT(implicit.residual(model, b.projection).norm(), 1e-9);
    EXPECT_GE(b.distance, a.distance - 1e-9);
  }
}

TEST(DistanceTest, GasPistonZeroVelocityStatesAreEquilibria) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  const EquilibriumSet set = equilibrium_set(model);
  Vector x = systems::gas_piston_equilibrium_at_volume(p, 0.04);
  x[0] += 0.01;  // any S, V with p = 0
  EXPECT_NEAR(distance_to_equilibria(set, model, x).distance, 0.0, 1e-15);
  x[2] = 0.25;
  EXPECT_NEAR(distance_to_equilibria(set, model, x).distance, 0.25, 1e-14);
}

TEST(DistanceTest, SquaredDistanceBoundedBySigmaOnCompactBox) {
  // dist^2(x, T) <= c_K sigma(x) with finite c_K, stable under sample doubling.
  const RIPHSModel model = systems::heat_network();
  const EquilibriumSet set = equilibrium_set(model);
  auto fit = [&](int samples) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> s(1.0, 3.0);
    double c = 0.0;
    for (int i = 0; i < samples; ++i) {
      Vector x(5);
      for (int j = 0; j < 5; ++j) x[j] = s(rng);
      const double d = distance_to_equilibria(set, model, x).distance;
      c = std::max(c, d * d / entropy_production(model, x));
    }
    return c;
  };
  const double c1 = fit(500);
  const double c2 = fit(1000);
  EXPECT_TRUE(std::isfinite(c2));
  EXPECT_LT(c2 / c1, 2.0);
}

TEST(SteadyStateCostTest, EquilibriumWithZeroControlCostsNothing) {
  for (const char* name : {"heat_exchanger", "heat_network"}) {
    const RIPHSModel model = systems::make_system(name);
    const Vector x = Vector::Constant(model.state_dim(), 1.9);
    const SteadyStateCost c =
        steady_state_cost(model, x, Vector::Zero(model.input_dim()), {0.5, 1.0, 300.0});
    EXPECT_EQ(c.direct, 0.0);
    EXPECT_NEAR(c.closed_form, 0.0, 1e-20);
  }
}

TEST(SteadyStateCostTest, GasPistonThermostatEquilibrium) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  const Vector x = systems::gas_piston_rest_state(p);
  const Vector u{{systems::thermostat_control(p.lambda_e, p.T0, p.T0)}};
  const SteadyStateCost c = steady_state_cost(model, x, u, {1.0, 1.0 / p.T0, p.T0});
  EXPECT_NEAR(c.direct, 0.0, 1e-15);
  EXPECT_NEAR(c.closed_form, 0.0, 1e-15);
}

TEST(SteadyStateCostTest, NonSteadyPairThrows) {
  const RIPHSModel model = systems::heat_exchanger();
  EXPECT_THROW(steady_state_cost(model, Vector{{1.0, 0.0}}, Vector::Zero(1), {}), ModelError);
}

TEST(OptimalSteadyStateTest, FindsLosslessEquilibria) {
  for (const auto& info : systems::registry()) {
    const RIPHSModel model = systems::make_system(info.name);
    Vector guess = systems::default_state(info.name);
    if (info.name != "gas_piston") guess[0] += 0.3;  // start off T
    const SteadyState s = find_optimal_steady_state(
        model, CostWeights::entropy_extraction(),
        ControlBounds::symmetric(model.input_dim(), info.default_control_bound), guess);
    EXPECT_TRUE(s.certified) << info.name;
    EXPECT_LE(s.stage_cost, 1e-8);
    EXPECT_GE(s.stage_cost, -1e-10);
  }
}

TEST(SubspaceTest, HandExample) {
  const Matrix xaxis = Vector{{1.0, 0.0}};
  const Matrix yaxis = Vector{{0.0, 1.0}};
  EXPECT_EQ(subspace_intersection({xaxis, yaxis}).cols(), 0);
  const SubspaceEquivalenceReport r = subspace_distance_equivalence_check({xaxis, yaxis}, 200);
  // At x = (1, 1): LHS = sqrt 2, RHS = 2, so the ratio sqrt 2 lies in [c_low, c_high].
  EXPECT_LE(r.c_low, std::sqrt(2.0) + 1e-12);
  EXPECT_GE(r.c_high, 1.0);
  EXPECT_GT(r.c_low, 0.0);
}

TEST(SubspaceTest, WholeSpaceIsTrivial) {
  const Matrix full = Matrix::Identity(3, 3);
  const SubspaceEquivalenceReport r = subspace_distance_equivalence_check({full, full}, 20);
  EXPECT_TRUE(r.trivial);
  EXPECT_EQ(r.informative_samples, 0);
}

TEST(SubspaceTest, RandomPlanesGiveFiniteConstants) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<Matrix> planes;
  for (int k = 0; k < 3; ++k) {
    Matrix b(5, 2);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
    planes.push_back(b);
  }
  const SubspaceEquivalenceReport r = subspace_distance_equivalence_check(planes, 1000);
  EXPECT_GT(r.c_low, 0.0);
  EXPECT_TRUE(std::isfinite(r.c_high));
  EXPECT_EQ(r.intersection_dim, 0);
}

}  // namespace
}  // namespace riphs
