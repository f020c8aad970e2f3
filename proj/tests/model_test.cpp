#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "riphs/integrate.hpp"
#include "riphs/model.hpp"
#include "riphs/systems.hpp"

namespace riphs {
namespace {

using systems::GasPistonParams;
using systems::HeatExchangerParams;

TEST(PoissonBracketTest, HeatExchangerIsTemperatureDifference) {
  const HeatExchangerParams p;
  const RIPHSModel model = systems::heat_exchanger(p);
  const Vector x = systems::heat_exchanger_state(p, 300.0, 280.0);
  EXPECT_NEAR(poisson_bracket(model, 0, x), 20.0, 1e-10);
}

TEST(PoissonBracketTest, VanishesWhenCoEnergyIsAlongEntropyVector) {
  const RIPHSModel model = systems::heat_exchanger();
  // Equal temperatures: H_x = T (1, 1) = T e.
  const Vector x = systems::heat_exchanger_state({}, 310.0, 310.0);
  EXPECT_EQ(poisson_bracket(model, 0, x), 0.0);
}

TEST(PoissonBracketTest, GasPistonIsVelocity) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  Vector x = systems::gas_piston_rest_state(p);
  x[2] = p.mass() * 0.3;
  EXPECT_NEAR(poisson_bracket(model, 0, x), 0.3, 1e-12);
}

TEST(RhsTest, HeatExchangerOnEquilibriumIsZero) {
  const RIPHSModel model = systems::heat_exchanger();
  EXPECT_EQ(rhs(model, Vector::Constant(2, 0.7), Vector::Zero(1)).norm(), 0.0);
  EXPECT_EQ(rhs(model, Vector::Zero(2), Vector::Zero(1)).norm(), 0.0);
}

TEST(RhsTest, GasPistonControlledEquilibrium) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  const Vector x = systems::gas_piston_rest_state(p);
  // Thermostat at T0 touching gas at T0 gives zero entropy flow.
  const double T = model.co_energy(x)[0];
  const Vector u{{systems::thermostat_control(p.lambda_e, T, p.T0)}};
  EXPECT_LT(rhs(model, x, u).norm(), 1e-12);
}

TEST(OutputsTest, ClosedSystemHasZeroOutputs) {
  HeatExchangerParams p;
  p.entropy_flow_input = false;
  const RIPHSModel model = systems::heat_exchanger(p);
  const Outputs y = outputs(model, systems::heat_exchanger_state(p, 300.0, 280.0));
  EXPECT_EQ(y.y_H.norm(), 0.0);
  EXPECT_EQ(y.y_S.norm(), 0.0);
}

TEST(OutputsTest, HeatExchangerInputAtCompartmentOne) {
  const HeatExchangerParams p;
  const RIPHSModel model = systems::heat_exchanger(p);
  const Outputs y = outputs(model, systems::heat_exchanger_state(p, 300.0, 280.0));
  ASSERT_EQ(y.y_H.size(), 1);
  EXPECT_NEAR(y.y_H[0], 300.0, 1e-10);
  EXPECT_DOUBLE_EQ(y.y_S[0], 1.0);
}

TEST(OutputsTest, GasPistonEntropyFlowInput) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  const Vector x = systems::gas_piston_equilibrium_at_volume(p, 0.03);
  const Outputs y = outputs(model, x);
  EXPECT_NEAR(y.y_H[0], model.co_energy(x)[0], 1e-12);
  EXPECT_DOUBLE_EQ(y.y_S[0], 1.0);
}

TEST(EntropyProductionTest, HeatExchangerClosedForm) {
  HeatExchangerParams p;
  p.lambda = 2.5;
  const RIPHSModel model = systems::heat_exchanger(p);
  const double T1 = 300.0;
  const double T2 = 280.0;
  const double expected = p.lambda * (T1 - T2) * (T1 - T2) / (T1 * T2);
  EXPECT_NEAR(entropy_production(model, systems::heat_exchanger_state(p, T1, T2)), expected,
              1e-12 * expected);
}

TEST(StructureTest, BuiltInSystemsPassOnSamples) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& info : systems::registry()) {
    const RIPHSModel model = systems::make_system(info.name);
    const Vector centre = systems::default_state(info.name);
    for (int s = 0; s < 50; ++s) {
      Vector x = centre;
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += 0.5 * unit(rng) * (1.0 + std::abs(x[j]) * 0.1);
      if (!model.domain().contains(x)) continue;
      const StructureCheck c = check_structure(model, x);
      EXPECT_TRUE(c.ok()) << info.name << " skew " << c.poisson_skew << " casimir " << c.casimir;
      EXPECT_GE(c.entropy_production, 0.0);
    }
  }
}

TEST(ModelTest, RejectsNonSkewIrreversibleStructure) {
  ModelDefinition def;
  def.name = "bad";
  def.state_dim = 2;
  def.input_dim = 0;
  def.hamiltonian = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  def.hamiltonian_gradient = [](const Vector& x) { return x; };
  def.entropy_vector = Vector::Ones(2);
  def.irr_structures = {Matrix::Identity(2, 2)};
  def.modulations = {[](const Vector&, const Vector&) { return 1.0; }};
  def.domain = StateDomain::unbounded(2);
  EXPECT_THROW(RIPHSModel{def}, ModelError);
}

TEST(DomainTest, GasPistonVolumeOutsideDomainThrows) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  Vector x = systems::gas_piston_rest_state(p);
  x[1] = -0.1;
  EXPECT_THROW(model.evaluate(x), DomainError);
}

TEST(TransformTest, IdentityLeavesModelUnchanged) {
  const RIPHSModel model = systems::heat_network();
  const RIPHSModel same = transform_model(model, Matrix::Identity(5, 5));
  const Vector x{{1.0, 1.5, 2.0, 2.2, 0.4}};
  const Vector u{{0.3, -0.2, 0.1}};
  EXPECT_LT((rhs(model, x, u) - rhs(same, x, u)).norm(), 1e-12);
  EXPECT_NEAR(model.hamiltonian(x), same.hamiltonian(x), 1e-12);
  EXPECT_NEAR(entropy_production(model, x), entropy_production(same, x), 1e-12);
}

TEST(TransformTest, DoubledCoordinatesDoubleTheTrajectory) {
  HeatExchangerParams p;
  const RIPHSModel model = systems::heat_exchanger(p);
  const RIPHSModel scaled = transform_model(model, 2.0 * Matrix::Identity(2, 2));
  const HorizonSpec h = HorizonSpec::make(1.0, 0.01);
  const std::vector<Vector> u(static_cast<std::size_t>(h.steps), Vector::Constant(1, 0.5));
  const Vector x0{{1.0, 0.0}};
  const TrajectorySolution a = simulate(model, x0, u, h);
  const TrajectorySolution b = simulate(scaled, 2.0 * x0, u, h);
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    EXPECT_LT((b.states[i] - 2.0 * a.states[i]).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(TransformTest, SingularMatrixThrows) {
  EXPECT_THROW(transform_model(systems::heat_exchanger(), Matrix::Ones(2, 2)), ModelError);
}

}  // namespace
}  // namespace riphs
