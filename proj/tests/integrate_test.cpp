#include <cmath>

#include <gtest/gtest.h>

#include "riphs/integrate.hpp"
#include "riphs/systems.hpp"

namespace riphs {
namespace {

using systems::GasPistonParams;
using systems::HeatExchangerParams;

RIPHSModel closed_heat_exchanger() {
  HeatExchangerParams p;
  p.entropy_flow_input = false;
  return systems::heat_exchanger(p);
}

// x' = J x with J constant skew and H = |x|^2 / 2; e spans ker J.
RIPHSModel linear_oscillator() {
  ModelDefinition def;
  def.name = "oscillator";
  def.state_dim = 3;
  def.input_dim = 1;  // no input map: g = 0
  Matrix J = Matrix::Zero(3, 3);
  J(0, 1) = 1.0;
  J(1, 0) = -1.0;
  def.poisson_structure = [J](const Vector&) { return J; };
  def.hamiltonian = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  def.hamiltonian_gradient = [](const Vector& x) { return x; };
  def.entropy_vector = Vector{{0.0, 0.0, 1.0}};
  def.domain = StateDomain::unbounded(3);
  return RIPHSModel(def);
}

TEST(HorizonTest, SnapsToWholeSteps) {
  const HorizonSpec h = HorizonSpec::make(10.0, 0.01);
  EXPECT_EQ(h.steps, 1000);
  EXPECT_EQ(h.grid().size(), 1001u);
  EXPECT_DOUBLE_EQ(h.grid().back(), 10.0);
  EXPECT_THROW(HorizonSpec::make(1.0, 0.0), ModelError);
}

TEST(StepTest, SteadyStateIsFixedPoint) {
  const RIPHSModel model = closed_heat_exchanger();
  const Vector x = Vector::Constant(2, 1.3);
  StepStats stats;
  const Vector next = step_implicit_midpoint(model, x, Vector::Zero(model.input_dim()), 0.01, {}, &stats);
  EXPECT_EQ(next, x);
  EXPECT_EQ(stats.newton_iterations, 0);
}

TEST(StepTest, ResidualVanishesAfterStep) {
  const RIPHSModel model = systems::heat_network();
  const Vector x{{1.0, 2.0, 1.5, 0.5, 2.5}};
  const Vector u{{0.2, -0.1, 0.3}};
  const Vector next = step_implicit_midpoint(model, x, u, 0.05);
  EXPECT_LT(midpoint_residual(model, x, next, u, 0.05).norm(), 1e-11);
}

TEST(SimulateTest, QuadraticEnergyExactlyConserved) {
  const RIPHSModel model = linear_oscillator();
  const Vector x0{{1.0, 0.5, 2.0}};
  const HorizonSpec h = HorizonSpec::make(20.0, 0.1);
  const TrajectorySolution traj =
      simulate(model, x0, std::vector<Vector>(static_cast<std::size_t>(h.steps), Vector::Zero(1)), h);
  // Exact up to the per-step Newton tolerance (1e-12 scaled), accumulated over 200 steps.
  EXPECT_NEAR(model.hamiltonian(traj.states.back()), model.hamiltonian(x0), 200 * 1e-12 * 10.0);
}

TEST(SimulateTest, ClosedSystemEntropyDoesNotDecrease) {
  const RIPHSModel model = closed_heat_exchanger();
  const HorizonSpec h = HorizonSpec::make(5.0, 0.01);
  const TrajectorySolution traj =
      simulate(model, Vector{{1.0, 0.0}}, std::vector<Vector>(500, Vector::Zero(model.input_dim())), h);
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    EXPECT_GE(model.entropy(traj.states[i]), model.entropy(traj.states[i - 1]) - 1e-12);
  }
  EXPECT_GE(model.entropy(traj.states.back()), model.entropy(traj.states.front()) - 1e-9);
}

TEST(SimulateTest, TemperaturesApproachMonotonically) {
  const RIPHSModel model = closed_heat_exchanger();
  const HorizonSpec h = HorizonSpec::make(3.0, 0.01);
  const TrajectorySolution traj =
      simulate(model, Vector{{1.0, 0.0}}, std::vector<Vector>(300, Vector::Zero(model.input_dim())), h);
  double previous = std::numeric_limits<double>::infinity();
  for (const Vector& x : traj.states) {
    const Vector T = model.co_energy(x);
    const double gap = std::abs(T[0] - T[1]);
    EXPECT_LT(gap, previous);
    previous = gap;
  }
}

TEST(SimulateTest, GasPistonThermostatEquilibriumIsConstant) {
  const GasPistonParams p;
  const RIPHSModel model = systems::gas_piston(p);
  const Vector x0 = systems::gas_piston_rest_state(p);
  const Vector u{{systems::thermostat_control(p.lambda_e, p.T0, p.T0)}};
  const HorizonSpec h = HorizonSpec::make(2.0, 0.01);
  const TrajectorySolution traj = simulate(model, x0, std::vector<Vector>(200, u), h);
  for (const Vector& x : traj.states) EXPECT_LT((x - x0).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(SimulateTest, EnergyBalanceResidualIsSecondOrder) {
  const RIPHSModel model = systems::heat_exchanger();
  std::vector<double> residuals;
  for (double dt : {0.04, 0.02, 0.01}) {
    const HorizonSpec h = HorizonSpec::make(2.0, dt);
    std::vector<Vector> u;
    for (double t : h.grid()) u.push_back(Vector::Constant(1, std::sin(t)));
    u.pop_back();
    const TrajectorySolution traj = simulate(model, Vector{{1.0, 0.0}}, u, h);
    residuals.push_back(balance_residuals(model, traj).energy);
  }
  EXPECT_GT(std::log2(residuals[0] / residuals[1]), 1.9);
  EXPECT_GT(std::log2(residuals[1] / residuals[2]), 1.9);
}

TEST(SimulateTest, WrongControlCountThrows) {
  const RIPHSModel model = systems::heat_exchanger();
  EXPECT_THROW(simulate(model, Vector::Zero(2), std::vector<Vector>(3, Vector::Zero(1)),
                        HorizonSpec::make(1.0, 0.1)),
               ModelError);
}

}  // namespace
}  // namespace riphs
