#pragma once

// Built-in thermodynamic example systems and their parameter sets.

#include <string>
#include <vector>

#include <json.hpp>

#include "riphs/model.hpp"

namespace riphs::systems {

/// Two compartments with T_i(S_i) = T_ref exp((S_i - S_ref) / c_i), coupled by
/// Fourier conduction q = lambda (T_1 - T_2).
struct HeatExchangerParams {
  double c1 = 1.0;
  double c2 = 1.0;
  double lambda = 1.0;
  double T_ref = 1.0;
  double S_ref = 0.0;
  double lambda_e = 1.0;
  /// Entropy-flow input into compartment 1; false gives the closed system (g = 0).
  bool entropy_flow_input = true;

  void validate() const;
};

/// Ideal gas under a piston; state (S, V, p).  Defaults follow the reference
/// table (N = 0.01 mol, P0 = 101.325, T0 = 273 K, A = 0.5 m^2, kappa = 10).
struct GasPistonParams {
  double N_mol = 0.01;
  double R = 8.314;
  double T0 = 273.0;
  double P0 = 101.325;
  double s0 = 0.11;
  double A = 0.5;
  double kappa = 10.0;
  double g_grav = 9.81;
  double m = 0.0;  // <= 0 means A P0 / g_grav
  double V_max = 1.0;
  double lambda_e = 1.0;

  [[nodiscard]] double mass() const { return m > 0.0 ? m : A * P0 / g_grav; }
  void validate() const;
};

/// Five compartments with H_i = exp(S_i) on a tree: 1-2, 2-3, 3-4, 3-5.
/// Inputs are entropy flows into compartments 1, 4 and 5.
struct NetworkParams {
  std::vector<double> lambdas = {1.0, 1.0, 1.0, 1.0};

  void validate() const;
};

RIPHSModel heat_exchanger(const HeatExchangerParams& p = {});
RIPHSModel gas_piston(const GasPistonParams& p = {});
RIPHSModel heat_network(const NetworkParams& p = {});

/// Entropy flow into a compartment at temperature T1 from a thermostat at
/// T_e through a wall with conduction coefficient lambda_e:
/// u = lambda_e (T_e - T1) / T1.
double thermostat_control(double lambda_e, double T1, double T_e);
/// Inverse map T_e = T1 (1 + u / lambda_e).
double thermostat_temperature(double lambda_e, double T1, double u);

/// H_x^{-1}: entropies realising the given compartment temperatures.
Vector heat_exchanger_state(const HeatExchangerParams& p, double T1, double T2);

/// Internal-energy exponent beta(S, V).
double gas_beta(const GasPistonParams& p, double S, double V);
/// Mechanical-rest state with the gas at (T0, P0): S = N s0, V = N R T0 / P0, p = 0.
Vector gas_piston_rest_state(const GasPistonParams& p);
/// Rest state at volume V with pressure balancing the piston weight (P = m g / A).
Vector gas_piston_equilibrium_at_volume(const GasPistonParams& p, double V);

void from_json(const nlohmann::json& j, HeatExchangerParams& p);
void from_json(const nlohmann::json& j, GasPistonParams& p);
void from_json(const nlohmann::json& j, NetworkParams& p);
void to_json(nlohmann::json& j, const HeatExchangerParams& p);
void to_json(nlohmann::json& j, const GasPistonParams& p);
void to_json(nlohmann::json& j, const NetworkParams& p);

/// Registry entry: name, description and a factory taking parameter overrides.
struct SystemInfo {
  std::string name;
  std::string description;
  nlohmann::json defaults;
  /// Symmetric default control box |u_j| <= bound (the source leaves U open).
  double default_control_bound = 1.0;
};

/// Deterministically ordered list of built-in systems.
const std::vector<SystemInfo>& registry();
bool has_system(const std::string& name);
/// Builds a named system; unknown override keys throw ModelError.
RIPHSModel make_system(const std::string& name, const nlohmann::json& overrides = {});
/// Resolved parameters (defaults merged with overrides).
nlohmann::json resolve_parameters(const std::string& name, const nlohmann::json& overrides = {});
const SystemInfo& system_info(const std::string& name);

/// A representative interior state, used as a starting guess.
Vector default_state(const std::string& name, const nlohmann::json& overrides = {});

/// State from a config value: a numeric array, or an object naming a preset:
///   {"preset": "rest"}                                  gas_piston
///   {"preset": "equilibrium_at_volume", "volume": V}    gas_piston
///   {"preset": "equilibrium_at_volume", "volume_factor": f}  (V = f * V_rest)
///   {"preset": "temperatures", "T": [T1, T2]}           heat_exchanger
///   {"preset": "uniform", "value": s}                   any system
/// Throws ModelError on malformed input.
Vector resolve_state(const std::string& name, const nlohmann::json& overrides,
                     const nlohmann::json& spec);

}  // namespace riphs::systems
