#include "riphs/systems.hpp"

#include <cmath>
#include <set>

namespace riphs::systems {

using nlohmann::json;

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ModelError(std::string("parameter ") + what + " must be positive");
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw ModelError(std::string(what) + " parameters must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ModelError(std::string("unknown ") + what + " parameter '" + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ModelError(std::string("parameter '") + key + "' has the wrong type");
  }
}

Matrix unit_column(int n, int i) {
  Matrix m = Matrix::Zero(n, 1);
  m(i, 0) = 1.0;
  return m;
}

// Elementary skew matrix coupling compartments a -> b as in the two-tank
// exchanger: entry (a, b) = -1, (b, a) = +1, so e^T J H_x = T_a - T_b.
Matrix coupling(int n, int a, int b) {
  Matrix j = Matrix::Zero(n, n);
  j(a, b) = -1.0;
  j(b, a) = 1.0;
  return j;
}

}  // namespace

void HeatExchangerParams::validate() const {
  require_positive(c1, "c1");
  require_positive(c2, "c2");
  require_positive(lambda, "lambda");
  require_positive(T_ref, "T_ref");
  require_positive(lambda_e, "lambda_e");
  if (!std::isfinite(S_ref)) throw ModelError("parameter S_ref must be finite");
}

void GasPistonParams::validate() const {
  require_positive(N_mol, "N_mol");
  require_positive(R, "R");
  require_positive(T0, "T0");
  require_positive(P0, "P0");
  require_positive(s0, "s0");
  require_positive(A, "A");
  require_positive(g_grav, "g_grav");
  require_positive(V_max, "V_max");
  require_positive(lambda_e, "lambda_e");
  require_positive(mass(), "m");
  if (!(kappa >= 0.0)) throw ModelError("parameter kappa must be non-negative");
}

void NetworkParams::validate() const {
  if (lambdas.size() != 4) throw ModelError("network needs exactly four lambdas");
  for (double l : lambdas) require_positive(l, "lambda");
}

RIPHSModel heat_exchanger(const HeatExchangerParams& p) {
  p.validate();
  ModelDefinition def;
  def.name = "heat_exchanger";
  def.state_dim = 2;
  def.input_dim = 1;
  const Vector c{{p.c1, p.c2}};
  auto temps = [p, c](const Vector& x) -> Vector {
    return p.T_ref * ((x.array() - p.S_ref) / c.array()).exp();
  };
  def.hamiltonian = [temps, c](const Vector& x) { return (c.array() * temps(x).array()).sum(); };
  def.hamiltonian_gradient = temps;
  def.hamiltonian_hessian = [temps, c](const Vector& x) -> Matrix {
    return (temps(x).array() / c.array()).matrix().asDiagonal();
  };
  def.entropy_vector = Vector::Ones(2);
  def.irr_structures = {coupling(2, 0, 1)};
  const double lambda = p.lambda;
  def.modulations = {[lambda](const Vector&, const Vector& t) { return lambda / (t[0] * t[1]); }};
  if (p.entropy_flow_input) {
    def.input_map = [](const Vector&, const Vector&) -> Matrix { return unit_column(2, 0); };
  }
  def.domain = StateDomain::unbounded(2);
  def.equilibria = AffineSubspace(Vector::Constant(2, p.S_ref), Matrix(c));
  def.state_names = {"S1", "S2"};
  def.co_energy_names = {"T1", "T2"};
  return RIPHSModel(std::move(def));
}

Vector heat_exchanger_state(const HeatExchangerParams& p, double T1, double T2) {
  if (!(T1 > 0.0) || !(T2 > 0.0)) throw ModelError("temperatures must be positive");
  return Vector{{p.S_ref - std::log(p.T_ref) * p.c1 + p.c1 * std::log(T1),
                 p.S_ref - std::log(p.T_ref) * p.c2 + p.c2 * std::log(T2)}};
}

double thermostat_control(double lambda_e, double T1, double T_e) {
  if (!(T1 > 0.0)) throw ModelError("thermostat: compartment temperature must be positive");
  return lambda_e * (T_e - T1) / T1;
}

double thermostat_temperature(double lambda_e, double T1, double u) {
  if (!(T1 > 0.0)) throw ModelError("thermostat: compartment temperature must be positive");
  if (!(lambda_e > 0.0)) throw ModelError("thermostat: lambda_e must be positive");
  return T1 * (1.0 + u / lambda_e);
}

double gas_beta(const GasPistonParams& p, double S, double V) {
  const double rn = p.R * p.N_mol;
  return (S - p.N_mol * p.s0 + rn * std::log(rn * p.T0) - rn * std::log(V * p.P0)) / (1.5 * rn);
}

Vector gas_piston_rest_state(const GasPistonParams& p) {
  return Vector{{p.N_mol * p.s0, p.N_mol * p.R * p.T0 / p.P0, 0.0}};
}

Vector gas_piston_equilibrium_at_volume(const GasPistonParams& p, double V) {
  if (!(V > 0.0) || !(V < p.V_max)) throw ModelError("volume outside (0, V_max)");
  const double rn = p.R * p.N_mol;
  const double pressure = p.mass() * p.g_grav / p.A;
  const double temperature = pressure * V / rn;
  const double beta = std::log(temperature / p.T0);
  const double S = 1.5 * rn * beta + p.N_mol * p.s0 - rn * std::log(rn * p.T0) + rn * std::log(V * p.P0);
  return Vector{{S, V, 0.0}};
}

RIPHSModel gas_piston(const GasPistonParams& p) {
  p.validate();
  ModelDefinition def;
  def.name = "gas_piston";
  def.state_dim = 3;
  def.input_dim = 1;
  const double m = p.mass();
  const double rn = p.R * p.N_mol;
  const double weight = m * p.g_grav / p.A;
  def.hamiltonian = [p, m, rn, weight](const Vector& x) {
    const double u = 1.5 * rn * p.T0 * std::exp(gas_beta(p, x[0], x[1]));
    return u + x[2] * x[2] / (2 * m) + weight * x[1];
  };
  def.hamiltonian_gradient = [p, m, rn, weight](const Vector& x) -> Vector {
    const double eb = std::exp(gas_beta(p, x[0], x[1]));
    return Vector{{p.T0 * eb, -rn * p.T0 * eb / x[1] + weight, x[2] / m}};
  };
  def.hamiltonian_hessian = [p, m, rn](const Vector& x) -> Matrix {
    const double eb = std::exp(gas_beta(p, x[0], x[1]));
    const double V = x[1];
    const double t = p.T0 * eb;
    Matrix h = Matrix::Zero(3, 3);
    h(0, 0) = t / (1.5 * rn);
    h(0, 1) = h(1, 0) = -t / (1.5 * V);
    h(1, 1) = rn * t * (5.0 / 3.0) / (V * V);
    h(2, 2) = 1.0 / m;
    return h;
  };
  Matrix j0 = Matrix::Zero(3, 3);
  j0(1, 2) = p.A;
  j0(2, 1) = -p.A;
  def.poisson_structure = [j0](const Vector&) { return j0; };
  def.entropy_vector = Vector{{1.0, 0.0, 0.0}};
  Matrix basis;
  if (p.kappa > 0.0) {
    Matrix j1 = Matrix::Zero(3, 3);
    j1(0, 2) = 1.0;
    j1(2, 0) = -1.0;
    def.irr_structures = {j1};
    const double kappa = p.kappa;
    def.modulations = {[kappa](const Vector&, const Vector& hx) { return kappa / hx[0]; }};
    basis = Matrix::Identity(3, 2);  // span{e_S, e_V}: zero momentum
  } else {
    basis = Matrix::Identity(3, 3);
  }
  def.input_map = [](const Vector&, const Vector&) -> Matrix { return unit_column(3, 0); };
  def.domain = StateDomain::unbounded(3);
  def.domain.lower[1] = 0.0;
  def.domain.upper[1] = p.V_max;
  def.equilibria = AffineSubspace(Vector::Zero(3), basis);
  def.state_names = {"S", "V", "p"};
  def.co_energy_names = {"T", "-P+mg/A", "v"};
  return RIPHSModel(std::move(def));
}

RIPHSModel heat_network(const NetworkParams& p) {
  p.validate();
  constexpr int n = 5;
  ModelDefinition def;
  def.name = "heat_network";
  def.state_dim = n;
  def.input_dim = 3;
  def.hamiltonian = [](const Vector& x) { return x.array().exp().sum(); };
  def.hamiltonian_gradient = [](const Vector& x) -> Vector { return x.array().exp(); };
  def.hamiltonian_hessian = [](const Vector& x) -> Matrix {
    return Vector(x.array().exp()).asDiagonal();
  };
  def.entropy_vector = Vector::Ones(n);
  const int pairs[4][2] = {{0, 1}, {1, 2}, {2, 3}, {2, 4}};
  for (int k = 0; k < 4; ++k) {
    const int a = pairs[k][0];
    const int b = pairs[k][1];
    def.irr_structures.push_back(coupling(n, a, b));
    const double lambda = p.lambdas[static_cast<std::size_t>(k)];
    def.modulations.push_back(
        [lambda, a, b](const Vector&, const Vector& t) { return lambda / (t[a] * t[b]); });
  }
  def.input_map = [](const Vector&, const Vector&) -> Matrix {
    Matrix g = Matrix::Zero(n, 3);
    g(0, 0) = 1.0;
    g(3, 1) = 1.0;
    g(4, 2) = 1.0;
    return g;
  };
  def.domain = StateDomain::unbounded(n);
  def.equilibria = AffineSubspace(Vector::Zero(n), Matrix(Vector::Ones(n)));
  def.state_names = {"S1", "S2", "S3", "S4", "S5"};
  def.co_energy_names = {"T1", "T2", "T3", "T4", "T5"};
  return RIPHSModel(std::move(def));
}

void from_json(const json& j, HeatExchangerParams& p) {
  reject_unknown_keys(j, {"c1", "c2", "lambda", "T_ref", "S_ref", "lambda_e", "entropy_flow_input"},
                      "heat_exchanger");
  read(j, "c1", p.c1);
  read(j, "c2", p.c2);
  read(j, "lambda", p.lambda);
  read(j, "T_ref", p.T_ref);
  read(j, "S_ref", p.S_ref);
  read(j, "lambda_e", p.lambda_e);
  read(j, "entropy_flow_input", p.entropy_flow_input);
}

void from_json(const json& j, GasPistonParams& p) {
  reject_unknown_keys(
      j, {"N_mol", "R", "T0", "P0", "s0", "A", "kappa", "g_grav", "m", "V_max", "lambda_e"},
      "gas_piston");
  read(j, "N_mol", p.N_mol);
  read(j, "R", p.R);
  read(j, "T0", p.T0);
  read(j, "P0", p.P0);
  read(j, "s0", p.s0);
  read(j, "A", p.A);
  read(j, "kappa", p.kappa);
  read(j, "g_grav", p.g_grav);
  read(j, "m", p.m);
  read(j, "V_max", p.V_max);
  read(j, "lambda_e", p.lambda_e);
}

void from_json(const json& j, NetworkParams& p) {
  reject_unknown_keys(j, {"lambdas", "lambda1", "lambda2", "lambda3", "lambda4"}, "heat_network");
  read(j, "lambdas", p.lambdas);
  if (p.lambdas.size() == 4) {
    read(j, "lambda1", p.lambdas[0]);
    read(j, "lambda2", p.lambdas[1]);
    read(j, "lambda3", p.lambdas[2]);
    // The fourth interface defaults to lambda3 unless given explicitly.
    if (j.contains("lambda3") && !j.contains("lambda4") && !j.contains("lambdas")) {
      p.lambdas[3] = p.lambdas[2];
    }
    read(j, "lambda4", p.lambdas[3]);
  }
}

void to_json(json& j, const HeatExchangerParams& p) {
  j = json{{"c1", p.c1},       {"c2", p.c2},         {"lambda", p.lambda},
           {"T_ref", p.T_ref}, {"S_ref", p.S_ref},   {"lambda_e", p.lambda_e},
           {"entropy_flow_input", p.entropy_flow_input}};
}

void to_json(json& j, const GasPistonParams& p) {
  j = json{{"N_mol", p.N_mol}, {"R", p.R},           {"T0", p.T0},       {"P0", p.P0},
           {"s0", p.s0},       {"A", p.A},           {"kappa", p.kappa}, {"g_grav", p.g_grav},
           {"m", p.mass()},    {"V_max", p.V_max},   {"lambda_e", p.lambda_e}};
}

void to_json(json& j, const NetworkParams& p) { j = json{{"lambdas", p.lambdas}}; }

const std::vector<SystemInfo>& registry() {
  static const std::vector<SystemInfo> entries = [] {
    std::vector<SystemInfo> out;
    out.push_back({"gas_piston",
                   "ideal gas under a frictional piston; state (S, V, p), entropy-flow input",
                   json(GasPistonParams{}), 2.0});
    out.push_back({"heat_exchanger",
                   "two compartments coupled by Fourier conduction; entropy-flow input into "
                   "compartment 1",
                   json(HeatExchangerParams{}), 5.0});
    out.push_back({"heat_network",
                   "five compartments on a tree (1-2, 2-3, 3-4, 3-5); entropy-flow inputs at 1, 4, 5",
                   json(NetworkParams{}), 5.0});
    return out;
  }();
  return entries;
}

bool has_system(const std::string& name) {
  for (const auto& s : registry()) {
    if (s.name == name) return true;
  }
  return false;
}

json resolve_parameters(const std::string& name, const json& overrides) {
  const json ov = overrides.is_null() ? json::object() : overrides;
  if (name == "heat_exchanger") return json(ov.get<HeatExchangerParams>());
  if (name == "gas_piston") return json(ov.get<GasPistonParams>());
  if (name == "heat_network") return json(ov.get<NetworkParams>());
  throw ModelError("unknown system '" + name + "'");
}

RIPHSModel make_system(const std::string& name, const json& overrides) {
  const json ov = overrides.is_null() ? json::object() : overrides;
  if (name == "heat_exchanger") return heat_exchanger(ov.get<HeatExchangerParams>());
  if (name == "gas_piston") return gas_piston(ov.get<GasPistonParams>());
  if (name == "heat_network") return heat_network(ov.get<NetworkParams>());
  throw ModelError("unknown system '" + name + "'");
}

}  // namespace riphs::systems

namespace riphs::systems {

const SystemInfo& system_info(const std::string& name) {
  for (const auto& s : registry()) {
    if (s.name == name) return s;
  }
  throw ModelError("unknown system '" + name + "'");
}

Vector default_state(const std::string& name, const json& overrides) {
  const json ov = overrides.is_null() ? json::object() : overrides;
  if (name == "heat_exchanger") {
    const auto p = ov.get<HeatExchangerParams>();
    return Vector::Constant(2, p.S_ref) + Vector{{p.c1, 0.0}};
  }
  if (name == "gas_piston") return gas_piston_rest_state(ov.get<GasPistonParams>());
  if (name == "heat_network") return Vector::Constant(5, 2.5);
  throw ModelError("unknown system '" + name + "'");
}

Vector resolve_state(const std::string& name, const json& overrides, const json& spec) {
  const int n = make_system(name, overrides).state_dim();
  if (spec.is_array()) {
    Vector x(static_cast<Eigen::Index>(spec.size()));
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (!spec[i].is_number()) throw ModelError("state entries must be numbers");
      x[static_cast<Eigen::Index>(i)] = spec[i].get<double>();
    }
    if (x.size() != n) {
      throw ModelError("state for " + name + " must have " + std::to_string(n) + " entries");
    }
    return x;
  }
  if (!spec.is_object() || !spec.contains("preset") || !spec["preset"].is_string()) {
    throw ModelError("state must be a numeric array or an object with a 'preset'");
  }
  const std::string preset = spec["preset"].get<std::string>();
  const json ov = overrides.is_null() ? json::object() : overrides;
  auto number = [&](const char* key) {
    if (!spec.contains(key) || !spec[key].is_number()) {
      throw ModelError(std::string("preset '") + preset + "' needs numeric '" + key + "'");
    }
    return spec[key].get<double>();
  };
  if (preset == "uniform") {
    reject_unknown_keys(spec, {"preset", "value"}, "state preset");
    return Vector::Constant(n, number("value"));
  }
  if (name == "gas_piston") {
    const auto p = ov.get<GasPistonParams>();
    if (preset == "rest") {
      reject_unknown_keys(spec, {"preset"}, "state preset");
      return gas_piston_rest_state(p);
    }
    if (preset == "equilibrium_at_volume") {
      reject_unknown_keys(spec, {"preset", "volume", "volume_factor"}, "state preset");
      if (spec.contains("volume") == spec.contains("volume_factor")) {
        throw ModelError("give exactly one of 'volume' and 'volume_factor'");
      }
      const double v = spec.contains("volume")
                           ? number("volume")
                           : number("volume_factor") * gas_piston_rest_state(p)[1];
      return gas_piston_equilibrium_at_volume(p, v);
    }
  }
  if (name == "heat_exchanger" && preset == "temperatures") {
    reject_unknown_keys(spec, {"preset", "T"}, "state preset");
    const json& t = spec.at("T");
    if (!t.is_array() || t.size() != 2) throw ModelError("'T' must hold two temperatures");
    return heat_exchanger_state(ov.get<HeatExchangerParams>(), t[0].get<double>(),
                                t[1].get<double>());
  }
  throw ModelError("unknown state preset '" + preset + "' for " + name);
}

}  // namespace riphs::systems
