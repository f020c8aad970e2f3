#include "riphs/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "riphs/systems.hpp"

namespace riphs {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double number(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
  return j[key].get<double>();
}

int integer(const json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return j[key].get<int>();
}

Vector vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + " must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json to_array(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector state_of(const std::string& system, const json& params, const json& spec,
                const std::string& where) {
  try {
    return systems::resolve_state(system, params, spec);
  } catch (const ModelError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"name", "system", "parameters", "x0", "horizon", "weights", "bounds", "output",
                 "terminal", "solver", "turnpike", "sweep", "output_dir", "description"},
             "config");
  ExperimentConfig c;
  if (!j.contains("name") || !j["name"].is_string()) throw ConfigError("config needs a 'name'");
  if (!j.contains("system") || !j["system"].is_string()) {
    throw ConfigError("config needs a 'system'");
  }
  c.name = j["name"].get<std::string>();
  c.system = j["system"].get<std::string>();
  if (!systems::has_system(c.system)) throw ConfigError("unknown system '" + c.system + "'");

  const json overrides = j.value("parameters", json::object());
  std::shared_ptr<const RIPHSModel> model;
  try {
    c.parameters = systems::resolve_parameters(c.system, overrides);
    model = std::make_shared<const RIPHSModel>(systems::make_system(c.system, overrides));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("parameters: ") + e.what());
  }
  const int n = model->state_dim();
  const int m = model->input_dim();

  OCPSpec& s = c.spec;
  s.model = model;
  s.x0 = j.contains("x0") ? state_of(c.system, overrides, j["x0"], "x0")
                          : systems::default_state(c.system, overrides);

  // Horizon.
  const json h = j.value("horizon", json::object());
  check_keys(h, {"t_f", "dt"}, "horizon");
  if (!h.contains("t_f")) throw ConfigError("horizon.t_f is required");
  try {
    s.horizon = HorizonSpec::make(number(h, "t_f", 0.0, "horizon"), number(h, "dt", 0.01, "horizon"));
  } catch (const ModelError& e) {
    throw ConfigError(std::string("horizon: ") + e.what());
  }

  const json w = j.value("weights", json::object());
  check_keys(w, {"alpha1", "alpha2", "T0"}, "weights");
  s.weights.alpha1 = number(w, "alpha1", 0.0, "weights");
  s.weights.alpha2 = number(w, "alpha2", 1.0, "weights");
  s.weights.T0 = number(w, "T0", 1.0, "weights");

  // Control bounds.
  const json b = j.value("bounds", json::object());
  check_keys(b, {"lower", "upper", "limit"}, "bounds");
  if (b.contains("limit")) {
    if (b.contains("lower") || b.contains("upper")) {
      throw ConfigError("bounds: give either 'limit' or 'lower'/'upper'");
    }
    s.bounds = ControlBounds::symmetric(m, number(b, "limit", 0.0, "bounds"));
  } else if (b.contains("lower") || b.contains("upper")) {
    if (!b.contains("lower") || !b.contains("upper")) {
      throw ConfigError("bounds: 'lower' and 'upper' go together");
    }
    s.bounds = {vector_of(b["lower"], "bounds.lower"), vector_of(b["upper"], "bounds.upper")};
  } else {
    s.bounds = ControlBounds::symmetric(m, systems::system_info(c.system).default_control_bound);
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, {"C", "y_ref", "weight"}, "output");
    if (!o.contains("C") || !o["C"].is_array() || o["C"].empty()) {
      throw ConfigError("output.C must be a non-empty array of rows");
    }
    OutputSpec out;
    out.C = Matrix::Zero(static_cast<Eigen::Index>(o["C"].size()), n);
    for (std::size_t r = 0; r < o["C"].size(); ++r) {
      const Vector row = vector_of(o["C"][r], "output.C row");
      if (row.size() != n) throw ConfigError("output.C rows must have " + std::to_string(n) + " entries");
      out.C.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    if (!o.contains("y_ref")) throw ConfigError("output.y_ref is required");
    out.y_ref = vector_of(o["y_ref"], "output.y_ref");
    out.weight = number(o, "weight", 1.0, "output");
    s.output = out;
  }

  const json t = j.value("terminal", json{{"kind", "free"}});
  check_keys(t, {"kind", "target", "components"}, "terminal");
  const std::string kind = t.value("kind", "free");
  if (kind == "free") {
    if (t.contains("target") || t.contains("components")) {
      throw ConfigError("terminal: a free end point takes no target");
    }
    s.terminal = TerminalSpec::free();
  } else if (kind == "point") {
    if (!t.contains("target")) throw ConfigError("terminal.target is required");
    s.terminal = TerminalSpec::point(state_of(c.system, overrides, t["target"], "terminal.target"));
  } else if (kind == "componentwise") {
    if (!t.contains("target") || !t.contains("components")) {
      throw ConfigError("terminal: componentwise needs 'components' and 'target'");
    }
    std::vector<int> comps;
    for (const json& k : t["components"]) {
      if (!k.is_number_integer()) throw ConfigError("terminal.components must be integers");
      comps.push_back(k.get<int>());
    }
    s.terminal = TerminalSpec::componentwise(comps, vector_of(t["target"], "terminal.target"));
  } else {
    throw ConfigError("terminal.kind must be free, point or componentwise");
  }

  const json so = j.value("solver", json::object());
  check_keys(so, {"constraint_tolerance", "gradient_tolerance", "max_outer", "max_inner",
                  "initial_penalty", "max_penalty", "penalty_growth", "tikhonov", "initial_guess",
                  "least_squares_multipliers", "verbose"},
             "solver");
  nlp::SolverOptions& opt = s.options.solver;
  opt.constraint_tolerance = number(so, "constraint_tolerance", opt.constraint_tolerance, "solver");
  opt.gradient_tolerance = number(so, "gradient_tolerance", opt.gradient_tolerance, "solver");
  opt.max_outer = integer(so, "max_outer", opt.max_outer, "solver");
  opt.max_inner = integer(so, "max_inner", opt.max_inner, "solver");
  opt.initial_penalty = number(so, "initial_penalty", opt.initial_penalty, "solver");
  opt.max_penalty = number(so, "max_penalty", opt.max_penalty, "solver");
  opt.penalty_growth = number(so, "penalty_growth", opt.penalty_growth, "solver");
  opt.least_squares_multipliers = so.value("least_squares_multipliers", true);
  opt.verbose = so.value("verbose", false);
  s.options.tikhonov = number(so, "tikhonov", -1.0, "solver");
  const std::string guess = so.value("initial_guess", "interpolate");
  if (guess == "interpolate") {
    s.options.initial_guess = InitialGuess::Interpolate;
  } else if (guess == "warm_start") {
    s.options.initial_guess = InitialGuess::WarmStart;
  } else {
    throw ConfigError("solver.initial_guess must be interpolate or warm_start");
  }
  if (opt.max_outer <= 0 || opt.max_inner <= 0) throw ConfigError("solver caps must be positive");

  const json tp = j.value("turnpike", json::object());
  check_keys(tp, {"epsilon", "central_fraction"}, "turnpike");
  c.turnpike.epsilon = number(tp, "epsilon", 0.1, "turnpike");
  c.turnpike.central_fraction = number(tp, "central_fraction", 0.6, "turnpike");
  if (c.turnpike.epsilon <= 0.0 || c.turnpike.central_fraction <= 0.0 ||
      c.turnpike.central_fraction > 1.0) {
    throw ConfigError("turnpike: epsilon > 0 and central_fraction in (0, 1] required");
  }

  const json sw = j.value("sweep", json::object());
  check_keys(sw, {"horizons", "threads"}, "sweep");
  if (sw.contains("horizons")) {
    const Vector hs = vector_of(sw["horizons"], "sweep.horizons");
    c.sweep_horizons.assign(hs.data(), hs.data() + hs.size());
  }
  c.sweep_threads = integer(sw, "threads", 0, "sweep");

  if (j.contains("output_dir") && !j["output_dir"].is_string()) {
    throw ConfigError("output_dir must be a string");
  }
  c.output_dir = j.value("output_dir", "results/" + c.name);

  try {
    s.validate();
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  // Resolved echo.
  json& r = c.resolved;
  r["name"] = c.name;
  r["system"] = c.system;
  r["parameters"] = c.parameters;
  r["x0"] = to_array(s.x0);
  r["horizon"] = {{"t_f", s.horizon.t_final}, {"dt", s.horizon.dt}, {"steps", s.horizon.steps}};
  r["weights"] = {{"alpha1", s.weights.alpha1}, {"alpha2", s.weights.alpha2}, {"T0", s.weights.T0}};
  r["bounds"] = {{"lower", to_array(s.bounds.lower)}, {"upper", to_array(s.bounds.upper)}};
  if (s.output) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < s.output->C.rows(); ++i) {
      rows.push_back(to_array(s.output->C.row(i).transpose()));
    }
    r["output"] = {{"C", rows}, {"y_ref", to_array(s.output->y_ref)}, {"weight", s.output->weight}};
  } else {
    r["output"] = nullptr;
  }
  switch (s.terminal.kind) {
    case TerminalSpec::Kind::Free:
      r["terminal"] = {{"kind", "free"}};
      break;
    case TerminalSpec::Kind::Point:
      r["terminal"] = {{"kind", "point"}, {"target", to_array(s.terminal.target)}};
      break;
    case TerminalSpec::Kind::Componentwise:
      r["terminal"] = {{"kind", "componentwise"},
                       {"components", s.terminal.components},
                       {"target", to_array(s.terminal.target)}};
      break;
  }
  r["solver"] = {{"constraint_tolerance", opt.constraint_tolerance},
                 {"gradient_tolerance", opt.gradient_tolerance},
                 {"max_outer", opt.max_outer},
                 {"max_inner", opt.max_inner},
                 {"initial_penalty", opt.initial_penalty},
                 {"max_penalty", opt.max_penalty},
                 {"penalty_growth", opt.penalty_growth},
                 {"least_squares_multipliers", opt.least_squares_multipliers},
                 {"tikhonov", s.tikhonov()},
                 {"initial_guess", guess}};
  r["turnpike"] = {{"epsilon", c.turnpike.epsilon},
                   {"central_fraction", c.turnpike.central_fraction}};
  r["sweep"] = {{"horizons", c.sweep_horizons}, {"threads", c.sweep_threads}};
  r["output_dir"] = c.output_dir;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace riphs
