#include "riphs/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace riphs {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json to_array(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// SVG uses fewer digits; plots do not need round-trip precision.
std::string short_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf"};

struct Series {
  std::string label;
  std::vector<double> t;
  std::vector<double> y;
};

void panel(std::ostringstream& svg, const std::vector<Series>& series, const std::string& title,
           double top, double width, double height) {
  const double left = 70.0;
  const double plot_w = width - left - 130.0;
  const double plot_h = height - 45.0;
  const double y0 = top + 25.0;
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -tmin;
  double lo = tmin;
  double hi = -tmin;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      tmin = std::min(tmin, s.t[i]);
      tmax = std::max(tmax, s.t[i]);
      lo = std::min(lo, s.y[i]);
      hi = std::max(hi, s.y[i]);
    }
  }
  if (!std::isfinite(lo)) {
    lo = -1.0;
    hi = 1.0;
    tmin = 0.0;
    tmax = 1.0;
  }
  if (hi - lo < 1e-12 * (1.0 + std::abs(hi))) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  if (tmax <= tmin) tmax = tmin + 1.0;
  auto px = [&](double t) { return left + (t - tmin) / (tmax - tmin) * plot_w; };
  auto py = [&](double y) { return y0 + (hi - y) / (hi - lo) * plot_h; };

  svg << "<text x=\"" << left << "\" y=\"" << top + 16 << "\" font-weight=\"bold\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    const double t = tmin + (tmax - tmin) * k / 4.0;
    svg << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << py(y)
        << "\" y2=\"" << py(y) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << short_number(y) << "</text>\n";
    svg << "<text x=\"" << px(t) << "\" y=\"" << y0 + plot_h + 14
        << "\" text-anchor=\"middle\" font-size=\"11\">" << short_number(t) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colour << "\" points=\"";
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      svg << short_number(px(s.t[i])) << ',' << short_number(py(s.y[i])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = y0 + 12.0 + 16.0 * static_cast<double>(k);
    svg << "<line x1=\"" << left + plot_w + 10 << "\" x2=\"" << left + plot_w + 30 << "\" y1=\""
        << ly - 4 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + plot_w + 35 << "\" y=\"" << ly << "\" font-size=\"12\">"
        << s.label << "</text>\n";
  }
}

std::string label(const std::vector<std::string>& names, std::size_t j, const std::string& prefix) {
  return j < names.size() && !names[j].empty() ? names[j] : prefix + std::to_string(j + 1);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& os, const RIPHSModel& model, const TrajectorySolution& traj,
                          const TurnpikeReport& report, const OCPSpec* spec) {
  check_consistent(model, traj);
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int brackets = model.num_irreversible();
  const std::size_t nodes = traj.states.size();
  if (report.dist_T.size() != nodes || report.dist_output.size() != nodes) {
    throw ModelError("turnpike report does not match the trajectory");
  }

  os << "t";
  for (int j = 1; j <= n; ++j) os << ",x" << j;
  for (int j = 1; j <= n; ++j) os << ",co_energy" << j;
  for (int j = 1; j <= m; ++j) os << ",u" << j;
  for (int k = 1; k <= brackets; ++k) os << ",bracket" << k;
  os << ",sigma,dist_T,dist_output,cum_cost\n";

  double cum = spec ? 0.0 : kNaN;
  for (std::size_t i = 0; i < nodes; ++i) {
    const Vector& x = traj.states[i];
    const Evaluation ev = model.evaluate(x);
    os << format_number(traj.time_grid[i]);
    for (int j = 0; j < n; ++j) os << ',' << format_number(x[j]);
    for (int j = 0; j < n; ++j) os << ',' << format_number(ev.co_energy[j]);
    for (int j = 0; j < m; ++j) {
      os << ',' << format_number(i < traj.controls.size() ? traj.controls[i][j] : kNaN);
    }
    for (int k = 0; k < brackets; ++k) os << ',' << format_number(ev.brackets[k]);
    os << ',' << format_number(traj.entropy_production[i]) << ',' << format_number(report.dist_T[i])
       << ',' << format_number(report.dist_output[i]) << ',' << format_number(cum) << '\n';
    if (spec && i < traj.controls.size()) {
      cum += stage_cost(model, spec->weights, spec->output, x, traj.controls[i]) *
             traj.dt(static_cast<int>(i));
    }
  }
}

json to_json(const SolverMetadata& m) {
  return {{"producer", m.producer},
          {"status", m.status},
          {"outer_iterations", m.outer_iterations},
          {"inner_iterations", m.inner_iterations},
          {"newton_iterations", m.newton_iterations},
          {"bisections", m.bisections},
          {"constraint_violation", m.constraint_violation},
          {"projected_gradient", m.projected_gradient},
          {"objective", m.objective},
          {"tikhonov", m.tikhonov},
          {"identity_residual", m.identity_residual},
          {"wall_time_s", m.wall_time_s}};
}

json to_json(const CostBreakdown& c) {
  return {{"objective", c.objective},
          {"supply", c.supply},
          {"tracking", c.tracking},
          {"regularization", c.regularization},
          {"identity_residual", c.identity_residual}};
}

json to_json(const BalanceResiduals& b) {
  return {{"energy", b.energy},
          {"entropy", b.entropy},
          {"energy_change", b.energy_change},
          {"entropy_change", b.entropy_change}};
}

json run_report(const ExperimentConfig& config, const OCPSolution& solution,
                const EquilibriumSet& set, const TurnpikeReport& report) {
  const RIPHSModel& model = *config.spec.model;
  const TrajectorySolution& traj = solution.trajectory;
  json j;
  j["config"] = config.resolved;
  j["solver"] = to_json(traj.solver);
  j["solver"]["max_dynamics_violation"] = solution.max_dynamics_violation;
  j["solver"]["merit_monotone"] = solution.merit_monotone;
  j["cost"] = to_json(solution.cost);
  j["balance_residuals"] = to_json(balance_residuals(model, traj));
  j["active_bounds"] = {{"lower", to_array(config.spec.bounds.lower)},
                        {"upper", to_array(config.spec.bounds.upper)}};
  j["state_bounding_box"] = {{"min", to_array(solution.state_min)},
                             {"max", to_array(solution.state_max)}};
  j["terminal_state"] = to_array(traj.states.back());
  double terminal_error = 0.0;
  for (const auto& [index, value] : config.spec.terminal.fixed(model.state_dim())) {
    terminal_error = std::max(terminal_error, std::abs(traj.states.back()[index] - value));
  }
  j["terminal_error"] = terminal_error;
  j["state_names"] = model.state_names();
  j["co_energy_names"] = model.co_energy_names();
  j["equilibria"] = to_json(set);
  j["turnpike"] = to_json(report);
  return j;
}

void write_svg(std::ostream& os, const RIPHSModel& model, const TrajectorySolution& traj,
               const std::string& title) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int nb = model.num_irreversible();
  std::vector<Series> states(static_cast<std::size_t>(n));
  std::vector<Series> co(static_cast<std::size_t>(n));
  std::vector<Series> br(static_cast<std::size_t>(nb));
  std::vector<Series> ctl(static_cast<std::size_t>(m));
  for (int j = 0; j < n; ++j) {
    const auto k = static_cast<std::size_t>(j);
    states[k].label = label(model.state_names(), k, "x");
    co[k].label = label(model.co_energy_names(), k, "e");
  }
  for (int k = 0; k < nb; ++k) br[static_cast<std::size_t>(k)].label = "{S,H}_" + std::to_string(k + 1);
  for (int j = 0; j < m; ++j) ctl[static_cast<std::size_t>(j)].label = "u" + std::to_string(j + 1);

  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const double t = traj.time_grid[i];
    const Evaluation ev = model.evaluate(traj.states[i]);
    for (int j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(j);
      states[k].t.push_back(t);
      states[k].y.push_back(traj.states[i][j]);
      co[k].t.push_back(t);
      co[k].y.push_back(ev.co_energy[j]);
    }
    for (int k = 0; k < nb; ++k) {
      br[static_cast<std::size_t>(k)].t.push_back(t);
      br[static_cast<std::size_t>(k)].y.push_back(ev.brackets[k]);
    }
  }
  // Zero-order hold: two points per interval.
  for (int i = 0; i < traj.steps(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    for (int j = 0; j < m; ++j) {
      Series& c = ctl[static_cast<std::size_t>(j)];
      c.t.push_back(traj.time_grid[s]);
      c.y.push_back(traj.controls[s][j]);
      c.t.push_back(traj.time_grid[s + 1]);
      c.y.push_back(traj.controls[s][j]);
    }
  }

  const double width = 800.0;
  const double height = 220.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << 4 * height + 30 << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  panel(svg, states, "states", 30.0, width, height);
  panel(svg, co, "co-energy variables", 30.0 + height, width, height);
  panel(svg, br, "brackets {S,H}_Jk", 30.0 + 2 * height, width, height);
  panel(svg, ctl, "controls", 30.0 + 3 * height, width, height);
  svg << "</svg>\n";
  os << svg.str();
}

void write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path p(path);
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IOError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IOError("failed writing '" + path + "'");
}

}  // namespace riphs
