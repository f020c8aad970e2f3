#include "riphs/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>

namespace riphs {

namespace {

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

bool in_central_window(double t, double t0, double tf, double fraction) {
  const double margin = 0.5 * (1.0 - fraction) * (tf - t0);
  return t >= t0 + margin - 1e-12 && t <= tf - margin + 1e-12;
}

}  // namespace

std::optional<AffineSubspace> intersect_with_output(const AffineSubspace& set,
                                                    const OutputSpec& output) {
  // C (a + B alpha) = y  <=>  (C B) alpha = y - C a.
  const Matrix cb = output.C * set.basis;
  const Vector rhs = output.y_ref - output.C * set.offset;
  Vector alpha = Vector::Zero(set.dim());
  if (set.dim() > 0) alpha = cb.completeOrthogonalDecomposition().solve(rhs);
  if ((cb * alpha - rhs).norm() > 1e-10 * (1.0 + output.y_ref.norm())) return std::nullopt;
  Matrix kernel(set.dim(), 0);
  if (set.dim() > 0) {
    Eigen::FullPivLU<Matrix> lu(cb);
    lu.setThreshold(kRankThreshold);
    if (lu.rank() < set.dim()) kernel = lu.kernel();
  }
  return AffineSubspace(set.offset + set.basis * alpha, set.basis * kernel);
}

TurnpikeReport turnpike_metrics(const TrajectorySolution& traj, const RIPHSModel& model,
                                const EquilibriumSet& set, const std::optional<OutputSpec>& output,
                                const TurnpikeOptions& opts) {
  check_consistent(model, traj);
  TurnpikeReport r;
  const std::size_t nodes = traj.states.size();
  const double t0 = traj.time_grid.front();
  const double tf = traj.time_grid.back();
  r.horizon = tf - t0;

  std::optional<AffineSubspace> preimage;
  std::optional<AffineSubspace> target;
  if (output) {
    preimage = output->preimage();
    if (set.affine) {
      target = intersect_with_output(*set.affine, *output);
      r.intersection_empty = !target.has_value();
    }
  }

  r.dist_T.resize(nodes);
  r.dist_output.assign(nodes, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> dist_target(nodes);
  r.box_min = traj.states.front();
  r.box_max = traj.states.front();
  for (std::size_t i = 0; i < nodes; ++i) {
    const Vector& x = traj.states[i];
    const DistanceResult d = distance_to_equilibria(set, model, x);
    if (d.surrogate) ++r.surrogate_nodes;
    r.dist_T[i] = d.distance;
    if (preimage) r.dist_output[i] = preimage->distance(x);
    dist_target[i] = target ? target->distance(x) : d.distance;
    r.box_min = r.box_min.cwiseMin(x);
    r.box_max = r.box_max.cwiseMax(x);
  }

  double near_time = 0.0;
  double out_sq = 0.0;
  double cap_sq = 0.0;
  r.central_min_sigma = std::numeric_limits<double>::infinity();
  for (int i = 0; i < traj.steps(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double dt = traj.dt(i);
    r.integral_dist_sq += r.dist_T[k] * r.dist_T[k] * dt;
    if (preimage) out_sq += r.dist_output[k] * r.dist_output[k] * dt;
    if (target) cap_sq += dist_target[k] * dist_target[k] * dt;
    if (dist_target[k] <= opts.epsilon) near_time += dt;
    r.entropy_production_integral += entropy_production(model, traj.midpoint(i)) * dt;
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    if (!in_central_window(traj.time_grid[i], t0, tf, opts.central_fraction)) continue;
    r.central_max_dist = std::max(r.central_max_dist, dist_target[i]);
    r.central_max_sigma = std::max(r.central_max_sigma, traj.entropy_production[i]);
    r.central_min_sigma = std::min(r.central_min_sigma, traj.entropy_production[i]);
    if (i + 1 < nodes) {
      const double rate = (traj.states[i + 1] - traj.states[i]).lpNorm<Eigen::Infinity>() /
                          traj.dt(static_cast<int>(i));
      r.central_max_rate = std::max(r.central_max_rate, rate);
    }
  }
  if (!std::isfinite(r.central_min_sigma)) r.central_min_sigma = 0.0;
  r.fraction_near = r.horizon > 0.0 ? std::clamp(near_time / r.horizon, 0.0, 1.0) : 1.0;
  if (preimage) r.integral_output_dist_sq = out_sq;
  if (target) r.integral_intersection_dist_sq = cap_sq;
  return r;
}

int sweep_thread_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("RIPHS_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<long>(n, cap);
  }
  return std::max(n, 1);
}

SweepResult horizon_sweep(const OCPSpec& spec_template, const std::vector<double>& horizons,
                          const TurnpikeOptions& opts, int threads) {
  SweepResult out;
  out.entries.resize(horizons.size());
  const EquilibriumSet set = equilibrium_set(*spec_template.model);

  auto run_one = [&](std::size_t k, std::shared_ptr<const TrajectorySolution> warm) {
    SweepEntry& e = out.entries[k];
    e.horizon = horizons[k];
    try {
      OCPSpec spec = spec_template;
      spec.horizon = HorizonSpec::make(horizons[k], spec_template.horizon.dt);
      if (warm) {
        spec.options.warm_start = std::move(warm);
      } else {
        spec.options.initial_guess = InitialGuess::Interpolate;
      }
      e.solution = solve_ocp(spec);
      e.report = turnpike_metrics(e.solution.trajectory, *spec.model, set, spec.output, opts);
      e.ok = e.solution.status == nlp::Status::Converged;
      if (!e.ok) e.error = std::string("solver status ") + nlp::to_string(e.solution.status);
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
  };

  if (spec_template.options.initial_guess == InitialGuess::WarmStart) {
    std::vector<std::size_t> order(horizons.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return horizons[a] < horizons[b]; });
    std::shared_ptr<const TrajectorySolution> warm = spec_template.options.warm_start;
    for (std::size_t k : order) {
      run_one(k, warm);
      if (out.entries[k].ok) {
        warm = std::make_shared<const TrajectorySolution>(out.entries[k].solution.trajectory);
      }
    }
  } else {
    const int workers =
        std::min<int>(sweep_thread_count(threads), static_cast<int>(horizons.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next++; k < horizons.size(); k = next++) run_one(k, nullptr);
    };
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const SweepEntry& e : out.entries) {
    if (!e.ok) continue;
    lo = std::min(lo, e.report.integral_dist_sq);
    hi = std::max(hi, e.report.integral_dist_sq);
  }
  if (hi == 0.0) {
    out.ratio = 1.0;
  } else {
    out.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
  return out;
}

nlohmann::json to_json(const TurnpikeReport& r) {
  nlohmann::json j = {{"horizon", r.horizon},
                      {"integral_dist_sq", r.integral_dist_sq},
                      {"intersection_empty", r.intersection_empty},
                      {"fraction_near", r.fraction_near},
                      {"entropy_production_integral", r.entropy_production_integral},
                      {"box_min", to_vector(r.box_min)},
                      {"box_max", to_vector(r.box_max)},
                      {"central_max_dist", r.central_max_dist},
                      {"central_max_sigma", r.central_max_sigma},
                      {"central_min_sigma", r.central_min_sigma},
                      {"central_max_rate", r.central_max_rate},
                      {"surrogate_nodes", r.surrogate_nodes}};
  j["integral_output_dist_sq"] =
      r.integral_output_dist_sq ? nlohmann::json(*r.integral_output_dist_sq) : nlohmann::json();
  j["integral_intersection_dist_sq"] = r.integral_intersection_dist_sq
                                           ? nlohmann::json(*r.integral_intersection_dist_sq)
                                           : nlohmann::json();
  return j;
}

}  // namespace riphs
