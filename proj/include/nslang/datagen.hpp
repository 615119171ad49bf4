#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "nslang/errors.hpp"
#include "nslang/likelihood.hpp"
#include "nslang/model.hpp"
#include "nslang/rng.hpp"

namespace nslang {

enum class TaskKind { FixedDuration, ReactionTime };

struct Task {
  TaskKind kind = TaskKind::ReactionTime;
  double duration = 0.0;  ///< trial length for FixedDuration (s)

  static Task reaction_time() { return {TaskKind::ReactionTime, 0.0}; }
  static Task fixed_duration(double t) { return {TaskKind::FixedDuration, t}; }
};

std::string to_string(const Task& task);

struct SimConfig {
  double dt = 1e-4;
  double t_max = 10.0;  ///< cap on reaction-time trials (s)
  Task task = Task::reaction_time();
  int n_trials = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Termination { UpperBoundary, LowerBoundary, TimeLimit, EndOfTrial };

/// -1, +1 for the boundaries, 0 otherwise.
int boundary_sign(Termination t);

struct Path {
  std::vector<double> t;
  std::vector<double> x;
  Termination terminated_by = Termination::TimeLimit;
};

/// x0 = CDF^{-1}(u) for the density p0, with the CDF interpolated linearly
/// between nodes.
double sample_initial_state(const LatentModel& model, double u);

/// Euler-Maruyama integration of dx = D F(x) dt + sqrt(2 D) dW from x0, with
/// standard normals drawn from normal(). Reaction-time paths stop at the
/// first crossing of a domain boundary (crossing time by linear
/// interpolation) or at t_max; fixed-duration paths are mirror-reflected at
/// the boundaries and stop at task.duration.
template <typename NormalFn>
Path simulate_trajectory_with(const LatentModel& model, const Task& task,
                              double dt, double t_max, double x0,
                              NormalFn&& normal);

/// x0 from p0, then simulate_trajectory_with using rng.normal().
Path simulate_trajectory(const LatentModel& model, const Task& task, double dt,
                         double t_max, CounterRng& rng);

/// Time-rescaling: Lambda(t) = int f(x(s)) ds by the trapezoid rule on the
/// path grid; a spike is emitted each time Lambda reaches the next partial
/// sum of Exp(1) draws, located by linear interpolation.
std::vector<double> spikes_from_path(const Path& path,
                                     const GridFunction& rate,
                                     CounterRng& rng);

enum class Preset { Ramping, Stepping, Custom };

std::string to_string(Preset preset);
Preset preset_from_string(const std::string& name);

/// Ramping: phi = -2.65 x, D = 0.56. Stepping: the 14-degree polynomial
/// potential, D = 1. Both use p0 ~ exp(-100 x^2) and f(x) = 50 x + 60 Hz.
LatentModel preset_model(Preset preset, const GridPtr& grid);

/// 64 elements of 8 points on [-1, 1].
GridPtr default_grid();

struct Dataset {
  std::vector<Trial> trials;
  std::vector<int> boundary;  ///< per trial: +1, -1 or 0
  nlohmann::json metadata;
};

/// Generates config.n_trials trials. Trial i uses the stream (seed, i).
/// Reaction-time paths that reach t_max are dropped and replaced by further
/// stream indices; their number is stored as metadata["time_limited"].
Dataset generate_dataset(const LatentModel& model, const std::string& preset,
                         const SimConfig& config, unsigned workers = 1);

nlohmann::json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const nlohmann::json& doc);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

// ---------------------------------------------------------------------------

template <typename NormalFn>
Path simulate_trajectory_with(const LatentModel& model, const Task& task,
                              double dt, double t_max, double x0,
                              NormalFn&& normal) {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  const SpectralGrid& grid = *model.grid();
  const double lo = grid.x_begin();
  const double hi = grid.x_end();
  if (!(x0 >= lo && x0 <= hi)) throw ParameterError("x0 outside the domain");
  const bool reaction = task.kind == TaskKind::ReactionTime;
  const double t_end = reaction ? t_max : task.duration;
  if (!(t_end >= dt)) throw ParameterError("trial shorter than one step");
  const double d = model.diffusion;
  const double noise = std::sqrt(2.0 * d * dt);
  const Eigen::VectorXd& force = model.force.values;

  Path path;
  const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  path.t.reserve(n_steps + 1);
  path.x.reserve(n_steps + 1);
  path.t.push_back(0.0);
  path.x.push_back(x0);
  double x = x0;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * dt;
    const double h = std::min(dt, t_end - t_prev);
    const double step_noise = h == dt ? noise : std::sqrt(2.0 * d * h);
    double xn = x + d * grid.interpolate(force, x) * h + step_noise * normal();
    if (reaction) {
      if (xn >= hi || xn <= lo) {
        const double b = xn >= hi ? hi : lo;
        const double frac = (b - x) / (xn - x);
        path.t.push_back(t_prev + frac * h);
        path.x.push_back(b);
        path.terminated_by =
            xn >= hi ? Termination::UpperBoundary : Termination::LowerBoundary;
        return path;
      }
    } else {
      while (xn > hi || xn < lo) xn = xn > hi ? 2.0 * hi - xn : 2.0 * lo - xn;
    }
    x = xn;
    path.t.push_back(k == n_steps ? t_end : static_cast<double>(k) * dt);
    path.x.push_back(x);
  }
  path.terminated_by =
      reaction ? Termination::TimeLimit : Termination::EndOfTrial;
  return path;
}

}  // namespace nslang
