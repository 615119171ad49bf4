#include "nslang/datagen.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include "nslang/parallel.hpp"

namespace nslang {

std::string to_string(const Task& task) {
  return task.kind == TaskKind::ReactionTime ? "reaction-time"
                                             : "fixed-duration";
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("dt must be positive");
  if (!(t_max >= dt)) throw ParameterError("t_max must be at least dt");
  if (task.kind == TaskKind::FixedDuration && !(task.duration >= dt))
    throw ParameterError("trial duration must be at least dt");
  if (n_trials < 1) throw ParameterError("n_trials must be at least 1");
}

int boundary_sign(Termination t) {
  switch (t) {
    case Termination::UpperBoundary: return 1;
    case Termination::LowerBoundary: return -1;
    default: return 0;
  }
}

double sample_initial_state(const LatentModel& model, double u) {
  const SpectralGrid& grid = *model.grid();
  const Eigen::VectorXd cdf = grid.antideriv_matrix() * model.p0.values;
  const Eigen::Index n = cdf.size();
  const double target = u * cdf[n - 1];
  // First node whose CDF reaches the target.
  const double* begin = cdf.data();
  const double* it = std::lower_bound(begin, begin + n, target);
  const Eigen::Index k = std::clamp<Eigen::Index>(it - begin, 1, n - 1);
  const double c0 = cdf[k - 1];
  const double c1 = cdf[k];
  const double x0 = grid.nodes()[k - 1];
  const double x1 = grid.nodes()[k];
  if (!(c1 > c0)) return x0;
  return x0 + (target - c0) / (c1 - c0) * (x1 - x0);
}

Path simulate_trajectory(const LatentModel& model, const Task& task, double dt,
                         double t_max, CounterRng& rng) {
  const double x0 = sample_initial_state(model, rng.uniform());
  return simulate_trajectory_with(model, task, dt, t_max, x0,
                                  [&rng] { return rng.normal(); });
}

std::vector<double> spikes_from_path(const Path& path,
                                     const GridFunction& rate,
                                     CounterRng& rng) {
  std::vector<double> spikes;
  if (path.t.size() < 2) return spikes;
  const SpectralGrid& grid = *rate.grid;
  double lambda = 0.0;
  double threshold = rng.exponential();
  double f_prev = std::max(grid.interpolate(rate.values, path.x[0]), 0.0);
  for (std::size_t i = 1; i < path.t.size(); ++i) {
    const double f = std::max(grid.interpolate(rate.values, path.x[i]), 0.0);
    const double h = path.t[i] - path.t[i - 1];
    const double next = lambda + 0.5 * (f_prev + f) * h;
    while (threshold <= next && next > lambda) {
      const double t =
          path.t[i - 1] + (threshold - lambda) / (next - lambda) * h;
      if (spikes.empty() || t > spikes.back()) spikes.push_back(t);
      threshold += rng.exponential();
    }
    lambda = next;
    f_prev = f;
  }
  return spikes;
}

std::string to_string(Preset preset) {
  switch (preset) {
    case Preset::Ramping: return "ramping";
    case Preset::Stepping: return "stepping";
    default: return "custom";
  }
}

Preset preset_from_string(const std::string& name) {
  if (name == "ramping") return Preset::Ramping;
  if (name == "stepping") return Preset::Stepping;
  if (name == "custom") return Preset::Custom;
  throw ParameterError("unknown preset '" + name + "'");
}

namespace {

// Stepping potential, highest degree first.
constexpr double kSteppingCoeffs[] = {
    213.7, -34.39, -830.8, 61.33, 1329.0, 37.88, -1144.0, -160.5,
    590.7, 133.0,  -192.4, -37.51, 33.03, -0.3233, 0.4446};

double stepping_force(double x) {
  // -dPhi/dx by Horner's rule on the differentiated polynomial.
  constexpr int degree = 14;
  double v = 0.0;
  for (int i = 0; i < degree; ++i)
    v = v * x + kSteppingCoeffs[i] * static_cast<double>(degree - i);
  return -v;
}

}  // namespace

LatentModel preset_model(Preset preset, const GridPtr& grid) {
  GridFunction f0 = sample(grid, [](double x) { return -200.0 * x; });
  GridFunction rate = default_rate(grid);
  switch (preset) {
    case Preset::Ramping:
      return LatentModel::from_force(constant(grid, 2.65), std::move(f0), 0.56,
                                     std::move(rate));
    case Preset::Stepping:
      return LatentModel::from_force(sample(grid, stepping_force),
                                     std::move(f0), 1.0, std::move(rate));
    default:
      throw ParameterError("the custom preset needs a model file");
  }
}

GridPtr default_grid() { return SpectralGrid::build(64, 8, -1.0, 1.0); }

namespace {

struct SimTrial {
  Trial trial;
  Termination end = Termination::TimeLimit;
};

SimTrial simulate_one(const LatentModel& model, const SimConfig& config,
                      std::uint64_t index) {
  CounterRng rng(config.seed, index);
  const Path path =
      simulate_trajectory(model, config.task, config.dt, config.t_max, rng);
  SimTrial out;
  out.end = path.terminated_by;
  out.trial.t0 = path.t.front();
  out.trial.tE = path.t.back();
  out.trial.spikes = spikes_from_path(path, model.rate, rng);
  return out;
}

}  // namespace

Dataset generate_dataset(const LatentModel& model, const std::string& preset,
                         const SimConfig& config, unsigned workers) {
  config.validate();
  model.validate();
  const bool reaction = config.task.kind == TaskKind::ReactionTime;
  const auto wanted = static_cast<std::size_t>(config.n_trials);
  Dataset data;
  std::size_t next_index = 0;
  std::size_t time_limited = 0;
  while (data.trials.size() < wanted) {
    const std::size_t batch = wanted - data.trials.size();
    std::vector<SimTrial> sims(batch);
    parallel_for(batch, workers, [&](std::size_t i) {
      sims[i] = simulate_one(model, config, next_index + i);
    });
    next_index += batch;
    for (SimTrial& s : sims) {
      if (reaction && s.end == Termination::TimeLimit) {
        ++time_limited;
        continue;
      }
      data.trials.push_back(std::move(s.trial));
      data.boundary.push_back(boundary_sign(s.end));
    }
    if (time_limited > 10 * wanted + 100)
      throw NumericalError("almost no reaction-time trial reached a boundary "
                           "within t_max");
  }
  if (reaction && time_limited * 100 > next_index)
    std::cerr << "warning: " << time_limited << " of " << next_index
              << " reaction-time trials hit t_max and were replaced\n";

  data.metadata = {{"preset", preset},
                   {"seed", config.seed},
                   {"dt", config.dt},
                   {"t_max", config.t_max},
                   {"task", to_string(config.task)},
                   {"generator_id", std::string(CounterRng::kAlgorithm)},
                   {"n_trials", config.n_trials},
                   {"streams_used", next_index},
                   {"time_limited", time_limited}};
  if (config.task.kind == TaskKind::FixedDuration)
    data.metadata["duration"] = config.task.duration;
  return data;
}

nlohmann::json dataset_to_json(const Dataset& data) {
  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t i = 0; i < data.trials.size(); ++i) {
    const Trial& t = data.trials[i];
    trials.push_back({{"t0", t.t0},
                      {"spikes", t.spikes},
                      {"tE", t.tE},
                      {"boundary", i < data.boundary.size() ? data.boundary[i] : 0}});
  }
  return {{"metadata", data.metadata.is_null() ? nlohmann::json::object()
                                               : data.metadata},
          {"trials", trials}};
}

Dataset dataset_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("trials") || !doc["trials"].is_array())
    throw ParameterError("dataset document needs a 'trials' array");
  Dataset data;
  data.metadata = doc.value("metadata", nlohmann::json::object());
  for (const auto& jt : doc["trials"]) {
    Trial t;
    try {
      t.t0 = jt.at("t0").get<double>();
      t.tE = jt.at("tE").get<double>();
      t.spikes = jt.at("spikes").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParameterError(std::string("malformed trial: ") + e.what());
    }
    validate_trial(t);
    data.trials.push_back(std::move(t));
    data.boundary.push_back(jt.value("boundary", 0));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write '" + path + "'");
  out << dataset_to_json(data).dump(1) << '\n';
  if (!out) throw ParameterError("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("'" + path + "' is not valid JSON: " + e.what());
  }
  return dataset_from_json(doc);
}

}  // namespace nslang
