#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nslang/gradients.hpp"
#include "nslang/likelihood.hpp"
#include "nslang/model.hpp"

namespace nslang {

enum class UpdateSchedule { ForceOnly, Alternating };
enum class Param { None, Force, F0, Diffusion };

std::string to_string(UpdateSchedule s);
UpdateSchedule schedule_from_string(const std::string& name);
std::string to_string(Param p);

struct FitConfig {
  double lr_force = 0.005;
  double lr_f0 = 0.025;
  double lr_d = 0.00025;
  int max_iters = 500;
  UpdateSchedule schedule = UpdateSchedule::ForceOnly;
  InferenceMode mode = InferenceMode::full();
  GridFunction init_force;  ///< empty: F = 0
  GridFunction init_f0;     ///< empty: F0 = 0
  double init_d = 1.0;
  GridFunction rate;        ///< empty: default_rate
  double d_floor = 1e-4;
  int nv = 447;
  int snapshot_every = 10;  ///< 0 disables snapshots except the final one
  unsigned workers = 1;

  /// Throws ParameterError on a non-positive rate, floor or size.
  void validate() const;
};

struct TraceRecord {
  int iter = 0;
  double loglik = 0.0;
  std::optional<double> rel_loglik;
  Param param = Param::None;  ///< parameter updated after this evaluation
};

struct FitTrace {
  std::vector<TraceRecord> records;
  std::vector<std::pair<int, LatentModel>> snapshots;
  LatentModel final_model;  ///< last successfully evaluated model
  std::optional<double> loglik_gt;
  bool completed = false;
  std::string error;  ///< set when a step failed
};

/// Parameter updated at iteration `iter`.
Param scheduled_param(UpdateSchedule schedule, int iter);

/// One ascent step on the selected parameter followed by renormalization;
/// D is rectified to max(D, d_floor).
LatentModel gd_step(const LatentModel& model, const GradientBundle& bundle,
                    const FitConfig& config, Param which);

/// (loglik_gt - loglik) / loglik_gt.
double relative_loglik(double loglik, double loglik_gt);

/// Initial model of config on grid.
LatentModel initial_model(const GridPtr& grid, const FitConfig& config);

/// Dataset log L of `model` under mode with an nv-mode basis.
double evaluate_loglik(const LatentModel& model,
                       const std::vector<Trial>& trials,
                       const InferenceMode& mode, int nv, unsigned workers = 1);

using FitObserver = std::function<void(const TraceRecord&, const LatentModel&)>;

/// Gradient ascent for config.max_iters iterations. Records iterations
/// 0..max_iters; record i holds log L of the i-th model. A numerical failure
/// stops the loop and returns the partial trace with `error` set.
FitTrace fit(const std::vector<Trial>& trials, const GridPtr& grid,
             const FitConfig& config,
             const LatentModel* ground_truth = nullptr,
             const FitObserver& observer = nullptr);

}  // namespace nslang
