#include "nslang/optimizer.hpp"

#include <cmath>

#include "nslang/errors.hpp"

namespace nslang {

std::string to_string(UpdateSchedule s) {
  return s == UpdateSchedule::ForceOnly ? "force-only" : "alternating";
}

UpdateSchedule schedule_from_string(const std::string& name) {
  if (name == "force-only") return UpdateSchedule::ForceOnly;
  if (name == "alternating") return UpdateSchedule::Alternating;
  throw ParameterError("unknown update schedule '" + name + "'");
}

std::string to_string(Param p) {
  switch (p) {
    case Param::Force: return "F";
    case Param::F0: return "F0";
    case Param::Diffusion: return "D";
    default: return "none";
  }
}

void FitConfig::validate() const {
  if (!(lr_force > 0.0) || !(lr_f0 > 0.0) || !(lr_d > 0.0))
    throw ParameterError("learning rates must be positive");
  if (!(d_floor > 0.0)) throw ParameterError("d_floor must be positive");
  if (!(init_d > 0.0)) throw ParameterError("initial D must be positive");
  if (max_iters < 0) throw ParameterError("max_iters must be nonnegative");
  if (nv < 1) throw ParameterError("nv must be positive");
  if (snapshot_every < 0) throw ParameterError("snapshot_every must be >= 0");
  mode.validate();
}

Param scheduled_param(UpdateSchedule schedule, int iter) {
  if (schedule == UpdateSchedule::ForceOnly) return Param::Force;
  switch (iter % 3) {
    case 0: return Param::Force;
    case 1: return Param::F0;
    default: return Param::Diffusion;
  }
}

LatentModel gd_step(const LatentModel& model, const GradientBundle& bundle,
                    const FitConfig& config, Param which) {
  switch (which) {
    case Param::Force: {
      if (!bundle.grad_force.values.allFinite())
        throw NumericalError("non-finite force gradient");
      GridFunction f(model.force.grid,
                     model.force.values + config.lr_force * bundle.grad_force.values);
      return LatentModel::from_force(std::move(f), model.f0, model.diffusion,
                                     model.rate);
    }
    case Param::F0: {
      if (!bundle.grad_f0.values.allFinite())
        throw NumericalError("non-finite F0 gradient");
      GridFunction f0(model.f0.grid,
                      model.f0.values + config.lr_f0 * bundle.grad_f0.values);
      return LatentModel::from_force(model.force, std::move(f0),
                                     model.diffusion, model.rate);
    }
    case Param::Diffusion: {
      if (!std::isfinite(bundle.grad_d))
        throw NumericalError("non-finite D gradient");
      LatentModel out = model;
      out.diffusion =
          std::max(model.diffusion + config.lr_d * bundle.grad_d, config.d_floor);
      return out;
    }
    default:
      return model;
  }
}

double relative_loglik(double loglik, double loglik_gt) {
  if (loglik_gt == 0.0)
    throw ParameterError("relative log-likelihood undefined for log L_gt = 0");
  return (loglik_gt - loglik) / loglik_gt;
}

LatentModel initial_model(const GridPtr& grid, const FitConfig& config) {
  GridFunction force =
      config.init_force.grid ? config.init_force : constant(grid, 0.0);
  GridFunction f0 = config.init_f0.grid ? config.init_f0 : constant(grid, 0.0);
  GridFunction rate = config.rate.grid ? config.rate : default_rate(grid);
  check_on_grid(force, *grid);
  check_on_grid(f0, *grid);
  check_on_grid(rate, *grid);
  return LatentModel::from_force(std::move(force), std::move(f0), config.init_d,
                                 std::move(rate));
}

double evaluate_loglik(const LatentModel& model,
                       const std::vector<Trial>& trials,
                       const InferenceMode& mode, int nv, unsigned workers) {
  const OperatorBasis basis = build_basis(model, mode.bc, nv);
  return dataset_loglik(basis, model, trials, mode, workers);
}

FitTrace fit(const std::vector<Trial>& trials, const GridPtr& grid,
             const FitConfig& config, const LatentModel* ground_truth,
             const FitObserver& observer) {
  config.validate();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    try {
      validate_trial(trials[i]);
    } catch (const ParameterError& e) {
      throw ParameterError("trial " + std::to_string(i) + ": " + e.what());
    }
  }
  FitTrace trace;
  LatentModel model = initial_model(grid, config);
  trace.final_model = model;
  if (ground_truth)
    trace.loglik_gt = evaluate_loglik(*ground_truth, trials, config.mode,
                                      config.nv, config.workers);

  for (int iter = 0; iter <= config.max_iters; ++iter) {
    TraceRecord rec;
    rec.iter = iter;
    const bool last = iter == config.max_iters;
    rec.param = last ? Param::None : scheduled_param(config.schedule, iter);
    try {
      const OperatorBasis basis = build_basis(model, config.mode.bc, config.nv);
      GradientBundle bundle;
      if (last) {
        bundle.loglik =
            dataset_loglik(basis, model, trials, config.mode, config.workers);
      } else {
        bundle = dataset_gradients(basis, model, trials, config.mode,
                                   config.workers);
      }
      if (!std::isfinite(bundle.loglik))
        throw NumericalError("non-finite log-likelihood");
      rec.loglik = bundle.loglik;
      if (trace.loglik_gt)
        rec.rel_loglik = relative_loglik(rec.loglik, *trace.loglik_gt);
      trace.records.push_back(rec);
      trace.final_model = model;
      if (last || (config.snapshot_every > 0 && iter % config.snapshot_every == 0))
        trace.snapshots.emplace_back(iter, model);
      if (observer) observer(rec, model);
      if (!last) model = gd_step(model, bundle, config, rec.param);
    } catch (const NumericalError& e) {
      trace.error = "iteration " + std::to_string(iter) + ": " + e.what();
      return trace;
    }
  }
  trace.completed = true;
  return trace;
}

}  // namespace nslang
