#include "nslang/likelihood.hpp"

#include <cmath>
#include <string>

#include "nslang/errors.hpp"
#include "nslang/parallel.hpp"

namespace nslang {

void validate_trial(const Trial& trial) {
  if (!std::isfinite(trial.t0) || !std::isfinite(trial.tE))
    throw ParameterError("trial times must be finite");
  if (!(trial.t0 <= trial.tE)) throw ParameterError("trial ends before it starts");
  double prev = trial.t0;
  bool first = true;
  for (double t : trial.spikes) {
    if (!std::isfinite(t)) throw ParameterError("non-finite spike time");
    if (first ? !(t >= prev) : !(t > prev))
      throw ParameterError("spike times must be strictly increasing within "
                           "[t0, tE]");
    prev = t;
    first = false;
  }
  if (prev > trial.tE) throw ParameterError("spike after trial end");
}

void InferenceMode::validate() const {
  if (use_absorption && bc != BoundaryCondition::Absorbing)
    throw ParameterError("the absorption operator requires absorbing boundaries");
}

std::string InferenceMode::name() const {
  if (*this == full()) return "full";
  if (*this == no_absorption_op()) return "no-absorption-op";
  if (*this == reflecting_bc()) return "reflecting-bc";
  if (*this == equilibrium_p0()) return "equilibrium-p0";
  return "custom";
}

InferenceMode mode_from_string(const std::string& name) {
  if (name == "full") return InferenceMode::full();
  if (name == "no-absorption-op") return InferenceMode::no_absorption_op();
  if (name == "reflecting-bc") return InferenceMode::reflecting_bc();
  if (name == "equilibrium-p0") return InferenceMode::equilibrium_p0();
  throw ParameterError("unknown inference mode '" + name + "'");
}

ChainOperators ChainOperators::build(const OperatorBasis& basis,
                                     const LatentModel& model,
                                     const InferenceMode& mode) {
  mode.validate();
  if (mode.bc != basis.bc)
    throw LogicError("basis boundary condition does not match the mode");
  ChainOperators ops;
  ops.mode = mode;
  ops.lambda = basis.lambda;
  ops.emission = emission_matrix(basis, model);
  if (mode.use_absorption) ops.absorption = absorption_matrix(basis);
  ops.initial_density =
      mode.use_p0 ? model.p0 : equilibrium_density(model.phi);
  ops.rho0 = initial_vector(basis, model, ops.initial_density);
  ops.beta_end = terminal_vector(basis, model);
  return ops;
}

std::vector<double> intervals(const Trial& trial) {
  std::vector<double> dts;
  dts.reserve(trial.spikes.size() + 1);
  double prev = trial.t0;
  for (double t : trial.spikes) {
    dts.push_back(t - prev);
    prev = t;
  }
  dts.push_back(trial.tE - prev);
  return dts;
}

namespace {

void check_finite_positive(double v, const char* what) {
  if (!std::isfinite(v) || !(v > 0.0))
    throw NumericalError(std::string("likelihood chain: ") + what + " = " +
                         std::to_string(v));
}

// Runs the scaled forward pass; fills alphas/scales when a cache is given.
double forward(const ChainOperators& ops, const std::vector<double>& dts,
               ChainCache* cache) {
  const std::size_t n_spikes = dts.size() - 1;
  Eigen::VectorXd a = ops.rho0;
  Eigen::VectorXd tmp(a.size());
  double s = a.lpNorm<1>();
  check_finite_positive(s, "initial norm");
  a /= s;
  double loglik = std::log(s);
  if (cache) {
    cache->alphas.push_back(a);
    cache->scales.push_back(s);
  }
  for (std::size_t k = 1; k <= n_spikes + 1; ++k) {
    const Eigen::ArrayXd t = (-ops.lambda.array() * dts[k - 1]).exp();
    if (k <= n_spikes) {
      tmp = (a.array() * t).matrix();
      a.noalias() = ops.emission * tmp;
    } else {
      a = (a.array() * t).matrix();
    }
    s = a.lpNorm<1>();
    check_finite_positive(s, "forward norm");
    a /= s;
    loglik += std::log(s);
    if (cache) {
      cache->alphas.push_back(a);
      cache->scales.push_back(s);
    }
  }
  if (ops.mode.use_absorption) {
    tmp.noalias() = ops.absorption * a;
    a = tmp;
    s = a.lpNorm<1>();
    check_finite_positive(s, "absorption norm");
    a /= s;
    loglik += std::log(s);
    if (cache) {
      cache->alphas.push_back(a);
      cache->scales.push_back(s);
    }
  }
  const double d = a.dot(ops.beta_end);
  check_finite_positive(d, "terminal product");
  if (cache) cache->scales.push_back(d);
  return loglik + std::log(d);
}

}  // namespace

TrialLikelihood trial_loglik(const ChainOperators& ops, const Trial& trial) {
  validate_trial(trial);
  TrialLikelihood out;
  ChainCache& c = out.cache;
  c.dts = intervals(trial);
  c.absorption = ops.mode.use_absorption;
  const std::size_t n_spikes = trial.spikes.size();
  const std::size_t steps = n_spikes + 1 + (c.absorption ? 1 : 0);
  c.alphas.reserve(steps + 1);
  c.scales.reserve(steps + 2);
  out.loglik = forward(ops, c.dts, &c);
  c.loglik = out.loglik;

  // Backward pass reusing the forward scales: betas[k-1] = M_k betas[k] / s_k.
  c.betas.assign(steps + 1, Eigen::VectorXd());
  c.right.assign(n_spikes + 1, Eigen::VectorXd());
  Eigen::VectorXd b = ops.beta_end / c.scales[steps + 1];
  c.betas[steps] = b;
  std::size_t k = steps;
  if (c.absorption) {
    b = ops.absorption * c.betas[k] / c.scales[k];
    --k;
    c.betas[k] = b;
  }
  // k == n_spikes + 1 here.
  for (; k >= 1; --k) {
    const Eigen::ArrayXd t = (-ops.lambda.array() * c.dts[k - 1]).exp();
    Eigen::VectorXd r = (k <= n_spikes) ? Eigen::VectorXd(ops.emission * c.betas[k])
                                        : c.betas[k];
    c.betas[k - 1] = (r.array() * t).matrix() / c.scales[k];
    c.right[k - 1] = std::move(r);
  }
  return out;
}

TrialLikelihood trial_loglik(const OperatorBasis& basis,
                             const LatentModel& model, const Trial& trial,
                             const InferenceMode& mode) {
  return trial_loglik(ChainOperators::build(basis, model, mode), trial);
}

double trial_loglik_value(const ChainOperators& ops, const Trial& trial) {
  validate_trial(trial);
  return forward(ops, intervals(trial), nullptr);
}

double trial_likelihood_unscaled(const ChainOperators& ops, const Trial& trial,
                                 bool right_to_left) {
  validate_trial(trial);
  const std::vector<double> dts = intervals(trial);
  const std::size_t n_spikes = trial.spikes.size();
  auto prop = [&](std::size_t k) {
    return Eigen::VectorXd((-ops.lambda.array() * dts[k - 1]).exp().matrix());
  };
  if (!right_to_left) {
    Eigen::RowVectorXd a = ops.rho0.transpose();
    for (std::size_t k = 1; k <= n_spikes; ++k)
      a = (a.array() * prop(k).transpose().array()).matrix() * ops.emission;
    a = (a.array() * prop(n_spikes + 1).transpose().array()).matrix();
    if (ops.mode.use_absorption) a = a * ops.absorption;
    return a.dot(ops.beta_end.transpose());
  }
  Eigen::VectorXd b = ops.beta_end;
  if (ops.mode.use_absorption) b = ops.absorption * b;
  b = (b.array() * prop(n_spikes + 1).array()).matrix();
  for (std::size_t k = n_spikes; k >= 1; --k)
    b = (prop(k).array() * (ops.emission * b).array()).matrix();
  return ops.rho0.dot(b);
}

double gamma_entry(double li, double lj, double dt) {
  const double delta = lj - li;
  const double x = delta * dt;
  const double ei = std::exp(-li * dt);
  if (std::abs(x) < 1e-7) return dt * ei * (1.0 - 0.5 * x);
  if (std::abs(x) < 1e-2) return -ei * std::expm1(-x) / delta;
  return (ei - std::exp(-lj * dt)) / delta;
}

Eigen::MatrixXd gamma_matrix(const Eigen::VectorXd& lambda, double dt) {
  if (!(dt >= 0.0)) throw ParameterError("gamma_matrix: negative interval");
  const Eigen::Index n = lambda.size();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    g(j, j) = dt * std::exp(-lambda[j] * dt);
    for (Eigen::Index i = 0; i < j; ++i) {
      // Evaluate from the smaller eigenvalue for a symmetric result.
      const double v = lambda[i] <= lambda[j]
                           ? gamma_entry(lambda[i], lambda[j], dt)
                           : gamma_entry(lambda[j], lambda[i], dt);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

Eigen::MatrixXd g_matrix(const ChainCache& cache,
                         const std::vector<Eigen::MatrixXd>& gammas,
                         const InferenceMode& mode) {
  if (mode.use_absorption != cache.absorption)
    throw LogicError("g_matrix: chain cache was built for another mode");
  const std::size_t n_prop = cache.dts.size();
  if (gammas.size() != n_prop || cache.right.size() != n_prop ||
      cache.alphas.size() < n_prop + 1)
    throw LogicError("g_matrix: cache and interval matrices disagree in length");
  const Eigen::Index nv = cache.alphas.front().size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nv, nv);
  for (std::size_t k = 1; k <= n_prop; ++k) {
    g.noalias() += (gammas[k - 1].array() *
                    (cache.alphas[k - 1] * cache.right[k - 1].transpose())
                        .array())
                       .matrix() /
                   cache.scales[k];
  }
  if (cache.absorption) {
    const std::size_t k = n_prop + 1;
    g.noalias() -=
        cache.alphas[k - 1] * cache.betas[k].transpose() / cache.scales[k];
  }
  return g;
}

Eigen::MatrixXd g_matrix(const ChainCache& cache,
                         const Eigen::VectorXd& lambda) {
  const std::size_t n_prop = cache.dts.size();
  if (cache.right.size() != n_prop || cache.alphas.size() < n_prop + 1)
    throw LogicError("g_matrix: incomplete chain cache");
  const Eigen::Index nv = lambda.size();
  if (cache.alphas.front().size() != nv)
    throw LogicError("g_matrix: cache does not match the eigenbasis");

  // inv_gap(i, j) = 1 / (l_j - l_i); entries with small |gap dt| are handled
  // by gamma_entry.
  Eigen::MatrixXd inv_gap(nv, nv);
  for (Eigen::Index j = 0; j < nv; ++j)
    for (Eigen::Index i = 0; i < nv; ++i)
      inv_gap(i, j) = i == j ? 0.0 : 1.0 / (lambda[j] - lambda[i]);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd e(nv);
  for (std::size_t k = 1; k <= n_prop; ++k) {
    const double dt = cache.dts[k - 1];
    const double inv_s = 1.0 / cache.scales[k];
    for (Eigen::Index i = 0; i < nv; ++i) e[i] = std::exp(-lambda[i] * dt);
    const Eigen::VectorXd& a = cache.alphas[k - 1];
    const Eigen::VectorXd& r = cache.right[k - 1];
    for (Eigen::Index j = 0; j < nv; ++j) {
      const double rj = r[j] * inv_s;
      const double lj = lambda[j];
      const double ej = e[j];
      double* gcol = g.col(j).data();
      const double* igcol = inv_gap.col(j).data();
      for (Eigen::Index i = 0; i < nv; ++i) {
        double gamma;
        if (i == j) {
          gamma = dt * ej;
        } else if (std::abs((lj - lambda[i]) * dt) < 1e-2) {
          gamma = gamma_entry(lambda[i], lj, dt);
        } else {
          gamma = (e[i] - ej) * igcol[i];
        }
        gcol[i] += gamma * a[i] * rj;
      }
    }
  }
  if (cache.absorption) {
    const std::size_t k = n_prop + 1;
    g.noalias() -=
        cache.alphas[k - 1] * cache.betas[k].transpose() / cache.scales[k];
  }
  return g;
}

double dataset_loglik(const ChainOperators& ops,
                      const std::vector<Trial>& trials, unsigned workers) {
  std::vector<double> ll(trials.size(), 0.0);
  parallel_for(trials.size(), workers, [&](std::size_t i) {
    try {
      ll[i] = trial_loglik_value(ops, trials[i]);
    } catch (const ParameterError& e) {
      throw ParameterError("trial " + std::to_string(i) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("trial " + std::to_string(i) + ": " + e.what());
    }
  });
  double total = 0.0;
  for (double v : ll) total += v;
  return total;
}

double dataset_loglik(const OperatorBasis& basis, const LatentModel& model,
                      const std::vector<Trial>& trials,
                      const InferenceMode& mode, unsigned workers) {
  return dataset_loglik(ChainOperators::build(basis, model, mode), trials,
                        workers);
}

}  // namespace nslang
