#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nslang/model.hpp"
#include "nslang/operators.hpp"

namespace nslang {

/// One observation sequence: trial start, ordered spike times, trial end (s).
struct Trial {
  double t0 = 0.0;
  std::vector<double> spikes;
  double tE = 0.0;

  double duration() const { return tE - t0; }
};

/// Throws ParameterError unless t0 <= spikes... <= tE with strictly
/// increasing spikes.
void validate_trial(const Trial& trial);

/// Which non-stationary components enter the likelihood.
struct InferenceMode {
  bool use_p0 = true;  ///< false: p0 is replaced by p_eq of the current phi
  BoundaryCondition bc = BoundaryCondition::Absorbing;
  bool use_absorption = true;

  static InferenceMode full() { return {true, BoundaryCondition::Absorbing, true}; }
  static InferenceMode no_absorption_op() {
    return {true, BoundaryCondition::Absorbing, false};
  }
  static InferenceMode reflecting_bc() {
    return {true, BoundaryCondition::Reflecting, false};
  }
  static InferenceMode equilibrium_p0() {
    return {false, BoundaryCondition::Reflecting, false};
  }

  /// Throws ParameterError when absorption is requested without absorbing
  /// boundaries.
  void validate() const;
  /// Name of the matching preset ("full", ...) or "custom".
  std::string name() const;

  bool operator==(const InferenceMode&) const = default;
};

/// "full", "no-absorption-op", "reflecting-bc", "equilibrium-p0".
InferenceMode mode_from_string(const std::string& name);

/// Basis-level quantities shared by every trial of a dataset.
struct ChainOperators {
  InferenceMode mode;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd emission;
  Eigen::MatrixXd absorption;  ///< empty unless mode.use_absorption
  Eigen::VectorXd rho0;
  Eigen::VectorXd beta_end;
  GridFunction initial_density;  ///< p0 or p_eq, per mode.use_p0

  static ChainOperators build(const OperatorBasis& basis,
                              const LatentModel& model,
                              const InferenceMode& mode);
};

/// Scaled forward/backward messages of one trial.
///
/// Steps k = 1..K apply T_k E (k <= N), T_{N+1} (k = N+1) and, with the
/// absorption operator, A (k = N+2). alphas[k] and betas[k] are normalized
/// so that alphas[k].dot(betas[k]) = 1; scales[k] is the 1-norm removed from
/// the forward message at step k and scales[K+1] = alphas[K].dot(beta_end).
/// log L = sum(log(scales)).
struct ChainCache {
  std::vector<double> dts;               ///< dt_1..dt_{N+1}
  std::vector<Eigen::VectorXd> alphas;   ///< K + 1 vectors
  std::vector<Eigen::VectorXd> betas;    ///< K + 1 vectors
  /// Vector right of the propagator T_k, scaled like betas[k]: E betas[k]
  /// for k <= N and betas[N+1] for k = N+1 (stored at index k - 1).
  std::vector<Eigen::VectorXd> right;
  std::vector<double> scales;            ///< K + 2 entries
  bool absorption = false;
  double loglik = 0.0;

  std::size_t steps() const { return alphas.size() - 1; }
};

struct TrialLikelihood {
  double loglik = 0.0;
  ChainCache cache;
};

TrialLikelihood trial_loglik(const ChainOperators& ops, const Trial& trial);
TrialLikelihood trial_loglik(const OperatorBasis& basis,
                             const LatentModel& model, const Trial& trial,
                             const InferenceMode& mode);

/// Forward pass only; no cache is kept.
double trial_loglik_value(const ChainOperators& ops, const Trial& trial);

/// Unscaled chain product L (not log), evaluated left-to-right or
/// right-to-left. Only meaningful for short trials where L is representable.
double trial_likelihood_unscaled(const ChainOperators& ops, const Trial& trial,
                                 bool right_to_left = false);

/// Interval lengths dt_1 = t_1 - t0, ..., dt_{N+1} = tE - t_N.
std::vector<double> intervals(const Trial& trial);

/// Single entry of the interval matrix Gamma(dt) for eigenvalues li, lj.
double gamma_entry(double li, double lj, double dt);

/// Gamma_ij = int_0^dt e^{-(dt-u) l_i} e^{-u l_j} du.
Eigen::MatrixXd gamma_matrix(const Eigen::VectorXd& lambda, double dt);

/// G divided by the trial likelihood, G_ij / L with
/// G_ij = sum_tau Gamma^{tau+1}_ij alpha_{tau,i} beta_{tau+1,j}; the
/// absorption step contributes with Gamma = -I. `gammas` holds Gamma^1 ...
/// Gamma^{N+1}.
Eigen::MatrixXd g_matrix(const ChainCache& cache,
                         const std::vector<Eigen::MatrixXd>& gammas,
                         const InferenceMode& mode);

/// Same quantity without materializing the Gamma matrices.
Eigen::MatrixXd g_matrix(const ChainCache& cache, const Eigen::VectorXd& lambda);

/// Sum of per-trial log-likelihoods in trial order.
double dataset_loglik(const ChainOperators& ops,
                      const std::vector<Trial>& trials, unsigned workers = 1);
double dataset_loglik(const OperatorBasis& basis, const LatentModel& model,
                      const std::vector<Trial>& trials,
                      const InferenceMode& mode, unsigned workers = 1);

}  // namespace nslang
