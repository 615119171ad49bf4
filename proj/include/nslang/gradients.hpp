#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nslang/likelihood.hpp"
#include "nslang/model.hpp"
#include "nslang/operators.hpp"

namespace nslang {

/// Derivatives of log L (each trial's derivative divided by its likelihood).
struct GradientBundle {
  GridFunction grad_force;  ///< delta log L / delta F at nodes
  GridFunction grad_f0;     ///< delta log L / delta F0 at nodes
  double grad_d = 0.0;      ///< d log L / d D
  double loglik = 0.0;
};

/// Eigenbasis quantities of one or more trials, all divided by the trial
/// likelihood. They enter the gradients linearly, so trials can be summed
/// before the grid-space evaluation.
struct GradientParts {
  Eigen::MatrixXd g;          ///< sum of G / L
  /// Sensitivity of log L to the emission matrix, sum_k (T_k alpha_{k-1})
  /// beta_k^T / s_k over spike steps.
  Eigen::MatrixXd g_emission;
  /// Sensitivity to the absorption matrix (zero without absorption).
  Eigen::MatrixXd g_absorption;
  Eigen::VectorXd beta0;      ///< sum of beta_0 / L
  Eigen::VectorXd alpha_end;  ///< sum of alpha_K / L
  double n_trials = 0.0;
  double loglik = 0.0;

  static GradientParts zero(Eigen::Index nv);
  GradientParts& operator+=(const GradientParts& other);
};

GradientParts trial_gradient_parts(const OperatorBasis& basis,
                                   const InferenceMode& mode,
                                   const ChainCache& cache);

/// Grid-space gradients for the accumulated parts.
///
/// grad_force and grad_d are the exact derivatives of the discrete log L
/// (the spectral chain as actually evaluated), obtained by an adjoint pass
/// through both eigenproblems; grad_force is reported as a density, so that
/// perturbing F at node k by eps changes log L by eps * w_k * grad_force[k].
/// grad_f0 uses the closed form int_{-1}^x p0 (n - e^{phi/2} beta_0 / L) ds,
/// which vanishes at x_end.
GradientBundle gradients_from_parts(const OperatorBasis& basis,
                                    const LatentModel& model,
                                    const InferenceMode& mode,
                                    const GradientParts& parts);

/// Continuous-form evaluation of the variational derivatives on the grid:
/// (D/2) e^{-phi} d/dx sum_ij G_ij phi_i phi_j plus the boundary-vector
/// antiderivative for F, and -sum_ij G_ij int e^{-phi} phi_i' phi_j' for D.
/// Agrees with gradients_from_parts up to discretization and truncation error.
GradientBundle functional_gradients(const OperatorBasis& basis,
                                    const LatentModel& model,
                                    const InferenceMode& mode,
                                    const GradientParts& parts);

/// Gradient of one trial from its chain cache.
GradientBundle trial_gradients(const OperatorBasis& basis,
                               const LatentModel& model, const Trial& trial,
                               const InferenceMode& mode,
                               const ChainCache& cache);

/// Sum over trials of the per-trial log-likelihood gradients.
GradientBundle dataset_gradients(const OperatorBasis& basis,
                                 const LatentModel& model,
                                 const std::vector<Trial>& trials,
                                 const InferenceMode& mode,
                                 unsigned workers = 1);
GradientBundle dataset_gradients(const OperatorBasis& basis,
                                 const LatentModel& model,
                                 const ChainOperators& ops,
                                 const std::vector<Trial>& trials,
                                 unsigned workers = 1);

}  // namespace nslang
