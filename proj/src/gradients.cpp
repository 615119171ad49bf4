#include "nslang/gradients.hpp"

#include <cmath>
#include <string>

#include "nslang/errors.hpp"
#include "nslang/parallel.hpp"

namespace nslang {

GradientParts GradientParts::zero(Eigen::Index nv) {
  GradientParts p;
  p.g = Eigen::MatrixXd::Zero(nv, nv);
  p.g_emission = Eigen::MatrixXd::Zero(nv, nv);
  p.g_absorption = Eigen::MatrixXd::Zero(nv, nv);
  p.beta0 = Eigen::VectorXd::Zero(nv);
  p.alpha_end = Eigen::VectorXd::Zero(nv);
  return p;
}

GradientParts& GradientParts::operator+=(const GradientParts& other) {
  g += other.g;
  g_emission += other.g_emission;
  g_absorption += other.g_absorption;
  beta0 += other.beta0;
  alpha_end += other.alpha_end;
  n_trials += other.n_trials;
  loglik += other.loglik;
  return *this;
}

GradientParts trial_gradient_parts(const OperatorBasis& basis,
                                   const InferenceMode& mode,
                                   const ChainCache& cache) {
  if (cache.alphas.empty() || cache.alphas.front().size() != basis.nv())
    throw LogicError("chain cache does not match the operator basis");
  if (cache.absorption != mode.use_absorption)
    throw LogicError("chain cache was built for another inference mode");
  GradientParts p;
  p.g = g_matrix(cache, basis.lambda);
  const Eigen::Index nv = basis.nv();
  const std::size_t n_spikes = cache.dts.size() - 1;
  p.g_emission = Eigen::MatrixXd::Zero(nv, nv);
  for (std::size_t k = 1; k <= n_spikes; ++k) {
    const Eigen::VectorXd ta =
        ((-basis.lambda.array() * cache.dts[k - 1]).exp() *
         cache.alphas[k - 1].array())
            .matrix() /
        cache.scales[k];
    p.g_emission.noalias() += ta * cache.betas[k].transpose();
  }
  p.g_absorption = Eigen::MatrixXd::Zero(nv, nv);
  if (cache.absorption) {
    const std::size_t k = n_spikes + 2;
    p.g_absorption.noalias() =
        cache.alphas[k - 1] * cache.betas[k].transpose() / cache.scales[k];
  }
  p.beta0 = cache.betas.front() / cache.scales.front();
  p.alpha_end = cache.alphas.back() / cache.scales.back();
  p.n_trials = 1.0;
  p.loglik = cache.loglik;
  return p;
}

namespace {

void check_parts(const OperatorBasis& basis, const LatentModel& model,
                 const GradientParts& parts) {
  const GridPtr& grid = model.phi.grid;
  if (basis.grid != grid && !grid->same_layout(*basis.grid))
    throw LogicError("basis and model live on different grids");
  if (parts.g.rows() != basis.nv() || parts.g_emission.rows() != basis.nv())
    throw LogicError("gradient parts do not match the operator basis");
}

void check_finite(const GradientBundle& out) {
  if (!out.grad_force.values.allFinite() || !out.grad_f0.values.allFinite() ||
      !std::isfinite(out.grad_d))
    throw NumericalError("non-finite gradient");
}

GridFunction f0_gradient(const LatentModel& model, const InferenceMode& mode,
                         const Eigen::ArrayXd& ehalf, const Eigen::ArrayXd& b0,
                         double n_trials) {
  const GridPtr& grid = model.phi.grid;
  if (!mode.use_p0) return constant(grid, 0.0);
  const Eigen::ArrayXd p0 = model.p0.values.array();
  return GridFunction(grid, grid->antideriv_matrix() *
                                (p0 * (n_trials - ehalf * b0)).matrix());
}

}  // namespace

GradientBundle functional_gradients(const OperatorBasis& basis,
                                    const LatentModel& model,
                                    const InferenceMode& mode,
                                    const GradientParts& parts) {
  check_parts(basis, model, parts);
  const GridPtr& grid = model.phi.grid;
  const Eigen::ArrayXd phi = model.phi.values.array();
  const Eigen::ArrayXd ehalf = (0.5 * phi).exp();
  const Eigen::ArrayXd emhalf = 1.0 / ehalf;
  const double d = model.diffusion;

  // Symmetric quadratic form sum_ij G_ij phi_i(x) phi_j(x) at every node.
  const Eigen::MatrixXd pg = basis.phi * parts.g;
  const Eigen::VectorXd quad = (pg.array() * basis.phi.array()).rowwise().sum();
  const Eigen::ArrayXd term1 =
      0.5 * d * (-phi).exp() * (grid->diff_matrix() * quad).array();

  const Eigen::ArrayXd b0 = (basis.q * parts.beta0).array();
  const Eigen::ArrayXd a_end = (basis.q * parts.alpha_end).array();
  Eigen::ArrayXd integrand;
  if (mode.use_p0) {
    integrand = 0.5 * (model.p0.values.array() * ehalf * b0 - a_end * emhalf);
  } else {
    const Eigen::ArrayXd peq = equilibrium_density(model.phi).values.array();
    integrand = parts.n_trials * peq - 0.5 * peq * ehalf * b0 -
                0.5 * a_end * emhalf;
  }
  GradientBundle out;
  out.loglik = parts.loglik;
  out.grad_force = GridFunction(
      grid, term1.matrix() + grid->antideriv_matrix() * integrand.matrix());

  out.grad_f0 = f0_gradient(model, mode, ehalf, b0, parts.n_trials);

  // Weak form: int e^{-phi} phi_i' phi_j' dx = (Q0H^T diag(lambda0) Q0H)_ij / D.
  const Eigen::MatrixXd stiff =
      basis.q0h.transpose() * basis.lambda0.asDiagonal() * basis.q0h / d;
  out.grad_d = -(parts.g.array() * stiff.array()).sum();

  check_finite(out);
  return out;
}
GradientBundle gradients_from_parts(const OperatorBasis& basis,
                                    const LatentModel& model,
                                    const InferenceMode& mode,
                                    const GradientParts& parts) {
  check_parts(basis, model, parts);
  if (basis.h0_y_full.rows() == 0)
    throw LogicError("operator basis lacks the complete H0 eigensystem");
  const SpectralGrid& grid = *model.phi.grid;
  const Eigen::Index nv = basis.nv();
  const Eigen::MatrixXd& u = basis.q0h;
  const Eigen::MatrixXd& yf = basis.h0_y_full;
  const Eigen::MatrixXd& s = basis.h0_s;
  const Eigen::MatrixXd y0 = yf.leftCols(nv);
  const double d = model.diffusion;

  const Eigen::ArrayXd phi = model.phi.values.array();
  const Eigen::ArrayXd ehalf = (0.5 * phi).exp();
  const Eigen::ArrayXd sqrt_w = basis.w.array().sqrt();
  const GridFunction density =
      mode.use_p0 ? model.p0 : equilibrium_density(model.phi);
  // Boundary vectors in orthonormal nodal coordinates: rho0 = U^T Y0^T r,
  // beta_end = U^T Y0^T b.
  const Eigen::VectorXd r = (sqrt_w * density.values.array() * ehalf).matrix();
  const Eigen::VectorXd b = (sqrt_w / ehalf).matrix();

  // Sensitivities in the H0 eigenbasis.
  const Eigen::MatrixXd g_prop = parts.g + parts.g_absorption;
  const Eigen::MatrixXd g0 = u * g_prop * u.transpose();
  const Eigen::MatrixXd ge0 = u * parts.g_emission * u.transpose();
  const Eigen::MatrixXd ga0 = u * parts.g_absorption * u.transpose();
  const Eigen::VectorXd b0 = y0 * (u * parts.beta0);
  const Eigen::VectorXd a_end = y0 * (u * parts.alpha_end);

  // d log L = <gy, dY0> + <glam, dlambda0> for the truncated H0 eigenpairs.
  const Eigen::MatrixXd p = ge0 - g0;
  Eigen::MatrixXd gy = model.rate.values.asDiagonal() *
                       (y0 * (p + p.transpose()));
  gy.noalias() += r * (u * parts.beta0).transpose();
  gy.noalias() += b * (u * parts.alpha_end).transpose();
  const Eigen::VectorXd glam = (ga0 - g0).diagonal();

  // First-order eigenpair perturbation over the complete H0 spectrum maps
  // these to d log L = <X, dS>.
  const Eigen::VectorXd& lf = basis.h0_lambda_full;
  Eigen::MatrixXd c = yf.transpose() * gy;
  for (Eigen::Index i = 0; i < nv; ++i) {
    for (Eigen::Index m = 0; m < c.rows(); ++m)
      c(m, i) = m == i ? glam[i] : c(m, i) / (lf[i] - lf[m]);
  }
  Eigen::MatrixXd x = yf * c * y0.transpose();
  x = 0.5 * (x + x.transpose()).eval();

  // S_ab = m_a K_ab m_b with m = (w e^{-phi})^{-1/2} and
  // K = D sum_e De^T diag(w_e e^{-phi}) De.
  Eigen::VectorXd gphi = (x.array() * s.array()).rowwise().sum().matrix();
  const Eigen::ArrayXd weight = (-(phi - phi.minCoeff())).exp();
  const Eigen::ArrayXd msc = (basis.w.array() * weight).rsqrt();
  const int np = grid.points_per_element();
  const Eigen::MatrixXd& de = grid.element_diff();
  const Eigen::VectorXd& we = grid.element_weights();
  for (int e = 0; e < grid.n_elements(); ++e) {
    const Eigen::Index first = grid.global_index(e, 0);
    const Eigen::VectorXd me = msc.segment(first, np).matrix();
    const Eigen::MatrixXd ze =
        me.asDiagonal() * x.block(first, first, np, np) * me.asDiagonal();
    const Eigen::MatrixXd dzd = de * ze * de.transpose();
    for (int q = 0; q < np; ++q)
      gphi[first + q] -= we[q] * d * weight[first + q] * dzd(q, q);
  }

  // Direct dependence of the boundary vectors on phi.
  const Eigen::ArrayXd rb0 = r.array() * b0.array();
  if (mode.use_p0) {
    gphi += (0.5 * rb0).matrix();
  } else {
    const Eigen::ArrayXd peq = density.values.array();
    gphi += (-0.5 * rb0 + basis.w.array() * peq * rb0.sum()).matrix();
  }
  gphi -= (0.5 * b.array() * a_end.array()).matrix();

  // phi = -int F + C and log L does not depend on C.
  GradientBundle out;
  out.loglik = parts.loglik;
  out.grad_force = GridFunction(
      model.phi.grid,
      (-(grid.antideriv_matrix().transpose() * gphi).array() /
       basis.w.array())
          .matrix());
  out.grad_d = (x.array() * s.array()).sum() / d;
  out.grad_f0 = f0_gradient(model, mode, ehalf, (basis.q * parts.beta0).array(),
                            parts.n_trials);
  check_finite(out);
  return out;
}

GradientBundle trial_gradients(const OperatorBasis& basis,
                               const LatentModel& model, const Trial& trial,
                               const InferenceMode& mode,
                               const ChainCache& cache) {
  if (cache.dts.size() != trial.spikes.size() + 1)
    throw LogicError("chain cache does not belong to this trial");
  return gradients_from_parts(basis, model, mode,
                              trial_gradient_parts(basis, mode, cache));
}

GradientBundle dataset_gradients(const OperatorBasis& basis,
                                 const LatentModel& model,
                                 const ChainOperators& ops,
                                 const std::vector<Trial>& trials,
                                 unsigned workers) {
  std::vector<GradientParts> slots(trials.size());
  parallel_for(trials.size(), workers, [&](std::size_t i) {
    try {
      const TrialLikelihood tl = trial_loglik(ops, trials[i]);
      slots[i] = trial_gradient_parts(basis, ops.mode, tl.cache);
    } catch (const ParameterError& e) {
      throw ParameterError("trial " + std::to_string(i) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("trial " + std::to_string(i) + ": " + e.what());
    }
  });
  GradientParts total = GradientParts::zero(basis.nv());
  for (const GradientParts& p : slots) total += p;
  return gradients_from_parts(basis, model, ops.mode, total);
}

GradientBundle dataset_gradients(const OperatorBasis& basis,
                                 const LatentModel& model,
                                 const std::vector<Trial>& trials,
                                 const InferenceMode& mode, unsigned workers) {
  return dataset_gradients(basis, model,
                           ChainOperators::build(basis, model, mode), trials,
                           workers);
}

}  // namespace nslang
