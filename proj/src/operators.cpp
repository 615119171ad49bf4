#include "nslang/operators.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "nslang/errors.hpp"

namespace nslang {

std::string to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Absorbing ? "absorbing" : "reflecting";
}

BoundaryCondition boundary_from_string(const std::string& name) {
  if (name == "absorbing") return BoundaryCondition::Absorbing;
  if (name == "reflecting") return BoundaryCondition::Reflecting;
  throw ParameterError("unknown boundary condition '" + name + "'");
}

namespace {

// First component of clearly nonzero magnitude is made positive.
void fix_signs(Eigen::MatrixXd& vecs) {
  for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
    const double tol = 1e-8 * vecs.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
      if (std::abs(vecs(i, j)) > tol) {
        if (vecs(i, j) < 0.0) vecs.col(j) = -vecs.col(j);
        break;
      }
    }
  }
}

}  // namespace

H0Spectrum build_h0(const LatentModel& model, BoundaryCondition bc, int nv) {
  model.validate();
  const SpectralGrid& g = *model.grid();
  const Eigen::Index n = g.size();
  const Eigen::Index first_dof = bc == BoundaryCondition::Absorbing ? 1 : 0;
  const Eigen::Index ndof = n - 2 * first_dof;
  if (nv < 1 || nv > ndof)
    throw ParameterError("nv = " + std::to_string(nv) + " outside [1, " +
                         std::to_string(ndof) + "]");

  // The weight e^{-phi} enters K and M alike, so any constant factor cancels;
  // scale by the minimum of phi to keep it O(1).
  const Eigen::ArrayXd weight =
      (-(model.phi.values.array() - model.phi.values.minCoeff())).exp();

  const int np = g.points_per_element();
  const Eigen::MatrixXd& de = g.element_diff();
  const Eigen::VectorXd& we = g.element_weights();
  Eigen::MatrixXd stiff = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < g.n_elements(); ++e) {
    const Eigen::Index first = g.global_index(e, 0);
    Eigen::VectorXd c(np);
    for (int q = 0; q < np; ++q)
      c[q] = we[q] * model.diffusion * weight[first + q];
    stiff.block(first, first, np, np).noalias() +=
        de.transpose() * c.asDiagonal() * de;
  }

  // M = W e^{-phi} is diagonal: S = M^{-1/2} K M^{-1/2}.
  const Eigen::ArrayXd mass = g.weights().array() * weight;
  const Eigen::ArrayXd inv_sqrt_mass = mass.rsqrt();
  Eigen::MatrixXd s = stiff.block(first_dof, first_dof, ndof, ndof);
  const Eigen::ArrayXd scale = inv_sqrt_mass.segment(first_dof, ndof);
  s = scale.matrix().asDiagonal() * s * scale.matrix().asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
  if (solver.info() != Eigen::Success)
    throw NumericalError("H0 eigen-solve failed (N = " + std::to_string(ndof) +
                         ", D = " + std::to_string(model.diffusion) + ")");

  H0Spectrum out;
  out.bc = bc;
  out.s = Eigen::MatrixXd::Zero(n, n);
  out.s.block(first_dof, first_dof, ndof, ndof) = s;
  out.lambda0_full = solver.eigenvalues();
  out.y_full = Eigen::MatrixXd::Zero(n, ndof);
  out.y_full.middleRows(first_dof, ndof) = solver.eigenvectors();
  fix_signs(out.y_full);
  const Eigen::MatrixXd y = out.y_full.leftCols(nv);
  out.lambda0 = solver.eigenvalues().head(nv);
  // psi0 = W^{-1/2} y gives psi0^T W psi0 = y^T y = I.
  const Eigen::ArrayXd inv_sqrt_w = g.weights().array().rsqrt();
  out.psi0 = inv_sqrt_w.matrix().asDiagonal() * y;
  out.phi0 = (0.5 * model.phi.values.array()).exp().matrix().asDiagonal() *
             out.psi0;
  return out;
}

OperatorBasis build_h(const H0Spectrum& h0, const LatentModel& model) {
  if ((model.rate.values.array() < 0.0).any())
    throw ParameterError("firing rate must be nonnegative");
  const SpectralGrid& g = *model.grid();
  const Eigen::VectorXd fw = g.weights().cwiseProduct(model.rate.values);

  OperatorBasis b;
  b.bc = h0.bc;
  b.grid = model.grid();
  b.w = g.weights();
  b.lambda0 = h0.lambda0;
  b.phi0 = h0.phi0;
  b.h0_s = h0.s;
  b.h0_lambda_full = h0.lambda0_full;
  b.h0_y_full = h0.y_full;
  b.emission_h0 = h0.psi0.transpose() * fw.asDiagonal() * h0.psi0;
  b.emission_h0 = 0.5 * (b.emission_h0 + b.emission_h0.transpose()).eval();

  Eigen::MatrixXd h = b.emission_h0;
  h.diagonal() += h0.lambda0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw NumericalError("H eigen-solve failed (nv = " +
                         std::to_string(h.rows()) + ")");
  b.lambda = solver.eigenvalues();
  b.q0h = solver.eigenvectors();
  fix_signs(b.q0h);
  b.q = h0.psi0 * b.q0h;
  b.phi = h0.phi0 * b.q0h;
  return b;
}

OperatorBasis build_basis(const LatentModel& model, BoundaryCondition bc,
                          int nv) {
  return build_h(build_h0(model, bc, nv), model);
}

Eigen::DiagonalMatrix<double, Eigen::Dynamic> propagator(
    const OperatorBasis& basis, double dt) {
  if (!(dt >= 0.0)) throw ParameterError("propagator: negative time step");
  return Eigen::DiagonalMatrix<double, Eigen::Dynamic>(
      (-basis.lambda.array() * dt).exp().matrix());
}

Eigen::MatrixXd emission_matrix(const OperatorBasis& basis,
                                const LatentModel& model) {
  check_on_grid(model.rate, *basis.grid);
  Eigen::MatrixXd e = basis.q.transpose() *
                      basis.w.cwiseProduct(model.rate.values).asDiagonal() *
                      basis.q;
  return 0.5 * (e + e.transpose());
}

Eigen::MatrixXd absorption_matrix(const OperatorBasis& basis) {
  if (basis.bc != BoundaryCondition::Absorbing)
    throw LogicError(
        "absorption operator is undefined for reflecting boundaries");
  Eigen::MatrixXd a =
      basis.q0h.transpose() * basis.lambda0.asDiagonal() * basis.q0h;
  return 0.5 * (a + a.transpose());
}

Eigen::VectorXd initial_vector(const OperatorBasis& basis,
                               const LatentModel& model,
                               const GridFunction& density) {
  check_on_grid(density, *basis.grid);
  const Eigen::VectorXd scaled =
      density.values.cwiseProduct(
          (0.5 * model.phi.values.array()).exp().matrix());
  return basis.q.transpose() * basis.w.cwiseProduct(scaled);
}

Eigen::VectorXd initial_vector(const OperatorBasis& basis,
                               const LatentModel& model) {
  return initial_vector(basis, model, model.p0);
}

Eigen::VectorXd terminal_vector(const OperatorBasis& basis,
                                const LatentModel& model) {
  const Eigen::VectorXd e = (-0.5 * model.phi.values.array()).exp().matrix();
  return basis.q.transpose() * basis.w.cwiseProduct(e);
}

}  // namespace nslang
