#pragma once

#include <Eigen/Dense>
#include <string>

#include "nslang/model.hpp"
#include "nslang/spectral_grid.hpp"

namespace nslang {

enum class BoundaryCondition { Reflecting, Absorbing };

std::string to_string(BoundaryCondition bc);
BoundaryCondition boundary_from_string(const std::string& name);

/// Lowest eigenpairs of the drift-diffusion operator H0 in Hermitian form.
struct H0Spectrum {
  BoundaryCondition bc = BoundaryCondition::Absorbing;
  Eigen::VectorXd lambda0;  ///< ascending, 1/time
  Eigen::MatrixXd psi0;     ///< N x nv, psi0^T W psi0 = I
  Eigen::MatrixXd phi0;     ///< N x nv, phi0 = exp(phi/2) psi0
  /// Symmetric reduction S = M^{-1/2} K M^{-1/2} embedded in N x N (rows and
  /// columns of Dirichlet nodes are zero) and its complete eigensystem.
  Eigen::MatrixXd s;
  Eigen::VectorXd lambda0_full;
  Eigen::MatrixXd y_full;   ///< N x ndof, orthonormal; psi0 = W^{-1/2} y
};

/// Solves -(D e^{-phi} u')' = lambda e^{-phi} u in weak SEM form. Dirichlet
/// nodes are removed for absorbing boundaries; reflecting boundaries use the
/// natural (Neumann) condition. Returns the nv smallest eigenpairs.
H0Spectrum build_h0(const LatentModel& model, BoundaryCondition bc, int nv);

/// Truncated eigenbasis of H = H0 + f(x).
struct OperatorBasis {
  BoundaryCondition bc = BoundaryCondition::Absorbing;
  GridPtr grid;
  Eigen::VectorXd lambda0;  ///< eigenvalues of H0 (nv)
  Eigen::MatrixXd phi0;     ///< scaled H0 eigenfunctions (N x nv)
  Eigen::VectorXd lambda;   ///< eigenvalues of H, ascending (nv)
  Eigen::MatrixXd q;        ///< Q(i, j) = Psi_j(x_i) (N x nv)
  Eigen::MatrixXd phi;      ///< scaled eigenfunctions Psi_j e^{phi/2} (N x nv)
  Eigen::MatrixXd q0h;      ///< columns are H eigenvectors in the H0 basis
  Eigen::MatrixXd emission_h0;  ///< psi0^T W diag(f) psi0
  Eigen::VectorXd w;        ///< quadrature weights, W = diag(w)
  /// Complete H0 system, used by the discrete adjoint in the gradients.
  Eigen::MatrixXd h0_s;
  Eigen::VectorXd h0_lambda_full;
  Eigen::MatrixXd h0_y_full;

  Eigen::Index nv() const { return lambda.size(); }
};

/// Diagonalizes diag(lambda0) + psi0^T W diag(f) psi0.
OperatorBasis build_h(const H0Spectrum& h0, const LatentModel& model);

/// build_h0 followed by build_h.
OperatorBasis build_basis(const LatentModel& model, BoundaryCondition bc,
                          int nv);

/// T = diag(exp(-lambda dt)).
Eigen::DiagonalMatrix<double, Eigen::Dynamic> propagator(
    const OperatorBasis& basis, double dt);

/// E = Q^T W diag(f) Q.
Eigen::MatrixXd emission_matrix(const OperatorBasis& basis,
                                const LatentModel& model);

/// A = Q0H^T diag(lambda0) Q0H, i.e. H0 expressed in the H eigenbasis.
/// Throws LogicError for reflecting boundaries.
Eigen::MatrixXd absorption_matrix(const OperatorBasis& basis);

/// rho0 = Q^T W (density * e^{phi/2}).
Eigen::VectorXd initial_vector(const OperatorBasis& basis,
                               const LatentModel& model,
                               const GridFunction& density);
/// Same with density = model.p0.
Eigen::VectorXd initial_vector(const OperatorBasis& basis,
                               const LatentModel& model);

/// beta_{N+2} = Q^T W e^{-phi/2}.
Eigen::VectorXd terminal_vector(const OperatorBasis& basis,
                                const LatentModel& model);

}  // namespace nslang
