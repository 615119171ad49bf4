#pragma once

#include <cstddef>
#include "json.hpp"
#include <string>

#include "nslang/spectral_grid.hpp"

namespace nslang {

/// Latent Langevin model dx/dt = D F(x) + sqrt(2D) xi(t) with initial density
/// p0 and Poisson firing-rate function f(x).
///
/// The optimized quantities are the force F and F0 = p0'/p0; phi and p0 are
/// always derived from them (or normalized copies of user input), so that
/// quadrature(exp(-phi)) = 1 and quadrature(p0) = 1.
struct LatentModel {
  GridFunction phi;
  GridFunction force;
  GridFunction p0;
  GridFunction f0;
  double diffusion = 1.0;
  GridFunction rate;

  const GridPtr& grid() const { return phi.grid; }

  /// phi from potential_from_force(force), p0 from density_from_f0(f0).
  static LatentModel from_force(GridFunction force, GridFunction f0,
                                double diffusion, GridFunction rate);

  /// Normalizes phi and p0 and derives force = -phi', f0 = p0'/p0.
  static LatentModel from_potential(GridFunction phi, GridFunction p0,
                                    double diffusion, GridFunction rate);

  /// Throws ParameterError when an invariant is violated (sizes, D <= 0,
  /// negative rate or density, non-finite values).
  void validate() const;
};

/// Lower bound applied to nonpositive density values before taking logs.
inline constexpr double kDensityFloor = 1e-12;

/// Phi(x) = -int_{x_begin}^x F + C with C such that quadrature(exp(-Phi)) = 1.
GridFunction potential_from_force(const GridFunction& force);

/// Shifts phi by the constant that makes quadrature(exp(-phi)) = 1.
GridFunction normalize_potential(const GridFunction& phi);

/// p0 = exp(int F0) / quadrature(exp(int F0)).
GridFunction density_from_f0(const GridFunction& f0);

struct F0FromDensity {
  GridFunction f0;
  /// Number of nonpositive entries that were raised to kDensityFloor.
  std::size_t clamped_nodes = 0;
};

/// F0 = d/dx ln p0.
F0FromDensity f0_from_density(const GridFunction& p0);

/// exp(-phi) / quadrature(exp(-phi)).
GridFunction equilibrium_density(const GridFunction& phi);

/// max(50 x + 60, 0) Hz.
GridFunction default_rate(const GridPtr& grid);

nlohmann::json model_to_json(const LatentModel& model);
/// Rebuilds the grid from the stored layout unless `grid` is given, in which
/// case the layout must match.
LatentModel model_from_json(const nlohmann::json& doc, GridPtr grid = nullptr);

void save_model(const LatentModel& model, const std::string& path);
LatentModel load_model(const std::string& path, GridPtr grid = nullptr);

}  // namespace nslang
