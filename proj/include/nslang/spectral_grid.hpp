#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace nslang {

/// Spectral-element discretization of [x_begin, x_end] with Gauss-Legendre-
/// Lobatto nodes. Elements have uniform width and share their end nodes, so
/// the global node count is n_elements * (points_per_element - 1) + 1.
///
/// Immutable after construction.
class SpectralGrid {
 public:
  static std::shared_ptr<const SpectralGrid> build(int n_elements,
                                                   int points_per_element,
                                                   double x_begin,
                                                   double x_end);

  int n_elements() const { return n_elements_; }
  int points_per_element() const { return points_per_element_; }
  Eigen::Index size() const { return nodes_.size(); }
  double x_begin() const { return x_begin_; }
  double x_end() const { return x_end_; }

  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<double>& element_boundaries() const { return boundaries_; }

  /// Global differentiation matrix. Rows at shared element nodes average the
  /// one-sided derivatives of the two adjacent elements.
  const Eigen::MatrixXd& diff_matrix() const { return diff_; }
  /// Row i maps nodal values to the running integral from x_begin to node i.
  const Eigen::MatrixXd& antideriv_matrix() const { return antideriv_; }

  /// Reference GLL nodes and weights on [-1, 1].
  const Eigen::VectorXd& reference_nodes() const { return ref_nodes_; }
  const Eigen::VectorXd& reference_weights() const { return ref_weights_; }
  /// Element-local differentiation matrix in physical units (all elements
  /// have the same width).
  const Eigen::MatrixXd& element_diff() const { return element_diff_; }
  /// Element-local quadrature weights in physical units.
  const Eigen::VectorXd& element_weights() const { return element_weights_; }

  Eigen::Index global_index(int element, int local) const {
    return static_cast<Eigen::Index>(element) * (points_per_element_ - 1) +
           local;
  }

  /// Element containing x; points on a shared boundary go to the right
  /// element, x_end goes to the last element. x is clamped into the domain.
  int locate(double x) const;

  /// Evaluates the per-element Lagrange interpolant of nodal values at x.
  double interpolate(const Eigen::VectorXd& values, double x) const;

  bool same_layout(const SpectralGrid& other) const;

 private:
  SpectralGrid() = default;

  int n_elements_ = 0;
  int points_per_element_ = 0;
  double x_begin_ = 0.0;
  double x_end_ = 0.0;
  double element_width_ = 0.0;
  Eigen::VectorXd ref_nodes_;
  Eigen::VectorXd ref_weights_;
  Eigen::VectorXd bary_weights_;
  Eigen::MatrixXd element_diff_;
  Eigen::VectorXd element_weights_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
  std::vector<double> boundaries_;
  Eigen::MatrixXd diff_;
  Eigen::MatrixXd antideriv_;
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

/// A function sampled at the global nodes of a grid.
struct GridFunction {
  GridPtr grid;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(GridPtr g, Eigen::VectorXd v);

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
};

/// Samples fn at every node of the grid.
template <typename Fn>
GridFunction sample(const GridPtr& grid, Fn&& fn) {
  Eigen::VectorXd v(grid->size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = fn(grid->nodes()[i]);
  return GridFunction(grid, std::move(v));
}

GridFunction constant(const GridPtr& grid, double value);

double quadrature(const GridFunction& f);
GridFunction differentiate(const GridFunction& f);
GridFunction antiderivative(const GridFunction& f);

/// Throws ParameterError when f is not sampled on a grid of this layout.
void check_on_grid(const GridFunction& f, const SpectralGrid& grid);

/// GLL nodes and weights on [-1, 1] for n_points >= 2.
void gll_nodes_weights(int n_points, Eigen::VectorXd& nodes,
                       Eigen::VectorXd& weights);

}  // namespace nslang
