#include "nslang/spectral_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nslang/errors.hpp"

namespace nslang {

namespace {

// Legendre polynomials P_0..P_degree at x, by the three-term recurrence.
Eigen::VectorXd legendre_all(int degree, double x) {
  Eigen::VectorXd p(degree + 2);
  p[0] = 1.0;
  p[1] = x;
  for (int m = 1; m <= degree; ++m) {
    p[m + 1] = ((2.0 * m + 1.0) * x * p[m] - m * p[m - 1]) / (m + 1.0);
  }
  return p;
}

}  // namespace

void gll_nodes_weights(int n_points, Eigen::VectorXd& nodes,
                       Eigen::VectorXd& weights) {
  if (n_points < 2) throw ParameterError("GLL rule needs at least 2 points");
  const int n = n_points - 1;
  nodes.resize(n_points);
  weights.resize(n_points);
  // Newton iteration on (1 - x^2) P_n'(x) written through the Legendre
  // recurrence; Chebyshev-Gauss-Lobatto points as starting guesses.
  for (int k = 0; k <= n; ++k) {
    double x = -std::cos(std::numbers::pi * k / n);
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd p = legendre_all(n, x);
      const double dx = (x * p[n] - p[n - 1]) / ((n + 1) * p[n]);
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[k] = x;
  }
  nodes[0] = -1.0;
  nodes[n] = 1.0;
  for (int k = 0; k <= n; ++k) {
    const double pn = legendre_all(n, nodes[k])[n];
    weights[k] = 2.0 / (n * (n + 1.0) * pn * pn);
  }
  // Enforce exact antisymmetry of the node set.
  for (int k = 0; k <= n / 2; ++k) {
    const double x = 0.5 * (nodes[n - k] - nodes[k]);
    const double w = 0.5 * (weights[n - k] + weights[k]);
    nodes[k] = -x;
    nodes[n - k] = x;
    weights[k] = weights[n - k] = w;
  }
  if (n % 2 == 0) nodes[n / 2] = 0.0;
}

std::shared_ptr<const SpectralGrid> SpectralGrid::build(int n_elements,
                                                        int points_per_element,
                                                        double x_begin,
                                                        double x_end) {
  if (n_elements < 1) throw ParameterError("n_elements must be positive");
  if (points_per_element < 2)
    throw ParameterError("points_per_element must be at least 2");
  if (!(x_begin < x_end)) throw ParameterError("x_begin must be < x_end");

  std::shared_ptr<SpectralGrid> g(new SpectralGrid());
  g->n_elements_ = n_elements;
  g->points_per_element_ = points_per_element;
  g->x_begin_ = x_begin;
  g->x_end_ = x_end;
  g->element_width_ = (x_end - x_begin) / n_elements;

  const int np = points_per_element;
  const int n = np - 1;
  const double half = 0.5 * g->element_width_;
  gll_nodes_weights(np, g->ref_nodes_, g->ref_weights_);
  const Eigen::VectorXd& xi = g->ref_nodes_;

  // Barycentric weights for interpolation.
  g->bary_weights_ = Eigen::VectorXd::Ones(np);
  for (int j = 0; j < np; ++j)
    for (int k = 0; k < np; ++k)
      if (k != j) g->bary_weights_[j] /= (xi[j] - xi[k]);

  // Element differentiation matrix (GLL closed form).
  Eigen::VectorXd pn(np);
  for (int k = 0; k < np; ++k) pn[k] = legendre_all(n, xi[k])[n];
  Eigen::MatrixXd dref = Eigen::MatrixXd::Zero(np, np);
  for (int k = 0; k < np; ++k)
    for (int j = 0; j < np; ++j)
      if (k != j) dref(k, j) = pn[k] / (pn[j] * (xi[k] - xi[j]));
  dref(0, 0) = -0.25 * n * (n + 1.0);
  dref(n, n) = 0.25 * n * (n + 1.0);
  g->element_diff_ = dref / half;
  g->element_weights_ = g->ref_weights_ * half;

  // Element integration matrix R(k, j) = int_{-1}^{xi_k} L_j, through the
  // Legendre expansion of the Lagrange basis (exact for degree <= n).
  Eigen::MatrixXd vander(np, np);
  for (int k = 0; k < np; ++k) vander.row(k) = legendre_all(n, xi[k]).head(np);
  const Eigen::MatrixXd coeff = vander.inverse();
  Eigen::MatrixXd integ(np, np);
  for (int k = 0; k < np; ++k) {
    const Eigen::VectorXd p = legendre_all(n + 1, xi[k]);
    Eigen::RowVectorXd im(np);
    im[0] = xi[k] + 1.0;
    for (int m = 1; m < np; ++m) im[m] = (p[m + 1] - p[m - 1]) / (2.0 * m + 1.0);
    integ.row(k) = im * coeff;
  }
  integ *= half;
  // The full-element integral of L_j is the quadrature weight; using it
  // verbatim makes the last antiderivative row equal to the weight vector.
  integ.row(0).setZero();
  integ.row(n) = g->element_weights_.transpose();

  const Eigen::Index total = static_cast<Eigen::Index>(n_elements) * n + 1;
  g->nodes_.resize(total);
  g->weights_ = Eigen::VectorXd::Zero(total);
  g->diff_ = Eigen::MatrixXd::Zero(total, total);
  g->antideriv_ = Eigen::MatrixXd::Zero(total, total);
  g->boundaries_.resize(n_elements + 1);
  Eigen::VectorXd diff_count = Eigen::VectorXd::Zero(total);

  for (int e = 0; e < n_elements; ++e) {
    const double a = x_begin + e * g->element_width_;
    const double b = (e + 1 == n_elements) ? x_end : a + g->element_width_;
    g->boundaries_[e] = a;
    const Eigen::Index first = g->global_index(e, 0);
    for (int k = 0; k < np; ++k) {
      const Eigen::Index gi = first + k;
      if (k == 0) {
        g->nodes_[gi] = a;
      } else if (k == n) {
        g->nodes_[gi] = b;
      } else {
        g->nodes_[gi] = a + (xi[k] + 1.0) * half;
      }
      g->weights_[gi] += g->element_weights_[k];
      g->diff_.row(gi).segment(first, np) += g->element_diff_.row(k);
      diff_count[gi] += 1.0;
      if (k > 0) {
        g->antideriv_.row(gi) = g->antideriv_.row(first);
        g->antideriv_.row(gi).segment(first, np) += integ.row(k);
      }
    }
  }
  g->boundaries_[n_elements] = x_end;
  for (Eigen::Index i = 0; i < total; ++i) g->diff_.row(i) /= diff_count[i];
  return g;
}

int SpectralGrid::locate(double x) const {
  const double s = (x - x_begin_) / element_width_;
  int e = static_cast<int>(std::floor(s));
  return std::clamp(e, 0, n_elements_ - 1);
}

double SpectralGrid::interpolate(const Eigen::VectorXd& values,
                                 double x) const {
  if (values.size() != size())
    throw ParameterError("interpolate: length mismatch");
  x = std::clamp(x, x_begin_, x_end_);
  const int e = locate(x);
  const double a = boundaries_[e];
  const double xi = 2.0 * (x - a) / element_width_ - 1.0;
  const Eigen::Index first = global_index(e, 0);
  double num = 0.0;
  double den = 0.0;
  for (int j = 0; j < points_per_element_; ++j) {
    const double d = xi - ref_nodes_[j];
    if (d == 0.0) return values[first + j];
    const double t = bary_weights_[j] / d;
    num += t * values[first + j];
    den += t;
  }
  return num / den;
}

bool SpectralGrid::same_layout(const SpectralGrid& other) const {
  return n_elements_ == other.n_elements_ &&
         points_per_element_ == other.points_per_element_ &&
         x_begin_ == other.x_begin_ && x_end_ == other.x_end_;
}

GridFunction::GridFunction(GridPtr g, Eigen::VectorXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw ParameterError("GridFunction requires a grid");
  if (values.size() != grid->size())
    throw ParameterError("GridFunction: " + std::to_string(values.size()) +
                         " values for a grid of " +
                         std::to_string(grid->size()) + " nodes");
}

GridFunction constant(const GridPtr& grid, double value) {
  return GridFunction(grid, Eigen::VectorXd::Constant(grid->size(), value));
}

void check_on_grid(const GridFunction& f, const SpectralGrid& grid) {
  if (!f.grid || f.values.size() != grid.size() ||
      (f.grid.get() != &grid && !f.grid->same_layout(grid)))
    throw ParameterError("function is not sampled on this grid");
}

namespace {
void check_valid(const GridFunction& f) {
  if (!f.grid || f.values.size() != f.grid->size())
    throw ParameterError("grid function length mismatch");
}
}  // namespace

double quadrature(const GridFunction& f) {
  check_valid(f);
  return f.grid->weights().dot(f.values);
}

GridFunction differentiate(const GridFunction& f) {
  check_valid(f);
  return GridFunction(f.grid, f.grid->diff_matrix() * f.values);
}

GridFunction antiderivative(const GridFunction& f) {
  check_valid(f);
  Eigen::VectorXd v = f.grid->antideriv_matrix() * f.values;
  // The last row equals the weights; use the quadrature's own summation so
  // that both agree to the last bit.
  v[v.size() - 1] = f.grid->weights().dot(f.values);
  return GridFunction(f.grid, std::move(v));
}

}  // namespace nslang
