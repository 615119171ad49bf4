#include "nslang/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "nslang/errors.hpp"

namespace nslang {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

Eigen::VectorXd to_vector(const nlohmann::json& arr, const char* name) {
  if (!arr.is_array()) throw ParameterError(std::string("model field ") + name);
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

nlohmann::json to_array(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

GridFunction normalize_potential(const GridFunction& phi) {
  // Work relative to min(phi) so the exponentials stay in range.
  const double shift = phi.values.minCoeff();
  const Eigen::VectorXd e = (-(phi.values.array() - shift)).exp().matrix();
  const double z = phi.grid->weights().dot(e);
  return GridFunction(phi.grid,
                      (phi.values.array() - shift + std::log(z)).matrix());
}

GridFunction potential_from_force(const GridFunction& force) {
  const GridFunction integral = antiderivative(force);
  return normalize_potential(GridFunction(force.grid, -integral.values));
}

GridFunction density_from_f0(const GridFunction& f0) {
  if (!all_finite(f0.values))
    throw ParameterError("density_from_f0: non-finite F0");
  const GridFunction g = antiderivative(f0);
  const double peak = g.values.maxCoeff();
  Eigen::VectorXd e = (g.values.array() - peak).exp().matrix();
  const double z = f0.grid->weights().dot(e);
  e /= z;
  return GridFunction(f0.grid, std::move(e));
}

F0FromDensity f0_from_density(const GridFunction& p0) {
  F0FromDensity out;
  Eigen::VectorXd logp(p0.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    double v = p0.values[i];
    if (!(v > 0.0)) {
      v = kDensityFloor;
      ++out.clamped_nodes;
    }
    logp[i] = std::log(v);
  }
  out.f0 = differentiate(GridFunction(p0.grid, std::move(logp)));
  return out;
}

GridFunction equilibrium_density(const GridFunction& phi) {
  const double shift = phi.values.minCoeff();
  Eigen::VectorXd e = (-(phi.values.array() - shift)).exp().matrix();
  e /= phi.grid->weights().dot(e);
  return GridFunction(phi.grid, std::move(e));
}

GridFunction default_rate(const GridPtr& grid) {
  return sample(grid, [](double x) { return std::max(50.0 * x + 60.0, 0.0); });
}

LatentModel LatentModel::from_force(GridFunction force, GridFunction f0,
                                    double diffusion, GridFunction rate) {
  LatentModel m;
  m.phi = potential_from_force(force);
  m.force = std::move(force);
  m.p0 = density_from_f0(f0);
  m.f0 = std::move(f0);
  m.diffusion = diffusion;
  m.rate = std::move(rate);
  m.validate();
  return m;
}

LatentModel LatentModel::from_potential(GridFunction phi, GridFunction p0,
                                        double diffusion, GridFunction rate) {
  LatentModel m;
  m.phi = normalize_potential(phi);
  m.force = GridFunction(phi.grid, -differentiate(phi).values);
  const double mass = quadrature(p0);
  if (!(mass > 0.0)) throw ParameterError("initial density has no mass");
  m.p0 = GridFunction(p0.grid, p0.values / mass);
  m.f0 = f0_from_density(m.p0).f0;
  m.diffusion = diffusion;
  m.rate = std::move(rate);
  m.validate();
  return m;
}

void LatentModel::validate() const {
  if (!phi.grid) throw ParameterError("model has no grid");
  const SpectralGrid& g = *phi.grid;
  check_on_grid(force, g);
  check_on_grid(p0, g);
  check_on_grid(f0, g);
  check_on_grid(rate, g);
  if (!(diffusion > 0.0) || !std::isfinite(diffusion))
    throw ParameterError("diffusion must be positive");
  if (!all_finite(phi.values) || !all_finite(force.values) ||
      !all_finite(p0.values) || !all_finite(f0.values) ||
      !all_finite(rate.values))
    throw ParameterError("model contains non-finite values");
  if ((p0.values.array() < 0.0).any())
    throw ParameterError("initial density must be nonnegative");
  if ((rate.values.array() < 0.0).any())
    throw ParameterError("firing rate must be nonnegative");
}

nlohmann::json model_to_json(const LatentModel& model) {
  const SpectralGrid& g = *model.grid();
  nlohmann::json doc;
  doc["grid"] = {{"n_elements", g.n_elements()},
                 {"points_per_element", g.points_per_element()},
                 {"x_begin", g.x_begin()},
                 {"x_end", g.x_end()}};
  doc["nodes"] = to_array(g.nodes());
  doc["phi"] = to_array(model.phi.values);
  doc["force"] = to_array(model.force.values);
  doc["p0"] = to_array(model.p0.values);
  doc["f0"] = to_array(model.f0.values);
  doc["D"] = model.diffusion;
  doc["rate"] = to_array(model.rate.values);
  return doc;
}

LatentModel model_from_json(const nlohmann::json& doc, GridPtr grid) {
  try {
    const auto& gj = doc.at("grid");
    const int ne = gj.at("n_elements").get<int>();
    const int np = gj.at("points_per_element").get<int>();
    const double xb = gj.at("x_begin").get<double>();
    const double xe = gj.at("x_end").get<double>();
    if (!grid) {
      grid = SpectralGrid::build(ne, np, xb, xe);
    } else if (grid->n_elements() != ne || grid->points_per_element() != np ||
               grid->x_begin() != xb || grid->x_end() != xe) {
      throw ParameterError("model grid does not match the requested grid");
    }
    LatentModel m;
    m.phi = GridFunction(grid, to_vector(doc.at("phi"), "phi"));
    m.p0 = GridFunction(grid, to_vector(doc.at("p0"), "p0"));
    m.diffusion = doc.at("D").get<double>();
    m.rate = GridFunction(grid, to_vector(doc.at("rate"), "rate"));
    // force/f0 are optional; older files carry only phi and p0.
    m.force = doc.contains("force")
                  ? GridFunction(grid, to_vector(doc["force"], "force"))
                  : GridFunction(grid, -differentiate(m.phi).values);
    m.f0 = doc.contains("f0") ? GridFunction(grid, to_vector(doc["f0"], "f0"))
                              : f0_from_density(m.p0).f0;
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const LatentModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path);
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw ParameterError("write failed: " + path);
}

LatentModel load_model(const std::string& path, GridPtr grid) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("cannot parse " + path + ": " + e.what());
  }
  return model_from_json(doc, std::move(grid));
}

}  // namespace nslang
