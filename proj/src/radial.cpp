#include "cammvp/radial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cammvp {

namespace {
constexpr double kPi = std::numbers::pi;

// Continuous-part potential of the shells evaluated at r.
double shell_potential(const std::vector<Shell>& shells, double r) {
  double u = 0.0;
  for (const Shell& s : shells) u -= s.mass / std::max(r, s.radius);
  return u;
}

double shell_mass(const std::vector<Shell>& shells, double r) {
  double m = 0.0;
  for (const Shell& s : shells) {
    if (r >= s.radius) m += s.mass;
  }
  return m;
}

double shell_total(const std::vector<Shell>& shells) {
  double m = 0.0;
  for (const Shell& s : shells) m += s.mass;
  return m;
}

// Interpolate a node table with slopes by cubic Hermite segments.
double hermite_table(const RadialGrid& g, const std::vector<double>& v,
                     const std::vector<double>& d, double r) {
  const auto& x = g.r();
  const std::size_t c = g.axis().cell_of(r);
  return hermite(x[c], x[c + 1], v[c], v[c + 1], d[c], d[c + 1], r);
}

struct ContinuousField {
  std::vector<double> m;      // continuous-part mass at nodes
  std::vector<double> dm;     // 4 pi r^2 rho
  std::vector<double> u;      // continuous-part potential at nodes
  std::vector<double> du;     // m / r^2
  double mass = 0.0;
};

ContinuousField continuous_field(const SpatialDensity& rho) {
  const auto& r = rho.grid.r();
  const std::size_t n = r.size();
  ContinuousField cf;
  cf.dm.resize(n);
  for (std::size_t i = 0; i < n; ++i) cf.dm[i] = 4.0 * kPi * r[i] * r[i] * rho.values[i];
  cf.m = rho.grid.axis().cumulative(cf.dm);
  cf.mass = cf.m.back();
  cf.du.resize(n);
  cf.du[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) cf.du[i] = cf.m[i] / (r[i] * r[i]);
  const std::vector<double> tail = rho.grid.axis().cumulative_from_end(cf.du);
  const double outer = -cf.mass / r.back();
  cf.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) cf.u[i] = outer - tail[i];
  return cf;
}

double continuous_potential_at(const RadialGrid& g, const ContinuousField& cf, double r) {
  if (r >= g.r_max()) return -cf.mass / r;
  return hermite_table(g, cf.u, cf.du, r);
}

// int_0^inf m1 m2 / r^2 dr including shell terms.
double bilinear(const SpatialDensity& a, const ContinuousField& ca, const SpatialDensity& b,
                const ContinuousField& cb) {
  const auto& r = a.grid.r();
  std::vector<double> g(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) g[i] = ca.m[i] * cb.m[i] / (r[i] * r[i]);
  double sum = a.grid.axis().integral(g) + ca.mass * cb.mass / r.back();
  for (const Shell& s : b.shells) sum -= s.mass * continuous_potential_at(a.grid, ca, s.radius);
  for (const Shell& s : a.shells) sum -= s.mass * continuous_potential_at(b.grid, cb, s.radius);
  for (const Shell& s : a.shells) {
    for (const Shell& t : b.shells) sum += s.mass * t.mass / std::max(s.radius, t.radius);
  }
  return sum;
}

void require_same_grid(const RadialGrid& a, const RadialGrid& b) {
  if (a.r() != b.r()) throw std::invalid_argument("densities must share a radial grid");
}

}  // namespace

RadialGrid::RadialGrid(std::vector<double> nodes, NodeRule rule) : axis_(std::move(nodes), rule) {
  if (axis_.nodes().front() != 0.0) throw std::invalid_argument("radial grid must start at r = 0");
  if (axis_.size() < 17) throw std::invalid_argument("radial grid needs at least 17 nodes");
}

RadialGrid RadialGrid::sinh_spaced(std::size_t count, double r_max, double core_scale, NodeRule rule) {
  if (count < 17 || !(r_max > 0.0) || !(core_scale > 0.0)) {
    throw std::invalid_argument("invalid sinh grid parameters");
  }
  const double t_max = std::asinh(r_max / core_scale);
  std::vector<double> r(count);
  for (std::size_t i = 0; i < count; ++i) {
    r[i] = core_scale * std::sinh(t_max * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  r.front() = 0.0;
  r.back() = r_max;
  return RadialGrid(std::move(r), rule);
}

RadialGrid RadialGrid::uniform(std::size_t count, double r_max, NodeRule rule) {
  std::vector<double> r(count);
  for (std::size_t i = 0; i < count; ++i) r[i] = r_max * static_cast<double>(i) / static_cast<double>(count - 1);
  return RadialGrid(std::move(r), rule);
}

SpatialDensity::SpatialDensity(RadialGrid g, std::vector<double> v, bool signed_ok)
    : grid(std::move(g)), values(std::move(v)), allow_signed(signed_ok) {
  validate();
}

SpatialDensity SpatialDensity::from_function(const RadialGrid& g, const std::function<double(double)>& rho) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = rho(g.r()[i]);
  return SpatialDensity(g, std::move(v));
}

void SpatialDensity::validate() const {
  if (values.size() != grid.size()) throw std::invalid_argument("density size does not match grid");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("density has non-finite values");
    if (!allow_signed && v < 0.0) throw std::invalid_argument("physical density must be nonnegative");
  }
  for (const Shell& s : shells) {
    if (!(s.radius > 0.0) || !std::isfinite(s.mass)) throw std::invalid_argument("invalid shell");
  }
}

double MassFunction::at(double r) const {
  double cont;
  if (r >= grid.r_max()) {
    cont = total - shell_total(shells);
  } else {
    std::vector<double> v(values.size());
    // node values without shells
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = values[i] - shell_mass(shells, grid.r()[i]);
    cont = hermite_table(grid, v, slope, r);
  }
  return cont + shell_mass(shells, r);
}

double Potential::at(double r) const {
  const double shells_total = shell_total(shells);
  if (r >= grid.r_max()) return -(total_mass - shells_total) / r + shell_potential(shells, r);
  const auto& x = grid.r();
  const std::size_t c = grid.axis().cell_of(r);
  auto cont_u = [&](std::size_t i) { return values[i] - shell_potential(shells, x[i]); };
  auto cont_d = [&](std::size_t i) {
    return i == 0 ? 0.0 : slope[i] - shell_mass(shells, x[i]) / (x[i] * x[i]);
  };
  return hermite(x[c], x[c + 1], cont_u(c), cont_u(c + 1), cont_d(c), cont_d(c + 1), r) +
         shell_potential(shells, r);
}

MassFunction mass_function(const SpatialDensity& rho) {
  rho.validate();
  const ContinuousField cf = continuous_field(rho);
  MassFunction mf;
  mf.grid = rho.grid;
  mf.shells = rho.shells;
  mf.slope = cf.dm;
  mf.values = cf.m;
  for (std::size_t i = 0; i < mf.values.size(); ++i) mf.values[i] += shell_mass(rho.shells, rho.grid.r()[i]);
  mf.total = cf.mass + shell_total(rho.shells);
  return mf;
}

Potential potential_from_density(const SpatialDensity& rho) {
  rho.validate();
  const ContinuousField cf = continuous_field(rho);
  const auto& r = rho.grid.r();
  Potential p;
  p.grid = rho.grid;
  p.shells = rho.shells;
  p.total_mass = cf.mass + shell_total(rho.shells);
  p.values.resize(r.size());
  p.slope.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    p.values[i] = cf.u[i] + shell_potential(rho.shells, r[i]);
    p.slope[i] = i == 0 ? 0.0 : cf.du[i] + shell_mass(rho.shells, r[i]) / (r[i] * r[i]);
  }
  // Mass density still significant at the outer node: the grid likely misses
  // more than 0.1% of the mass.
  const double edge = 4.0 * kPi / 3.0 * std::pow(r.back(), 3) * std::abs(rho.values.back());
  p.truncated_mass_warning = edge > 1e-3 * std::max(std::abs(p.total_mass), 1e-300);
  return p;
}

double field_energy(const SpatialDensity& rho) {
  rho.validate();
  const ContinuousField cf = continuous_field(rho);
  return -0.5 * bilinear(rho, cf, rho, cf);
}

double field_inner_product(const MassFunction& m1, const MassFunction& m2) {
  require_same_grid(m1.grid, m2.grid);
  const auto& r = m1.grid.r();
  std::vector<double> g(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) g[i] = m1.values[i] * m2.values[i] / (r[i] * r[i]);
  return m1.grid.axis().integral(g) + m1.total * m2.total / r.back();
}

double field_distance(const MassFunction& m1, const MassFunction& m2) {
  require_same_grid(m1.grid, m2.grid);
  const auto& r = m1.grid.r();
  std::vector<double> g(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double d = m1.values[i] - m2.values[i];
    g[i] = d * d / (r[i] * r[i]);
  }
  const double dm = m1.total - m2.total;
  return 4.0 * kPi * (m1.grid.axis().integral(g) + dm * dm / r.back());
}

double green_identity_residual(const SpatialDensity& rho1, const SpatialDensity& rho2) {
  require_same_grid(rho1.grid, rho2.grid);
  const ContinuousField c1 = continuous_field(rho1);
  const ContinuousField c2 = continuous_field(rho2);
  const double lhs = 4.0 * kPi * bilinear(rho1, c1, rho2, c2);

  const Potential u1 = potential_from_density(rho1);
  const auto& r = rho1.grid.r();
  std::vector<double> g(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) g[i] = r[i] * r[i] * u1.values[i] * rho2.values[i];
  double int_u_rho = 4.0 * kPi * rho1.grid.axis().integral(g);
  for (const Shell& s : rho2.shells) int_u_rho += s.mass * u1.at(s.radius);
  const double rhs = -4.0 * kPi * int_u_rho;

  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  if (scale == 0.0) return 0.0;
  return std::abs(lhs - rhs) / scale;
}

std::vector<double> green_potential(const SpatialDensity& rho) {
  const ContinuousField cf = continuous_field(rho);
  const auto& axis = rho.grid.axis();
  const auto& r = rho.grid.r();
  const auto& q = axis.weights();
  std::vector<double> y(r.size(), 0.0);
  for (std::size_t k = 1; k < r.size(); ++k) y[k] = q[k] * cf.m[k] / (r[k] * r[k]);
  std::vector<double> u = axis.cumulative_adjoint(y);
  const double outer = cf.mass / r.back();
  for (std::size_t i = 0; i < r.size(); ++i) u[i] = -u[i] / q[i] - outer;
  return u;
}

double rho_norm(const SpatialDensity& rho, double n1, double l) {
  if (!(n1 > 0.0) || !(l > -1.0)) throw std::invalid_argument("rho_norm needs n1 > 0, l > -1");
  const auto& r = rho.grid.r();
  const double p = 1.0 + 1.0 / n1;
  const double e = 2.0 - 2.0 * l / n1;  // power of r including the volume factor
  std::vector<double> g(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) g[i] = std::pow(std::abs(rho.values[i]), p);
  double integral = 0.0;
  if (e >= 0.0) {
    std::vector<double> h(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) h[i] = i == 0 ? (e == 0.0 ? g[0] : 0.0) : g[i] * std::pow(r[i], e);
    integral = rho.grid.axis().integral(h);
  } else {
    if (e <= -1.0 && g[0] != 0.0) {
      throw std::domain_error("rho_norm: weight r^(-2l/n1) not integrable at the origin for this density");
    }
    if (e <= -2.0) throw std::domain_error("rho_norm: weight exponent too singular");
    // First cell: g linear in r, integrated against r^e exactly.
    const double r1 = r[1];
    const double scale = std::pow(r1, e + 1.0);
    integral = e > -1.0 ? g[0] * scale / (e + 1.0) + (g[1] - g[0]) * scale / (e + 2.0)
                        : g[1] * scale / (e + 2.0);
    std::vector<double> tail_nodes(r.begin() + 1, r.end());
    AxisRule tail(tail_nodes, rho.grid.axis().rule());
    std::vector<double> h(tail_nodes.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = g[i + 1] * std::pow(tail_nodes[i], e);
    integral += tail.integral(h);
  }
  integral *= 4.0 * kPi;
  if (integral <= 0.0) return 0.0;
  return std::pow(integral, n1 / (n1 + 1.0));
}

BoundMargin mass_bound_margin(const SpatialDensity& rho, double n1, double l) {
  const MassFunction mf = mass_function(rho);
  const double norm = rho_norm(rho, n1, l);
  const double constant = std::pow(4.0 * kPi, 1.0 / (1.0 + n1));
  const double power = (2.0 * l + 3.0) / (n1 + 1.0);
  BoundMargin out{INFINITY, 0.0};
  const auto& r = rho.grid.r();
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double slack = constant * norm * std::pow(r[i], power) - std::abs(mf.values[i]);
    if (slack < out.margin) out = {slack, r[i]};
  }
  return out;
}

BoundMargin field_split_margin(const SpatialDensity& input) {
  // Evaluated on the piecewise-linear representation of the nodal values: it is
  // the one where rho >= 0 at the nodes gives m <= M everywhere, which the
  // bound relies on. Higher-order interpolants can undershoot at support edges.
  SpatialDensity rho = input;
  rho.grid = RadialGrid(input.grid.r(), NodeRule::Trapezoid);
  const ContinuousField cf = continuous_field(rho);
  const double full = 4.0 * kPi * bilinear(rho, cf, rho, cf);
  const MassFunction mf = mass_function(rho);
  const auto& r = rho.grid.r();
  const double m2 = mf.total * mf.total;
  std::vector<double> g(r.size(), 0.0), h(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) {
    g[i] = mf.values[i] * mf.values[i] / (r[i] * r[i]);
    h[i] = m2 / (r[i] * r[i]);
  }
  const std::vector<double> inner = rho.grid.axis().cumulative(g);
  // M^2 / R = int_R^inf M^2 / r^2, taken with the same rule as the field
  // energy on the grid and analytically beyond it.
  const std::vector<double> tail = rho.grid.axis().cumulative_from_end(h);
  BoundMargin out{INFINITY, 0.0};
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double bound = 4.0 * kPi * (inner[i] + tail[i] + m2 / r.back());
    const double slack = bound - full;
    if (slack < out.margin) out = {slack, r[i]};
  }
  return out;
}

}  // namespace cammvp
