#include "cammvp/phasespace.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cammvp/steady.hpp"

namespace cammvp {

namespace {

constexpr double kPi = std::numbers::pi;

struct PowerTerm {
  double c;
  double p;
};

std::vector<PowerTerm> casimir_terms(const CasimirModel& m) {
  std::vector<PowerTerm> t{{m.c1, 1.0 + 1.0 / m.k1}};
  if (m.c2 > 0.0) t.push_back({m.c2, 1.0 + 1.0 / m.k2});
  return t;
}

// Velocity-space integral at radius r of sum_t c_t (L^{-l} f)^{p_t} L^l over
// one (u = const) line, using the tangential rule; the first tangential cell
// is handled semi-analytically when l != 0 and the axis starts at w = 0.
class LineIntegrator {
 public:
  LineIntegrator(const AxisRule& w_axis, double l) : w_(w_axis), l_(l) {
    const auto& w = w_axis.nodes();
    special_ = l != 0.0 && w.front() == 0.0 && w.size() >= 5;
    if (special_) tail_ = AxisRule(std::vector<double>(w.begin() + 1, w.end()), w_axis.rule());
  }

  // f points at the nw values of the line.
  double integrate(const double* f, double r, const std::vector<PowerTerm>& terms, bool& divergent) const {
    const auto& w = w_.nodes();
    const std::size_t nw = w.size();
    auto point = [&](std::size_t k) {
      const double fk = f[k];
      if (fk == 0.0) return 0.0;
      double s = 0.0;
      if (l_ == 0.0) {
        for (const auto& t : terms) s += t.c * std::pow(fk, t.p);
      } else {
        const double L = r * r * w[k] * w[k];
        for (const auto& t : terms) s += t.c * std::pow(fk, t.p) * std::pow(L, l_ * (1.0 - t.p));
      }
      return s * w[k];
    };
    if (!special_) {
      const auto& W = w_.weights();
      double sum = 0.0;
      for (std::size_t k = 0; k < nw; ++k) sum += W[k] * point(k);
      return sum;
    }
    if (r == 0.0) return 0.0;
    const auto& W = tail_.weights();
    double sum = 0.0;
    for (std::size_t k = 1; k < nw; ++k) sum += W[k - 1] * point(k);
    const double w1 = w[1];
    const double f0 = f[0];
    const double f1 = f[1];
    if (f0 == 0.0) {
      if (f1 != 0.0) {
        // L^{-l} f taken constant on the cell at its value at w1.
        const double phi1 = f1 / std::pow(r * r * w1 * w1, l_);
        double q = 0.0;
        for (const auto& t : terms) q += t.c * std::pow(phi1, t.p);
        sum += q * std::pow(r, 2.0 * l_) * std::pow(w1, 2.0 * l_ + 2.0) / (2.0 * l_ + 2.0);
      }
    } else {
      const double fbar = 0.5 * (f0 + f1);
      for (const auto& t : terms) {
        const double e = 2.0 * l_ * (1.0 - t.p) + 1.0;
        if (e > -1.0) {
          sum += t.c * std::pow(fbar, t.p) * std::pow(r, 2.0 * l_ * (1.0 - t.p)) * std::pow(w1, e + 1.0) / (e + 1.0);
        } else {
          divergent = true;
          const double L1 = r * r * w1 * w1;
          sum += t.c * std::pow(fbar, t.p) * std::pow(L1, l_ * (1.0 - t.p)) * w1 * w1;
        }
      }
    }
    return sum;
  }

 private:
  const AxisRule& w_;
  AxisRule tail_;
  double l_;
  bool special_ = false;
};

WeightedIntegral power_integral(const GridDensity& f, const std::vector<PowerTerm>& terms, double l) {
  const LineIntegrator line(f.w_axis(), l);
  const auto& r = f.r_grid().r();
  const auto& Wr = f.r_axis().weights();
  const auto& Wu = f.u_axis().weights();
  WeightedIntegral out;
  for (std::size_t i = 0; i < f.nr(); ++i) {
    const double rw = 8.0 * kPi * kPi * Wr[i] * r[i] * r[i];
    if (rw == 0.0) continue;
    double ui = 0.0;
    for (std::size_t j = 0; j < f.nu(); ++j) {
      ui += Wu[j] * line.integrate(&f.values()[f.index(i, j, 0)], r[i], terms, out.divergent_cells);
    }
    out.value += rw * ui;
  }
  return out;
}

}  // namespace

void FunctionalReport::assemble() {
  positive = angular + casimir + kinetic;
  total = positive + potential;
}

GridDensity::GridDensity(RadialGrid r, AxisRule u, AxisRule w, std::vector<double> values)
    : r_(std::move(r)), u_(std::move(u)), w_(std::move(w)), values_(std::move(values)) {
  if (values_.size() != nr() * nu() * nw()) throw std::invalid_argument("GridDensity value block has wrong size");
  if (w_.nodes().front() < 0.0) throw std::invalid_argument("tangential speed nodes must be >= 0");
}

GridDensity GridDensity::zeros(double r_max, double v_max, std::size_t nr, std::size_t nu, std::size_t nw,
                               NodeRule rule) {
  std::vector<double> u(nu), w(nw);
  for (std::size_t j = 0; j < nu; ++j) u[j] = -v_max + 2.0 * v_max * static_cast<double>(j) / static_cast<double>(nu - 1);
  for (std::size_t k = 0; k < nw; ++k) w[k] = v_max * static_cast<double>(k) / static_cast<double>(nw - 1);
  return GridDensity(RadialGrid::uniform(nr, r_max, rule), AxisRule(u, rule), AxisRule(w, rule),
                     std::vector<double>(nr * nu * nw, 0.0));
}

GridDensity GridDensity::from_function(const GridDensity& layout,
                                       const std::function<double(double, double, double)>& fn) {
  GridDensity g = layout;
  const auto& r = g.r_grid().r();
  const auto& u = g.u_axis().nodes();
  const auto& w = g.w_axis().nodes();
  for (std::size_t i = 0; i < g.nr(); ++i)
    for (std::size_t j = 0; j < g.nu(); ++j)
      for (std::size_t k = 0; k < g.nw(); ++k) g(i, j, k) = fn(r[i], u[j], w[k]);
  g.validate();
  return g;
}

double GridDensity::node_weight(std::size_t i, std::size_t j, std::size_t k) const {
  const double r = r_.r()[i];
  return 8.0 * kPi * kPi * r_.axis().weights()[i] * r * r * u_.weights()[j] * w_.weights()[k] * w_.nodes()[k];
}

double GridDensity::mass() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < nr(); ++i)
    for (std::size_t j = 0; j < nu(); ++j)
      for (std::size_t k = 0; k < nw(); ++k) sum += node_weight(i, j, k) * values_[index(i, j, k)];
  return sum;
}

void GridDensity::validate() const {
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("GridDensity values must be finite and >= 0");
  }
}

bool GridDensity::same_layout(const GridDensity& o) const {
  return r_.r() == o.r_.r() && u_.nodes() == o.u_.nodes() && w_.nodes() == o.w_.nodes() &&
         u_.rule() == o.u_.rule() && w_.rule() == o.w_.rule() && r_.axis().rule() == o.r_.axis().rule();
}

SpatialDensity rho_from_f(const GridDensity& f) {
  const auto& Wu = f.u_axis().weights();
  const auto& Ww = f.w_axis().weights();
  const auto& w = f.w_axis().nodes();
  std::vector<double> rho(f.nr(), 0.0);
  for (std::size_t i = 0; i < f.nr(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.nu(); ++j) {
      double line = 0.0;
      for (std::size_t k = 0; k < f.nw(); ++k) line += Ww[k] * w[k] * f(i, j, k);
      s += Wu[j] * line;
    }
    rho[i] = 2.0 * kPi * s;
  }
  return SpatialDensity(f.r_grid(), std::move(rho));
}

double kinetic_energy(const GridDensity& f) {
  const auto& u = f.u_axis().nodes();
  const auto& w = f.w_axis().nodes();
  double sum = 0.0;
  for (std::size_t i = 0; i < f.nr(); ++i)
    for (std::size_t j = 0; j < f.nu(); ++j)
      for (std::size_t k = 0; k < f.nw(); ++k)
        sum += f.node_weight(i, j, k) * 0.5 * (u[j] * u[j] + w[k] * w[k]) * f(i, j, k);
  return sum;
}

double angular_moment(const GridDensity& f) {
  const auto& r = f.r_grid().r();
  const auto& w = f.w_axis().nodes();
  double sum = 0.0;
  for (std::size_t i = 0; i < f.nr(); ++i)
    for (std::size_t j = 0; j < f.nu(); ++j)
      for (std::size_t k = 0; k < f.nw(); ++k)
        sum += f.node_weight(i, j, k) * r[i] * r[i] * w[k] * w[k] * f(i, j, k);
  return sum;
}

WeightedIntegral casimir_integral(const GridDensity& f, const CasimirModel& model) {
  return power_integral(f, casimir_terms(model), model.l);
}

double casimir_functional(const GridDensity& f, const CasimirModel& model) {
  return casimir_integral(f, model).value;
}

WeightedIntegral weighted_f_integral(const GridDensity& f, double k1, double l) {
  if (!(k1 > 0.0)) throw std::invalid_argument("f_norm needs k1 > 0");
  return power_integral(f, {{1.0, 1.0 + 1.0 / k1}}, l);
}

double f_norm(const GridDensity& f, double k1, double l) {
  const double v = weighted_f_integral(f, k1, l).value;
  return v <= 0.0 ? 0.0 : std::pow(v, k1 / (k1 + 1.0));
}

FunctionalReport functional_report(const GridDensity& f, const CasimirModel& model) {
  FunctionalReport rep;
  rep.mass = f.mass();
  rep.kinetic = kinetic_energy(f);
  rep.potential = field_energy(rho_from_f(f));
  rep.casimir = casimir_functional(f, model);
  rep.angular = model.gamma > 0.0 ? model.gamma * angular_moment(f) : 0.0;
  rep.assemble();
  return rep;
}

GridDensity rescale(const GridDensity& f, double a, double b, double c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw std::invalid_argument("rescale needs a, b, c > 0");
  auto scaled = [](const std::vector<double>& x, double s) {
    std::vector<double> y(x);
    for (double& v : y) v /= s;
    return y;
  };
  std::vector<double> values(f.values());
  for (double& v : values) v *= a;
  return GridDensity(RadialGrid(scaled(f.r_grid().r(), b), f.r_axis().rule()),
                     AxisRule(scaled(f.u_axis().nodes(), c), f.u_axis().rule()),
                     AxisRule(scaled(f.w_axis().nodes(), c), f.w_axis().rule()), std::move(values));
}

GridDensity grid_from_state(const AnsatzState& state, const GridDensity& layout) {
  GridDensity g = layout;
  const auto& r = g.r_grid().r();
  const auto& u = g.u_axis().nodes();
  const auto& w = g.w_axis().nodes();
  for (std::size_t i = 0; i < g.nr(); ++i) {
    const double psi = state.compact && r[i] >= state.R_supp ? -1.0 : state.psi_at(r[i]);
    for (std::size_t j = 0; j < g.nu(); ++j)
      for (std::size_t k = 0; k < g.nw(); ++k) g(i, j, k) = ansatz_f(state.model, psi, r[i], u[j], w[k]);
  }
  g.validate();
  return g;
}

std::vector<double> grid_steady_potential(const GridDensity& f0) { return green_potential(rho_from_f(f0)); }

GridSteady make_grid_steady(const AnsatzState& state, const GridDensity& layout) {
  GridSteady gs;
  gs.f0 = grid_from_state(state, layout);
  gs.U0 = grid_steady_potential(gs.f0);
  gs.E0 = state.E0;
  gs.model = state.model;
  return gs;
}

double d_distance(const GridDensity& f, const GridSteady& s) {
  if (!f.same_layout(s.f0)) throw std::invalid_argument("d_distance: f and f0 must share a grid layout");
  const auto& r = f.r_grid().r();
  const auto& u = f.u_axis().nodes();
  const auto& w = f.w_axis().nodes();
  const double gamma = s.model.gamma;
  double linear = 0.0;
  for (std::size_t i = 0; i < f.nr(); ++i)
    for (std::size_t j = 0; j < f.nu(); ++j)
      for (std::size_t k = 0; k < f.nw(); ++k) {
        const double diff = f(i, j, k) - s.f0(i, j, k);
        if (diff == 0.0) continue;
        const double e = 0.5 * (u[j] * u[j] + w[k] * w[k]) + s.U0[i] + gamma * r[i] * r[i] * w[k] * w[k] - s.E0;
        linear += f.node_weight(i, j, k) * e * diff;
      }
  return casimir_functional(f, s.model) - casimir_functional(s.f0, s.model) + linear;
}

double d_distance(const GridDensity& f, const AnsatzState& steady) {
  return d_distance(f, make_grid_steady(steady, f));
}

double field_distance(const GridDensity& f, const GridSteady& s) {
  return field_distance(mass_function(rho_from_f(f)), mass_function(rho_from_f(s.f0)));
}

double field_distance(const GridDensity& f, const AnsatzState& steady) {
  return field_distance(f, make_grid_steady(steady, f));
}

double dd_identity_residual(const GridDensity& f, const GridSteady& s) {
  const FunctionalReport a = functional_report(f, s.model);
  const FunctionalReport b = functional_report(s.f0, s.model);
  const double lhs = a.total - b.total;
  const double rhs = d_distance(f, s) - field_distance(f, s) / (8.0 * kPi);
  return std::abs(lhs - rhs);
}

GridDensity random_density(const GridDensity& layout, Rng& rng, double mass, int bumps) {
  const double R = layout.r_grid().r_max();
  const double V = std::max(std::abs(layout.u_axis().nodes().front()), layout.u_axis().nodes().back());
  const double W = layout.w_axis().nodes().back();
  struct Bump {
    double rc, uc, wc, sr, su, sw, amp;
  };
  std::vector<Bump> list;
  for (int b = 0; b < bumps; ++b) {
    Bump bp;
    bp.sr = rng.uniform(0.1, 0.3) * R;
    bp.su = rng.uniform(0.15, 0.35) * V;
    bp.sw = rng.uniform(0.15, 0.35) * W;
    bp.rc = rng.uniform(bp.sr, R - bp.sr);
    bp.uc = rng.uniform(-V + bp.su, V - bp.su);
    bp.wc = rng.uniform(bp.sw, W - bp.sw);
    bp.amp = rng.uniform(0.5, 1.5);
    list.push_back(bp);
  }
  GridDensity g = GridDensity::from_function(layout, [&](double r, double u, double w) {
    double s = 0.0;
    for (const Bump& b : list) {
      const double dr = (r - b.rc) / b.sr, du = (u - b.uc) / b.su, dw = (w - b.wc) / b.sw;
      const double d2 = dr * dr + du * du + dw * dw;
      if (d2 < 1.0) s += b.amp * std::pow(1.0 - d2, 3);
    }
    return s;
  });
  const double m = g.mass();
  if (!(m > 0.0)) throw std::runtime_error("random_density produced zero mass");
  for (double& v : g.values()) v *= mass / m;
  return g;
}

double interpolation_ratio(const GridDensity& f, const CasimirModel& model) {
  const FunctionalReport rep = functional_report(f, model);
  return weighted_f_integral(f, model.k1, model.l).value / (1.0 + rep.positive);
}

double interpolation_constant(const CasimirModel& model) { return 1.0 / model.c1; }

double pointwise_rho_constant(double k1, double l) {
  const double p = (2.0 * l + 3.0) / (k1 + 1.0);
  const double cA = 2.0 * kPi * boost::math::beta(l + 1.0, 0.5) / (2.0 * l + 3.0);
  return (1.0 + 0.5 * p) * std::pow(2.0 / p, p / (p + 2.0)) * std::pow(cA, 1.0 / (k1 + l + 2.5));
}

double pointwise_rho_margin(const GridDensity& f, double k1, double l) {
  const double C = pointwise_rho_constant(k1, l);
  const double n1 = k1 + l + 1.5;
  const std::vector<PowerTerm> terms{{1.0, 1.0 + 1.0 / k1}};
  const LineIntegrator line(f.w_axis(), l);
  const auto& r = f.r_grid().r();
  const auto& u = f.u_axis().nodes();
  const auto& w = f.w_axis().nodes();
  const auto& Wu = f.u_axis().weights();
  const auto& Ww = f.w_axis().weights();
  const SpatialDensity rho = rho_from_f(f);
  double worst = INFINITY;
  bool divergent = false;
  for (std::size_t i = 1; i < f.nr(); ++i) {
    double X = 0.0, Y = 0.0;
    for (std::size_t j = 0; j < f.nu(); ++j) {
      X += Wu[j] * line.integrate(&f.values()[f.index(i, j, 0)], r[i], terms, divergent);
      double y = 0.0;
      for (std::size_t k = 0; k < f.nw(); ++k) y += Ww[k] * w[k] * (u[j] * u[j] + w[k] * w[k]) * f(i, j, k);
      Y += Wu[j] * y;
    }
    X *= 2.0 * kPi;
    Y *= 2.0 * kPi;
    const double bound = C * std::pow(r[i], 2.0 * l / (k1 + l + 2.5)) * std::pow(X + Y, n1 / (n1 + 1.0));
    const double margin = (bound - rho.values[i]) / std::max(bound, 1e-300);
    worst = std::min(worst, margin);
  }
  return worst;
}

}  // namespace cammvp
