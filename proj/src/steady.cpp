#include "cammvp/steady.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace cammvp {

namespace {

constexpr double kPi = std::numbers::pi;

// The same handful of Beta values is needed at every radius; memoize them.
double beta(double a, double b) {
  struct Entry {
    double a, b, value;
  };
  thread_local std::array<Entry, 16> cache{};
  thread_local std::size_t used = 0, next = 0;
  for (std::size_t i = 0; i < used; ++i) {
    if (cache[i].a == a && cache[i].b == b) return cache[i].value;
  }
  const double v = boost::math::beta(a, b);
  cache[next] = {a, b, v};
  next = (next + 1) % cache.size();
  used = std::min(used + 1, cache.size());
  return v;
}

// Function of y = E0 - E - gamma L along which the velocity integral is taken.
// Either g * y^q or a general callable.
struct YFunction {
  double g = 0.0;
  double q = 0.0;
  std::function<double(double)> general;

  double operator()(double y) const { return general ? general(y) : g * std::pow(y, q); }
};

// R_p[G](psi) = int_0^{sqrt(2 psi)} s^p G(psi - s^2/2) ds
//             = 1/2 (2 psi)^{(p+1)/2} int_0^1 t^{(p-1)/2} G(psi (1 - t)) dt.
double radial_velocity_integral(double p, double psi, const YFunction& G) {
  const double pre = 0.5 * std::pow(2.0 * psi, 0.5 * (p + 1.0));
  if (!G.general) return pre * G.g * std::pow(psi, G.q) * beta(0.5 * (p + 1.0), G.q + 1.0);
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
  const double a = 0.5 * (p - 1.0);
  auto integrand = [&](double t, double tc) {
    // tc = 1 - t evaluated without cancellation near t = 1
    const double one_minus = t > 0.5 ? tc : 1.0 - t;
    if (one_minus <= 0.0 || t <= 0.0) return 0.0;
    return std::pow(t, a) * G(psi * one_minus);
  };
  const double value = integrator.integrate(integrand, 0.0, 1.0, 1e-14);
  return pre * value;
}

// (Q')^{-1} composed with various outer functions.
YFunction phi_function(const CasimirModel& m) {
  if (m.single_power()) return {std::pow(m.c1 * (1.0 + 1.0 / m.k1), -m.k1), m.k1, {}};
  return {0.0, 0.0, [m](double y) { return qprime_inverse(m, y); }};
}

YFunction casimir_function(const CasimirModel& m) {
  if (m.single_power()) {
    const double kappa = std::pow(m.c1 * (1.0 + 1.0 / m.k1), -m.k1);
    return {m.c1 * std::pow(kappa, 1.0 + 1.0 / m.k1), m.k1 + 1.0, {}};
  }
  return {0.0, 0.0, [m](double y) { return q_eval(m, qprime_inverse(m, y)); }};
}

// Q'(s phi(y)) s phi(y)
YFunction scaled_qprime_function(const CasimirModel& m, double s) {
  if (m.single_power()) {
    const double kappa = std::pow(m.c1 * (1.0 + 1.0 / m.k1), -m.k1);
    return {std::pow(s, 1.0 + 1.0 / m.k1) * kappa, m.k1 + 1.0, {}};
  }
  return {0.0, 0.0, [m, s](double y) {
            const double phi = s * qprime_inverse(m, y);
            return qprime_eval(m, phi) * phi;
          }};
}

// Interpolant of log H(psi) in log psi on Chebyshev-Lobatto nodes, for smooth
// positive H spanning many decades. Below the table H continues along the end slope.
class LogChebyshev {
 public:
  LogChebyshev(const std::function<double(double)>& H, double x_lo, double x_hi, int n)
      : lo_(x_lo), hi_(x_hi), x_(n), v_(n), w_(n) {
    for (int j = 0; j < n; ++j) {
      x_[j] = 0.5 * (lo_ + hi_) + 0.5 * (hi_ - lo_) * std::cos(kPi * j / (n - 1));
      v_[j] = std::log(H(std::exp(x_[j])));
      w_[j] = (j % 2 == 0 ? 1.0 : -1.0) * (j == 0 || j == n - 1 ? 0.5 : 1.0);
    }
    const double h = 1e-4 * (hi_ - lo_);
    slope_lo_ = (eval(lo_ + h) - eval(lo_)) / h;
  }

  double hi() const { return hi_; }

  /// log H at x = log psi, for x <= hi.
  double operator()(double x) const {
    if (x < lo_) return eval(lo_) + slope_lo_ * (x - lo_);
    return eval(x);
  }

 private:
  double eval(double x) const {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < x_.size(); ++j) {
      const double d = x - x_[j];
      if (d == 0.0) return v_[j];
      const double t = w_[j] / d;
      num += t * v_[j];
      den += t;
    }
    return num / den;
  }

  double lo_, hi_;
  std::vector<double> x_, v_, w_;
  double slope_lo_ = 0.0;
};

// psi -> R_p[G](psi) on (0, psi_max]. Power-law G is evaluated in closed form;
// a general G is tabulated once, since each direct value is a quadrature.
class VelocityIntegral {
 public:
  VelocityIntegral(double p, YFunction G, double psi_max) : p_(p), G_(std::move(G)) {
    if (!G_.general) return;
    const double x_hi = std::log(psi_max) + 0.05;
    table_.emplace([&](double psi) { return radial_velocity_integral(p_, psi, G_); }, x_hi - 48.0, x_hi, 160);
  }

  double operator()(double psi) const {
    if (!(psi > 0.0)) return 0.0;
    if (!table_ || std::log(psi) > table_->hi()) return radial_velocity_integral(p_, psi, G_);
    return std::exp((*table_)(std::log(psi)));
  }

 private:
  double p_;
  YFunction G_;
  std::optional<LogChebyshev> table_;
};

// Velocity moment from the radial integrals R2 = R_{2l+2}[G] and R4 = R_{2l+4}[G].
double moment_from(const CasimirModel& m, Moment moment, double r, double R2, double R4) {
  const double l = m.l;
  const double beta2 = 1.0 + 2.0 * m.gamma * r * r;
  const double rl = (l == 0.0) ? 1.0 : std::pow(r, 2.0 * l);
  const double base = 2.0 * kPi * rl * std::pow(beta2, -(l + 1.0));
  switch (moment) {
    case Moment::Density:
    case Moment::Casimir:
    case Moment::QprimeWeighted:
      return base * beta(l + 1.0, 0.5) * R2;
    case Moment::KineticEnergy:
      return base * 0.5 * (beta(l + 1.0, 1.5) + beta(l + 2.0, 0.5) / beta2) * R4;
    case Moment::AngularMomentum:
      return base * r * r / beta2 * beta(l + 2.0, 0.5) * R4;
  }
  return 0.0;
}

bool uses_high_power(Moment moment) { return moment == Moment::KineticEnergy || moment == Moment::AngularMomentum; }

double moment_with(const CasimirModel& m, Moment moment, double psi, double r, const YFunction& G) {
  const double p = uses_high_power(moment) ? 2.0 * m.l + 4.0 : 2.0 * m.l + 2.0;
  const double R = radial_velocity_integral(p, psi, G);
  return moment_from(m, moment, r, R, R);
}

// All velocity moments of one model for psi up to psi_max.
class MomentTables {
 public:
  MomentTables(const CasimirModel& m, double psi_max)
      : m_(m),
        phi2_(2.0 * m.l + 2.0, phi_function(m), psi_max),
        phi4_(2.0 * m.l + 4.0, phi_function(m), psi_max),
        casimir_(2.0 * m.l + 2.0, casimir_function(m), psi_max) {}

  double operator()(Moment moment, double psi, double r) const {
    if (!(psi > 0.0)) return 0.0;
    switch (moment) {
      case Moment::Density: return moment_from(m_, moment, r, phi2_(psi), 0.0);
      case Moment::KineticEnergy:
      case Moment::AngularMomentum: return moment_from(m_, moment, r, 0.0, phi4_(psi));
      case Moment::Casimir: return moment_from(m_, moment, r, casimir_(psi), 0.0);
      case Moment::QprimeWeighted: break;
    }
    throw std::logic_error("moment not tabulated");
  }

 private:
  CasimirModel m_;
  VelocityIntegral phi2_, phi4_, casimir_;
};

// rho / (r^{2l} (1 + 2 gamma r^2)^{-(l+1)}), a function of psi alone.
double density_h(const CasimirModel& m, double psi) {
  if (psi <= 0.0) return 0.0;
  return 2.0 * kPi * beta(m.l + 1.0, 0.5) * radial_velocity_integral(2.0 * m.l + 2.0, psi, phi_function(m));
}

void check_model(const CasimirModel& m, bool allow_out_of_range) {
  m.check_well_formed();
  if (!allow_out_of_range && !m.exponents_in_range()) {
    throw std::domain_error("exponents outside (0, l + 3/2); pass the out-of-range override to proceed (" +
                            describe(m) + ")");
  }
}

// Hermite interpolation on the state's profile for psi and m.
struct ProfileView {
  const AnsatzState& s;

  std::size_t cell(double r) const {
    auto it = std::upper_bound(s.r.begin(), s.r.end(), r);
    std::size_t c = it == s.r.begin() ? 0 : static_cast<std::size_t>(it - s.r.begin()) - 1;
    return std::min(c, s.r.size() - 2);
  }
  double dpsi(std::size_t i) const { return s.r[i] == 0.0 ? 0.0 : -s.m[i] / (s.r[i] * s.r[i]); }
  double dm(std::size_t i) const {
    return s.r[i] == 0.0 ? 0.0 : 4.0 * kPi * s.r[i] * s.r[i] * s.rho[i];
  }
  double psi(double r) const {
    const std::size_t c = cell(r);
    return hermite(s.r[c], s.r[c + 1], s.E0 - s.U[c], s.E0 - s.U[c + 1], dpsi(c), dpsi(c + 1), r);
  }
  double mass(double r) const {
    const std::size_t c = cell(r);
    return hermite(s.r[c], s.r[c + 1], s.m[c], s.m[c + 1], dm(c), dm(c + 1), r);
  }
};

template <class F>
double integrate_profile(const AnsatzState& s, F&& integrand) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < s.r.size(); ++i) {
    sum += boost::math::quadrature::gauss<double, 10>::integrate(integrand, s.r[i], s.r[i + 1]);
  }
  return sum;
}

}  // namespace

double ansatz_constant(double k, double l, double c1) {
  const double kappa = std::pow(c1 * (1.0 + 1.0 / k), -k);
  return 2.0 * kPi * kappa * std::pow(2.0, l + 0.5) * beta(l + 1.0, 0.5) * beta(l + 1.5, k + 1.0);
}

double ansatz_moment(const CasimirModel& m, Moment moment, double psi, double r) {
  if (!(psi > 0.0)) return 0.0;
  if (r < 0.0) throw std::domain_error("ansatz_moment requires r >= 0");
  switch (moment) {
    case Moment::Density:
    case Moment::KineticEnergy:
    case Moment::AngularMomentum:
      return moment_with(m, moment, psi, r, phi_function(m));
    case Moment::Casimir:
      return moment_with(m, moment, psi, r, casimir_function(m));
    case Moment::QprimeWeighted:
      return moment_with(m, moment, psi, r, scaled_qprime_function(m, 1.0));
  }
  return 0.0;
}

double rho_of_potential(const CasimirModel& m, double psi, double r) {
  if (!(psi > 0.0)) return 0.0;
  if (m.single_power()) {
    const double beta2 = 1.0 + 2.0 * m.gamma * r * r;
    const double rl = m.l == 0.0 ? 1.0 : std::pow(r, 2.0 * m.l);
    return ansatz_constant(m.k1, m.l, m.c1) * rl * std::pow(beta2, -(m.l + 1.0)) *
           std::pow(psi, m.k1 + m.l + 1.5);
  }
  return ansatz_moment(m, Moment::Density, psi, r);
}

double ansatz_f(const CasimirModel& m, double psi, double r, double u, double w) {
  const double y = psi - 0.5 * u * u - (0.5 + m.gamma * r * r) * w * w;
  if (!(y > 0.0)) return 0.0;
  const double phi = qprime_inverse(m, y);
  if (m.l == 0.0) return phi;
  const double L = r * r * w * w;
  if (L == 0.0) return m.l > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return phi * std::pow(L, m.l);
}

double AnsatzState::psi_at(double radius) const {
  if (radius >= r.back()) return E0 + m.back() / radius;
  return ProfileView{*this}.psi(radius);
}

double AnsatzState::U_at(double radius) const { return E0 - psi_at(radius); }

double AnsatzState::m_at(double radius) const {
  if (radius >= r.back()) return m.back();
  return ProfileView{*this}.mass(radius);
}

double AnsatzState::rho_at(double radius) const {
  if (compact && radius >= R_supp) return 0.0;
  return rho_of_potential(model, psi_at(radius), radius);
}

double AnsatzState::f0(double radius, double u, double w) const {
  if (compact && radius >= R_supp) return 0.0;
  return ansatz_f(model, psi_at(radius), radius, u, w);
}

double AnsatzState::v_escape() const { return std::sqrt(2.0 * central_psi); }

double AnsatzState::dynamical_time() const {
  const double R = compact ? R_supp : r.back();
  return 2.0 * kPi * std::sqrt(R * R * R / mass);
}

namespace {

AnsatzState solve_impl(const CasimirModel& model, double central_psi, const SolverOptions& opts, bool with_report) {
  check_model(model, opts.allow_out_of_range);
  if (!(central_psi > 0.0)) throw std::domain_error("central psi must be positive");

  const double l = model.l;
  const double h0 = density_h(model, central_psi);
  const double a = std::pow(central_psi / (4.0 * kPi * h0), 1.0 / (2.0 * l + 2.0));
  const double m_scale = central_psi * a;

  AnsatzState st;
  st.model = model;
  st.central_psi = central_psi;
  st.core_scale = a;
  st.admissible = model.exponents_in_range();

  const MomentTables tables(model, central_psi);
  auto density = [&](double psi, double r) {
    return model.single_power() ? rho_of_potential(model, psi, r) : tables(Moment::Density, psi, r);
  };

  // Scaled variables y = (psi / psi0, m / m_scale).
  using State = std::array<double, 2>;
  auto rhs = [&](const State& y, State& dy, double r) {
    const double psi = y[0] * central_psi;
    const double mm = y[1] * m_scale;
    dy[0] = -mm / (r * r) / central_psi;
    dy[1] = 4.0 * kPi * r * r * density(psi, r) / m_scale;
  };

  const double r0 = opts.start_fraction * a;
  State y;
  {
    const double s = 4.0 * kPi * h0 * std::pow(r0, 2.0 * l + 2.0);
    y[0] = 1.0 - s / ((2.0 * l + 3.0) * (2.0 * l + 2.0)) / central_psi;
    y[1] = s * r0 / (2.0 * l + 3.0) / m_scale;
  }

  namespace odeint = boost::numeric::odeint;
  using Stepper = odeint::runge_kutta_dopri5<State>;
  auto controlled = odeint::make_controlled<Stepper>(opts.rtol, opts.rtol);
  Stepper plain;

  st.r = {0.0};
  st.U = {0.0};  // filled after E0 is known; temporarily holds psi
  st.m = {0.0};
  st.rho = {l > 0.0 ? 0.0 : (l == 0.0 ? h0 : std::numeric_limits<double>::infinity())};
  auto push = [&](double r, const State& s) {
    st.r.push_back(r);
    st.U.push_back(s[0] * central_psi);
    st.m.push_back(s[1] * m_scale);
    st.rho.push_back(density(s[0] * central_psi, r));
  };
  push(r0, y);

  const double r_limit = opts.r_max_factor * a;
  double r = r0;
  double dt = r0;
  bool found_edge = false;
  while (true) {
    if (st.steps + st.rejected_steps > opts.max_steps) {
      std::ostringstream os;
      os << "steady ODE exceeded step budget at r = " << r;
      throw std::runtime_error(os.str());
    }
    const double cap = opts.max_step_fraction * std::max(r, a);
    dt = std::min(dt, cap);
    if (r + dt > r_limit) dt = r_limit - r;
    State trial = y;
    double t = r;
    double step = dt;
    const auto res = controlled.try_step(rhs, trial, t, step);
    if (res == odeint::fail) {
      ++st.rejected_steps;
      dt = step;
      if (!(dt > 1e-14 * r)) {
        std::ostringstream os;
        os << "steady ODE step size underflow at r = " << r;
        throw std::runtime_error(os.str());
      }
      continue;
    }
    ++st.steps;
    if (trial[0] <= 0.0) {
      // Locate psi = 0 inside [r, t]: bracket on the cubic Hermite of psi,
      // then polish with exact single steps and Newton on psi' = -m / r^2.
      State dy0, dy1;
      rhs(y, dy0, r);
      rhs(trial, dy1, t);
      double lo = r, hi = t;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = hermite(r, t, y[0], trial[0], dy0[0], dy1[0], mid);
        if (v > 0.0) lo = mid; else hi = mid;
      }
      double R = 0.5 * (lo + hi);
      State edge = y;
      State dy_start, dy_end;
      rhs(y, dy_start, r);
      auto step_to = [&](double target) {
        plain.do_step(rhs, y, dy_start, r, edge, dy_end, target - r);
      };
      for (int it = 0; it < 8; ++it) {
        step_to(R);
        const double slope = -edge[1] * m_scale / (R * R) / central_psi;
        const double next = R - edge[0] / slope;
        if (std::abs(next - R) <= 1e-15 * R) {
          R = next;
          break;
        }
        R = std::clamp(next, r + 1e-3 * (t - r), t);
      }
      step_to(R);
      edge[0] = 0.0;
      push(R, edge);
      found_edge = true;
      break;
    }
    y = trial;
    r = t;
    push(r, y);
    dt = step;
    if (r >= r_limit * (1.0 - 1e-14)) break;
  }

  const double psi_end = st.U.back();
  st.mass = st.m.back();
  if (found_edge) {
    st.compact = true;
    st.R_supp = st.r.back();
    st.E0 = -st.mass / st.R_supp;
  } else {
    st.compact = false;
    st.R_supp = std::numeric_limits<double>::infinity();
    st.E0 = psi_end - st.mass / st.r.back();
    st.note = "support not closed within the radial cut-off";
  }
  st.U[0] = central_psi;
  for (double& v : st.U) v = st.E0 - v;
  st.rho.back() = found_edge ? 0.0 : st.rho.back();
  if (with_report) st.report = steady_functionals(st);
  return st;
}

}  // namespace

AnsatzState solve_steady(const CasimirModel& model, double central_psi, const SolverOptions& opts) {
  return solve_impl(model, central_psi, opts, true);
}

AnsatzState match_mass(const CasimirModel& model, double target, const SolverOptions& opts) {
  if (!(target > 0.0)) throw std::domain_error("target mass must be positive");
  check_model(model, opts.allow_out_of_range);
  std::string diagnostics;
  bool any_compact = false;
  auto log_mass = [&](double x) {
    const AnsatzState s = solve_impl(model, std::exp(x), opts, false);
    if (s.compact) any_compact = true;
    else diagnostics += "psi0=" + std::to_string(std::exp(x)) + ": " + s.note + "; ";
    return std::log(s.mass) - std::log(target);
  };

  double x0 = 0.0;
  double f0 = log_mass(x0);
  double x1 = 0.5;
  double f1 = log_mass(x1);
  if (f0 == f1) throw std::runtime_error("match_mass: mass independent of central psi");
  // Step in the direction that reduces |f|, doubling until the sign changes.
  const bool increasing = f1 > f0;
  double step = (f0 < 0.0) == increasing ? 1.0 : -1.0;
  double xa = x0, fa = f0;
  double xb = x0, fb = f0;
  for (int it = 0; it < 60 && (fa < 0.0) == (fb < 0.0); ++it) {
    xa = xb;
    fa = fb;
    xb = xa + step;
    fb = log_mass(xb);
    step *= 1.6;
  }
  if ((fa < 0.0) == (fb < 0.0)) {
    throw std::runtime_error("match_mass: could not bracket the target mass. " + diagnostics);
  }
  if (fa == 0.0) return solve_steady(model, std::exp(xa), opts);
  if (fb == 0.0) return solve_steady(model, std::exp(xb), opts);
  if (xa > xb) {
    std::swap(xa, xb);
    std::swap(fa, fb);
  }
  std::uintmax_t max_iter = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(1.0, std::abs(a)); };
  auto [lo, hi] = boost::math::tools::toms748_solve(log_mass, xa, xb, fa, fb, tol, max_iter);
  AnsatzState st = solve_steady(model, std::exp(0.5 * (lo + hi)), opts);
  st.iterations = static_cast<int>(max_iter);
  if (!st.compact) {
    throw std::runtime_error("match_mass: state at the matched mass is non-compact. " + diagnostics);
  }
  (void)any_compact;
  return st;
}

FunctionalReport steady_functionals(const AnsatzState& s) {
  const CasimirModel& m = s.model;
  const ProfileView view{s};
  const MomentTables tables(m, s.central_psi);
  auto moment_integral = [&](Moment which) {
    return integrate_profile(s, [&](double r) {
      const double psi = view.psi(r);
      return 4.0 * kPi * r * r * tables(which, psi, r);
    });
  };
  FunctionalReport rep;
  rep.mass = s.m.back();
  rep.kinetic = moment_integral(Moment::KineticEnergy);
  rep.casimir = moment_integral(Moment::Casimir);
  rep.angular = m.gamma > 0.0 ? m.gamma * moment_integral(Moment::AngularMomentum) : 0.0;
  const double inner = integrate_profile(s, [&](double r) {
    if (r == 0.0) return 0.0;
    const double mm = view.mass(r);
    return mm * mm / (r * r);
  });
  rep.potential = -0.5 * inner - 0.5 * rep.mass * rep.mass / s.r.back();
  rep.assemble();
  return rep;
}

double virial_ratio(const AnsatzState& s) {
  const FunctionalReport& rep = s.report;
  return std::abs(2.0 * rep.kinetic + rep.potential) / std::abs(rep.potential);
}

ElResidual el_residual(const AnsatzState& s, double e0_shift) {
  const CasimirModel& m = s.model;
  const double R = s.r.back();
  // Independent Poisson solve of the tabulated density.
  const RadialGrid grid = RadialGrid::uniform(4097, R);
  std::vector<double> rho(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid.r()[i];
    rho[i] = r == 0.0 && m.l < 0.0 ? 0.0 : s.rho_at(r);
  }
  const Potential pot = potential_from_density(SpatialDensity(grid, rho));

  const double E0 = s.E0 + e0_shift;
  const double vmax = 1.1 * s.v_escape();
  const double r_outer = s.compact ? 2.0 * s.R_supp : R;
  ElResidual out;
  out.min_off_support = std::numeric_limits<double>::infinity();
  constexpr int nr = 64, nv = 32;
  for (int i = 1; i <= nr; ++i) {
    const double r = r_outer * i / nr;
    const double psi = s.compact && r >= s.R_supp ? -1.0 : s.psi_at(r);
    const double U0 = pot.at(r);
    const double beta = 0.5 + m.gamma * r * r;
    for (int j = 0; j <= nv; ++j) {
      const double u = -vmax + 2.0 * vmax * j / nv;
      for (int k = 0; k <= nv; ++k) {
        const double w = vmax * k / nv;
        const double E = 0.5 * (u * u + w * w) + U0;
        const double gL = m.gamma * r * r * w * w;
        const double y = psi - 0.5 * u * u - beta * w * w;
        if (y > 0.0) {
          const double qp = qprime_eval(m, qprime_inverse(m, y));
          out.sup_on_support = std::max(out.sup_on_support, std::abs(qp + E + gL - E0));
          ++out.support_points;
        } else {
          out.min_off_support = std::min(out.min_off_support, E + gL - E0);
          ++out.off_points;
        }
      }
    }
  }
  return out;
}

E0Check e0_consistency(const AnsatzState& s, double scale) {
  const CasimirModel& m = s.model;
  const ProfileView view{s};
  const VelocityIntegral qprime(2.0 * m.l + 2.0, scaled_qprime_function(m, scale), s.central_psi);
  const MomentTables tables(m, s.central_psi);
  const double qpart = integrate_profile(s, [&](double r) {
    const double psi = view.psi(r);
    if (!(psi > 0.0)) return 0.0;
    return 4.0 * kPi * r * r * moment_from(m, Moment::QprimeWeighted, r, qprime(psi), 0.0);
  });
  const double upart = integrate_profile(s, [&](double r) {
    const double psi = view.psi(r);
    const double rho = m.single_power() ? rho_of_potential(m, psi, r) : tables(Moment::Density, psi, r);
    return 4.0 * kPi * r * r * rho * (s.E0 - psi);
  });
  const double linear = s.report.kinetic + upart + (m.gamma > 0.0 ? s.report.angular : 0.0);
  E0Check out;
  out.value = (qpart + scale * linear) / s.mass;
  out.e0_negative = s.E0 < 0.0;
  out.mismatch = std::abs(out.value - s.E0) / std::abs(s.E0);
  return out;
}

AnsatzState scf_minimize(const CasimirModel& model, double target, const ScfOptions& opts) {
  check_model(model, false);
  if (!(target > 0.0)) throw std::domain_error("target mass must be positive");
  const double core = opts.core_scale > 0.0 ? opts.core_scale : opts.r_max / 20.0;
  const RadialGrid grid = RadialGrid::sinh_spaced(opts.nodes, opts.r_max, core);
  const auto& r = grid.r();
  const std::size_t n = r.size();

  std::vector<double> U(n);
  if (!opts.initial_U.empty()) {
    if (opts.initial_U.size() != n) throw std::invalid_argument("initial potential has wrong size");
    U = opts.initial_U;
  } else {
    const double b = opts.r_max / 10.0;
    for (std::size_t i = 0; i < n; ++i) U[i] = -target / std::sqrt(r[i] * r[i] + b * b);
  }

  // Moment tables cover psi up to twice the current potential depth and are
  // rebuilt when an iterate goes deeper; values beyond a table are computed directly.
  std::optional<MomentTables> tables;
  double table_top = 0.0;
  auto refresh_tables = [&](const std::vector<double>& pot) {
    const double depth = -*std::min_element(pot.begin(), pot.end());
    if (tables && depth <= table_top) return;
    table_top = 2.0 * std::max(depth, 1e-300);
    tables.emplace(model, table_top);
  };
  auto moment = [&](Moment which, double psi, double radius) {
    if (which == Moment::Density && model.single_power()) return rho_of_potential(model, psi, radius);
    return (*tables)(which, psi, radius);
  };
  auto density_for = [&](const std::vector<double>& pot, double E0) {
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) {
      rho[i] = (r[i] == 0.0 && model.l < 0.0) ? 0.0 : moment(Moment::Density, E0 - pot[i], r[i]);
    }
    return rho;
  };
  auto mass_for = [&](const std::vector<double>& pot, double E0) {
    const std::vector<double> rho = density_for(pot, E0);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = 4.0 * kPi * r[i] * r[i] * rho[i];
    return grid.axis().integral(g);
  };
  auto find_E0 = [&](const std::vector<double>& pot) {
    const double umin = *std::min_element(pot.begin(), pot.end());
    double lo = umin;
    double span = std::abs(umin) * 1e-3 + 1e-12;
    double hi = umin + span;
    while (mass_for(pot, hi) < target) {
      lo = hi;
      span *= 2.0;
      hi = umin + span;
      if (span > 1e12 * (std::abs(umin) + 1.0)) throw std::runtime_error("scf: cannot reach target mass");
    }
    std::uintmax_t iters = 200;
    auto f = [&](double e) { return mass_for(pot, e) - target; };
    auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(std::abs(a), std::abs(b)); };
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    return 0.5 * (a + b);
  };

  auto grid_D = [&](const std::vector<double>& pot, double E0, const SpatialDensity& dens) {
    auto moment_sum = [&](Moment which) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = 4.0 * kPi * r[i] * r[i] * moment(which, E0 - pot[i], r[i]);
      }
      return grid.axis().integral(g);
    };
    double D = moment_sum(Moment::KineticEnergy) + moment_sum(Moment::Casimir) + field_energy(dens);
    if (model.gamma > 0.0) D += model.gamma * moment_sum(Moment::AngularMomentum);
    return D;
  };

  AnsatzState st;
  st.model = model;
  st.admissible = model.exponents_in_range();
  double E0 = 0.0;
  double diff = INFINITY;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    refresh_tables(U);
    E0 = find_E0(U);
    SpatialDensity dens(grid, density_for(U, E0));
    const Potential cand = potential_from_density(dens);
    st.d_trace.push_back(grid_D(U, E0, dens));
    diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(cand.values[i] - U[i]));
    if (diff < opts.tolerance) break;
    for (std::size_t i = 0; i < n; ++i) U[i] = (1.0 - opts.damping) * U[i] + opts.damping * cand.values[i];
  }
  st.iterations = it + 1;
  if (!(diff < opts.tolerance)) {
    std::ostringstream os;
    os << "scf did not converge in " << opts.max_iterations << " iterations (last sup|dU| = " << diff
       << ", D trace end = " << st.d_trace.back() << ")";
    throw std::runtime_error(os.str());
  }

  // Assemble the state from the converged potential.
  SpatialDensity dens(grid, density_for(U, E0));
  const MassFunction mf = mass_function(dens);
  st.E0 = E0;
  st.central_psi = E0 - U[0];
  st.core_scale = core;
  std::size_t edge = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (E0 - U[i] <= 0.0) {
      edge = i;
      break;
    }
  }
  if (edge == n) throw std::runtime_error("scf: support reaches the grid boundary; enlarge r_max");
  // psi = E0 - U is cubic Hermite with slope -m / r^2; locate its zero.
  auto slope = [&](std::size_t i) { return r[i] == 0.0 ? 0.0 : -mf.values[i] / (r[i] * r[i]); };
  double lo = r[edge - 1], hi = r[edge];
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double v = hermite(r[edge - 1], r[edge], E0 - U[edge - 1], E0 - U[edge], slope(edge - 1), slope(edge), mid);
    if (v > 0.0) lo = mid; else hi = mid;
  }
  const double R = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < edge; ++i) {
    st.r.push_back(r[i]);
    st.U.push_back(U[i]);
    st.rho.push_back(dens.values[i]);
    st.m.push_back(mf.values[i]);
  }
  st.r.push_back(R);
  st.U.push_back(E0);
  st.rho.push_back(0.0);
  st.m.push_back(mf.at(R));
  st.R_supp = R;
  st.compact = true;
  st.mass = st.m.back();
  st.report = steady_functionals(st);
  return st;
}

std::vector<GammaScanEntry> gamma_support_scan(CasimirModel model, double central_psi,
                                               const std::vector<double>& gammas,
                                               const SolverOptions& opts) {
  std::vector<GammaScanEntry> out;
  for (double g : gammas) {
    model.gamma = g;
    const AnsatzState s = solve_steady(model, central_psi, opts);
    out.push_back({g, s.compact, s.compact ? s.R_supp : s.r.back(), s.mass});
  }
  return out;
}

PlummerCheck plummer_check(const AnsatzState& state) {
  PlummerCheck pc;
  const CasimirModel& m = state.model;
  pc.applicable = m.single_power() && m.k1 == 3.5 && m.l == 0.0 && m.gamma == 0.0;
  if (!pc.applicable) return pc;
  const double psi0 = state.central_psi;
  const double c = ansatz_constant(3.5, 0.0, m.c1);
  pc.a = std::sqrt(3.0 / (4.0 * kPi * c)) / (psi0 * psi0);
  pc.M_inf = psi0 * pc.a;
  // m(r)/M_inf = x^3 / (1 + x^2)^{3/2} with x = r / a reaches q at x = t / sqrt(1 - t^2), t = q^{1/3}.
  const double t = std::cbrt(0.999);
  pc.r_limit = pc.a * t / std::sqrt(1.0 - t * t);
  constexpr int samples = 4000;
  for (int i = 0; i <= samples; ++i) {
    const double r = pc.r_limit * i / samples;
    const double U = -pc.M_inf / std::sqrt(pc.a * pc.a + r * r);
    pc.max_rel_error = std::max(pc.max_rel_error, std::abs(state.U_at(r) - U) / std::abs(U));
  }
  return pc;
}

}  // namespace cammvp
