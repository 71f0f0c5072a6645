#include "cammvp/casimir.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cammvp {

CasimirModel CasimirModel::polytrope(double k, double l, double gamma, double c1) {
  CasimirModel m;
  m.c1 = c1;
  m.c2 = 0.0;
  m.k1 = k;
  m.k2 = k;
  m.l = l;
  m.gamma = gamma;
  return m;
}

double CasimirModel::k3() const { return c2 > 0.0 ? std::min(k1, k2) : k1; }

bool CasimirModel::exponents_in_range() const {
  const double top = l + 1.5;
  auto ok = [top](double k) { return k > 0.0 && k < top; };
  return ok(k1) && ok(k2) && ok(k3());
}

void CasimirModel::check_well_formed() const {
  for (double v : {c1, c2, k1, k2, l, gamma, f0_threshold}) {
    if (!std::isfinite(v)) throw std::invalid_argument("Casimir model has a non-finite field");
  }
  if (!(c1 > 0.0)) throw std::invalid_argument("Casimir model needs c1 > 0");
  if (c2 < 0.0) throw std::invalid_argument("Casimir model needs c2 >= 0");
  if (gamma < 0.0) throw std::invalid_argument("Casimir model needs gamma >= 0");
  if (!(l > -1.0)) throw std::invalid_argument("Casimir model needs l > -1");
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("Casimir exponents must be positive");
  if (!(f0_threshold > 0.0)) throw std::invalid_argument("F0 threshold must be positive");
}

namespace {

void require_nonnegative(double x, const char* what) {
  if (!(x >= 0.0)) throw std::domain_error(std::string(what) + " requires a nonnegative argument");
}

}  // namespace

double q_eval(const CasimirModel& m, double phi) {
  require_nonnegative(phi, "q_eval");
  if (phi == 0.0) return 0.0;
  double q = m.c1 * std::pow(phi, 1.0 + 1.0 / m.k1);
  if (m.c2 > 0.0) q += m.c2 * std::pow(phi, 1.0 + 1.0 / m.k2);
  return q;
}

double qprime_eval(const CasimirModel& m, double phi) {
  require_nonnegative(phi, "qprime_eval");
  if (phi == 0.0) return 0.0;
  double d = m.c1 * (1.0 + 1.0 / m.k1) * std::pow(phi, 1.0 / m.k1);
  if (m.c2 > 0.0) d += m.c2 * (1.0 + 1.0 / m.k2) * std::pow(phi, 1.0 / m.k2);
  return d;
}

double qsecond_eval(const CasimirModel& m, double phi) {
  require_nonnegative(phi, "qsecond_eval");
  if (phi == 0.0) {
    // Finite only when both exponents satisfy 1/k >= 1.
    auto term = [](double c, double k) {
      if (c == 0.0) return 0.0;
      if (k < 1.0) return 0.0;
      if (k == 1.0) return c * 2.0;
      return std::numeric_limits<double>::infinity();
    };
    return term(m.c1, m.k1) + term(m.c2, m.k2);
  }
  double d = m.c1 * (1.0 + 1.0 / m.k1) / m.k1 * std::pow(phi, 1.0 / m.k1 - 1.0);
  if (m.c2 > 0.0) d += m.c2 * (1.0 + 1.0 / m.k2) / m.k2 * std::pow(phi, 1.0 / m.k2 - 1.0);
  return d;
}

double qprime_inverse(const CasimirModel& m, double y) {
  require_nonnegative(y, "qprime_inverse");
  if (y == 0.0) return 0.0;
  const double a1 = m.c1 * (1.0 + 1.0 / m.k1);
  if (m.c2 == 0.0) return std::pow(y / a1, m.k1);
  const double a2 = m.c2 * (1.0 + 1.0 / m.k2);

  // Each term alone bounds the root from above, and at least one term carries
  // y/2 there, which bounds it from below. Newton runs on log Q' against log x,
  // which is close to linear, inside the bracket.
  double lo = std::log(std::min(std::pow(0.5 * y / a1, m.k1), std::pow(0.5 * y / a2, m.k2)));
  double hi = std::log(std::min(std::pow(y / a1, m.k1), std::pow(y / a2, m.k2)));
  const double target = std::log(y);
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double x = std::exp(t);
    const double q = qprime_eval(m, x);
    const double g = std::log(q) - target;
    if (g == 0.0) return x;
    if (g > 0.0) hi = t; else lo = t;
    double next = t - g / (x * qsecond_eval(m, x) / q);
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-16 * std::max(1.0, std::abs(next)) || hi - lo <= 1e-16 * std::max(1.0, std::abs(hi))) {
      return std::exp(next);
    }
    t = next;
  }
  return std::exp(t);
}

AssumptionReport validate_assumptions(const CasimirModel& m) {
  AssumptionReport rep;
  const double top = m.l + 1.5;
  {
    std::ostringstream os;
    auto check = [&](const char* name, double k) {
      if (!(k > 0.0 && k < top)) {
        rep.range_ok = false;
        os << name << " = " << k << " outside (0, l + 3/2 = " << top << "); ";
      }
    };
    check("k1", m.k1);
    check("k2", m.k2);
    check("k3", m.k3());
    rep.range_note = os.str();
  }

  std::vector<double> phis;
  for (int i = 0; i <= 160; ++i) phis.push_back(std::pow(10.0, -8.0 + 9.0 * i / 160.0));  // up to 10
  std::vector<double> lambdas;
  for (int i = 0; i <= 80; ++i) lambdas.push_back(std::pow(10.0, -6.0 * (1.0 - i / 80.0)));
  for (int i = 1; i < 40; ++i) lambdas.push_back(i / 40.0);

  // (Q1) with C1 = c1; for l = 0 only phi >= F0 matters, both are checked.
  rep.C1 = m.c1;
  rep.q1.margin = std::numeric_limits<double>::infinity();
  for (double phi : phis) {
    if (m.l == 0.0 && phi < m.f0_threshold) continue;
    const double q = q_eval(m, phi);
    const double lower = m.c1 * std::pow(phi, 1.0 + 1.0 / m.k1);
    const double slack = (q - lower) / std::max(q, 1e-300);
    if (slack < rep.q1.margin) {
      rep.q1.margin = slack;
      rep.q1.witness_phi = phi;
    }
  }
  if (rep.q1.margin < -1e-12) rep.q1.passed = false;
  if (!std::isfinite(rep.q1.margin)) rep.q1.margin = 0.0;
  if (m.l == 0.0) rep.q1.note = "checked for phi >= F0";

  // (Q2): sup of Q(phi)/phi^{1+1/k2} on (0, F0]. For the power family the
  // ratio is c1 phi^{1/k1-1/k2} + c2, bounded iff k1 <= k2 or c1 == 0.
  {
    const double e = 1.0 / m.k1 - 1.0 / m.k2;
    double sup = 0.0;
    double arg = 0.0;
    for (double t : phis) {
      const double phi = t / 10.0 * m.f0_threshold;
      const double ratio = q_eval(m, phi) / std::pow(phi, 1.0 + 1.0 / m.k2);
      if (ratio > sup) {
        sup = ratio;
        arg = phi;
      }
    }
    if (e < 0.0) {
      rep.q2.passed = false;
      rep.q2.witness_phi = arg;
      rep.q2.margin = -sup;
      rep.q2.note = "Q(phi)/phi^{1+1/k2} unbounded as phi -> 0 (k1 > k2)";
    } else {
      const double exact = m.c1 * std::pow(m.f0_threshold, e) + m.c2;
      rep.C2 = std::max(exact, sup);
      rep.q2.witness_phi = arg;
      rep.q2.margin = 0.0;
    }
  }

  // (Q3) on a (phi, lambda) lattice with the model's k3.
  {
    const double p = 1.0 + 1.0 / m.k3();
    rep.q3.margin = std::numeric_limits<double>::infinity();
    for (double phi : phis) {
      const double q = q_eval(m, phi);
      for (double lam : lambdas) {
        const double lhs = q_eval(m, lam * phi);
        const double rhs = std::pow(lam, p) * q;
        const double slack = (lhs - rhs) / std::max(lhs, 1e-300);
        if (slack < rep.q3.margin) {
          rep.q3.margin = slack;
          rep.q3.witness_phi = phi;
          rep.q3.witness_lambda = lam;
        }
      }
    }
    if (rep.q3.margin < -1e-12) rep.q3.passed = false;
  }

  // (Q4): Q'' > 0 on (0, inf) and Q'(0) = 0 hold for every positive
  // exponent with c1 > 0, c2 >= 0.
  rep.q4.passed = m.c1 > 0.0 && m.c2 >= 0.0 && m.k1 > 0.0 && (m.c2 == 0.0 || m.k2 > 0.0);
  rep.q4.note = "power form: Q'' > 0 for f > 0, Q'(0) = 0";
  return rep;
}

std::string describe(const CasimirModel& m) {
  std::ostringstream os;
  os << "c1=" << m.c1 << " c2=" << m.c2 << " k1=" << m.k1 << " k2=" << m.k2 << " l=" << m.l
     << " gamma=" << m.gamma;
  return os.str();
}

}  // namespace cammvp
