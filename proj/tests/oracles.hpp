#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cammvp/casimir.hpp"

namespace oracle {

inline constexpr double pi = boost::math::constants::pi<double>();

/// rho(psi, r) = int f0 dv by nested adaptive quadrature in (u, t = w^2),
/// with f0 = (Q')^{-1}(psi - u^2/2 - (1/2 + gamma r^2) w^2)_+ (r^2 w^2)^l.
inline double ansatz_density(const cammvp::CasimirModel& m, double psi, double r) {
  if (psi <= 0.0) return 0.0;
  boost::math::quadrature::tanh_sinh<double> ts;
  const double a = 0.5 + m.gamma * r * r;
  auto outer = [&](double u) {
    const double top = (psi - 0.5 * u * u) / a;
    if (top <= 0.0) return 0.0;
    auto inner = [&](double t) {
      const double arg = psi - 0.5 * u * u - a * t;
      if (arg <= 0.0) return 0.0;
      return cammvp::qprime_inverse(m, arg) * std::pow(r * r * t, m.l);
    };
    return ts.integrate(inner, 0.0, top);
  };
  // 2 pi w dw = pi dt; the u-integrand is even.
  return 2.0 * pi * ts.integrate(outer, 0.0, std::sqrt(2.0 * psi));
}

template <class F>
double integrate(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

/// Plummer sphere of total mass M and scale a.
struct Plummer {
  double M = 1.0;
  double a = 1.0;
  double rho(double r) const { return 3.0 * M / (4.0 * pi * a * a * a) * std::pow(1.0 + r * r / (a * a), -2.5); }
  double m(double r) const { return M * r * r * r / std::pow(r * r + a * a, 1.5); }
  double U(double r) const { return -M / std::sqrt(r * r + a * a); }
  /// Potential of the sphere truncated at R (density zero beyond R).
  double U_truncated(double r, double R) const {
    const double inner = std::pow(1.0 + r * r / (a * a), -1.5) - std::pow(1.0 + R * R / (a * a), -1.5);
    return (r > 0.0 ? -m(r) / r : 0.0) - M / a * inner;
  }
};

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  std::random_device rd;
  const auto p = std::filesystem::temp_directory_path() / ("cammvp_" + tag + "_" + std::to_string(rd()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
