#pragma once

#include <optional>
#include <string>

namespace cammvp {

/// Two-term power Casimir integrand Q(f) = c1 f^{1+1/k1} + c2 f^{1+1/k2}
/// together with the angular exponent l, the shift gamma and the threshold F0.
struct CasimirModel {
  double c1 = 1.0;
  double c2 = 0.0;
  double k1 = 1.0;
  double k2 = 1.0;
  double l = 0.0;
  double gamma = 0.0;
  double f0_threshold = 1.0;

  /// Single-power model; k2 mirrors k1 so every exponent-dependent formula
  /// sees a consistent pair.
  static CasimirModel polytrope(double k, double l, double gamma = 0.0, double c1 = 1.0);

  bool single_power() const { return c2 == 0.0; }
  double k3() const;
  /// True when 0 < k1, k2, k3 < l + 3/2.
  bool exponents_in_range() const;
  /// Throws std::invalid_argument when c1 <= 0, c2 < 0, gamma < 0, l <= -1,
  /// non-positive exponents or non-finite fields.
  void check_well_formed() const;
};

double q_eval(const CasimirModel& model, double phi);
double qprime_eval(const CasimirModel& model, double phi);
double qsecond_eval(const CasimirModel& model, double phi);
double qprime_inverse(const CasimirModel& model, double y);

struct AssumptionCheck {
  bool passed = true;
  double witness_phi = 0.0;
  double witness_lambda = 0.0;
  double margin = 0.0;  // most negative slack found; >= 0 on success
  std::string note;
};

struct AssumptionReport {
  bool range_ok = true;
  std::string range_note;
  AssumptionCheck q1, q2, q3, q4;
  double C1 = 0.0;
  std::optional<double> C2;

  bool passed() const { return range_ok && q1.passed && q2.passed && q3.passed && q4.passed; }
};

AssumptionReport validate_assumptions(const CasimirModel& model);

std::string describe(const CasimirModel& model);

}  // namespace cammvp
