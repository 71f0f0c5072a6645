#include "cammvp/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace cammvp {

std::string_view to_string(NodeRule rule) {
  return rule == NodeRule::Cubic ? "cubic" : "trapezoid";
}

NodeRule node_rule_from_string(std::string_view name) {
  if (name == "cubic") return NodeRule::Cubic;
  if (name == "trapezoid") return NodeRule::Trapezoid;
  throw std::invalid_argument("unknown quadrature rule '" + std::string(name) + "'");
}

namespace {

// Integral over [a, b] of the Lagrange basis polynomials through x[0..3].
// Three-point Gauss-Legendre is exact for the cubic basis.
std::array<double, 4> cubic_cell_weights(const double* x, double a, double b) {
  static constexpr std::array<double, 3> gx = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> gw = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  std::array<double, 4> w{};
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int q = 0; q < 3; ++q) {
    const double t = mid + half * gx[q];
    for (int j = 0; j < 4; ++j) {
      double basis = 1.0;
      for (int m = 0; m < 4; ++m) {
        if (m != j) basis *= (t - x[m]) / (x[j] - x[m]);
      }
      w[j] += half * gw[q] * basis;
    }
  }
  return w;
}

}  // namespace

AxisRule::AxisRule(std::vector<double> nodes, NodeRule rule)
    : nodes_(std::move(nodes)), rule_(rule) {
  const std::size_t n = nodes_.size();
  if (n < 2) throw std::invalid_argument("AxisRule needs at least two nodes");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(nodes_[i] > nodes_[i - 1])) {
      throw std::invalid_argument("AxisRule nodes must be strictly increasing");
    }
  }
  if (n < 4) rule_ = NodeRule::Trapezoid;
  cells_.resize(n - 1);
  weights_.assign(n, 0.0);
  for (std::size_t c = 0; c + 1 < n; ++c) {
    Cell& cell = cells_[c];
    if (rule_ == NodeRule::Trapezoid) {
      const double h = nodes_[c + 1] - nodes_[c];
      cell.first = c;
      cell.count = 2;
      cell.weight = {0.5 * h, 0.5 * h, 0.0, 0.0};
    } else {
      const std::size_t first = std::min<std::size_t>(c == 0 ? 0 : c - 1, n - 4);
      cell.first = first;
      cell.count = 4;
      cell.weight = cubic_cell_weights(&nodes_[first], nodes_[c], nodes_[c + 1]);
    }
    for (int j = 0; j < cell.count; ++j) weights_[cell.first + j] += cell.weight[j];
  }
}

double AxisRule::integral(std::span<const double> g) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) sum += weights_[i] * g[i];
  return sum;
}

std::vector<double> AxisRule::cumulative(std::span<const double> g) const {
  std::vector<double> out(nodes_.size(), 0.0);
  double acc = 0.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const Cell& cell = cells_[c];
    double s = 0.0;
    for (int j = 0; j < cell.count; ++j) s += cell.weight[j] * g[cell.first + j];
    acc += s;
    out[c + 1] = acc;
  }
  return out;
}

std::vector<double> AxisRule::cumulative_from_end(std::span<const double> g) const {
  std::vector<double> out(nodes_.size(), 0.0);
  double acc = 0.0;
  for (std::size_t c = cells_.size(); c-- > 0;) {
    const Cell& cell = cells_[c];
    double s = 0.0;
    for (int j = 0; j < cell.count; ++j) s += cell.weight[j] * g[cell.first + j];
    acc += s;
    out[c] = acc;
  }
  return out;
}

std::vector<double> AxisRule::cumulative_adjoint(std::span<const double> y) const {
  const std::size_t n = nodes_.size();
  // suffix[c] = sum_{k >= c+1} y[k]; cell c contributes to every cumulative
  // value with index k > c.
  std::vector<double> out(n, 0.0);
  double suffix = 0.0;
  for (std::size_t c = cells_.size(); c-- > 0;) {
    suffix += y[c + 1];
    const Cell& cell = cells_[c];
    for (int j = 0; j < cell.count; ++j) out[cell.first + j] += cell.weight[j] * suffix;
  }
  return out;
}

std::size_t AxisRule::cell_of(double x) const {
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  std::size_t idx = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return std::min(idx, nodes_.size() - 2);
}

double AxisRule::interpolate(std::span<const double> values, double x) const {
  const std::size_t c = cell_of(x);
  if (rule_ == NodeRule::Trapezoid) {
    const double t = (x - nodes_[c]) / (nodes_[c + 1] - nodes_[c]);
    return (1.0 - t) * values[c] + t * values[c + 1];
  }
  const std::size_t first = cells_[c].first;
  double sum = 0.0;
  for (int j = 0; j < 4; ++j) {
    double basis = 1.0;
    for (int m = 0; m < 4; ++m) {
      if (m != j) basis *= (x - nodes_[first + m]) / (nodes_[first + j] - nodes_[first + m]);
    }
    sum += basis * values[first + j];
  }
  return sum;
}

double hermite(double x0, double x1, double y0, double y1, double d0, double d1, double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  spare_ = rad * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return rad * std::cos(2.0 * std::numbers::pi * u2);
}

HaltonSequence::HaltonSequence(int dimension, std::uint64_t seed) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (dimension < 1 || dimension > 10) throw std::invalid_argument("Halton dimension out of range");
  Rng rng(seed);
  for (int d = 0; d < dimension; ++d) {
    bases_.push_back(primes[d]);
    shift_.push_back(rng.uniform());
  }
}

double HaltonSequence::coordinate(std::uint64_t index, int dim) const {
  const int base = bases_[dim];
  double f = 1.0;
  double value = 0.0;
  std::uint64_t i = index + 1;
  while (i > 0) {
    f /= base;
    value += f * static_cast<double>(i % base);
    i /= base;
  }
  value += shift_[dim];
  return value - std::floor(value);
}

std::vector<double> HaltonSequence::point(std::uint64_t index) const {
  std::vector<double> p(bases_.size());
  for (std::size_t d = 0; d < bases_.size(); ++d) p[d] = coordinate(index, static_cast<int>(d));
  return p;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_exact(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    // inf / nan spellings
    std::string s(first, last);
    if (s == "inf" || s == "infinity") return INFINITY;
    if (s == "-inf" || s == "-infinity") return -INFINITY;
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace cammvp
