#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cammvp {

/// Quadrature rule used for integrals of node-sampled data along one axis.
///
/// `Trapezoid` treats the integrand as piecewise linear. `Cubic` integrates,
/// cell by cell, the cubic Lagrange interpolant through four neighbouring
/// nodes (one-sided stencils at the ends), which is exact for cubics and
/// fourth-order accurate for smooth data. Both rules are linear in the data,
/// so every derived functional is a fixed linear or bilinear form.
enum class NodeRule { Trapezoid, Cubic };

std::string_view to_string(NodeRule rule);
NodeRule node_rule_from_string(std::string_view name);

class AxisRule {
 public:
  AxisRule() = default;
  AxisRule(std::vector<double> nodes, NodeRule rule);

  const std::vector<double>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  NodeRule rule() const { return rule_; }

  /// Node weights W with sum_i W_i g_i ~ integral of g over the axis.
  const std::vector<double>& weights() const { return weights_; }

  double integral(std::span<const double> g) const;

  /// out[k] = integral of g from nodes[0] to nodes[k].
  std::vector<double> cumulative(std::span<const double> g) const;

  /// out[k] = integral of g from nodes[k] to nodes.back(), summed from the end.
  std::vector<double> cumulative_from_end(std::span<const double> g) const;

  /// Transpose of the linear map g -> cumulative(g): out[i] = sum_k y[k] A[k][i].
  std::vector<double> cumulative_adjoint(std::span<const double> y) const;

  /// Interpolant consistent with the rule (cubic Lagrange or linear).
  double interpolate(std::span<const double> values, double x) const;

  /// Index c with nodes[c] <= x < nodes[c+1], clamped to valid cells.
  std::size_t cell_of(double x) const;

 private:
  struct Cell {
    std::size_t first = 0;
    int count = 0;
    std::array<double, 4> weight{};
  };

  std::vector<double> nodes_;
  NodeRule rule_ = NodeRule::Cubic;
  std::vector<Cell> cells_;
  std::vector<double> weights_;
};

/// Cubic Hermite interpolation on [x0, x1] given values and slopes.
double hermite(double x0, double x1, double y0, double y1, double d0, double d1,
               double x);

/// Deterministic 64-bit generator with platform-independent uniform/normal draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Randomly shifted Halton point set (bases 2, 3, 5, 7, ...).
class HaltonSequence {
 public:
  HaltonSequence(int dimension, std::uint64_t seed);
  /// Point i of the shifted sequence, each coordinate in [0, 1).
  std::vector<double> point(std::uint64_t index) const;
  double coordinate(std::uint64_t index, int dim) const;

 private:
  std::vector<int> bases_;
  std::vector<double> shift_;
};

/// 64-bit FNV-1a hash, used for file checksums.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t v);

/// Round-trip exact decimal representation of a double.
std::string format_exact(double v);
double parse_double(std::string_view text);

}  // namespace cammvp
