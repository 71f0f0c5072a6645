#include "cammvp/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace cammvp {

namespace {

constexpr double kPi = std::numbers::pi;

bool shell_less(const Particle& a, const Particle& b) { return a.r < b.r || (a.r == b.r && a.id < b.id); }

}  // namespace

double ParticleEnsemble::total_mass() const {
  std::vector<double> w(particles.size(), 0.0);
  for (const Particle& p : particles) {
    if (p.id >= w.size()) throw std::logic_error("particle id out of range");
    w[p.id] = p.w;
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  return sum;
}

std::vector<double> ParticleEnsemble::L_by_id() const {
  std::vector<double> L(particles.size(), 0.0);
  for (const Particle& p : particles) L.at(p.id) = p.L;
  return L;
}

namespace {

// Insertion sort that gives up after `budget` element moves.
bool insertion_sort(std::vector<Particle>& p, std::size_t budget, std::size_t& moves) {
  const std::size_t n = p.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (!shell_less(p[i], p[i - 1])) continue;
    const Particle x = p[i];
    std::size_t j = i;
    while (j > 0 && shell_less(x, p[j - 1])) {
      p[j] = p[j - 1];
      --j;
      ++moves;
    }
    p[j] = x;
    if (moves > budget) return false;
  }
  return true;
}

}  // namespace

std::size_t sort_shells(std::vector<Particle>& p) {
  const std::size_t n = p.size();
  std::size_t moves = 0;
  if (n < 4096) {
    if (insertion_sort(p, 8 * n + 1024, moves)) return moves;
    std::sort(p.begin(), p.end(), shell_less);
    return moves;
  }
  // Counting sort into radius buckets of the current range, then an insertion
  // pass that only moves shells within their bucket. The outermost 0.1% go to
  // an overflow bucket that is sorted directly.
  std::vector<double> probe;
  probe.reserve(1024);
  for (std::size_t i = 0; i < n; i += n / 1024 + 1) probe.push_back(p[i].r);
  std::sort(probe.begin(), probe.end());
  const double r_cut = 1.01 * probe[std::min(probe.size() - 1, probe.size() * 999 / 1000)];
  if (n >= (std::size_t{1} << 31)) throw std::length_error("too many shells for the bucket sort");
  const std::size_t nb = n;
  const double scale = static_cast<double>(nb) / r_cut;
  auto bucket = [&](double r) {
    const double b = r * scale;
    if (!(b > 0.0)) return std::size_t{0};
    return b >= static_cast<double>(nb) ? nb : static_cast<std::size_t>(b);
  };
  thread_local std::vector<std::uint32_t> key;
  thread_local std::vector<std::uint32_t> start;
  thread_local std::vector<Particle> out;
  key.resize(n);
  start.assign(nb + 2, 0);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    key[i] = static_cast<std::uint32_t>(bucket(p[i].r));
    ++start[key[i] + 1];
  }
  for (std::size_t b = 0; b <= nb; ++b) start[b + 1] += start[b];
  const std::size_t overflow_begin = start[nb];
  for (std::size_t i = 0; i < n; ++i) out[start[key[i]]++] = p[i];
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(overflow_begin), out.end(), shell_less);
  p.swap(out);
  insertion_sort(p, std::numeric_limits<std::size_t>::max(), moves);
  return moves;
}

namespace {

// Both prefix sums add the weights in the same fixed blocks, so the serial
// reference and the threaded kernel round identically.
struct Blocks {
  std::size_t count, len;
};

Blocks mass_blocks(std::size_t n) {
  constexpr std::size_t kBlocks = 64;
  const std::size_t nb = std::max<std::size_t>(1, std::min(kBlocks, n / 256));
  return {nb, (n + nb - 1) / nb};
}

}  // namespace

void shell_mass_serial(const std::vector<Particle>& p, std::vector<double>& m) {
  const std::size_t n = p.size();
  m.resize(n);
  const Blocks bl = mass_blocks(n);
  std::vector<double> offset(bl.count + 1, 0.0);
  for (std::size_t b = 0; b < bl.count; ++b) {
    double s = 0.0;
    const std::size_t end = std::min(n, (b + 1) * bl.len);
    for (std::size_t i = b * bl.len; i < end; ++i) s += p[i].w;
    offset[b + 1] = s;
  }
  for (std::size_t b = 0; b < bl.count; ++b) offset[b + 1] += offset[b];
  for (std::size_t b = 0; b < bl.count; ++b) {
    double acc = offset[b];
    const std::size_t end = std::min(n, (b + 1) * bl.len);
    for (std::size_t i = b * bl.len; i < end; ++i) {
      m[i] = acc + 0.5 * p[i].w;
      acc += p[i].w;
    }
  }
}

void shell_mass_parallel(const std::vector<Particle>& p, std::vector<double>& m) {
  const std::size_t n = p.size();
  m.resize(n);
  const Blocks bl = mass_blocks(n);
  const std::size_t nb = bl.count, len = bl.len;
  std::vector<double> offset(nb + 1, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < nb; ++b) {
    double s = 0.0;
    const std::size_t end = std::min(n, (b + 1) * len);
    for (std::size_t i = b * len; i < end; ++i) s += p[i].w;
    offset[b + 1] = s;
  }
  for (std::size_t b = 0; b < nb; ++b) offset[b + 1] += offset[b];
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < nb; ++b) {
    double acc = offset[b];
    const std::size_t end = std::min(n, (b + 1) * len);
    for (std::size_t i = b * len; i < end; ++i) {
      m[i] = acc + 0.5 * p[i].w;
      acc += p[i].w;
    }
  }
}

namespace {

// Enclosed mass, acceleration and an optional kick u += kick * a in one pass.
void force_pass(ParticleEnsemble& ens, const ForceField& field, KernelMode mode, bool centrifugal, double kick) {
  auto& p = ens.particles;
  const std::size_t n = p.size();
  std::vector<double>& a = ens.accel;
  a.resize(n);
  const double c = centrifugal ? 1.0 : 0.0;
  const double e2 = field.softening * field.softening;
  const bool self = field.self_gravity();
  auto accel_of = [&](std::size_t i, double m) {
    const double r = p[i].r;
    if (e2 > 0.0) {
      const double s2 = r * r + e2;
      return c * p[i].L / (r * r * r) - m * r / (s2 * std::sqrt(s2));
    }
    return (c * p[i].L / r - m) / (r * r);
  };
  auto block = [&](std::size_t begin, std::size_t end, double acc) {
    for (std::size_t i = begin; i < end; ++i) {
      double m;
      if (self) {
        m = acc + 0.5 * p[i].w;
        acc += p[i].w;
      } else {
        m = field.external_mass(p[i].r);
      }
      a[i] = accel_of(i, m);
      p[i].u += kick * a[i];
    }
  };
  const Blocks bl = mass_blocks(n);
  const std::size_t nb = bl.count, len = bl.len;
  std::vector<double> offset(nb + 1, 0.0);
  auto block_sum = [&](std::size_t b) {
    double s = 0.0;
    const std::size_t end = std::min(n, (b + 1) * len);
    for (std::size_t i = b * len; i < end; ++i) s += p[i].w;
    offset[b + 1] = s;
  };
  if (mode == KernelMode::Serial) {
    if (self) {
      for (std::size_t b = 0; b < nb; ++b) block_sum(b);
      for (std::size_t b = 0; b < nb; ++b) offset[b + 1] += offset[b];
    }
    for (std::size_t b = 0; b < nb; ++b) block(b * len, std::min(n, (b + 1) * len), offset[b]);
    return;
  }
  if (self) {
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < nb; ++b) block_sum(b);
    for (std::size_t b = 0; b < nb; ++b) offset[b + 1] += offset[b];
  }
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < nb; ++b) block(b * len, std::min(n, (b + 1) * len), offset[b]);
}

}  // namespace

void accelerations(ParticleEnsemble& ens, const ForceField& field, KernelMode mode, bool centrifugal) {
  force_pass(ens, field, mode, centrifugal, 0.0);
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::Radial ? "radial" : "free-drift";
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "radial") return Integrator::Radial;
  if (name == "free-drift") return Integrator::FreeDrift;
  throw std::invalid_argument("unknown integrator '" + name + "'");
}

namespace {

// Exact motion under u^2/2 + L/(2 r^2): the shell follows a straight line in 3D.
inline void free_drift(Particle& p, double dt) {
  const double s = p.r + p.u * dt;
  const double inv = 1.0 / p.r;
  const double tang = p.L * inv * inv;
  const double r2 = s * s + tang * dt * dt;
  if (r2 > 0.0) {
    const double r = std::sqrt(r2);
    p.u = (p.u * s + tang * dt) / r;
    p.r = r;
  } else {
    p.u = std::abs(p.u);
    p.r = std::numeric_limits<double>::min();
  }
}

}  // namespace

StepStats step(ParticleEnsemble& ens, double dt, const ForceField& field, double eps_r, KernelMode mode,
               Integrator integrator) {
  auto& p = ens.particles;
  const std::size_t n = p.size();
  const bool centrifugal = integrator == Integrator::Radial;
  if (ens.accel.size() != n) accelerations(ens, field, mode, centrifugal);
  const double half = 0.5 * dt;
  const double floor_r = eps_r > 0.0 ? eps_r : std::numeric_limits<double>::min();
  std::size_t reflections = 0;
  const double* a = ens.accel.data();
  if (!centrifugal) {
    if (mode == KernelMode::Serial) {
      for (std::size_t i = 0; i < n; ++i) {
        p[i].u += half * a[i];
        free_drift(p[i], dt);
      }
    } else {
#pragma omp parallel for schedule(static)
      for (std::size_t i = 0; i < n; ++i) {
        p[i].u += half * a[i];
        free_drift(p[i], dt);
      }
    }
  } else if (mode == KernelMode::Serial) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i].u += half * a[i];
      p[i].r += dt * p[i].u;
      if (p[i].r < floor_r) {
        p[i].r = std::max(2.0 * floor_r - p[i].r, floor_r);
        p[i].u = -p[i].u;
        ++reflections;
      }
    }
  } else {
#pragma omp parallel for schedule(static) reduction(+ : reflections)
    for (std::size_t i = 0; i < n; ++i) {
      p[i].u += half * a[i];
      p[i].r += dt * p[i].u;
      if (p[i].r < floor_r) {
        p[i].r = std::max(2.0 * floor_r - p[i].r, floor_r);
        p[i].u = -p[i].u;
        ++reflections;
      }
    }
  }
  StepStats stats;
  stats.reflections = reflections;
  stats.sort_moves = sort_shells(p);
  force_pass(ens, field, mode, centrifugal, half);
  ens.t += dt;
  return stats;
}

double kinetic_energy(const ParticleEnsemble& ens) {
  double sum = 0.0;
  for (const Particle& p : ens.particles) sum += p.w * 0.5 * (p.u * p.u + p.L / (p.r * p.r));
  return sum;
}

double potential_energy(const ParticleEnsemble& ens, double softening) {
  std::vector<double> m;
  shell_mass_serial(ens.particles, m);
  const double e2 = softening * softening;
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = ens.particles[i].r;
    sum -= ens.particles[i].w * m[i] / (e2 > 0.0 ? std::sqrt(r * r + e2) : r);
  }
  return sum;
}

namespace {

double invert_mass(const AnsatzState& s, double target) {
  const auto& m = s.m;
  auto it = std::lower_bound(m.begin(), m.end(), target);
  if (it == m.end()) return s.r.back();
  const std::size_t hi = static_cast<std::size_t>(it - m.begin());
  if (hi == 0) return s.r.front();
  double lo_r = s.r[hi - 1], hi_r = s.r[hi];
  for (int it2 = 0; it2 < 100 && hi_r - lo_r > 1e-15 * hi_r; ++it2) {
    const double mid = 0.5 * (lo_r + hi_r);
    (s.m_at(mid) < target ? lo_r : hi_r) = mid;
  }
  return 0.5 * (lo_r + hi_r);
}

void finish_sample(ParticleEnsemble& ens) {
  std::sort(ens.particles.begin(), ens.particles.end(), shell_less);
  ens.accel.clear();
  ens.t = 0.0;
}

}  // namespace

ParticleEnsemble sample_from(const AnsatzState& state, std::size_t N, std::uint64_t seed) {
  if (N == 0) throw std::invalid_argument("sample size must be positive");
  if (!(state.mass > 0.0)) throw std::invalid_argument("source must have positive mass");
  const CasimirModel& model = state.model;
  const double l = model.l;
  const double M = state.m.back();
  const double weight = M / static_cast<double>(N);
  const double R = state.compact ? state.R_supp : state.r.back();
  HaltonSequence halton(1, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  constexpr int kMaxAttempts = 100000;

  ParticleEnsemble ens;
  ens.particles.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    double r = invert_mass(state, halton.coordinate(i, 0) * M);
    r = std::clamp(r, 1e-12 * R, R);
    const double psi = state.psi_at(r);
    const double aw = 0.5 + model.gamma * r * r;
    if (!(psi > 0.0)) throw std::runtime_error("sampled radius lies outside the support");
    const double u_max = std::sqrt(2.0 * psi);
    const double w_max = std::sqrt(psi / aw);
    const double g_max = qprime_inverse(model, psi);
    double u = 0.0, w = 0.0;
    int attempts = 0;
    for (;; ++attempts) {
      if (attempts >= kMaxAttempts)
        throw std::runtime_error("rejection efficiency below floor; adjust the velocity envelope");
      u = rng.uniform(-u_max, u_max);
      w = w_max * std::pow(rng.uniform(), 1.0 / (2.0 + 2.0 * l));
      const double y = psi - 0.5 * u * u - aw * w * w;
      if (y <= 0.0) continue;
      if (rng.uniform() * g_max < qprime_inverse(model, y)) break;
    }
    ens.particles[i] = Particle{r, u, r * r * w * w, weight, i};
  }
  finish_sample(ens);
  return ens;
}

ParticleEnsemble sample_from(const GridDensity& f, std::size_t N, std::uint64_t seed) {
  if (N == 0) throw std::invalid_argument("sample size must be positive");
  const double M = f.mass();
  if (!(M > 0.0)) throw std::invalid_argument("source must have positive mass");
  const auto& r = f.r_grid().r();
  const auto& u = f.u_axis().nodes();
  const auto& w = f.w_axis().nodes();
  const std::size_t cr = f.nr() - 1, cu = f.nu() - 1, cw = f.nw() - 1;

  auto corner_max = [&](std::size_t i, std::size_t j, std::size_t k) {
    double mx = 0.0;
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) mx = std::max(mx, f(i + di, j + dj, k + dk));
    return mx;
  };
  std::vector<double> cum(cr * cu * cw + 1, 0.0);
  std::size_t c = 0;
  for (std::size_t i = 0; i < cr; ++i)
    for (std::size_t j = 0; j < cu; ++j)
      for (std::size_t k = 0; k < cw; ++k, ++c) {
        const double vol = (r[i + 1] - r[i]) * (u[j + 1] - u[j]) * (w[k + 1] - w[k]);
        cum[c + 1] = cum[c] + corner_max(i, j, k) * r[i + 1] * r[i + 1] * w[k + 1] * vol;
      }
  const double total = cum.back();
  if (!(total > 0.0)) throw std::invalid_argument("grid source has no positive cells");

  Rng rng(seed);
  ParticleEnsemble ens;
  ens.particles.resize(N);
  const double weight = M / static_cast<double>(N);
  constexpr long kMaxAttempts = 10000000;
  for (std::size_t n = 0; n < N; ++n) {
    for (long attempts = 0;; ++attempts) {
      if (attempts >= kMaxAttempts)
        throw std::runtime_error("rejection efficiency below floor; adjust the grid envelope");
      const double x = rng.uniform() * total;
      std::size_t cell = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), x) - cum.begin());
      cell = std::clamp<std::size_t>(cell, 1, cum.size() - 1) - 1;
      const std::size_t k = cell % cw;
      const std::size_t j = (cell / cw) % cu;
      const std::size_t i = cell / (cw * cu);
      const double tr = rng.uniform(), tu = rng.uniform(), tw = rng.uniform();
      const double rr = r[i] + tr * (r[i + 1] - r[i]);
      const double uu = u[j] + tu * (u[j + 1] - u[j]);
      const double ww = w[k] + tw * (w[k + 1] - w[k]);
      double val = 0.0;
      for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
          for (int dk = 0; dk < 2; ++dk)
            val += (di ? tr : 1 - tr) * (dj ? tu : 1 - tu) * (dk ? tw : 1 - tw) * f(i + di, j + dj, k + dk);
      const double bound = corner_max(i, j, k) * r[i + 1] * r[i + 1] * w[k + 1];
      if (rng.uniform() * bound < val * rr * rr * ww && rr > 0.0) {
        ens.particles[n] = Particle{rr, uu, rr * rr * ww * ww, weight, n};
        break;
      }
    }
  }
  finish_sample(ens);
  return ens;
}

std::string to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::None: return "none";
    case PerturbationKind::VelocityDilation: return "dilation";
    case PerturbationKind::DensityModulation: return "modulation";
  }
  return "none";
}

PerturbationKind perturbation_from_string(const std::string& name) {
  if (name == "none") return PerturbationKind::None;
  if (name == "dilation") return PerturbationKind::VelocityDilation;
  if (name == "modulation") return PerturbationKind::DensityModulation;
  throw std::invalid_argument("unknown perturbation kind '" + name + "'");
}

double Modulation::operator()(double r) const { return std::cos(3.0 * kPi * r / R + phase) - offset; }

Modulation make_modulation(const AnsatzState& state, std::uint64_t seed) {
  Modulation g;
  g.R = state.compact ? state.R_supp : state.r.back();
  g.phase = seed == 0 ? 0.0 : 2.0 * kPi * Rng(seed).uniform();
  constexpr int cells = 256;
  double num = 0.0, den = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double a = g.R * c / cells, b = g.R * (c + 1) / cells;
    num += boost::math::quadrature::gauss<double, 7>::integrate(
        [&](double r) { return 4.0 * kPi * r * r * state.rho_at(r) * std::cos(3.0 * kPi * r / g.R + g.phase); }, a, b);
    den += boost::math::quadrature::gauss<double, 7>::integrate(
        [&](double r) { return 4.0 * kPi * r * r * state.rho_at(r); }, a, b);
  }
  g.offset = num / den;
  return g;
}

ParticleEnsemble perturb(const ParticleEnsemble& ens, const PerturbationSpec& spec, const AnsatzState& state) {
  if (spec.amplitude < 0.0) throw std::invalid_argument("perturbation amplitude must be non-negative");
  ParticleEnsemble out = ens;
  if (spec.kind == PerturbationKind::None || spec.amplitude == 0.0) return out;
  out.accel.clear();
  if (spec.kind == PerturbationKind::VelocityDilation) {
    for (Particle& p : out.particles) p.u *= 1.0 + spec.amplitude;
    return out;
  }
  const Modulation g = make_modulation(state, spec.seed);
  const double M = ens.total_mass();
  for (Particle& p : out.particles) {
    const double factor = 1.0 + spec.amplitude * g(p.r);
    if (!(factor > 0.0)) throw std::invalid_argument("modulation amplitude too large: weights turn negative");
    p.w *= factor;
  }
  const double scale = M / out.total_mass();
  for (Particle& p : out.particles) p.w *= scale;
  return out;
}

GridDensity perturb(const GridDensity& f0, const PerturbationSpec& spec, const AnsatzState& state) {
  if (spec.amplitude < 0.0) throw std::invalid_argument("perturbation amplitude must be non-negative");
  if (spec.kind == PerturbationKind::None || spec.amplitude == 0.0) return f0;
  const double M = f0.mass();
  GridDensity f = f0;
  if (spec.kind == PerturbationKind::VelocityDilation) {
    const double s = 1.0 + spec.amplitude;
    f = GridDensity::from_function(f0, [&](double r, double u, double w) { return state.f0(r, u / s, w) / s; });
  } else {
    const Modulation g = make_modulation(state, spec.seed);
    const auto& r = f.r_grid().r();
    for (std::size_t i = 0; i < f.nr(); ++i) {
      const double factor = 1.0 + spec.amplitude * g(r[i]);
      if (!(factor > 0.0)) throw std::invalid_argument("modulation amplitude too large: density turns negative");
      for (std::size_t j = 0; j < f.nu(); ++j)
        for (std::size_t k = 0; k < f.nw(); ++k) f(i, j, k) *= factor;
    }
  }
  const double scale = M / f.mass();
  for (double& v : f.values()) v *= scale;
  return f;
}

double steady_linear_term(const AnsatzState& state) {
  const FunctionalReport& rep = state.report;
  return rep.kinetic + 2.0 * rep.potential + rep.angular - state.E0 * rep.mass;
}

double sample_linear_term(const ParticleEnsemble& ens, const AnsatzState& state) {
  const double gamma = state.model.gamma;
  double sum = 0.0;
  for (const Particle& p : ens.particles) {
    const double E = 0.5 * (p.u * p.u + p.L / (p.r * p.r)) + state.U_at(p.r);
    sum += p.w * (E + gamma * p.L - state.E0);
  }
  return sum;
}

double particle_field_distance(const ParticleEnsemble& ens, const AnsatzState& state) {
  static constexpr double gx = 0.5773502691896257;
  const auto& p = ens.particles;
  auto piece = [&](double level, double a, double b) {
    if (!(b > a)) return 0.0;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (double x : {mid - half * gx, mid + half * gx}) {
      const double d = level - state.m_at(x);
      s += d * d / (x * x);
    }
    return half * s;
  };
  double sum = 0.0;
  double level = 0.0;
  double prev = 0.0;
  for (const Particle& q : p) {
    sum += piece(level, prev, q.r);
    level += q.w;
    prev = q.r;
  }
  const double R0 = state.compact ? state.R_supp : state.r.back();
  const double r_out = std::max(prev, R0);
  sum += piece(level, prev, r_out);
  const double dM = level - state.m_at(r_out);
  sum += dM * dM / r_out;
  return 4.0 * kPi * sum;
}

DiagnosticSample diagnostics(const ParticleEnsemble& ens, const DiagnosticContext& ctx) {
  if (!ctx.steady) throw std::invalid_argument("diagnostics need a steady state");
  DiagnosticSample s;
  s.t = ens.t;
  s.Ekin = kinetic_energy(ens);
  s.Epot = potential_energy(ens, ctx.softening);
  s.Etot = s.Ekin + s.Epot;
  s.d_surrogate = ctx.casimir_excess + sample_linear_term(ens, *ctx.steady) - ctx.reference;
  s.field_dist = particle_field_distance(ens, *ctx.steady);
  s.lyapunov_sum = s.d_surrogate + s.field_dist / (8.0 * kPi);
  s.mass = ens.total_mass();
  double drift = 0.0;
  if (!ctx.L0.empty())
    for (const Particle& p : ens.particles) drift = std::max(drift, std::abs(p.L - ctx.L0.at(p.id)));
  s.L_drift_max = drift;
  return s;
}

StabilityResult evolve(ParticleEnsemble& ens, const AnsatzState& state, const DiagnosticContext& ctx, double dt,
                       double t_end, int diag_every, KernelMode mode, double eps_r, Integrator integrator,
                       const SampleCallback& on_sample) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (diag_every < 1) throw std::invalid_argument("diagnostic cadence must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  StabilityResult res;
  res.dt = dt;
  res.t_dyn = state.dynamical_time();
  ForceField field;
  field.softening = ctx.softening;
  accelerations(ens, field, mode, integrator == Integrator::Radial);
  auto record = [&] {
    DiagnosticSample s = diagnostics(ens, ctx);
    if (on_sample) on_sample(s);
    res.series.push_back(s);
  };
  record();
  const double t0 = ens.t;
  const auto nsteps = static_cast<std::size_t>(std::llround((t_end - t0) / dt));
  for (std::size_t n = 1; n <= nsteps; ++n) {
    res.reflections += step(ens, dt, field, eps_r, mode, integrator).reflections;
    ens.t = t0 + static_cast<double>(n) * dt;
    if (n % static_cast<std::size_t>(diag_every) == 0 || n == nsteps) record();
  }
  res.steps = nsteps;

  const DiagnosticSample& first = res.series.front();
  res.initial_deviation = first.lyapunov_sum;
  res.max_deviation = -std::numeric_limits<double>::infinity();
  for (const auto& s : res.series) {
    res.max_deviation = std::max(res.max_deviation, s.lyapunov_sum);
    res.energy_drift = std::max(res.energy_drift, std::abs(s.Etot - first.Etot) / std::abs(first.Etot));
    res.max_L_drift = std::max(res.max_L_drift, s.L_drift_max);
    res.max_mass_drift = std::max(res.max_mass_drift, std::abs(s.mass - first.mass));
  }
  res.deviation_ratio = res.initial_deviation > 0.0 ? res.max_deviation / res.initial_deviation
                                                    : std::numeric_limits<double>::infinity();
  res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.note =
      "numerical evidence on a shell-particle approximation, not a proof of stability; "
      "the Casimir term is carried as the constant evaluated on the initial grid data";
  return res;
}

StabilitySetup prepare_stability(const SimConfig& config, const CasimirModel& model, double M,
                                 const PerturbationSpec& perturbation, const SolverOptions& solver) {
  if (config.N == 0) throw std::invalid_argument("particle count must be positive");
  StabilitySetup setup;
  setup.state = match_mass(model, M, solver);
  const AnsatzState& state = setup.state;
  const double t_dyn = state.dynamical_time();
  setup.dt = config.dynamical_units ? config.dt * t_dyn : config.dt;
  setup.t_end = config.dynamical_units ? config.t_end * t_dyn : config.t_end;
  const double R = state.compact ? state.R_supp : state.r.back();
  setup.eps_r = config.eps_r_fraction * R;
  setup.diag_every = config.diag_every;
  setup.mode = config.mode;
  setup.integrator = config.integrator;

  const ParticleEnsemble base = sample_from(state, config.N, config.seed);
  setup.ensemble = perturb(base, perturbation, state);

  DiagnosticContext& ctx = setup.context;
  ctx.reference = sample_linear_term(base, state);
  ctx.L0 = setup.ensemble.L_by_id();
  ctx.softening = config.softening_fraction * R;
  if (perturbation.kind != PerturbationKind::None && perturbation.amplitude != 0.0) {
    const double V = state.v_escape() * (1.0 + perturbation.amplitude);
    GridDensity layout = GridDensity::zeros(R, V, 17, 64, 48);
    const RadialGrid rg = RadialGrid::sinh_spaced(128, R, R / 4.0);
    layout = GridDensity(rg, layout.u_axis(), layout.w_axis(), std::vector<double>(rg.size() * 64 * 48, 0.0));
    const GridDensity f0 = grid_from_state(state, layout);
    const GridDensity fp = perturb(f0, perturbation, state);
    const FunctionalReport r0 = functional_report(f0, model);
    const FunctionalReport rp = functional_report(fp, model);
    ctx.casimir_excess = (rp.casimir + rp.angular) - (r0.casimir + r0.angular);
  }
  return setup;
}

StabilityResult evolve(StabilitySetup& setup, double t_end, const SampleCallback& on_sample) {
  setup.context.steady = &setup.state;
  StabilityResult res = evolve(setup.ensemble, setup.state, setup.context, setup.dt, t_end, setup.diag_every,
                               setup.mode, setup.eps_r, setup.integrator, on_sample);
  return res;
}

StabilityResult run_stability(const SimConfig& config, const CasimirModel& model, double M,
                              const PerturbationSpec& perturbation, const SolverOptions& solver,
                              const SampleCallback& on_sample) {
  StabilitySetup setup = prepare_stability(config, model, M, perturbation, solver);
  return evolve(setup, setup.t_end, on_sample);
}

}  // namespace cammvp
