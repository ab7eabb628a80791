#pragma once

// Units: positions are xi = k x, times are tau = omega_r t, and the imaginary
// potential V(xi) is measured in units of omega_r. The governing equation is
//
//   i d(phi)/d(tau) = [ -d^2/d(xi)^2 - i V(xi) ] phi,   V >= 0,
//
// with V = s sin^2(xi) for the resonant standing wave (s xi^2 near a node).

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "chisel/errors.hpp"

namespace chisel {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// Laboratory constants. Rates are in rad/s; Omega0 is given relative to Gamma.
struct PhysicalParams {
  double rabi_over_gamma = 0.0;     // Omega0 / Gamma
  double linewidth = 0.0;           // Gamma
  double recoil_frequency = 0.0;    // omega_r = k^2 / (2M)
  double wavenumber = 0.0;          // k (1/m)
  double velocity = 0.0;            // longitudinal beam velocity (m/s)
  double dv_longitudinal = 0.0;     // FWHM (m/s)
  double dv_transverse = 0.0;       // FWHM (m/s)
};

struct DimensionlessParams {
  double s = 0.0;            // Omega0^2 / (2 omega_r Gamma)
  double omega0_bar = 0.0;   // omega0 / omega_r = 2 sqrt(s)
  std::vector<std::string> warnings;

  static DimensionlessParams from_s(double s);
};

inline DimensionlessParams DimensionlessParams::from_s(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw ParameterError("absorption strength s must be positive and finite, got " +
                         std::to_string(s));
  }
  return {s, 2.0 * std::sqrt(s), {}};
}

/// Collapses the laboratory constants to the single coupling s.
inline DimensionlessParams reduce_params(const PhysicalParams& p) {
  if (!(p.rabi_over_gamma > 0.0) || !(p.linewidth > 0.0) || !(p.recoil_frequency > 0.0)) {
    throw ParameterError("Omega0, Gamma and omega_r must all be positive");
  }
  const double omega0 = p.rabi_over_gamma * p.linewidth;
  auto out = DimensionlessParams::from_s(omega0 * omega0 / (2.0 * p.recoil_frequency * p.linewidth));
  if (p.recoil_frequency / p.linewidth > 0.1) {
    out.warnings.push_back("omega_r/Gamma = " + std::to_string(p.recoil_frequency / p.linewidth) +
                           " exceeds 0.1; adiabatic elimination of the excited state is doubtful");
  }
  return out;
}

/// Convenience overload when only the ratios are known.
inline DimensionlessParams reduce_params(double rabi_over_gamma, double recoil_over_gamma) {
  PhysicalParams p;
  p.rabi_over_gamma = rabi_over_gamma;
  p.linewidth = 1.0;
  p.recoil_frequency = recoil_over_gamma;
  return reduce_params(p);
}

/// Exact tau -> infinity limit of the packet width, 2^{1/4} s^{-1/4}.
inline double exact_stationary_width(double s) { return std::pow(2.0, 0.25) * std::pow(s, -0.25); }

/// Periodic lattice of `periods` standing-wave periods (each of length pi in xi).
///
/// Samples run over [-P pi/2, P pi/2). The conjugate momentum comb has spacing
/// 2/P and uses FFT ordering, so kappa = 2n sits in bin n P (mod size).
class Grid {
 public:
  Grid() = default;
  Grid(int periods, int points_per_period) : periods_(periods), points_(points_per_period) {}

  int periods() const noexcept { return periods_; }
  int points_per_period() const noexcept { return points_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(periods_) * points_; }
  double dxi() const noexcept { return pi / points_; }
  double length() const noexcept { return periods_ * pi; }
  double xi(std::size_t j) const noexcept { return -0.5 * length() + static_cast<double>(j) * dxi(); }
  double dkappa() const noexcept { return 2.0 / periods_; }
  double kappa_max() const noexcept { return static_cast<double>(points_); }

  double kappa(std::size_t m) const noexcept {
    const auto n = static_cast<long>(size());
    auto k = static_cast<long>(m);
    if (k >= n / 2) k -= n;
    return static_cast<double>(k) * dkappa();
  }

  std::vector<double> xis() const {
    std::vector<double> out(size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = xi(j);
    return out;
  }

  std::vector<double> kappas() const {
    std::vector<double> out(size());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = kappa(m);
    return out;
  }

  /// Bin holding kappa = 2n. Requires |2n| < points_per_period.
  std::size_t order_bin(int n) const {
    if (2 * std::abs(n) >= points_) {
      throw ConfigError("diffraction order " + std::to_string(n) + " is beyond the momentum comb");
    }
    const long m = static_cast<long>(size());
    return static_cast<std::size_t>(((static_cast<long>(n) * periods_) % m + m) % m);
  }

  /// Bin holding an arbitrary on-comb momentum; throws if kappa is off the comb.
  std::size_t bin_of(double kappa_value) const {
    const double idx = kappa_value / dkappa();
    const double r = std::round(idx);
    if (std::abs(idx - r) > 1e-9 || std::abs(kappa_value) >= kappa_max()) {
      throw ConfigError("momentum " + std::to_string(kappa_value) + " is not on the grid comb");
    }
    const long m = static_cast<long>(size());
    return static_cast<std::size_t>(((static_cast<long>(r)) % m + m) % m);
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int periods_ = 1;
  int points_ = 8;
};

inline Grid make_grid(int periods, int points_per_period) {
  if (periods < 1) throw ConfigError("periods must be >= 1");
  if (points_per_period < 8) throw ConfigError("points_per_period must be >= 8");
  const auto total = static_cast<unsigned long>(periods) * static_cast<unsigned long>(points_per_period);
  if (!std::has_single_bit(total)) {
    throw ConfigError("total grid size " + std::to_string(total) + " is not a power of two");
  }
  return Grid(periods, points_per_period);
}

/// Rejects grids too coarse to hold the stationary packet (width >= 8 dxi).
inline void check_resolution(double s, const Grid& g) {
  const double w = exact_stationary_width(s);
  if (w < 8.0 * g.dxi()) {
    throw ConfigError("grid too coarse: stationary width " + std::to_string(w) + " < 8 dxi = " +
                      std::to_string(8.0 * g.dxi()) + "; raise points_per_period");
  }
}

// ---------------------------------------------------------------------------
// Potentials. Every variant describes V(xi) >= 0 in -i V(xi).

struct QuadraticImaginary {
  double s;
};
struct SinusoidalImaginary {
  double s;
};
/// V = 2 s_tilde (q xi / k)^{2n}.
struct PowerLaw {
  int n;
  double q_over_k;
  double s_tilde;
};
struct CustomPotential {
  std::vector<double> samples;
};

using PotentialSpec = std::variant<QuadraticImaginary, SinusoidalImaginary, PowerLaw, CustomPotential>;

inline double potential_at(const PotentialSpec& spec, double xi) {
  return std::visit(
      [xi](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, QuadraticImaginary>) {
          return v.s * xi * xi;
        } else if constexpr (std::is_same_v<T, SinusoidalImaginary>) {
          const double sn = std::sin(xi);
          return v.s * sn * sn;
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          return 2.0 * v.s_tilde * std::pow(v.q_over_k * xi, 2 * v.n);
        } else {
          throw ShapeError("custom potentials have no closed form; use sample_potential");
        }
      },
      spec);
}

inline std::vector<double> sample_potential(const PotentialSpec& spec, const Grid& g) {
  std::vector<double> out(g.size());
  if (const auto* c = std::get_if<CustomPotential>(&spec)) {
    if (c->samples.size() != g.size()) {
      throw ShapeError("custom potential has " + std::to_string(c->samples.size()) +
                       " samples, grid has " + std::to_string(g.size()));
    }
    out = c->samples;
  } else if (const auto* sn = std::get_if<SinusoidalImaginary>(&spec)) {
    // Exact zeros at integer multiples of pi: xi_j = (j - P N/2) pi / N.
    const long half = static_cast<long>(g.size() / 2);
    for (std::size_t j = 0; j < out.size(); ++j) {
      const long off = static_cast<long>(j) - half;
      if (off % g.points_per_period() == 0) {
        out[j] = 0.0;
      } else {
        const double v = std::sin(g.xi(j));
        out[j] = sn->s * v * v;
      }
    }
  } else {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = potential_at(spec, g.xi(j));
  }
  for (double v : out) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("potential must be finite and non-negative");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wave states.

/// Sampled wavefunction on a grid.
///
/// The physical amplitude is amplitudes * exp(log_scale / 2); renormalized runs
/// keep unit-norm amplitudes and push the lost norm into log_scale. A nonzero
/// quasimomentum q means the physical state is exp(i q xi) times the stored
/// periodic amplitudes.
struct WaveState {
  Grid grid;
  std::vector<cplx> amplitudes;
  double tau = 0.0;
  double quasimomentum = 0.0;
  double log_scale = 0.0;
  double reference_norm = 1.0;
};

inline double discrete_norm(std::span<const cplx> a, double dxi) {
  double acc = 0.0;
  for (const auto& z : a) acc += std::norm(z);
  return acc * dxi;
}

enum class InitialKind { uniform, plane_wave, custom };

struct InitialSpec {
  InitialKind kind = InitialKind::uniform;
  double kappa0 = 0.0;
  std::vector<cplx> samples;  // custom only
};

inline WaveState make_initial_state(const Grid& g, const InitialSpec& spec = {}) {
  WaveState st;
  st.grid = g;
  st.amplitudes.assign(g.size(), cplx{1.0, 0.0});
  switch (spec.kind) {
    case InitialKind::uniform:
      break;
    case InitialKind::plane_wave: {
      const auto m = g.bin_of(spec.kappa0);
      const double k0 = g.kappa(m);
      for (std::size_t j = 0; j < g.size(); ++j) st.amplitudes[j] = std::polar(1.0, k0 * g.xi(j));
      break;
    }
    case InitialKind::custom:
      if (spec.samples.size() != g.size()) throw ShapeError("custom initial state has the wrong length");
      st.amplitudes = spec.samples;
      break;
  }
  const double n = discrete_norm(st.amplitudes, g.dxi());
  if (!(n > 0.0) || !std::isfinite(n)) throw ParameterError("initial state must have finite nonzero norm");
  const double scale = 1.0 / std::sqrt(n);
  for (auto& z : st.amplitudes) z *= scale;
  st.reference_norm = 1.0;
  return st;
}

// ---------------------------------------------------------------------------
// FFT wrapper. Forward is the plain sum over exp(-2 pi i m j / n); inverse
// carries the 1/n factor.

class Spectral {
 public:
  explicit Spectral(std::size_t n) : n_(n), scratch_(n) {}

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<const cplx> in, std::span<cplx> out) {
    fft_.fwd(out.data(), in.data(), static_cast<Eigen::Index>(n_));
  }

  void inverse(std::span<const cplx> in, std::span<cplx> out) {
    fft_.inv(out.data(), in.data(), static_cast<Eigen::Index>(n_));
  }

  void forward_inplace(std::vector<cplx>& a) {
    forward(a, scratch_);
    a.swap(scratch_);
  }

  void inverse_inplace(std::vector<cplx>& a) {
    inverse(a, scratch_);
    a.swap(scratch_);
  }

 private:
  std::size_t n_;
  std::vector<cplx> scratch_;
  Eigen::FFT<double> fft_;
};

}  // namespace chisel
