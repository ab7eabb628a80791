#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "chisel/core.hpp"

namespace chisel {

struct EvolveConfig {
  double dtau = 1e-4;
  double tau_final = 0.0;
  int observer_stride = 0;  // 0: no intermediate snapshots
  bool renormalize = false;
};

/// Physical norm relative to the tau = 0 normalization.
inline double survival(const WaveState& st) {
  return discrete_norm(st.amplitudes, st.grid.dxi()) * std::exp(st.log_scale) / st.reference_norm;
}

inline double log_survival(const WaveState& st) {
  return std::log(discrete_norm(st.amplitudes, st.grid.dxi())) + st.log_scale - std::log(st.reference_norm);
}

namespace detail {

inline double max_abs_kappa(const Grid& g, double q) {
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g.kappa(i) + q));
  return m;
}

inline void check_step_guards(const Grid& g, std::span<const double> V, double dtau, double q) {
  if (!(dtau > 0.0) || !std::isfinite(dtau)) throw ConfigError("dtau must be positive");
  if (V.size() != g.size()) throw ShapeError("potential length does not match the grid");
  const double vmax = V.empty() ? 0.0 : *std::max_element(V.begin(), V.end());
  if (dtau * vmax >= 0.1) {
    throw ConfigError("potential step guard violated: dtau * max(V) = " + std::to_string(dtau * vmax) +
                      " (must be < 0.1)");
  }
  const double km = max_abs_kappa(g, q);
  if (dtau * km * km >= 0.5) {
    throw ConfigError("kinetic phase guard violated: dtau * kappa_max^2 = " + std::to_string(dtau * km * km) +
                      " (must be < 0.5)");
  }
}

}  // namespace detail

/// Strang split-step propagator for i d_tau phi = [-d_xi^2 - i V] phi.
///
/// Potential-first ordering: exp(-V dtau/2), kinetic exp(-i (kappa+q)^2 dtau)
/// in momentum space, exp(-V dtau/2).
class SplitStepper {
 public:
  SplitStepper(const Grid& g, std::span<const double> V, double dtau, double quasimomentum = 0.0)
      : grid_(g), dtau_(dtau), half_(g.size()), kinetic_(g.size()), fft_(g.size()) {
    detail::check_step_guards(g, V, dtau, quasimomentum);
    for (std::size_t j = 0; j < g.size(); ++j) half_[j] = std::exp(-0.5 * V[j] * dtau);
    for (std::size_t m = 0; m < g.size(); ++m) {
      const double k = g.kappa(m) + quasimomentum;
      kinetic_[m] = std::polar(1.0, -k * k * dtau);
    }
  }

  double dtau() const noexcept { return dtau_; }

  /// Advances the amplitudes by one step; returns the new discrete norm.
  double step(std::vector<cplx>& a) {
    for (std::size_t j = 0; j < a.size(); ++j) a[j] *= half_[j];
    fft_.forward_inplace(a);
    for (std::size_t m = 0; m < a.size(); ++m) a[m] *= kinetic_[m];
    fft_.inverse_inplace(a);
    for (std::size_t j = 0; j < a.size(); ++j) a[j] *= half_[j];
    return discrete_norm(a, grid_.dxi());
  }

 private:
  Grid grid_;
  double dtau_;
  std::vector<double> half_;
  std::vector<cplx> kinetic_;
  Spectral fft_;
};

namespace detail {

inline void check_finite(double norm, long step) {
  if (!std::isfinite(norm)) {
    throw BlowupError("numerical blow-up (non-finite norm) at step " + std::to_string(step), step);
  }
}

}  // namespace detail

inline WaveState split_step(const WaveState& state, std::span<const double> V, double dtau) {
  SplitStepper stepper(state.grid, V, dtau, state.quasimomentum);
  WaveState out = state;
  detail::check_finite(stepper.step(out.amplitudes), 0);
  out.tau += dtau;
  return out;
}

struct Trajectory {
  std::vector<WaveState> snapshots;  // tau = 0 first, then every observer_stride steps
  WaveState final_state;
  std::vector<double> taus;          // every step, starting at the initial tau
  std::vector<double> log_survival;  // matching taus
  std::vector<cplx> step_ratios;     // <psi_k | psi_{k+1}> / <psi_k | psi_k>, renormalized runs only
};

/// Number of equal steps used to reach `duration` with steps no longer than dtau.
inline long step_count(double duration, double dtau) {
  if (duration <= 0.0) return 0;
  return std::max(1L, static_cast<long>(std::ceil(duration / dtau - 1e-9)));
}

inline Trajectory evolve(const WaveState& initial, std::span<const double> V, const EvolveConfig& cfg) {
  if (!(cfg.tau_final >= 0.0)) throw ConfigError("tau_final must be >= 0");
  if (cfg.observer_stride < 0) throw ConfigError("observer_stride must be >= 0");
  Trajectory tr;
  tr.snapshots.push_back(initial);
  tr.taus.push_back(initial.tau);
  tr.log_survival.push_back(log_survival(initial));
  const long n = step_count(cfg.tau_final, cfg.dtau);
  if (n == 0) {
    detail::check_step_guards(initial.grid, V, cfg.dtau, initial.quasimomentum);
    tr.final_state = initial;
    return tr;
  }
  const double h = cfg.tau_final / static_cast<double>(n);
  SplitStepper stepper(initial.grid, V, h, initial.quasimomentum);
  WaveState st = initial;
  const double log_ref = std::log(st.reference_norm);
  std::vector<cplx> prev;
  for (long k = 1; k <= n; ++k) {
    if (cfg.renormalize) prev = st.amplitudes;
    const double norm = stepper.step(st.amplitudes);
    detail::check_finite(norm, k);
    if (!(norm > 0.0)) throw BlowupError("state underflowed to zero at step " + std::to_string(k), k);
    st.tau = initial.tau + h * static_cast<double>(k);
    if (cfg.renormalize) {
      cplx num{0.0, 0.0};
      double den = 0.0;
      for (std::size_t j = 0; j < prev.size(); ++j) {
        num += std::conj(prev[j]) * st.amplitudes[j];
        den += std::norm(prev[j]);
      }
      tr.step_ratios.push_back(num / den);
      const double scale = 1.0 / std::sqrt(norm);
      for (auto& z : st.amplitudes) z *= scale;
      st.log_scale += std::log(norm);
      tr.log_survival.push_back(st.log_scale - log_ref);
    } else {
      tr.log_survival.push_back(std::log(norm) + st.log_scale - log_ref);
    }
    tr.taus.push_back(st.tau);
    if (cfg.observer_stride > 0 && k % cfg.observer_stride == 0) tr.snapshots.push_back(st);
  }
  tr.final_state = std::move(st);
  return tr;
}

/// Kinetic term dropped: phi(xi, tau) = phi(xi, 0) exp(-V(xi) tau).
inline WaveState raman_nath_evolve(const WaveState& initial, std::span<const double> V, double tau) {
  if (V.size() != initial.grid.size()) throw ShapeError("potential length does not match the grid");
  WaveState out = initial;
  for (std::size_t j = 0; j < V.size(); ++j) out.amplitudes[j] *= std::exp(-V[j] * tau);
  out.tau += tau;
  return out;
}

// ---------------------------------------------------------------------------
// Open two-level model:
//   i d_tau psi_g = -d_xi^2 psi_g + (Omega/2) sin(xi) psi_e
//   i d_tau psi_e = -d_xi^2 psi_e + (Omega/2) sin(xi) psi_g - i (Gamma/2) psi_e
// with Omega, Gamma in units of omega_r.

struct TwoLevelState {
  Grid grid;
  std::vector<cplx> ground;
  std::vector<cplx> excited;
  double tau = 0.0;
};

inline TwoLevelState make_two_level_state(const WaveState& ground) {
  return {ground.grid, ground.amplitudes, std::vector<cplx>(ground.amplitudes.size()), ground.tau};
}

struct TwoLevelTrajectory {
  std::vector<TwoLevelState> snapshots;
  TwoLevelState final_state;
  std::vector<double> taus;
  std::vector<double> ground_norm;
  std::vector<double> total_norm;
};

struct TwoLevelOptions {
  bool kinetic = true;  // false drops both -d_xi^2 terms (local ODE per grid point)
};

namespace detail {

// exp(-i M h) for M = [[0, c], [c, -i g]]; written as e^{-g h/2} [cos(D h) - i sin(D h)/D N]
// with N = M + (i g/2) 1, N^2 = D^2 1, D^2 = c^2 - g^2/4.
struct Local2x2 {
  cplx m00, m01, m11;
};

inline Local2x2 local_propagator(double c, double g, double h) {
  const cplx d = std::sqrt(cplx(c * c - 0.25 * g * g, 0.0));
  const cplx dh = d * h;
  const cplx cs = std::cos(dh);
  const cplx sinc = std::abs(dh) < 1e-6 ? cplx(h) * (1.0 - dh * dh / 6.0) : std::sin(dh) / d;
  const double damp = std::exp(-0.5 * g * h);
  const cplx n00(0.0, 0.5 * g);
  return {damp * (cs - I * sinc * n00), damp * (-I * sinc * c), damp * (cs + I * sinc * n00)};
}

}  // namespace detail

inline TwoLevelTrajectory evolve_two_level(const TwoLevelState& initial, double rabi_over_gamma,
                                           double gamma_over_recoil, const EvolveConfig& cfg,
                                           const TwoLevelOptions& opt = {}) {
  if (!(gamma_over_recoil >= 10.0)) throw ConfigError("Gamma/omega_r must be >= 10 (omega_r << Gamma regime)");
  if (!(rabi_over_gamma >= 0.0)) throw ConfigError("Omega0/Gamma must be >= 0");
  const Grid& g = initial.grid;
  if (initial.ground.size() != g.size() || initial.excited.size() != g.size()) {
    throw ShapeError("two-level state does not match its grid");
  }
  const double gamma = gamma_over_recoil;
  const double omega = rabi_over_gamma * gamma_over_recoil;
  if (!(cfg.dtau > 0.0)) throw ConfigError("dtau must be positive");
  if (cfg.dtau * gamma >= 0.2) {
    throw ConfigError("stiffness guard violated: dtau * Gamma/omega_r = " + std::to_string(cfg.dtau * gamma) +
                      " (must be < 0.2)");
  }
  if (opt.kinetic && rabi_over_gamma > 0.0 && g.periods() % 2 != 0) {
    // The field amplitude sin(xi) has period 2 pi, twice the lattice period.
    throw ConfigError("two-level coupling needs an even number of periods");
  }
  if (opt.kinetic) {
    const double km = g.kappa_max();
    if (cfg.dtau * km * km >= 0.5) throw ConfigError("kinetic phase guard violated");
  }

  TwoLevelTrajectory tr;
  auto record = [&](const TwoLevelState& st) {
    const double ng = discrete_norm(st.ground, g.dxi());
    const double ne = discrete_norm(st.excited, g.dxi());
    tr.taus.push_back(st.tau);
    tr.ground_norm.push_back(ng);
    tr.total_norm.push_back(ng + ne);
    return ng + ne;
  };
  tr.snapshots.push_back(initial);
  record(initial);

  const long n = step_count(cfg.tau_final, cfg.dtau);
  TwoLevelState st = initial;
  if (n == 0) {
    tr.final_state = st;
    return tr;
  }
  const double h = cfg.tau_final / static_cast<double>(n);
  std::vector<detail::Local2x2> half(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    half[j] = detail::local_propagator(0.5 * omega * std::sin(g.xi(j)), 0.5 * gamma, 0.5 * h);
  }
  std::vector<cplx> kin(g.size());
  for (std::size_t m = 0; m < g.size(); ++m) kin[m] = std::polar(1.0, -g.kappa(m) * g.kappa(m) * h);
  Spectral fft(g.size());

  auto couple = [&]() {
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto& u = half[j];
      const cplx a = st.ground[j];
      const cplx b = st.excited[j];
      st.ground[j] = u.m00 * a + u.m01 * b;
      st.excited[j] = u.m01 * a + u.m11 * b;
    }
  };
  auto kinetic = [&](std::vector<cplx>& a) {
    fft.forward_inplace(a);
    for (std::size_t m = 0; m < a.size(); ++m) a[m] *= kin[m];
    fft.inverse_inplace(a);
  };

  for (long k = 1; k <= n; ++k) {
    couple();
    if (opt.kinetic) {
      kinetic(st.ground);
      kinetic(st.excited);
    }
    couple();
    st.tau = initial.tau + h * static_cast<double>(k);
    detail::check_finite(record(st), k);
    if (cfg.observer_stride > 0 && k % cfg.observer_stride == 0) tr.snapshots.push_back(st);
  }
  tr.final_state = std::move(st);
  return tr;
}

}  // namespace chisel
