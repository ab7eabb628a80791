#pragma once

// Experiment-level pipelines: interaction-length sweeps, the z0 crossing
// estimator, velocity averaging, the interferometer protocol and power-law
// scaling sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "chisel/analytic.hpp"
#include "chisel/core.hpp"
#include "chisel/eigenmodes.hpp"
#include "chisel/observables.hpp"
#include "chisel/propagator.hpp"

namespace chisel::harness {

// ---------------------------------------------------------------------------
// Task pool. Results are stored by task index so the merge does not depend on
// scheduling; CHISEL_THREADS caps the worker count.

inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CHISEL_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

template <class Fn>
auto parallel_map(std::size_t count, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  if (error) std::rethrow_exception(error);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Beam kinematics.

inline constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))

/// Constants needed to turn interaction lengths into dimensionless times.
struct Beam {
  double linewidth = 0.0;         // Gamma (rad/s)
  double recoil_frequency = 0.0;  // omega_r (rad/s)
  double wavenumber = 0.0;        // k (1/m)
  double velocity = 0.0;          // v (m/s)

  double recoil_over_gamma() const { return recoil_frequency / linewidth; }
  /// hbar k / M = 2 omega_r / k.
  double recoil_velocity() const { return 2.0 * recoil_frequency / wavenumber; }
  double tau_of(double dz_um, double v) const { return recoil_frequency * dz_um * 1e-6 / v; }
  double tau_of(double dz_um) const { return tau_of(dz_um, velocity); }

  void validate() const {
    if (!(linewidth > 0.0) || !(recoil_frequency > 0.0) || !(wavenumber > 0.0)) {
      throw ParameterError("beam needs positive Gamma, omega_r and k");
    }
    if (!(velocity > 0.0)) throw ParameterError("longitudinal velocity must be positive");
  }
};

struct VelocityAveraging {
  int samples = 1;
  double dv_longitudinal = 0.0;  // FWHM (m/s)
  double dv_transverse = 0.0;    // FWHM (m/s)
  std::uint64_t seed = 0;
};

/// One Monte-Carlo velocity class.
struct VelocityClass {
  double velocity = 0.0;       // longitudinal (m/s)
  double quasimomentum = 0.0;  // transverse momentum in units of hbar k, wrapped into (-1, 1]
  double weight = 1.0;
};

inline double wrap_quasimomentum(double q) {
  double r = std::remainder(q, 2.0);
  if (r <= -1.0) r += 2.0;
  return r;
}

/// Gaussian draws with the configured FWHMs. One sample with zero spreads
/// reproduces the unaveraged beam exactly.
inline std::vector<VelocityClass> draw_velocity_classes(const VelocityAveraging& avg, const Beam& beam,
                                                        std::vector<std::string>* warnings = nullptr) {
  if (avg.samples < 1) throw ConfigError("velocity averaging needs samples >= 1");
  if (!(avg.dv_longitudinal >= 0.0) || !(avg.dv_transverse >= 0.0)) throw ConfigError("velocity spreads must be >= 0");
  std::mt19937_64 rng(avg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sl = avg.dv_longitudinal * kFwhmToSigma;
  const double st = avg.dv_transverse * kFwhmToSigma;
  const double vrec = beam.recoil_velocity();
  std::vector<VelocityClass> out;
  bool wrapped = false;
  for (int i = 0; i < avg.samples; ++i) {
    VelocityClass c;
    const double zl = normal(rng);
    const double zt = normal(rng);
    c.velocity = beam.velocity + sl * zl;
    if (c.velocity < 0.1 * beam.velocity) c.velocity = 0.1 * beam.velocity;
    const double q = st * zt / vrec;
    c.quasimomentum = wrap_quasimomentum(q);
    wrapped = wrapped || std::abs(q) > 1.0;
    c.weight = 1.0 / avg.samples;
    out.push_back(c);
  }
  if (wrapped && warnings) warnings->push_back("transverse quasimomentum beyond the first Brillouin zone was wrapped");
  return out;
}

/// Weighted average of an intensity-like observable over velocity classes.
template <class Fn>
std::vector<double> weighted_average(std::span<const VelocityClass> classes, Fn&& observable) {
  const auto results = parallel_map(classes.size(), [&](std::size_t i) { return observable(classes[i]); });
  std::vector<double> acc;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (acc.empty()) acc.assign(r.size(), 0.0);
    if (r.size() != acc.size()) throw ShapeError("velocity classes returned observables of different shapes");
    for (std::size_t k = 0; k < r.size(); ++k) acc[k] += classes[i].weight * r[k];
  }
  return acc;
}

/// Monte-Carlo velocity average: intensities (not amplitudes) are averaged.
template <class Fn>
std::vector<double> velocity_average(const VelocityAveraging& avg, const Beam& beam, Fn&& observable,
                                     std::vector<std::string>* warnings = nullptr) {
  const auto classes = draw_velocity_classes(avg, beam, warnings);
  return weighted_average(std::span<const VelocityClass>(classes), std::forward<Fn>(observable));
}

// ---------------------------------------------------------------------------
// Stepping helpers.

/// Largest step satisfying the propagator guards with margin.
inline double auto_dtau(const Grid& g, double vmax, double q = 1.0) {
  const double km = g.kappa_max() + std::abs(q);
  double h = 0.4 / (km * km);
  if (vmax > 0.0) h = std::min(h, 0.08 / vmax);
  return h;
}

/// Propagates one state through a list of increasing times, calling `visit`
/// at each. Each segment uses step_count(segment, dtau) equal steps, so a
/// single target reproduces evolve() exactly.
template <class Visit>
void march(WaveState st, std::span<const double> V, std::span<const double> taus, double dtau, Visit&& visit) {
  std::optional<SplitStepper> stepper;
  double current_h = -1.0;
  long global_step = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double target = taus[i];
    if (target < st.tau - 1e-15) throw ConfigError("interaction times must be non-decreasing");
    const long n = step_count(target - st.tau, dtau);
    if (n > 0) {
      const double start = st.tau;
      const double h = (target - start) / static_cast<double>(n);
      if (!stepper || h != current_h) {
        stepper.emplace(st.grid, V, h, st.quasimomentum);
        current_h = h;
      }
      for (long k = 1; k <= n; ++k) {
        const double norm = stepper->step(st.amplitudes);
        detail::check_finite(norm, ++global_step);
      }
      st.tau = target;
    }
    visit(i, st);
  }
}

// ---------------------------------------------------------------------------
// Diffraction sweeps.

struct SweepConfig {
  Beam beam;
  std::vector<double> omega0_over_gamma;
  std::vector<double> dz_um;
  VelocityAveraging averaging;
  int n_max = 4;
  bool raman_nath = false;
  Grid grid{1, 128};
  double dtau = 0.0;  // 0 selects auto_dtau
  std::optional<double> s_override;  // bypasses Omega0 -> s (single-curve use)
};

struct EfficiencyCurve {
  double omega0_over_gamma = 0.0;
  double s = 0.0;
  int n_max = 0;
  std::vector<double> dz_um;
  std::vector<std::vector<double>> eta;  // [dz][order + n_max], normalized
  std::vector<double> survival;
  std::vector<std::vector<double>> eta_raman_nath;
  std::vector<double> survival_raman_nath;
  std::vector<std::string> warnings;

  std::vector<double> order_series(int n) const {
    std::vector<double> out;
    for (const auto& row : eta) out.push_back(row.at(static_cast<std::size_t>(n + n_max)));
    return out;
  }
};

inline void validate_sweep(const SweepConfig& cfg) {
  cfg.beam.validate();
  if (cfg.dz_um.empty()) throw ConfigError("sweep needs at least one interaction length");
  if (cfg.dz_um.front() < 0.0) throw ConfigError("interaction lengths must be >= 0");
  for (std::size_t i = 1; i < cfg.dz_um.size(); ++i) {
    if (!(cfg.dz_um[i] > cfg.dz_um[i - 1])) throw ConfigError("interaction lengths must be strictly increasing");
  }
  if (cfg.n_max < 0) throw ConfigError("n_max must be >= 0");
  if (!cfg.s_override && cfg.omega0_over_gamma.empty()) throw ConfigError("sweep needs at least one Omega0");
}

inline double s_for(const SweepConfig& cfg, double omega0_over_gamma) {
  if (cfg.s_override) return DimensionlessParams::from_s(*cfg.s_override).s;
  return reduce_params(omega0_over_gamma, cfg.beam.recoil_over_gamma()).s;
}

/// Raw efficiencies (orders -n_max..n_max) followed by survival, for every dz,
/// flattened row-major; used as the velocity-averaged observable.
inline std::vector<double> class_efficiency_rows(double s, const SweepConfig& cfg, const VelocityClass& vc,
                                                 bool raman_nath) {
  const Grid& g = cfg.grid;
  const auto V = sample_potential(SinusoidalImaginary{s}, g);
  WaveState st = make_initial_state(g);
  st.quasimomentum = vc.quasimomentum;
  const std::size_t width = 2 * static_cast<std::size_t>(cfg.n_max) + 2;
  std::vector<double> rows(cfg.dz_um.size() * width, 0.0);
  auto store = [&](std::size_t i, const WaveState& cur) {
    const auto tab = diffraction_amplitudes(cur, cfg.n_max, Normalization::raw);
    std::copy(tab.efficiencies.begin(), tab.efficiencies.end(), rows.begin() + static_cast<long>(i * width));
    rows[i * width + width - 1] = survival(cur);
  };
  std::vector<double> taus(cfg.dz_um.size());
  for (std::size_t i = 0; i < taus.size(); ++i) taus[i] = cfg.beam.tau_of(cfg.dz_um[i], vc.velocity);
  if (raman_nath) {
    for (std::size_t i = 0; i < taus.size(); ++i) store(i, raman_nath_evolve(st, V, taus[i]));
  } else {
    const double vmax = *std::max_element(V.begin(), V.end());
    const double h = cfg.dtau > 0.0 ? cfg.dtau : auto_dtau(g, vmax, vc.quasimomentum);
    march(st, V, taus, h, store);
  }
  return rows;
}

inline void unpack_rows(const std::vector<double>& rows, std::size_t count, int n_max,
                        std::vector<std::vector<double>>& eta, std::vector<double>& surv) {
  const std::size_t width = 2 * static_cast<std::size_t>(n_max) + 2;
  eta.assign(count, {});
  surv.assign(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> row(rows.begin() + static_cast<long>(i * width),
                            rows.begin() + static_cast<long>(i * width + width - 1));
    double sum = 0.0;
    for (double e : row) sum += e;
    if (sum > 0.0) {
      for (auto& e : row) e /= sum;
    }
    eta[i] = std::move(row);
    surv[i] = rows[i * width + width - 1];
  }
}

inline EfficiencyCurve diffraction_curve(const SweepConfig& cfg, double omega0_over_gamma) {
  validate_sweep(cfg);
  EfficiencyCurve c;
  c.omega0_over_gamma = omega0_over_gamma;
  c.s = s_for(cfg, omega0_over_gamma);
  c.n_max = cfg.n_max;
  c.dz_um = cfg.dz_um;
  check_resolution(c.s, cfg.grid);
  const auto classes = draw_velocity_classes(cfg.averaging, cfg.beam, &c.warnings);
  const auto full = weighted_average(std::span<const VelocityClass>(classes), [&](const VelocityClass& vc) {
    return class_efficiency_rows(c.s, cfg, vc, false);
  });
  unpack_rows(full, c.dz_um.size(), c.n_max, c.eta, c.survival);
  if (cfg.raman_nath) {
    const auto rn = weighted_average(std::span<const VelocityClass>(classes), [&](const VelocityClass& vc) {
      return class_efficiency_rows(c.s, cfg, vc, true);
    });
    unpack_rows(rn, c.dz_um.size(), c.n_max, c.eta_raman_nath, c.survival_raman_nath);
  }
  return c;
}

/// One efficiency curve per configured Omega0; all-or-nothing on failure.
inline std::vector<EfficiencyCurve> run_diffraction_sweep(const SweepConfig& cfg) {
  validate_sweep(cfg);
  if (cfg.s_override) return {diffraction_curve(cfg, cfg.omega0_over_gamma.empty() ? 0.0 : cfg.omega0_over_gamma.front())};
  return parallel_map(cfg.omega0_over_gamma.size(),
                      [&](std::size_t i) { return diffraction_curve(cfg, cfg.omega0_over_gamma[i]); });
}

// ---------------------------------------------------------------------------
// z0: crossing of the linear extrapolations of the initial decline and the plateau.

inline constexpr double kZ0FallFraction = 0.6;     // line A: points before 60% of the total fall
inline constexpr double kZ0PlateauFraction = 0.25;  // line B: final 25% of points
inline constexpr double kZ0PlateauCheck = 0.2;      // final 20% must vary by < 1%
inline constexpr double kZ0PlateauTolerance = 0.01;

struct Z0Result {
  double z0 = 0.0;
  double decline_slope = 0.0, decline_intercept = 0.0;
  double plateau_slope = 0.0, plateau_intercept = 0.0;
  std::size_t decline_points = 0, plateau_points = 0;
};

inline Z0Result extract_z0(std::span<const double> dz, std::span<const double> eta0) {
  if (dz.size() != eta0.size()) throw DataError("z0 curve abscissa/ordinate mismatch");
  const std::size_t n = dz.size();
  if (n < 8) throw RangeError("z0 extraction needs at least 8 points");
  const auto tail_start = static_cast<std::size_t>(std::floor((1.0 - kZ0PlateauCheck) * static_cast<double>(n)));
  const auto [tlo, thi] = std::minmax_element(eta0.begin() + static_cast<long>(tail_start), eta0.end());
  const double tail_mean =
      std::accumulate(eta0.begin() + static_cast<long>(tail_start), eta0.end(), 0.0) / static_cast<double>(n - tail_start);
  if (!(std::abs(tail_mean) > 0.0) || (*thi - *tlo) > kZ0PlateauTolerance * std::abs(tail_mean)) {
    throw RangeError("no plateau detected in the final 20% of the curve; extend the interaction-length range");
  }
  const auto b_start = static_cast<std::size_t>(std::floor((1.0 - kZ0PlateauFraction) * static_cast<double>(n)));
  const double level = std::accumulate(eta0.begin() + static_cast<long>(b_start), eta0.end(), 0.0) /
                       static_cast<double>(n - b_start);
  const double fall = eta0[0] - level;
  const double threshold = eta0[0] - kZ0FallFraction * fall;
  std::size_t a_end = 0;
  while (a_end < n && (fall >= 0 ? eta0[a_end] >= threshold : eta0[a_end] <= threshold)) ++a_end;
  if (a_end < 2) throw RangeError("initial decline is not resolved; refine the interaction-length grid");

  const auto a = detail::least_squares_line(dz.subspan(0, a_end), eta0.subspan(0, a_end));
  const auto b = detail::least_squares_line(dz.subspan(b_start), eta0.subspan(b_start));
  if (a.slope == b.slope) throw DataError("decline and plateau lines are parallel");
  Z0Result r;
  r.z0 = (b.intercept - a.intercept) / (a.slope - b.slope);
  r.decline_slope = a.slope;
  r.decline_intercept = a.intercept;
  r.plateau_slope = b.slope;
  r.plateau_intercept = b.intercept;
  r.decline_points = a_end;
  r.plateau_points = n - b_start;
  return r;
}

// The Rabi-frequency sweep of the z0 law covers 0.2..0.6 Gamma, a factor 3.
inline constexpr double kZ0SweepMinSpan = 3.0;

struct Z0Sweep {
  std::vector<double> omega0_over_gamma;
  std::vector<double> z0_um;
  std::vector<EfficiencyCurve> curves;
  ScalingFit fit;
};

/// z0 for each Omega0 in cfg and the log-log slope of z0 against Omega0.
inline Z0Sweep run_z0_sweep(const SweepConfig& cfg) {
  Z0Sweep out;
  out.curves = run_diffraction_sweep(cfg);
  for (const auto& c : out.curves) {
    out.omega0_over_gamma.push_back(c.omega0_over_gamma);
    const auto eta0 = c.order_series(0);
    out.z0_um.push_back(extract_z0(c.dz_um, eta0).z0);
  }
  if (out.omega0_over_gamma.size() >= 4) out.fit = fit_scaling(out.omega0_over_gamma, out.z0_um, -1.0, kZ0SweepMinSpan);
  return out;
}

// ---------------------------------------------------------------------------
// Interferometer protocol on simulated states.

struct ProtocolConfig {
  SweepConfig sweep;          // beam, grid, averaging; omega0 taken from `omega0_over_gamma`
  double omega0_over_gamma = 0.4;
  double dz_long_um = 450.0;
  double dz_ref_um = 50.0;
  ProbeSpec probe{cplx{0.0, 0.5}, 0.0, -1};
  int order = 3;
  int phi_steps = 64;
  double phi_origin = 0.0;
};

struct SimulatedProtocol {
  Fringe long_fringe;
  Fringe ref_fringe;
  ProtocolResult result;
  double s = 0.0;
  std::vector<std::string> warnings;
};

/// Velocity-averaged fringe at one interaction length.
inline Fringe simulated_fringe(const ProtocolConfig& pc, double s, double dz_um, std::span<const VelocityClass> classes) {
  const auto phis = uniform_phases(pc.phi_steps, pc.phi_origin);
  const Grid& g = pc.sweep.grid;
  const auto V = sample_potential(SinusoidalImaginary{s}, g);
  const auto intensity = weighted_average(classes, [&](const VelocityClass& vc) {
    WaveState st = make_initial_state(g);
    st.quasimomentum = vc.quasimomentum;
    const double tau = pc.sweep.beam.tau_of(dz_um, vc.velocity);
    const double vmax = *std::max_element(V.begin(), V.end());
    const double h = pc.sweep.dtau > 0.0 ? pc.sweep.dtau : auto_dtau(g, vmax, vc.quasimomentum);
    std::vector<double> result;
    const double taus[1] = {tau};
    march(st, V, taus, h, [&](std::size_t, const WaveState& cur) {
      result = fringe_scan(cur, pc.probe, pc.order, phis).intensity;
    });
    return result;
  });
  Fringe f;
  f.order = pc.order;
  f.phi_s = phis;
  f.intensity = intensity;
  return f;
}

/// |phi(2) - phi(1)| estimate from the order-3 fringes at dz_long and dz_ref.
inline SimulatedProtocol phase_protocol(const ProtocolConfig& pc) {
  pc.sweep.beam.validate();
  SimulatedProtocol out;
  out.s = s_for(pc.sweep, pc.omega0_over_gamma);
  check_resolution(out.s, pc.sweep.grid);
  const auto classes = draw_velocity_classes(pc.sweep.averaging, pc.sweep.beam, &out.warnings);
  const std::span<const VelocityClass> cs(classes);
  out.long_fringe = simulated_fringe(pc, out.s, pc.dz_long_um, cs);
  if (pc.dz_ref_um == pc.dz_long_um) {
    out.ref_fringe = out.long_fringe;
  } else {
    out.ref_fringe = simulated_fringe(pc, out.s, pc.dz_ref_um, cs);
  }
  auto& r = out.result;
  r.long_fit = fit_fringe_phase(out.long_fringe);
  r.ref_fit = fit_fringe_phase(out.ref_fringe);
  out.long_fringe.fit = r.long_fit;
  out.ref_fringe.fit = r.ref_fit;
  r.difference = wrap_angle(r.long_fit.theta - r.ref_fit.theta);
  r.magnitude = std::abs(r.difference);
  r.sigma = std::hypot(r.long_fit.sigma_theta, r.ref_fit.sigma_theta);
  return out;
}

// ---------------------------------------------------------------------------
// Power-law potentials: t0 from the plateau onset of the zeroth order, dx0 from the ground mode.

struct PowerLawSweepConfig {
  int n = 1;
  double q_over_k = 0.3;
  double recoil_over_gamma = 1.5e-3;
  std::vector<double> omega0_over_gamma{0.1, 0.2, 0.4, 0.8};
  Grid grid{8, 64};
  double dtau = 0.0;
  int time_samples = 160;
  double horizon = 12.0;  // time range in units of the unit-prefactor tau0 prediction
  double dx0_fraction = 0.5;
  // V saturates at cap / tau0. The cap tracks the packet time scale so the
  // sweep stays self-similar, and it bounds the stiffness at the cell edge.
  // Zero disables it.
  double potential_cap = 100.0;
};

struct PowerLawPoint {
  double omega0_over_gamma = 0.0;
  double s = 0.0;
  double t0 = 0.0;   // plateau onset, in tau = omega_r t units
  double t0_crossing = std::numeric_limits<double>::quiet_NaN();  // extract_z0 on the same curve
  double dx0 = 0.0;  // full width at dx0_fraction of peak density, in xi units
  cplx eigenvalue;
  std::vector<double> taus;
  std::vector<double> eta0;
};

/// First time after which the curve stays within `tolerance` (relative) of its
/// final value, interpolated linearly at the last excursion.
inline double plateau_onset(std::span<const double> t, std::span<const double> y, double tolerance = kZ0PlateauTolerance) {
  if (t.size() != y.size() || t.size() < 8) throw DataError("plateau onset needs >= 8 matching points");
  const double level = y.back();
  const double band = tolerance * std::abs(level);
  if (!(band > 0.0)) throw DataError("plateau level is zero");
  const auto tail_start = static_cast<std::size_t>(std::floor((1.0 - kZ0PlateauCheck) * static_cast<double>(y.size())));
  for (std::size_t i = tail_start; i < y.size(); ++i) {
    if (std::abs(y[i] - level) > band) throw RangeError("no plateau detected in the final 20% of the curve; extend the time range");
  }
  std::size_t i = y.size() - 1;
  while (i > 0 && std::abs(y[i - 1] - level) <= band) --i;
  if (i == 0) return t[0];
  const double a = std::abs(y[i - 1] - level) - band;
  const double b = std::abs(y[i] - level) - band;
  return t[i - 1] + (t[i] - t[i - 1]) * a / (a - b);
}

struct PowerLawSweep {
  std::vector<PowerLawPoint> points;
  ScalingFit t0_fit;
  ScalingFit dx0_fit;
};

/// Fraction of the norm in the kappa = 0 bin (the zeroth order of the cell array).
inline double zero_order_fraction(const WaveState& st) {
  const auto spec = momentum_spectrum(st);
  const double total = spec.total_weight();
  return total > 0.0 ? std::norm(spec.amplitudes[0]) / total : 0.0;
}

inline PowerLawPoint powerlaw_point(const PowerLawSweepConfig& cfg, double omega0_over_gamma) {
  PowerLawPoint p;
  p.omega0_over_gamma = omega0_over_gamma;
  p.s = reduce_params(omega0_over_gamma, cfg.recoil_over_gamma).s;
  const Grid& g = cfg.grid;
  const PotentialSpec spec = PowerLaw{cfg.n, cfg.q_over_k, p.s};
  auto V = sample_potential(spec, g);

  // Unit-prefactor time scale in xi units: balance 1/w^2 against 2 s (r w)^{2n}.
  const double coupling = 2.0 * p.s * std::pow(cfg.q_over_k, 2 * cfg.n);
  const double tau0 = std::pow(coupling, -1.0 / (cfg.n + 1.0));
  if (cfg.potential_cap > 0.0) {
    for (auto& v : V) v = std::min(v, cfg.potential_cap / tau0);
  }
  const double vmax = *std::max_element(V.begin(), V.end());
  const double h = cfg.dtau > 0.0 ? cfg.dtau : auto_dtau(g, vmax, 0.0);
  p.taus.resize(static_cast<std::size_t>(cfg.time_samples));
  for (std::size_t i = 0; i < p.taus.size(); ++i) {
    p.taus[i] = cfg.horizon * tau0 * static_cast<double>(i) / static_cast<double>(p.taus.size() - 1);
  }
  p.eta0.resize(p.taus.size());
  march(make_initial_state(g), V, p.taus, h, [&](std::size_t i, const WaveState& cur) { p.eta0[i] = zero_order_fraction(cur); });
  p.t0 = plateau_onset(p.taus, p.eta0);
  try {
    p.t0_crossing = extract_z0(p.taus, p.eta0).z0;
  } catch (const NumericalError&) {
  }

  GroundModeOptions opt;
  opt.dtau = h;
  opt.tol = 1e-9;
  opt.check_interval = std::max(0.05 * tau0, 10 * h);
  opt.max_tau = 400.0 * tau0;
  const auto mode = ground_mode(V, g, opt);
  p.eigenvalue = mode.eigenvalue;
  p.dx0 = density_width(mode.mode, g, cfg.dx0_fraction);
  return p;
}

inline PowerLawSweep run_powerlaw_sweep(const PowerLawSweepConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("power-law index must be >= 1");
  PowerLawSweep out;
  out.points = parallel_map(cfg.omega0_over_gamma.size(),
                            [&](std::size_t i) { return powerlaw_point(cfg, cfg.omega0_over_gamma[i]); });
  std::vector<double> om, t0, dx;
  for (const auto& p : out.points) {
    om.push_back(p.omega0_over_gamma);
    t0.push_back(p.t0);
    dx.push_back(p.dx0);
  }
  const auto pred = analytic::powerlaw_scales(cfg.n, 1.0, 1.0);
  if (om.size() >= 4) {
    out.t0_fit = fit_scaling(om, t0, pred.t0_exponent);
    out.dx0_fit = fit_scaling(om, dx, pred.dx0_exponent);
  }
  return out;
}

}  // namespace chisel::harness
