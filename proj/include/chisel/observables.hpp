#pragma once

// Far-field observables: momentum spectra, diffraction orders, the thin
// probing grating and fringe phase extraction.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chisel/core.hpp"
#include "chisel/propagator.hpp"

namespace chisel {

/// Unitary momentum-space representation of a state.
///
/// amplitudes[m] = sqrt(dxi / M) sum_j psi_j exp(-i kappa_m xi_j), so the sum of
/// |amplitudes|^2 equals the discrete position-space norm. `kappa` includes the
/// state's quasimomentum and is in FFT order.
struct MomentumSpectrum {
  std::vector<double> kappa;
  std::vector<cplx> amplitudes;
  double rms_width = 0.0;

  double total_weight() const {
    double acc = 0.0;
    for (const auto& a : amplitudes) acc += std::norm(a);
    return acc;
  }
};

inline MomentumSpectrum momentum_spectrum(const WaveState& st) {
  const Grid& g = st.grid;
  const std::size_t n = g.size();
  MomentumSpectrum out;
  out.kappa.resize(n);
  out.amplitudes.resize(n);
  Spectral fft(n);
  fft.forward(st.amplitudes, out.amplitudes);
  const double scale = std::sqrt(g.dxi() / static_cast<double>(n));
  const double xi0 = g.xi(0);
  double w = 0.0, mean = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double k = g.kappa(m);
    out.amplitudes[m] *= scale * std::polar(1.0, -k * xi0);
    out.kappa[m] = k + st.quasimomentum;
    const double p = std::norm(out.amplitudes[m]);
    w += p;
    mean += p * out.kappa[m];
  }
  if (w > 0.0) {
    mean /= w;
    double var = 0.0;
    for (std::size_t m = 0; m < n; ++m) var += std::norm(out.amplitudes[m]) * (out.kappa[m] - mean) * (out.kappa[m] - mean);
    out.rms_width = std::sqrt(var / w);
  }
  return out;
}

/// Inverse of momentum_spectrum (same grid, same quasimomentum).
inline WaveState state_from_spectrum(const Grid& g, std::span<const cplx> amplitudes, double quasimomentum = 0.0) {
  if (amplitudes.size() != g.size()) throw ShapeError("spectrum length does not match the grid");
  const std::size_t n = g.size();
  const double scale = 1.0 / std::sqrt(g.dxi() / static_cast<double>(n));
  const double xi0 = g.xi(0);
  std::vector<cplx> tmp(n);
  for (std::size_t m = 0; m < n; ++m) tmp[m] = amplitudes[m] * scale * std::polar(1.0, g.kappa(m) * xi0);
  WaveState st;
  st.grid = g;
  st.quasimomentum = quasimomentum;
  st.amplitudes.resize(n);
  Spectral fft(n);
  fft.inverse(tmp, st.amplitudes);
  return st;
}

enum class Normalization { raw, normalized };
enum class EfficiencyMethod { comb_bins, half_order_windows };

/// Orders n in [-n_max, n_max]; index i holds order i - n_max.
struct DiffractionTable {
  int n_max = 0;
  std::vector<int> orders;
  std::vector<cplx> amplitudes;
  std::vector<double> efficiencies;
  Normalization mode = Normalization::normalized;
  double off_comb_fraction = 0.0;
  std::vector<std::string> warnings;

  std::size_t index(int n) const {
    if (std::abs(n) > n_max) throw ConfigError("order " + std::to_string(n) + " not in table");
    return static_cast<std::size_t>(n + n_max);
  }
  cplx amplitude(int n) const { return amplitudes[index(n)]; }
  double efficiency(int n) const { return efficiencies[index(n)]; }
};

inline constexpr double kOffCombThreshold = 1e-10;

/// Diffraction orders read at kappa = 2n (+ quasimomentum).
///
/// Raw efficiencies are relative to the initial flux (they include absorption);
/// normalized ones divide by the sum over the reported orders.
inline DiffractionTable diffraction_amplitudes(const WaveState& st, int n_max,
                                               Normalization mode = Normalization::normalized,
                                               EfficiencyMethod method = EfficiencyMethod::comb_bins) {
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
  const Grid& g = st.grid;
  const auto spec = momentum_spectrum(st);
  const double flux = std::exp(st.log_scale) / st.reference_norm;
  const double amp_scale = std::sqrt(flux);

  DiffractionTable t;
  t.n_max = n_max;
  t.mode = mode;
  const std::size_t count = 2 * static_cast<std::size_t>(n_max) + 1;
  t.orders.resize(count);
  t.amplitudes.resize(count);
  t.efficiencies.assign(count, 0.0);

  const double total = spec.total_weight();
  double on_comb = 0.0;
  for (int n = -n_max; n <= n_max; ++n) {
    const auto i = t.index(n);
    t.orders[i] = n;
    const auto bin = g.order_bin(n);
    t.amplitudes[i] = spec.amplitudes[bin] * amp_scale;
    on_comb += std::norm(spec.amplitudes[bin]);
    if (method == EfficiencyMethod::comb_bins) t.efficiencies[i] = std::norm(spec.amplitudes[bin]) * flux;
  }
  if (method == EfficiencyMethod::half_order_windows) {
    // Bands [2n - 1, 2n + 1) around each order in the periodic frame.
    for (std::size_t m = 0; m < spec.kappa.size(); ++m) {
      const double k = g.kappa(m);
      const int n = static_cast<int>(std::floor((k + 1.0) / 2.0));
      if (std::abs(n) <= n_max) t.efficiencies[t.index(n)] += std::norm(spec.amplitudes[m]) * flux;
    }
  }
  t.off_comb_fraction = total > 0.0 ? std::max(0.0, 1.0 - on_comb / total) : 0.0;
  if (method == EfficiencyMethod::comb_bins && g.periods() > 1 && t.off_comb_fraction > kOffCombThreshold) {
    t.warnings.push_back("off-comb leakage " + std::to_string(t.off_comb_fraction) +
                         " of the norm: state is not period-pi periodic (nonzero quasimomentum?)");
  }
  if (mode == Normalization::normalized) {
    double sum = 0.0;
    for (double e : t.efficiencies) sum += e;
    if (sum > 0.0) {
      for (auto& e : t.efficiencies) e /= sum;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Thin probing grating.

/// Transmission t(xi) = exp(i eta_c [1 + cos(2 xi - phi_s)]).
///
/// Im(eta_c) >= 0 keeps |t| <= 1. With j_max >= 0 only the Fourier components
/// |j| <= j_max of t are applied.
struct ProbeSpec {
  cplx eta_c{0.0, 0.0};
  double phi_s = 0.0;
  int j_max = -1;
};

inline void validate_probe(const ProbeSpec& p) {
  if (!(std::imag(p.eta_c) >= 0.0)) throw ConfigError("probe needs Im(eta_c) >= 0 (absorption cannot amplify)");
  if (!std::isfinite(std::real(p.eta_c)) || !std::isfinite(std::imag(p.eta_c)) || !std::isfinite(p.phi_s)) {
    throw ConfigError("probe parameters must be finite");
  }
}

/// Fourier coefficients g_j of exp(i eta (1 + cos theta)) = sum_j g_j e^{i j theta},
/// for j = -j_max..j_max (index j + j_max).
inline std::vector<cplx> probe_coefficients(cplx eta_c, int j_max) {
  if (j_max < 0) throw ConfigError("j_max must be >= 0");
  constexpr std::size_t samples = 256;
  if (static_cast<std::size_t>(j_max) >= samples / 2) throw ConfigError("j_max too large");
  std::vector<cplx> t(samples), c(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double th = 2.0 * pi * static_cast<double>(k) / samples;
    t[k] = std::exp(I * eta_c * (1.0 + std::cos(th)));
  }
  Spectral fft(samples);
  fft.forward(t, c);
  std::vector<cplx> g(2 * static_cast<std::size_t>(j_max) + 1);
  for (int j = -j_max; j <= j_max; ++j) {
    const std::size_t bin = static_cast<std::size_t>((j + static_cast<int>(samples)) % static_cast<int>(samples));
    g[static_cast<std::size_t>(j + j_max)] = c[bin] / static_cast<double>(samples);
  }
  return g;
}

inline std::vector<cplx> probe_transmission(const ProbeSpec& p, const Grid& g) {
  validate_probe(p);
  std::vector<cplx> t(g.size());
  if (p.j_max < 0) {
    for (std::size_t j = 0; j < g.size(); ++j) t[j] = std::exp(I * p.eta_c * (1.0 + std::cos(2.0 * g.xi(j) - p.phi_s)));
  } else {
    const auto c = probe_coefficients(p.eta_c, p.j_max);
    for (std::size_t j = 0; j < g.size(); ++j) {
      cplx acc{0.0, 0.0};
      for (int q = -p.j_max; q <= p.j_max; ++q) {
        acc += c[static_cast<std::size_t>(q + p.j_max)] * std::polar(1.0, q * (2.0 * g.xi(j) - p.phi_s));
      }
      t[j] = acc;
    }
  }
  return t;
}

inline WaveState apply_probe(const WaveState& st, const ProbeSpec& p) {
  const auto t = probe_transmission(p, st.grid);
  WaveState out = st;
  for (std::size_t j = 0; j < t.size(); ++j) out.amplitudes[j] *= t[j];
  return out;
}

// ---------------------------------------------------------------------------
// Fringes.

struct FringeFit {
  double offset = 0.0;     // A
  double amplitude = 0.0;  // B >= 0
  double theta = 0.0;      // in (-pi, pi]
  double sigma_theta = 0.0;
};

/// Intensity in one output order as a function of the probe position phi_s.
struct Fringe {
  int order = 0;
  std::vector<double> phi_s;
  std::vector<double> intensity;
  std::optional<FringeFit> fit;
};

inline void check_fringe_sampling(std::span<const double> phi) {
  if (phi.size() < 8) throw ConfigError("fringe scan needs at least 8 phi_s samples");
  const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
  const double span = *hi - *lo;
  const double coverage = span + span / static_cast<double>(phi.size() - 1);
  if (coverage < 2.0 * pi * (1.0 - 1e-9)) throw ConfigError("phi_s samples must cover a full 2 pi period");
}

inline std::vector<double> uniform_phases(int steps, double origin = 0.0) {
  std::vector<double> out(static_cast<std::size_t>(std::max(steps, 0)));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = origin + 2.0 * pi * static_cast<double>(k) / steps;
  return out;
}

/// Raw efficiency of `order` after the probe, for every phi_s.
inline Fringe fringe_scan(const WaveState& st, ProbeSpec probe, int order, std::span<const double> phi_s) {
  check_fringe_sampling(phi_s);
  validate_probe(probe);
  Fringe f;
  f.order = order;
  f.phi_s.assign(phi_s.begin(), phi_s.end());
  f.intensity.reserve(phi_s.size());
  const int n_max = std::abs(order);
  for (double ph : phi_s) {
    probe.phi_s = ph;
    const auto tab = diffraction_amplitudes(apply_probe(st, probe), n_max, Normalization::raw);
    f.intensity.push_back(tab.efficiency(order));
  }
  return f;
}

/// Linear least squares of I = A + C cos(phi) + S sin(phi); B = |(C, S)|, theta = atan2(S, C).
inline FringeFit fit_fringe_phase(const Fringe& f) {
  check_fringe_sampling(f.phi_s);
  if (f.intensity.size() != f.phi_s.size()) throw ShapeError("fringe intensity/phase length mismatch");
  const auto n = static_cast<Eigen::Index>(f.phi_s.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ph = f.phi_s[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    X(i, 1) = std::cos(ph);
    X(i, 2) = std::sin(ph);
    y(i) = f.intensity[static_cast<std::size_t>(i)];
  }
  const Eigen::Matrix3d xtx = X.transpose() * X;
  const Eigen::Vector3d beta = xtx.ldlt().solve(X.transpose() * y);
  const double rss = (y - X * beta).squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - 3);
  const Eigen::Matrix3d cov = sigma2 * xtx.inverse();

  const double c = beta(1), s = beta(2);
  const double b = std::hypot(c, s);
  const double scale = std::abs(beta(0)) + y.cwiseAbs().maxCoeff();
  const double var_b = b > 0.0 ? (c * c * cov(1, 1) + 2 * c * s * cov(1, 2) + s * s * cov(2, 2)) / (b * b) : 0.0;
  if (!(b > 1e-9 * scale) || b <= 3.0 * std::sqrt(std::max(var_b, 0.0))) {
    throw NoFringeError("fringe amplitude is statistically indistinguishable from zero");
  }
  FringeFit fit;
  fit.offset = beta(0);
  fit.amplitude = b;
  fit.theta = std::atan2(s, c);
  if (fit.theta <= -pi) fit.theta += 2.0 * pi;
  const double b4 = b * b * b * b;
  const double var_t = (s * s * cov(1, 1) - 2 * c * s * cov(1, 2) + c * c * cov(2, 2)) / b4;
  fit.sigma_theta = std::sqrt(std::max(var_t, 0.0));
  return fit;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

struct ProtocolResult {
  FringeFit long_fit;
  FringeFit ref_fit;
  double difference = 0.0;  // wrapped theta_long - theta_ref
  double magnitude = 0.0;   // |difference|, estimates |phi(2) - phi(1)| = 3 |phi2| at order 3
  double sigma = 0.0;
};

/// Differential fringe phase between a long-interaction and a reference state.
///
/// Subtracting the reference cancels the probe's own offset phase.
inline ProtocolResult phase_protocol_states(const WaveState& long_state, const WaveState& ref_state,
                                            const ProbeSpec& probe, int order, std::span<const double> phi_s) {
  ProtocolResult r;
  r.long_fit = fit_fringe_phase(fringe_scan(long_state, probe, order, phi_s));
  r.ref_fit = fit_fringe_phase(fringe_scan(ref_state, probe, order, phi_s));
  r.difference = wrap_angle(r.long_fit.theta - r.ref_fit.theta);
  r.magnitude = std::abs(r.difference);
  r.sigma = std::hypot(r.long_fit.sigma_theta, r.ref_fit.sigma_theta);
  return r;
}

// ---------------------------------------------------------------------------
// Profile fits around xi = 0.

namespace detail {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

inline Line least_squares_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("line fit needs >= 2 matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DataError("degenerate abscissae in line fit");
  const double slope = (n * sxy - sx * sy) / den;
  return {slope, (sy - slope * sx) / n};
}

}  // namespace detail

/// Gaussian width w of |phi|^2 ~ exp(-xi^2 / w^2), fitted on |xi| <= half_width.
inline double fit_gaussian_width(std::span<const cplx> a, const Grid& g, double half_width) {
  std::vector<double> x, y;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double xi = g.xi(j);
    if (std::abs(xi) <= half_width && std::norm(a[j]) > 0.0) {
      x.push_back(xi * xi);
      y.push_back(std::log(std::norm(a[j])));
    }
  }
  const auto line = detail::least_squares_line(x, y);
  if (!(line.slope < 0.0)) throw DataError("profile is not peaked at xi = 0");
  return 1.0 / std::sqrt(-line.slope);
}

/// Coefficient c of arg(phi) = arg(phi(0)) + c xi^2 on |xi| <= half_width.
///
/// The phase is unwrapped outward from the sample nearest xi = 0.
inline double fit_quadratic_phase(std::span<const cplx> a, const Grid& g, double half_width) {
  const std::size_t n = a.size();
  std::size_t centre = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(g.xi(j)) < std::abs(g.xi(centre))) centre = j;
  }
  std::vector<double> phase(n, 0.0);
  phase[centre] = 0.0;
  for (std::size_t j = centre + 1; j < n; ++j) {
    phase[j] = phase[j - 1] + std::arg(a[j] * std::conj(a[j - 1]));
  }
  for (std::size_t j = centre; j-- > 0;) {
    phase[j] = phase[j + 1] + std::arg(a[j] * std::conj(a[j + 1]));
  }
  std::vector<double> x, y;
  for (std::size_t j = 0; j < n; ++j) {
    const double xi = g.xi(j);
    if (std::abs(xi) <= half_width) {
      x.push_back(xi * xi);
      y.push_back(phase[j]);
    }
  }
  return detail::least_squares_line(x, y).slope;
}

}  // namespace chisel
